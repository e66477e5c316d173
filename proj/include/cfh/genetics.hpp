// =============================================================================
// genetics.hpp -- genotype laws under Hardy-Weinberg equilibrium, Mendelian
// transmission, and exact enumeration of parent/child configurations.
//
// Genotypes are dosage coded: number of copies of allele A (0, 1 or 2).
// Loci are unlinked and parental genotypes are drawn i.i.d. per locus.
// =============================================================================
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace cfh {

class AlleleFrequency {
public:
    explicit AlleleFrequency(double p);
    double p() const { return p_; }
    double q() const { return 1.0 - p_; }

private:
    double p_;
};

class GenotypeDistribution {
public:
    // Zero-probability entries are dropped; throws std::invalid_argument when
    // probabilities are negative, do not sum to one, or support is not
    // strictly increasing.
    GenotypeDistribution(std::vector<double> support, std::vector<double> probs);

    static GenotypeDistribution point(double value);

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }
    std::size_t size() const { return support_.size(); }
    double prob(double value) const;
    double mean() const;
    double variance() const;

private:
    std::vector<double> support_;
    std::vector<double> probs_;
};

inline constexpr double kMassTolerance = 1e-12;

GenotypeDistribution hwe_dist(AlleleFrequency freq);

// Child dosage law given the two parental dosages. Throws std::domain_error
// for dosages outside {0,1,2}.
GenotypeDistribution mendelian_child_dist(int g_m, int g_f);

// One enumerated family: parental dosages per locus, two children drawn
// independently given the parents, and the joint probability.
struct FamilyConfiguration {
    std::vector<std::array<int, 2>> parents;  // {father, mother} per locus
    std::vector<int> child;                   // G
    std::vector<int> sibling;                 // G'
    double weight = 0.0;
};

std::vector<FamilyConfiguration> enumerate_family_space(std::size_t n_loci, AlleleFrequency freq);

// Joint law of two full siblings' dosages at one locus; prob[i][j] = P(G1=i, G2=j).
struct SibPairJoint {
    std::array<std::array<double, 3>, 3> prob{};
    double covariance(const std::function<double(int)>& f) const;
};

SibPairJoint sib_pair_joint(AlleleFrequency freq);

// ── One-locus genetic values ────────────────────────────────────────────────
// f(AA) = m + a, f(Aa) = m + d, f(aa) = m - a, written on dosage g.
struct OneLocusEffects {
    double a = 0.0;
    double d = 0.0;
    double m = 0.0;
    double operator()(int dosage) const;
};

double additive_variance(AlleleFrequency freq, const OneLocusEffects& f);   // 2pq[a+(q-p)d]^2
double dominance_variance(AlleleFrequency freq, const OneLocusEffects& f);  // (2pqd)^2

}  // namespace cfh
