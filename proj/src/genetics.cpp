#include "cfh/genetics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfh {

AlleleFrequency::AlleleFrequency(double p) : p_(p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("allele frequency must lie in [0,1], got " + std::to_string(p));
}

GenotypeDistribution::GenotypeDistribution(std::vector<double> support, std::vector<double> probs) {
    if (support.size() != probs.size() || support.empty())
        throw std::invalid_argument("genotype distribution: support and probs must be non-empty and equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (!(probs[i] >= 0.0) || !std::isfinite(support[i]))
            throw std::invalid_argument("genotype distribution: invalid value or negative probability");
        if (i > 0 && !(support[i] > support[i - 1]))
            throw std::invalid_argument("genotype distribution: support must be strictly increasing");
        total += probs[i];
    }
    if (std::abs(total - 1.0) > kMassTolerance)
        throw std::invalid_argument("genotype distribution: probabilities must sum to 1");
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (probs[i] > 0.0) {
            support_.push_back(support[i]);
            probs_.push_back(probs[i]);
        }
    }
}

GenotypeDistribution GenotypeDistribution::point(double value) { return GenotypeDistribution({value}, {1.0}); }

double GenotypeDistribution::prob(double value) const {
    for (std::size_t i = 0; i < support_.size(); ++i)
        if (support_[i] == value) return probs_[i];
    return 0.0;
}

double GenotypeDistribution::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) m += probs_[i] * support_[i];
    return m;
}

double GenotypeDistribution::variance() const {
    double m = mean(), v = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) v += probs_[i] * (support_[i] - m) * (support_[i] - m);
    return v;
}

GenotypeDistribution hwe_dist(AlleleFrequency freq) {
    double p = freq.p(), q = freq.q();
    return GenotypeDistribution({0.0, 1.0, 2.0}, {q * q, 2.0 * p * q, p * p});
}

namespace {

// Probability that a parent of the given dosage transmits allele A.
double transmit_prob(int g) { return 0.5 * g; }

void check_dosage(int g) {
    if (g < 0 || g > 2) throw std::domain_error("parental dosage must be 0, 1 or 2, got " + std::to_string(g));
}

std::array<double, 3> child_probs(int g_m, int g_f) {
    double tm = transmit_prob(g_m), tf = transmit_prob(g_f);
    return {(1.0 - tm) * (1.0 - tf), tm * (1.0 - tf) + (1.0 - tm) * tf, tm * tf};
}

}  // namespace

GenotypeDistribution mendelian_child_dist(int g_m, int g_f) {
    check_dosage(g_m);
    check_dosage(g_f);
    auto pr = child_probs(g_m, g_f);
    return GenotypeDistribution({0.0, 1.0, 2.0}, {pr[0], pr[1], pr[2]});
}

std::vector<FamilyConfiguration> enumerate_family_space(std::size_t n_loci, AlleleFrequency freq) {
    if (n_loci == 0) throw std::invalid_argument("enumerate_family_space: need at least one locus");

    // Per-locus configurations (father, mother, child, sibling, weight).
    struct LocusConfig {
        int f, m, c, s;
        double w;
    };
    std::vector<LocusConfig> locus;
    GenotypeDistribution parent = hwe_dist(freq);
    for (std::size_t i = 0; i < parent.size(); ++i) {
        for (std::size_t j = 0; j < parent.size(); ++j) {
            int f = static_cast<int>(parent.support()[i]);
            int m = static_cast<int>(parent.support()[j]);
            auto cp = child_probs(m, f);
            for (int c = 0; c < 3; ++c) {
                for (int s = 0; s < 3; ++s) {
                    double w = parent.probs()[i] * parent.probs()[j] * cp[static_cast<std::size_t>(c)] *
                               cp[static_cast<std::size_t>(s)];
                    if (w > 0.0) locus.push_back({f, m, c, s, w});
                }
            }
        }
    }

    std::vector<FamilyConfiguration> out(1);
    out[0].weight = 1.0;
    for (std::size_t l = 0; l < n_loci; ++l) {
        std::vector<FamilyConfiguration> next;
        next.reserve(out.size() * locus.size());
        for (const auto& base : out) {
            for (const auto& lc : locus) {
                FamilyConfiguration fc = base;
                fc.parents.push_back({lc.f, lc.m});
                fc.child.push_back(lc.c);
                fc.sibling.push_back(lc.s);
                fc.weight *= lc.w;
                next.push_back(std::move(fc));
            }
        }
        out.swap(next);
    }
    return out;
}

double SibPairJoint::covariance(const std::function<double(int)>& f) const {
    double m1 = 0.0, m2 = 0.0, m12 = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double w = prob[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (w == 0.0) continue;
            m1 += w * f(i);
            m2 += w * f(j);
            m12 += w * f(i) * f(j);
        }
    }
    return m12 - m1 * m2;
}

SibPairJoint sib_pair_joint(AlleleFrequency freq) {
    SibPairJoint joint;
    for (const auto& fc : enumerate_family_space(1, freq))
        joint.prob[static_cast<std::size_t>(fc.child[0])][static_cast<std::size_t>(fc.sibling[0])] += fc.weight;
    return joint;
}

double OneLocusEffects::operator()(int dosage) const {
    switch (dosage) {
        case 0: return m - a;
        case 1: return m + d;
        case 2: return m + a;
        default: throw std::domain_error("dosage must be 0, 1 or 2");
    }
}

double additive_variance(AlleleFrequency freq, const OneLocusEffects& f) {
    double p = freq.p(), q = freq.q();
    double alpha = f.a + (q - p) * f.d;
    return 2.0 * p * q * alpha * alpha;
}

double dominance_variance(AlleleFrequency freq, const OneLocusEffects& f) {
    double p = freq.p(), q = freq.q();
    double t = 2.0 * p * q * f.d;
    return t * t;
}

}  // namespace cfh
