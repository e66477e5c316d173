// =============================================================================
// marginal.hpp -- one-dimensional laws F_{g,x} and the two extreme quantile
// couplings between a pair of them.
//
// comonotone_msd(a, b)      = E[(Qa(U) - Qb(U))^2]
// countermonotone_msd(a, b) = E[(Qa(U) - Qb(1 - U))^2]
//
// with Q(u) = inf{y : F(y) >= u} and U uniform on (0,1).
// =============================================================================
#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <utility>
#include <vector>

namespace cfh {

struct NormalComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sd = 0.0;
};

class MarginalLaw {
public:
    enum class Kind { Normal, Discrete, Mixture, Empirical };

    static MarginalLaw normal(double mean, double variance);
    static MarginalLaw bernoulli(double p);
    static MarginalLaw discrete(std::vector<double> values, std::vector<double> probs);
    // Weighted normal components; components with sd == 0 become atoms. The
    // result collapses to Normal or Discrete when possible.
    static MarginalLaw mixture(std::vector<NormalComponent> components);
    // Sorted copy of the sample (stable, so ties keep draw order).
    static MarginalLaw empirical(std::vector<double> sample);

    Kind kind() const { return kind_; }
    double mean() const;
    double variance() const;
    double cdf(double y) const;       // P(Y <= y)
    double quantile(double u) const;  // inf{y : F(y) >= u}

    // Continuous components (Normal, Mixture) and atoms (Discrete, Mixture).
    const std::vector<NormalComponent>& components() const { return comps_; }
    const std::vector<double>& atom_values() const { return atom_values_; }
    const std::vector<double>& atom_probs() const { return atom_probs_; }
    const std::vector<double>& sample() const { return sample_; }

    // Canonical description; equal keys mean equal laws.
    std::vector<double> key() const;

    std::vector<double> draw(std::size_t n, std::mt19937_64& rng) const;

    // Q(Phi(z)) evaluated without losing precision in either tail.
    double quantile_z(double z) const;

    // Quantiles on the shared z grid used for smooth pairs (cached).
    const std::vector<double>& grid_quantiles() const;

private:
    Kind kind_ = Kind::Discrete;
    std::vector<NormalComponent> comps_;
    std::vector<double> atom_values_;
    std::vector<double> atom_probs_;
    std::vector<double> sample_;
    struct GridCache;
    std::shared_ptr<GridCache> cache_;
    void canonicalize();
};

double comonotone_msd(const MarginalLaw& a, const MarginalLaw& b);
double countermonotone_msd(const MarginalLaw& a, const MarginalLaw& b);

// Exact min and max of E[(A-B)^2] over all couplings of two discrete
// marginals, by linear programming over the transport polytope. Supports up
// to 12 points each; throws std::invalid_argument otherwise.
struct OracleBounds {
    double min = 0.0;
    double max = 0.0;
};

OracleBounds frechet_oracle(const MarginalLaw& a, const MarginalLaw& b);

// Dense simplex for min c'x subject to A x = b, x >= 0 (b may have any sign).
// Returns the optimal x; throws std::runtime_error when infeasible or unbounded.
std::vector<double> solve_standard_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                                      const std::vector<double>& c);

}  // namespace cfh
