// =============================================================================
// moments.hpp -- conditional laws, total-variance decompositions and
// shared-environment difference moments of a phenotype model.
//
// A stratum is a partial assignment of genotype, parental ("g1f"), sibling,
// observed or derived symbols; everything else is integrated out.
// =============================================================================
#pragma once

#include "cfh/engine.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfh {

using StratumAssignment = std::map<std::string, double>;

// Raised when Var(Y) is zero; every ratio estimand is undefined then.
class DegeneratePhenotype : public std::domain_error {
public:
    DegeneratePhenotype() : std::domain_error("degenerate phenotype: Var(Y) = 0, heritability is undefined") {}
};

struct ConditionalLaw {
    double mean = 0.0;
    double variance = 0.0;
    // Full law when it is available in closed form (normal, bernoulli,
    // normal mixture or discrete).
    std::optional<MarginalLaw> exact_form;
    Method method = Method::Analytic;
    double se_mean = 0.0;
    double se_variance = 0.0;
    std::uint64_t seed = 0;  // Monte Carlo only
    std::size_t n = 0;       // Monte Carlo only
};

ConditionalLaw cond_moments(const PhenotypeModel& model, const StratumAssignment& stratum,
                            const EngineOptions& options = {});

// X below is the engine's stratum: observed symbols, plus parental and
// sibling genotypes in within_family mode.
struct VarianceDecomposition {
    Estimate var_y;             // Var(Y)
    Estimate var_mean_x;        // Var(E[Y|X])
    Estimate mean_var_x;        // E[Var(Y|X)]
    Estimate mean_var_gx;       // E[Var(Y|G,X)]
    Estimate mean_var_mean_gx;  // E[Var{E(Y|G,X)|X}]
};

VarianceDecomposition variance_decomposition(const Analysis& analysis, std::size_t out = 0);
VarianceDecomposition variance_decomposition(const PhenotypeModel& model, const EngineOptions& options = {});

// The five components above, in that order, for one backend.
std::vector<double> decomposition_components(const World& world, const MomentBackend& be, std::size_t out);

// Throws DegeneratePhenotype when v is zero relative to the scale of Y.
void require_positive_variance(double var_y, double second_moment);

// Law of D = Y(g) - Y(g') with every environment symbol shared between the
// two potential outcomes. g and g' assign every genotype symbol.
ConditionalLaw diff_moments(const PhenotypeModel& model, const StratumAssignment& g, const StratumAssignment& g_prime,
                            const StratumAssignment& stratum = {}, const EngineOptions& options = {});

// ── Simulation ──────────────────────────────────────────────────────────────

enum class Coupling {
    None,           // Y' uses fresh latent and family draws
    SharedEnvPair,  // Y' uses exactly the environment draws of Y
};

// Column-major sample. G' is drawn given the parents in within_family mode
// and from the marginal otherwise. X holds observed, derived and sibling
// symbols; observed symbols are shared by Y and Y' under both couplings.
struct SampleTable {
    std::vector<std::string> parent_names;
    std::vector<std::string> genotype_names;
    std::vector<std::string> x_names;
    std::vector<std::vector<double>> parents;
    std::vector<std::vector<double>> g;
    std::vector<std::vector<double>> g_prime;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<double> y_prime;
    std::size_t rows() const { return y.size(); }
};

// Rows are generated in chunks of 65536, each from its own stream derived
// from (seed, chunk index), so the table does not depend on `threads`.
SampleTable mc_sample(const PhenotypeModel& model, std::size_t n, std::uint64_t seed,
                      Coupling coupling = Coupling::SharedEnvPair, std::size_t threads = 0);

// Writes x..., g..., y columns with a header row.
void write_sample_csv(const SampleTable& table, const std::string& path);

}  // namespace cfh
