// =============================================================================
// estimands.hpp -- heritability notions computed from a fully specified model.
//
// Counterfactual kinds (G' is the genotype in the counterfactual world, the
// environment is always shared):
//   unrelated   population mode: G' independent of G, observed X shared.
//               within_family mode: the whole family (parents, siblings and
//               every derived symbol) is redrawn; observed X and latent
//               symbols are shared.
//   fraternal   G' drawn from the same parents as G (within_family only).
//   adopted     G' drawn from an unrelated family while the stratum (parents,
//               siblings, observed X) stays fixed (within_family only).
// =============================================================================
#pragma once

#include "cfh/engine.hpp"
#include "cfh/plant.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfh {

enum class CounterfactualKind { Unrelated, Fraternal, Adopted };

std::string to_string(CounterfactualKind k);
CounterfactualKind parse_kind(const std::string& text);
// unrelated in population mode, fraternal in within_family mode
CounterfactualKind default_kind(FamilyMode mode);

Estimate xi(const Analysis& analysis, CounterfactualKind kind, std::size_t out = 0);
Estimate xi(const PhenotypeModel& model, CounterfactualKind kind, const EngineOptions& options = {});

// Cor(Y(G), Y(G')) from paired shared-environment evaluation; equals 1 - xi
// for the unrelated (population) and fraternal kinds.
Estimate potential_outcome_correlation(const Analysis& analysis, std::size_t out = 0);

Estimate broad_h2(const Analysis& analysis, std::size_t out = 0);
Estimate broad_h2(const PhenotypeModel& model, const EngineOptions& options = {});

// Best linear predictor of E(Y|G) in the dosages; minimum-norm coefficients
// when Cov(G) is singular.
Estimate narrow_h2(const Analysis& analysis, std::size_t out = 0);
Estimate narrow_h2(const PhenotypeModel& model, const EngineOptions& options = {});

struct MomentBounds {
    Estimate xi_l_prime;  // E[Var{E(Y|G,X)|X}] / Var(Y)
    Estimate xi_u_prime;  // E[Var(Y|X)] / Var(Y)
};

MomentBounds moment_bounds(const Analysis& analysis, std::size_t out = 0);
MomentBounds moment_bounds(const PhenotypeModel& model, const EngineOptions& options = {});

// Twins share parents, family symbols and observed symbols; latent symbols
// are independent. MZ twins share G, DZ twins draw G independently given the
// parents.
struct TwinQuantities {
    Estimate rho_mz;
    Estimate rho_dz;
    Estimate h2_twin;  // 2 (rho_MZ - rho_DZ)
};

TwinQuantities twin_quantities(const Analysis& analysis, std::size_t out = 0);
TwinQuantities twin_quantities(const PhenotypeModel& model, const EngineOptions& options = {});

// One-locus sibling model
//   Y1 = f_direct(g) + f_indirect(gs) + fam + e
// where gs is the co-sibling's dosage, fam ~ N(0, var_f) is shared by the
// siblings and e ~ N(0, var_e) is not. Both effect expressions are written
// in the symbol g.
struct SiblingModel {
    double p = 0.5;
    ExprPtr f_direct;
    ExprPtr f_indirect;
    double var_f = 0.0;
    double var_e = 1.0;

    PhenotypeModel to_model() const;
};

struct RdrQuantities {
    Estimate h2_rdr;  // Var(f_direct(G)) / Var(Y1)
    Estimate xi_fraternal;
    Estimate xi_adopted;
};

RdrQuantities rdr_quantities(const SiblingModel& model, const EngineOptions& options = {});

// Cov(Y(G)-Y(G'), Z(G)-Z(G')) / 2 sqrt(Var Y Var Z) under the mode's default
// kind. Both models must bind shared symbols identically.
Estimate genetic_correlation(const PhenotypeModel& model_y, const PhenotypeModel& model_z,
                             const EngineOptions& options = {});

// ── Report ──────────────────────────────────────────────────────────────────

class InconsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReportEntry {
    std::string name;
    Estimate estimate;
};

struct HeritabilityReport {
    std::vector<ReportEntry> entries;
    std::string digest;
    CounterfactualKind kind = CounterfactualKind::Unrelated;
    EngineClass engine_class = EngineClass::LinearGaussian;
    std::vector<std::string> warnings;

    const Estimate* find(const std::string& name) const;
    double value(const std::string& name) const;  // throws std::out_of_range
};

// Entries: narrow_h2, broad_H2, xi, xi_l_prime, xi_l, xi_u, xi_u_prime, and in
// within_family mode h2_twin, rho_MZ, rho_DZ, xi_adopted. Throws
// InconsistencyError when the bound chain or the range constraints fail by
// more than 4 standard errors.
HeritabilityReport report(const PhenotypeModel& model, const EngineOptions& options = {},
                          std::optional<CounterfactualKind> kind = std::nullopt);

}  // namespace cfh
