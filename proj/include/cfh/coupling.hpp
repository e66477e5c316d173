// =============================================================================
// coupling.hpp -- quantile-coupling bounds on counterfactual heritability.
//
//   xi_l = sum_x sum_{g,g'} P(x) P(g|x) P(g'|x) E[(F_{g,x}^-1(U) - F_{g',x}^-1(U))^2] / 2Var(Y)
//   xi_u = same with F_{g',x}^-1(1 - U), over pairs g != g' only
//
// Pairs with g = g' contribute nothing to xi_u. Counting the diagonal would
// turn the three standard normal example's 4/3 into 2.
// =============================================================================
#pragma once

#include "cfh/engine.hpp"
#include "cfh/marginal.hpp"

#include <vector>

namespace cfh {

Estimate xi_l(const Analysis& analysis, std::size_t out = 0);
Estimate xi_u(const Analysis& analysis, std::size_t out = 0);

Estimate xi_l(const PhenotypeModel& model, const EngineOptions& options = {});
Estimate xi_u(const PhenotypeModel& model, const EngineOptions& options = {});

// Single-stratum forms: Y(g) ~ law_g with P(G = g) = weight_g and G' an
// independent copy of G. Var(Y) is the variance of the weighted mixture.
struct WeightedLaw {
    double weight = 0.0;
    MarginalLaw law;
};

double xi_l_from_laws(const std::vector<WeightedLaw>& laws);
double xi_u_from_laws(const std::vector<WeightedLaw>& laws);

}  // namespace cfh
