// =============================================================================
// plant.hpp -- entry-mean heritability for factorial breeding trials.
//
//   Y(g, x) = mu + alpha(g) + beta(x) + gamma(g, x) + E
//
// with n_g genotypes, n_x environments and n_r replications per (g, x). The
// entry mean is Ybar(g) = (1/n_x) sum_x Ybar(g, x). G and G' are uniform and
// independent; the plants' noise is shared by both potential outcomes.
//
// Design files are JSON:
//   {"mode": "fixed", "n_x": 2, "n_r": 2, "mu": 0,
//    "alpha": [1, -1], "beta": [0.5, -0.5], "gamma": [[0, 0], [0, 0]],
//    "sigma2_e": 1}
//   {"mode": "random", "n_x": 4, "n_r": 2, "sigma2_g": 1, "sigma2_x": 1,
//    "sigma2_gx": 1, "sigma2_e": 1}
// =============================================================================
#pragma once

#include "cfh/engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cfh {

enum class PlantMode { Fixed, Random };

struct PlantDesign {
    PlantMode mode = PlantMode::Random;
    std::size_t n_g = 0;  // fixed mode: alpha.size()
    std::size_t n_x = 1;
    std::size_t n_r = 1;
    double mu = 0.0;
    std::vector<double> alpha;               // fixed
    std::vector<double> beta;                // fixed
    std::vector<std::vector<double>> gamma;  // fixed, [g][x]
    double sigma2_g = 0.0;                   // random
    double sigma2_x = 0.0;                   // random
    double sigma2_gx = 0.0;                  // random
    double sigma2_e = 0.0;

    // Throws std::invalid_argument on shape errors, negative variances, or
    // (fixed mode) effects that violate the zero-sum constraints.
    void validate() const;

    // Variance components; in fixed mode computed from the effect tables
    // under uniform G and X.
    double var_g() const;
    double var_x() const;
    double var_gx() const;
};

PlantDesign parse_plant_design(const std::string& json_text);
PlantDesign load_plant_design(const std::string& path);

struct PlantHeritability {
    double xi = 0.0;
    double h2_plant = 0.0;
};

// fixed:  xi = sG2 / (sG2 + sE2/(nx nr))
// random: xi = (sG2 + sGX2/nx) / (sG2 + sX2/nx + sGX2/nx + sE2/(nx nr))
// both:   H2_plant = sG2 / (sG2 + sGX2/nx + sE2/(nx nr))
PlantHeritability plant_heritability(const PlantDesign& design);

// Monte Carlo over whole trials. Each replicate draws G and G' (and, in random
// mode, fresh effects for two distinct genotypes) and the n_x * n_r plant
// noises, then forms both entry means. h2_plant is only simulated in random
// mode, as Var(alpha(G)) / Var(Ybar(G) - mean_x beta(x)).
struct PlantSimulation {
    Estimate xi;
    std::optional<Estimate> h2_plant;
};

PlantSimulation simulate_plant(const PlantDesign& design, std::size_t replicates, std::uint64_t seed,
                               std::size_t threads = 0);

}  // namespace cfh
