// Reference computations for the acceptance suite. None of these call into
// the library's numerical code; they recompute each target from first
// principles so that agreement is evidence rather than tautology.
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// ── closed forms for the five Bernoulli(1/2) / N(0, 1/4) models ─────────────
// Columns: narrow h2, broad H2, xi, xi_l', xi_l, xi_u'.
std::array<double, 6> table1_row(int row, double beta, double beta1, double beta2);

// ── exhaustive coupling of two discrete laws ────────────────────────────────
// Min and max of E[(A - B)^2] over every joint law with the given margins,
// solved as a transportation problem by successive shortest paths.
struct Extremes {
    double min = 0.0;
    double max = 0.0;
};
Extremes transport_extremes(const std::vector<double>& xa, const std::vector<double>& pa,
                            const std::vector<double>& xb, const std::vector<double>& pb);

// ── one-locus genetics by direct enumeration ────────────────────────────────
// f holds the genetic values at dosages 0, 1, 2. The additive variance is the
// variance of the least-squares projection of f(G) on G under HWE.
struct LocusVariances {
    double additive = 0.0;
    double dominance = 0.0;
    double total = 0.0;
};
LocusVariances locus_variances(double p, const std::array<double, 3>& f);

// Cov(f(G1), f(G2)) for full sibs, enumerating both parents' allele pairs
// and each child's transmitted alleles.
double full_sib_covariance(double p, const std::array<double, 3>& f);

// ── entry-mean trials ───────────────────────────────────────────────────────
// Exact xi for a fixed-effect trial by enumerating (G, G') pairs.
double plant_fixed_xi(const std::vector<double>& alpha, const std::vector<std::vector<double>>& gamma,
                      double sigma2_e, std::size_t n_x, std::size_t n_r);

// ── random models ───────────────────────────────────────────────────────────
// Model text drawn from a small grammar over the model language: population
// or within-family mode, one or two loci, optional observed, family and
// derived symbols, sums of products, optional threshold.
std::string random_model(std::mt19937_64& rng);

}  // namespace oracle
