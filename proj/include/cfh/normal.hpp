// Standard normal helpers and fixed quadrature rules.
#pragma once

#include <cstddef>
#include <vector>

namespace cfh {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Phi(x) via erfc, accurate to a few ulp in both tails.
double norm_cdf(double x);
// 1 - Phi(x) without cancellation.
double norm_sf(double x);
double norm_pdf(double x);
// Inverse of Phi on (0,1); +-inf at the endpoints.
double norm_quantile(double u);

// P(Z1 <= h, Z2 <= k) for standard normals with correlation rho.
double bvn_cdf(double h, double k, double rho);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(std::size_t n);

// n-point Gauss-Hermite rule for the standard normal density: sum w_i f(z_i)
// approximates E f(Z). Weights sum to one.
QuadratureRule gauss_hermite_normal(std::size_t n);

}  // namespace cfh
