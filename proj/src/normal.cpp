#include "cfh/normal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfh {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_quantile(double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("norm_quantile: u outside [0,1]");
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    if (u == 1.0) return std::numeric_limits<double>::infinity();

    // Acklam's rational approximation followed by one Halley step.
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (u < plow) {
        double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        double q = u - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Refine against the tail that is representable without cancellation.
    double e = (u < 0.5) ? norm_cdf(x) - u : -(norm_sf(x) - (1.0 - u));
    double h = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
    x = x - h / (1.0 + 0.5 * x * h);
    return x;
}

// ── Bivariate normal ────────────────────────────────────────────────────────
// Port of Genz's BVNU (Drezner-Wesolowsky with Gauss-Legendre refinement).

namespace {

struct GenzRule {
    std::vector<double> x;  // positive half of the nodes
    std::vector<double> w;
};

const GenzRule& genz_rule(int ng) {
    static const std::array<GenzRule, 3> rules = [] {
        std::array<GenzRule, 3> out;
        const std::array<std::size_t, 3> sizes{6, 12, 20};
        for (std::size_t r = 0; r < 3; ++r) {
            QuadratureRule q = gauss_legendre(sizes[r]);
            for (std::size_t i = 0; i < q.nodes.size(); ++i) {
                if (q.nodes[i] > 0.0) {
                    out[r].x.push_back(q.nodes[i]);
                    out[r].w.push_back(q.weights[i]);
                }
            }
        }
        return out;
    }();
    return rules[static_cast<std::size_t>(ng)];
}

// Upper orthant P(X > dh, Y > dk).
double bvnu(double dh, double dk, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (dh == inf || dk == inf) return 0.0;
    if (dh == -inf) return dk == -inf ? 1.0 : norm_cdf(-dk);
    if (dk == -inf) return norm_cdf(-dh);

    int ng = std::abs(r) < 0.3 ? 0 : (std::abs(r) < 0.75 ? 1 : 2);
    const GenzRule& rule = genz_rule(ng);
    double h = dh, k = dk, hk = h * k, bvn = 0.0;

    if (std::abs(r) < 0.925) {
        double hs = (h * h + k * k) / 2.0;
        double asr = std::asin(r);
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            double sn = std::sin(asr * (rule.x[i] + 1.0) / 2.0);
            bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            sn = std::sin(asr * (-rule.x[i] + 1.0) / 2.0);
            bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / (4.0 * kPi);
        bvn += norm_cdf(-h) * norm_cdf(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (std::abs(r) < 1.0) {
            double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            double bs = (h - k) * (h - k);
            double c = (4.0 - hk) / 8.0;
            double d = (12.0 - hk) / 16.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0)
                bvn = a * std::exp(asr) *
                      (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
            if (hk > -100.0) {
                double b = std::sqrt(bs);
                double sp = std::sqrt(2.0 * kPi) * norm_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (std::size_t i = 0; i < rule.x.size(); ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    double xs = a * (is * rule.x[i] + 1.0);
                    xs *= xs;
                    double rs = std::sqrt(1.0 - xs);
                    double asr2 = -(bs / xs + hk) / 2.0;
                    if (asr2 > -100.0) {
                        double sp = 1.0 + c * xs * (1.0 + d * xs);
                        double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
                        bvn += a * rule.w[i] * std::exp(asr2) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / (2.0 * kPi);
        }
        if (r > 0.0) {
            bvn += norm_cdf(-std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            double L = (h < 0.0) ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
            bvn = L - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bvn_cdf(double h, double k, double rho) {
    if (std::isnan(h) || std::isnan(k) || std::isnan(rho))
        throw std::domain_error("bvn_cdf: NaN argument");
    rho = std::clamp(rho, -1.0, 1.0);
    return bvnu(-h, -k, rho);
}

// ── Quadrature rules ────────────────────────────────────────────────────────

QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
    QuadratureRule q;
    q.nodes.assign(n, 0.0);
    q.weights.assign(n, 0.0);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
            }
            pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        // Recompute the derivative at the converged node for the weight.
        double p1 = 1.0, p2 = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            double p3 = p2;
            p2 = p1;
            p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
        }
        pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
        double w = 2.0 / ((1.0 - z * z) * pp * pp);
        q.nodes[i] = -z;
        q.nodes[n - 1 - i] = z;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = 0.0;
    return q;
}

QuadratureRule gauss_hermite_normal(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_hermite_normal: n must be positive");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k < n; ++k) {
        double off = std::sqrt(static_cast<double>(k));
        J(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = off;
        J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto ii = static_cast<Eigen::Index>(i);
        q.nodes[i] = es.eigenvalues()(ii);
        double v0 = es.eigenvectors()(0, ii);
        q.weights[i] = v0 * v0;
        total += q.weights[i];
    }
    for (double& w : q.weights) w /= total;
    // Symmetrize so odd moments vanish exactly.
    for (std::size_t i = 0; i < n / 2; ++i) {
        double z = 0.5 * (q.nodes[n - 1 - i] - q.nodes[i]);
        double w = 0.5 * (q.weights[i] + q.weights[n - 1 - i]);
        q.nodes[i] = -z;
        q.nodes[n - 1 - i] = z;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = 0.0;
    return q;
}

}  // namespace cfh
