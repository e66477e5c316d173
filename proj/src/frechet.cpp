#include "cfh/marginal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfh {

namespace {

constexpr double kEps = 1e-11;

// Tableau rows hold B^-1 [A | I] and the right-hand side in the last column.
struct Tableau {
    std::vector<std::vector<double>> t;
    std::vector<std::size_t> basis;
    std::size_t cols = 0;  // structural + artificial columns, excluding rhs

    double& rhs(std::size_t i) { return t[i][cols]; }

    void pivot(std::size_t r, std::size_t c) {
        double piv = t[r][c];
        for (double& v : t[r]) v /= piv;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i == r) continue;
            double f = t[i][c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= cols; ++j) t[i][j] -= f * t[r][j];
        }
        basis[r] = c;
    }

    // Bland's rule simplex minimizing cost over columns with allowed[j].
    void run(const std::vector<double>& cost, const std::vector<bool>& allowed) {
        const std::size_t m = t.size();
        for (std::size_t iter = 0; iter < 100000; ++iter) {
            std::size_t enter = cols;
            for (std::size_t j = 0; j < cols && enter == cols; ++j) {
                if (!allowed[j]) continue;
                double z = 0.0;
                for (std::size_t i = 0; i < m; ++i) z += cost[basis[i]] * t[i][j];
                if (cost[j] - z < -kEps) enter = j;
            }
            if (enter == cols) return;
            std::size_t leave = m;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (t[i][enter] > kEps) {
                    double ratio = rhs(i) / t[i][enter];
                    if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && leave < m && basis[i] < basis[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m) throw std::runtime_error("linear program is unbounded");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex iteration limit reached");
    }
};

}  // namespace

std::vector<double> solve_standard_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                                      const std::vector<double>& c) {
    const std::size_t m = A.size();
    const std::size_t n = c.size();
    if (b.size() != m) throw std::invalid_argument("lp: dimension mismatch");
    Tableau tab;
    tab.cols = n + m;
    tab.t.assign(m, std::vector<double>(n + m + 1, 0.0));
    tab.basis.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (A[i].size() != n) throw std::invalid_argument("lp: dimension mismatch");
        double sign = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) tab.t[i][j] = sign * A[i][j];
        tab.t[i][n + i] = 1.0;
        tab.rhs(i) = sign * b[i];
        tab.basis[i] = n + i;
    }

    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1(n + m, 0.0);
    for (std::size_t i = 0; i < m; ++i) phase1[n + i] = 1.0;
    tab.run(phase1, std::vector<bool>(n + m, true));
    double infeas = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (tab.basis[i] >= n) infeas += tab.rhs(i);
    if (infeas > 1e-9) throw std::runtime_error("linear program is infeasible");

    // Pivot remaining zero-level artificials out; rows with nothing to pivot on are redundant.
    for (std::size_t i = 0; i < tab.t.size();) {
        if (tab.basis[i] < n) {
            ++i;
            continue;
        }
        std::size_t col = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(tab.t[i][j]) > kEps) {
                col = j;
                break;
            }
        }
        if (col < n) {
            tab.pivot(i, col);
            ++i;
        } else {
            tab.t.erase(tab.t.begin() + static_cast<std::ptrdiff_t>(i));
            tab.basis.erase(tab.basis.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }

    // Phase 2 over structural columns only.
    std::vector<double> cost(n + m, 0.0);
    for (std::size_t j = 0; j < n; ++j) cost[j] = c[j];
    std::vector<bool> allowed(n + m, false);
    for (std::size_t j = 0; j < n; ++j) allowed[j] = true;
    tab.run(cost, allowed);

    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < tab.t.size(); ++i)
        if (tab.basis[i] < n) x[tab.basis[i]] = tab.rhs(i);
    return x;
}

OracleBounds frechet_oracle(const MarginalLaw& a, const MarginalLaw& b) {
    if (a.kind() != MarginalLaw::Kind::Discrete || b.kind() != MarginalLaw::Kind::Discrete)
        throw std::invalid_argument("frechet_oracle needs two discrete marginals");
    const auto& av = a.atom_values();
    const auto& ap = a.atom_probs();
    const auto& bv = b.atom_values();
    const auto& bp = b.atom_probs();
    if (av.size() > 12 || bv.size() > 12) throw std::invalid_argument("frechet_oracle supports at most 12 support points");

    const std::size_t na = av.size(), nb = bv.size(), n = na * nb;
    std::vector<std::vector<double>> A(na + nb, std::vector<double>(n, 0.0));
    std::vector<double> rhs(na + nb);
    std::vector<double> cost(n);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            std::size_t k = i * nb + j;
            A[i][k] = 1.0;
            A[na + j][k] = 1.0;
            double d = av[i] - bv[j];
            cost[k] = d * d;
        }
        rhs[i] = ap[i];
    }
    for (std::size_t j = 0; j < nb; ++j) rhs[na + j] = bp[j];

    auto value = [&](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += cost[k] * x[k];
        return s;
    };
    OracleBounds out;
    out.min = value(solve_standard_lp(A, rhs, cost));
    std::vector<double> neg(cost);
    for (double& v : neg) v = -v;
    out.max = value(solve_standard_lp(A, rhs, neg));
    return out;
}

}  // namespace cfh
