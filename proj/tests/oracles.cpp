#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

// ── closed forms ────────────────────────────────────────────────────────────

std::array<double, 6> table1_row(int row, double b, double b1, double b2) {
    double s = b1 * b1 + b2 * b2;
    switch (row) {
        case 1: {
            double r = s / (s + 1);
            return {r, r, r, r, r, 1.0};
        }
        case 2: {
            double r = 3 * b * b / (4 + 3 * b * b);
            return {2 * b * b / (4 + 3 * b * b), r, r, r, r, 1.0};
        }
        case 3: {
            double d = 4 + 2 * b * b;
            double l = std::sqrt(b * b + 1) - 1;
            return {0.0, 0.0, b * b / d, 0.0, l * l / d, 1.0};
        }
        case 4: {
            double r = b1 * b1 / (s + 1);
            return {r, r, r, r, r, (1 + b1 * b1) / (s + 1)};
        }
        case 5: {
            double d = 4 + 2 * b * b;
            double r = b * b / d;
            return {0.0, 0.0, r, r, r, (4 + b * b) / d};
        }
        default: throw std::invalid_argument("rows are 1 to 5");
    }
}

// ── transport by successive shortest paths ──────────────────────────────────

namespace {

struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
};

double min_cost_transport(const std::vector<double>& pa, const std::vector<double>& pb,
                          const std::vector<std::vector<double>>& cost) {
    const std::size_t m = pa.size(), n = pb.size();
    const std::size_t src = m + n, dst = m + n + 1, nodes = m + n + 2;
    std::vector<std::vector<Edge>> g(nodes);
    auto add = [&](std::size_t u, std::size_t v, double cap, double c) {
        g[u].push_back({v, cap, c, g[v].size()});
        g[v].push_back({u, 0.0, -c, g[u].size() - 1});
    };
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) add(src, i, pa[i], 0.0);
    for (std::size_t j = 0; j < n; ++j) add(m + j, dst, pb[j], 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) add(i, m + j, inf, cost[i][j]);

    double total = 0.0, flow = 0.0;
    const double eps = 1e-15;
    for (int iter = 0; iter < 10000 && flow < 1.0 - 1e-13; ++iter) {
        // Bellman-Ford over the residual network.
        std::vector<double> dist(nodes, inf);
        std::vector<std::pair<std::size_t, std::size_t>> prev(nodes, {nodes, 0});
        dist[src] = 0.0;
        for (std::size_t pass = 0; pass < nodes; ++pass) {
            bool changed = false;
            for (std::size_t u = 0; u < nodes; ++u) {
                if (dist[u] == inf) continue;
                for (std::size_t k = 0; k < g[u].size(); ++k) {
                    const Edge& e = g[u][k];
                    if (e.cap > eps && dist[u] + e.cost < dist[e.to] - 1e-14) {
                        dist[e.to] = dist[u] + e.cost;
                        prev[e.to] = {u, k};
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        if (dist[dst] == inf) break;
        double push = inf;
        for (std::size_t v = dst; v != src; v = prev[v].first) push = std::min(push, g[prev[v].first][prev[v].second].cap);
        for (std::size_t v = dst; v != src; v = prev[v].first) {
            Edge& e = g[prev[v].first][prev[v].second];
            e.cap -= push;
            g[e.to][e.rev].cap += push;
        }
        flow += push;
        total += push * dist[dst];
    }
    if (std::abs(flow - 1.0) > 1e-9) throw std::runtime_error("transport oracle did not route all mass");
    return total;
}

}  // namespace

Extremes transport_extremes(const std::vector<double>& xa, const std::vector<double>& pa,
                            const std::vector<double>& xb, const std::vector<double>& pb) {
    std::vector<std::vector<double>> c(xa.size(), std::vector<double>(xb.size()));
    for (std::size_t i = 0; i < xa.size(); ++i)
        for (std::size_t j = 0; j < xb.size(); ++j) c[i][j] = (xa[i] - xb[j]) * (xa[i] - xb[j]);
    auto neg = c;
    for (auto& r : neg)
        for (auto& v : r) v = -v;
    return {min_cost_transport(pa, pb, c), -min_cost_transport(pa, pb, neg)};
}

// ── one-locus genetics ──────────────────────────────────────────────────────

LocusVariances locus_variances(double p, const std::array<double, 3>& f) {
    double q = 1 - p;
    std::array<double, 3> w{q * q, 2 * p * q, p * p};
    double mg = 0, mf = 0;
    for (int g = 0; g < 3; ++g) {
        mg += w[g] * g;
        mf += w[g] * f[g];
    }
    double vg = 0, cov = 0, vf = 0;
    for (int g = 0; g < 3; ++g) {
        vg += w[g] * (g - mg) * (g - mg);
        cov += w[g] * (g - mg) * (f[g] - mf);
        vf += w[g] * (f[g] - mf) * (f[g] - mf);
    }
    double va = vg > 0 ? cov * cov / vg : 0.0;
    return {va, vf - va, vf};
}

double full_sib_covariance(double p, const std::array<double, 3>& f) {
    // Alleles: 1 = counted allele with probability p.
    auto pr = [p](int a) { return a ? p : 1 - p; };
    double e1 = 0, e12 = 0;
    for (int f1 = 0; f1 < 2; ++f1)
        for (int f2 = 0; f2 < 2; ++f2)
            for (int m1 = 0; m1 < 2; ++m1)
                for (int m2 = 0; m2 < 2; ++m2) {
                    double wp = pr(f1) * pr(f2) * pr(m1) * pr(m2);
                    int fa[2] = {f1, f2}, ma[2] = {m1, m2};
                    for (int c1f = 0; c1f < 2; ++c1f)
                        for (int c1m = 0; c1m < 2; ++c1m)
                            for (int c2f = 0; c2f < 2; ++c2f)
                                for (int c2m = 0; c2m < 2; ++c2m) {
                                    double w = wp / 16.0;
                                    int g1 = fa[c1f] + ma[c1m], g2 = fa[c2f] + ma[c2m];
                                    e1 += w * f[g1];
                                    e12 += w * f[g1] * f[g2];
                                }
                }
    return e12 - e1 * e1;
}

// ── plant trials ────────────────────────────────────────────────────────────

double plant_fixed_xi(const std::vector<double>& alpha, const std::vector<std::vector<double>>& gamma,
                      double sigma2_e, std::size_t n_x, std::size_t n_r) {
    // Ybar(g) = mu + alpha_g + mean_x beta + mean_x gamma_gx + mean noise. With
    // the plants' noise shared, Y(G) - Y(G') only carries the genetic terms.
    const std::size_t ng = alpha.size();
    std::vector<double> gv(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        double s = 0;
        for (std::size_t x = 0; x < n_x; ++x) s += gamma[g][x];
        gv[g] = alpha[g] + s / n_x;
    }
    double md = 0, m = 0, m2 = 0;
    for (std::size_t g = 0; g < ng; ++g) {
        m += gv[g] / ng;
        m2 += gv[g] * gv[g] / ng;
        for (std::size_t h = 0; h < ng; ++h) md += (gv[g] - gv[h]) * (gv[g] - gv[h]) / (ng * ng);
    }
    double var_y = m2 - m * m + sigma2_e / (n_x * n_r);
    return md / (2 * var_y);
}

// ── random models ───────────────────────────────────────────────────────────

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string discrete_law(std::mt19937_64& rng, int atoms) {
    std::uniform_real_distribution<double> val(-1.5, 1.5);
    std::vector<int> w(static_cast<std::size_t>(atoms));
    int total = 0;
    for (auto& x : w) {
        x = 1 + static_cast<int>(rng() % 4);
        total += x;
    }
    std::vector<double> vals;
    while (vals.size() < w.size()) {
        double v = std::round(val(rng) * 4) / 4;
        if (std::find(vals.begin(), vals.end(), v) == vals.end()) vals.push_back(v);
    }
    std::string s = "discrete(";
    for (std::size_t i = 0; i < w.size(); ++i)
        s += (i ? ", " : "") + num(vals[i]) + ":" + std::to_string(w[i]) + "/" + std::to_string(total);
    return s + ")";
}

}  // namespace

std::string random_model(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto chance = [&](double p) { return unit(rng) < p; };
    auto coef = [&] {
        double c = std::round((unit(rng) * 4 - 2) * 20) / 20;
        return std::abs(c) < 0.05 ? 0.5 : c;
    };

    const bool wf = chance(0.3);
    std::string t = wf ? "mode = within_family\n" : "mode = population\n";
    std::vector<std::string> discrete_factors, normal_factors;

    int loci = chance(0.5) ? 1 : 2;
    for (int l = 1; l <= loci; ++l) {
        std::string g = "g" + std::to_string(l);
        double p = 0.1 + 0.8 * unit(rng);
        if (wf || chance(0.6))
            t += "symbol " + g + " : genotype ~ hwe(" + num(p) + ")\n";
        else if (chance(0.5))
            t += "symbol " + g + " : genotype ~ bernoulli(" + num(p) + ")\n";
        else
            t += "symbol " + g + " : genotype ~ discrete(0:1/4, 1:1/4, 3:1/2)\n";
        discrete_factors.push_back(g);
    }
    if (chance(0.5)) {
        if (!wf && chance(0.3))
            t += "symbol x : observed ~ normal(" + num(unit(rng)) + ", " + num(0.2 + unit(rng)) + ")\n";
        else
            t += "symbol x : observed ~ " + discrete_law(rng, 2 + static_cast<int>(rng() % 2)) + "\n";
        discrete_factors.push_back("x");
    }
    if (wf) {
        if (chance(0.4)) {
            t += "symbol s1 : sibling(g1)\n";
            discrete_factors.push_back("s1");
        }
        if (chance(0.4)) {
            t += "symbol pm : derived = (g1f + g1m)/2\n";
            discrete_factors.push_back("pm");
        }
        if (chance(0.4)) {
            t += "symbol fam : family ~ normal(0, " + num(0.1 + unit(rng)) + ")\n";
            normal_factors.push_back("fam");
        }
    }
    if (chance(0.5)) {
        t += "symbol u : latent ~ " + discrete_law(rng, 2 + static_cast<int>(rng() % 3)) + "\n";
        discrete_factors.push_back("u");
    }
    if (chance(0.4)) {
        t += "symbol z : latent ~ normal(" + num(unit(rng) - 0.5) + ", " + num(0.2 + unit(rng)) + ")\n";
        normal_factors.push_back("z");
    }
    t += "symbol e : latent ~ normal(0, " + num(0.1 + unit(rng)) + ")\n";

    auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    std::string ph;
    int terms = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < terms; ++k) {
        std::string term = num(coef()) + "*" + pick(discrete_factors);
        if (chance(0.4)) term += "*" + pick(discrete_factors);
        if (!normal_factors.empty() && chance(0.3)) {
            term += "*" + pick(normal_factors);
            // A second noise factor leaves the analytic classes.
            if (chance(0.15)) term += "*" + pick(normal_factors);
        }
        ph += (k ? " + " : "") + term;
    }
    ph += " + e";
    if (chance(0.2)) ph = "ind(" + ph + " - " + num(coef()) + ")";
    return t + "phenotype = " + ph + "\n";
}

}  // namespace oracle
