// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [criterion...]   (default: all ten)
#include "oracles.hpp"

#include "cfh/coupling.hpp"
#include "cfh/empirical.hpp"
#include "cfh/estimands.hpp"
#include "cfh/genetics.hpp"
#include "cfh/marginal.hpp"
#include "cfh/moments.hpp"
#include "cfh/plant.hpp"
#include "cfh/rng.hpp"
#include "cfh/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cfh;

namespace {

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;

    void fail(const std::string& d) {
        pass = false;
        if (details.size() < 40) details.push_back(d);
    }
};

std::string fmt(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

// ── 1, 2: reference tables ──────────────────────────────────────────────────

Outcome table_reproduction(int table) {
    EngineOptions o;
    o.mc_n = 1'000'000;
    o.xi_l_method = XiLowerMethod::SortedSample;
    auto cells = run_table(table, o, 0.01);
    Outcome out;
    std::size_t ok = 0;
    for (const auto& c : cells) {
        if (c.pass) {
            ++ok;
            continue;
        }
        out.fail("row " + std::to_string(c.row) + " (" + c.label + ") " + c.estimand + ": computed " +
                 fmt(c.estimate.value) + ", reference " + fmt(c.reference, 2) + ", delta " + fmt(c.delta, 3));
    }
    out.summary = std::to_string(ok) + "/" + std::to_string(cells.size()) + " cells within 0.01";
    return out;
}

// ── 3: closed forms ─────────────────────────────────────────────────────────

Outcome table1_closed_forms() {
    Outcome out;
    double worst = 0.0;
    std::size_t checks = 0;
    const double grid[] = {0.5, 1.0, 2.0};
    for (double b : grid)
        for (double b1 : grid)
            for (double b2 : grid) {
                for (const auto& r : table1_rows({b, b1, b2})) {
                    Analysis a({r.model}, EngineOptions{});
                    auto mb = moment_bounds(a);
                    double got[6] = {narrow_h2(a).value, broad_h2(a).value,
                                     xi(a, CounterfactualKind::Unrelated).value,
                                     mb.xi_l_prime.value, xi_l(a).value, mb.xi_u_prime.value};
                    auto want = oracle::table1_row(r.row, b, b1, b2);
                    for (std::size_t k = 0; k < 6; ++k) {
                        double err = std::abs(got[k] - want[k]);
                        worst = std::max(worst, err);
                        ++checks;
                        if (err > 1e-9)
                            out.fail("row " + std::to_string(r.row) + " " + kTable1Columns[k] + " at beta=" + fmt(b) +
                                     " beta1=" + fmt(b1) + " beta2=" + fmt(b2) + ": " + fmt(got[k], 12) + " vs " +
                                     fmt(want[k], 12));
                    }
                }
            }
    out.summary = std::to_string(checks) + " cells, max abs error " + fmt(worst, 3);
    return out;
}

// ── 4: the 4/3 example ──────────────────────────────────────────────────────

Outcome four_thirds() {
    Outcome out;
    std::vector<WeightedLaw> laws(3, {1.0 / 3.0, MarginalLaw::normal(0, 1)});
    double direct = xi_u_from_laws(laws);
    auto m = parse_model("mode = population\nsymbol g : genotype ~ discrete(0:1/3, 1:1/3, 2:1/3)\n"
                         "symbol e : latent ~ normal(0, 1)\nphenotype = e + 0*g\n");
    double via_model = xi_u(m).value;
    for (double v : {direct, via_model})
        if (std::abs(v - 4.0 / 3.0) > 1e-9) out.fail("xi_u = " + fmt(v, 15));
    out.summary = "xi_u from laws " + fmt(direct, 15) + ", from a model " + fmt(via_model, 15);
    return out;
}

// ── 5: bound chain on random models ─────────────────────────────────────────

Outcome bound_chain() {
    Outcome out;
    auto rng = make_stream(20240917, 0, 0xC5);
    std::size_t mc_models = 0, wf_models = 0;
    for (int k = 0; k < 200; ++k) {
        std::string text = oracle::random_model(rng);
        try {
            auto m = parse_model(text);
            EngineOptions o;
            o.mc_n = 40000;
            o.seed = 1000 + static_cast<std::uint64_t>(k);
            Analysis a({m}, o);
            if (a.monte_carlo()) ++mc_models;
            if (m.mode == FamilyMode::WithinFamily) ++wf_models;
            auto mb = moment_bounds(a);
            auto l = xi_l(a), u = xi_u(a), x = xi(a, default_kind(m.mode));
            auto le = [&](const Estimate& lo, const Estimate& hi, const char* what) {
                double slack = 4 * std::sqrt(lo.se * lo.se + hi.se * hi.se) + 1e-9;
                if (lo.value > hi.value + slack)
                    out.fail("model " + std::to_string(k) + ": " + what + " violated (" + fmt(lo.value, 10) + " > " +
                             fmt(hi.value, 10) + ")\n      " + text);
            };
            le(mb.xi_l_prime, l, "xi_l' <= xi_l");
            le(l, x, "xi_l <= xi");
            le(x, u, "xi <= xi_u");
            le(x, mb.xi_u_prime, "xi <= xi_u'");
            le(Estimate{0.0, 0.0, Method::Analytic}, x, "0 <= xi");
            le(x, Estimate{1.0, 0.0, Method::Analytic}, "xi <= 1");
        } catch (const DegeneratePhenotype&) {
            out.fail("model " + std::to_string(k) + " is degenerate:\n      " + text);
        } catch (const std::exception& e) {
            out.fail("model " + std::to_string(k) + " raised " + e.what() + ":\n      " + text);
        }
    }
    out.summary = "200 models (" + std::to_string(wf_models) + " within-family, " + std::to_string(mc_models) +
                  " Monte Carlo)";
    return out;
}

// ── 6: coupling extremes against the transport oracle ───────────────────────

Outcome oracle_equivalence() {
    Outcome out;
    auto rng = make_stream(20240917, 0, 0xC6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    auto random_law = [&](std::vector<double>& xs, std::vector<double>& ps) {
        std::size_t n = 1 + rng() % 6;
        std::set<double> vals;
        while (vals.size() < n) vals.insert(std::round((unit(rng) * 6 - 3) * 1000) / 1000);
        xs.assign(vals.begin(), vals.end());
        std::shuffle(xs.begin(), xs.end(), rng);
        ps.resize(n);
        double total = 0;
        for (auto& p : ps) total += (p = -std::log(unit(rng)));
        for (auto& p : ps) p /= total;
    };
    for (int k = 0; k < 100; ++k) {
        std::vector<double> xa, pa, xb, pb;
        random_law(xa, pa);
        random_law(xb, pb);
        auto a = MarginalLaw::discrete(xa, pa), b = MarginalLaw::discrete(xb, pb);
        auto o = oracle::transport_extremes(xa, pa, xb, pb);
        double lo = comonotone_msd(a, b), hi = countermonotone_msd(a, b);
        double err = std::max(std::abs(lo - o.min), std::abs(hi - o.max));
        worst = std::max(worst, err);
        if (err > 1e-9)
            out.fail("pair " + std::to_string(k) + ": comonotone " + fmt(lo, 12) + " vs " + fmt(o.min, 12) +
                     ", countermonotone " + fmt(hi, 12) + " vs " + fmt(o.max, 12));
    }
    out.summary = "100 pairs, max abs error " + fmt(worst, 3);
    return out;
}

// ── 7, 8: one-locus twin and sibling identities ─────────────────────────────

struct GridPoint {
    double p, a, d, var_f;
};

std::vector<GridPoint> family_grid() {
    std::vector<GridPoint> g;
    for (double p : {0.2, 0.5, 0.8})
        for (double a : {0.5, 1.5})
            for (double d : {0.0, 0.6, -0.4})
                for (double vf : {0.0, 0.5, 1.5}) g.push_back({p, a, d, vf});
    return g;
}

std::array<double, 3> genetic_values(const GridPoint& q) { return {-q.a, q.d, q.a}; }

Outcome twin_identities() {
    Outcome out;
    const double var_e = 1.0;
    double worst = 0.0;
    auto grid = family_grid();
    for (const auto& q : grid) {
        // f(g) = -a + (a + 2d) g - d g^2 hits (-a, d, a) at dosages 0, 1, 2.
        std::string f = fmt(-q.a, 17) + " + " + fmt(q.a + 2 * q.d, 17) + "*g + " + fmt(-q.d, 17) + "*g*g";
        auto m = parse_model("mode = within_family\nsymbol g : genotype ~ hwe(" + fmt(q.p, 17) +
                             ")\nsymbol fam : family ~ normal(0, " + fmt(q.var_f, 17) +
                             ")\nsymbol e : latent ~ normal(0, " + fmt(var_e, 17) + ")\nphenotype = " + f +
                             " + fam + e\n");
        auto v = oracle::locus_variances(q.p, genetic_values(q));
        double vy = v.total + q.var_f + var_e;
        Analysis a({m}, EngineOptions{});
        double h2 = twin_quantities(a).h2_twin.value;
        double xf = xi(a, CounterfactualKind::Fraternal).value;
        double e1 = std::abs(h2 - (v.additive + 1.5 * v.dominance) / vy);
        double e2 = std::abs(xf - (0.5 * v.additive + 0.75 * v.dominance) / vy);
        double e3 = q.d == 0.0 ? std::abs(h2 - 2 * xf) : 0.0;
        worst = std::max({worst, e1, e2, e3});
        if (e1 > 1e-9 || e2 > 1e-9 || e3 > 1e-9)
            out.fail("p=" + fmt(q.p) + " a=" + fmt(q.a) + " d=" + fmt(q.d) + " var_F=" + fmt(q.var_f) + ": h2_twin " +
                     fmt(h2, 12) + ", xi_fraternal " + fmt(xf, 12));
    }
    out.summary = std::to_string(grid.size()) + " grid points, max abs error " + fmt(worst, 3);
    return out;
}

Outcome full_sib_covariance() {
    Outcome out;
    double worst = 0.0;
    std::set<std::tuple<double, double, double>> seen;
    for (const auto& q : family_grid()) {
        if (!seen.insert({q.p, q.a, q.d}).second) continue;
        auto fv = genetic_values(q);
        auto v = oracle::locus_variances(q.p, fv);
        double target = 0.5 * v.additive + 0.25 * v.dominance;
        AlleleFrequency af(q.p);
        auto f = [&](int g) { return fv[static_cast<std::size_t>(g)]; };
        double joint = sib_pair_joint(af).covariance(f);
        // Same covariance from the enumerated family space.
        double m = 0, mm = 0;
        for (const auto& c : enumerate_family_space(1, af)) {
            m += c.weight * f(c.child[0]);
            mm += c.weight * f(c.child[0]) * f(c.sibling[0]);
        }
        double enumerated = mm - m * m;
        double brute = oracle::full_sib_covariance(q.p, fv);
        for (double got : {joint, enumerated, brute}) {
            double err = std::abs(got - target);
            worst = std::max(worst, err);
            if (err > 1e-10)
                out.fail("p=" + fmt(q.p) + " a=" + fmt(q.a) + " d=" + fmt(q.d) + ": " + fmt(got, 14) + " vs " +
                         fmt(target, 14));
        }
    }
    out.summary = std::to_string(seen.size()) + " (p, a, d) points, max abs error " + fmt(worst, 3);
    return out;
}

// ── 9: plug-in estimator consistency ────────────────────────────────────────

Outcome empirical_consistency() {
    Outcome out;
    std::ostringstream summary;
    for (int row : {1, 5}) {
        auto m = parse_model(scenario_model_text(2, row));
        Analysis a({m}, EngineOptions{});
        auto mb = moment_bounds(a);
        double target[3] = {mb.xi_l_prime.value, mb.xi_u_prime.value, xi_l(a).value};
        const char* names[3] = {"xi_l'", "xi_u'", "xi_l"};
        std::vector<std::string> x_cols;
        if (m.find("x1")) x_cols.push_back("x1");
        double err_small = 0, err_large = 0;
        for (std::size_t n : {std::size_t{10'000}, std::size_t{1'000'000}}) {
            auto sample = mc_sample(m, n, 7000 + static_cast<std::uint64_t>(row));
            auto data = dataset_from_sample(sample, x_cols, {"g1", "g2"});
            auto b = estimate_bounds(data, 200, 31 + static_cast<std::uint64_t>(row));
            Estimate est[3] = {b.xi_l_prime, b.xi_u_prime, b.xi_l};
            double sq = 0;
            for (int k = 0; k < 3; ++k) {
                double err = est[k].value - target[k];
                sq += err * err;
                if (n == 1'000'000 && std::abs(err) > 4 * est[k].se)
                    out.fail("row " + std::to_string(row) + " " + names[k] + " at n=1e6: " + fmt(est[k].value, 8) +
                             " vs " + fmt(target[k], 8) + " (bootstrap SE " + fmt(est[k].se, 3) + ")");
            }
            (n == 10'000 ? err_small : err_large) = std::sqrt(sq / 3);
        }
        if (!(err_large < err_small))
            out.fail("row " + std::to_string(row) + ": RMS error did not decrease (" + fmt(err_small, 3) + " -> " +
                     fmt(err_large, 3) + ")");
        summary << "row " << row << " RMS error " << fmt(err_small, 3) << " (n=1e4) -> " << fmt(err_large, 3)
                << " (n=1e6); ";
    }
    out.summary = summary.str();
    out.summary.resize(out.summary.size() - 2);
    return out;
}

// ── 10: entry-mean heritability ─────────────────────────────────────────────

Outcome plant_formulas() {
    Outcome out;
    std::ostringstream summary;
    PlantDesign fixed;
    fixed.mode = PlantMode::Fixed;
    fixed.n_g = 3;
    fixed.n_x = 3;
    fixed.mu = 10;
    fixed.alpha = {1.2, -0.2, -1.0};
    fixed.beta = {0.7, -0.3, -0.4};
    fixed.gamma = {{0.3, -0.1, -0.2}, {-0.5, 0.4, 0.1}, {0.2, -0.3, 0.1}};
    fixed.sigma2_e = 4.0;
    for (std::size_t nr : {5u, 50u, 500u}) {
        fixed.n_r = nr;
        fixed.validate();
        double formula = plant_heritability(fixed).xi;
        double exact = oracle::plant_fixed_xi(fixed.alpha, fixed.gamma, fixed.sigma2_e, fixed.n_x, nr);
        auto sim = simulate_plant(fixed, 200'000, 17 + nr);
        if (std::abs(formula - exact) > 1e-12)
            out.fail("fixed n_r=" + std::to_string(nr) + ": formula " + fmt(formula, 12) + " vs enumeration " +
                     fmt(exact, 12));
        if (std::abs(sim.xi.value - formula) > 4 * sim.xi.se)
            out.fail("fixed n_r=" + std::to_string(nr) + ": simulated " + fmt(sim.xi.value, 8) + " +- " +
                     fmt(sim.xi.se, 3) + " vs " + fmt(formula, 8));
        summary << "fixed n_r=" << nr << " xi " << fmt(formula, 4) << " sim " << fmt(sim.xi.value, 4) << "; ";
    }
    PlantDesign rnd;
    rnd.mode = PlantMode::Random;
    for (auto [nx, nr, sg, sx, sgx, se] :
         {std::tuple{4u, 2u, 1.0, 1.0, 1.0, 1.0}, {2u, 10u, 0.5, 2.0, 1.5, 3.0}, {8u, 3u, 2.0, 0.1, 0.0, 5.0}}) {
        rnd.n_x = nx;
        rnd.n_r = nr;
        rnd.sigma2_g = sg;
        rnd.sigma2_x = sx;
        rnd.sigma2_gx = sgx;
        rnd.sigma2_e = se;
        auto h = plant_heritability(rnd);
        auto sim = simulate_plant(rnd, 200'000, 91 + nx);
        std::string tag = "random n_x=" + std::to_string(nx) + " n_r=" + std::to_string(nr);
        if (std::abs(sim.xi.value - h.xi) > 4 * sim.xi.se)
            out.fail(tag + ": xi simulated " + fmt(sim.xi.value, 8) + " +- " + fmt(sim.xi.se, 3) + " vs " +
                     fmt(h.xi, 8));
        if (!sim.h2_plant || std::abs(sim.h2_plant->value - h.h2_plant) > 4 * sim.h2_plant->se)
            out.fail(tag + ": H2_plant simulated " + (sim.h2_plant ? fmt(sim.h2_plant->value, 8) : "n/a") + " vs " +
                     fmt(h.h2_plant, 8));
        summary << tag << " xi " << fmt(h.xi, 4) << " sim " << fmt(sim.xi.value, 4) << "; ";
    }
    out.summary = summary.str();
    out.summary.resize(out.summary.size() - 2);
    return out;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "Table 2 reproduction", [] { return table_reproduction(2); }},
        {2, "Table 3 reproduction", [] { return table_reproduction(3); }},
        {3, "Table 1 closed forms", table1_closed_forms},
        {4, "xi_u = 4/3 pathology", four_thirds},
        {5, "bound chain on random models", bound_chain},
        {6, "coupling extremes vs transport oracle", oracle_equivalence},
        {7, "twin identities", twin_identities},
        {8, "full-sib covariance", full_sib_covariance},
        {9, "empirical estimator consistency", empirical_consistency},
        {10, "plant entry-mean formulas", plant_formulas},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.summary.c_str(),
                    secs);
        for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
