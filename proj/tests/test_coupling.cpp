// Marginal laws, extreme quantile couplings, transport oracle, xi bounds.
#include "cfh/coupling.hpp"
#include "cfh/marginal.hpp"
#include "cfh/model.hpp"
#include "cfh/normal.hpp"
#include "cfh/rng.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace cfh;
using Catch::Matchers::WithinAbs;

// ── marginal laws ───────────────────────────────────────────────────────────

TEST_CASE("law moments, cdf and quantile", "[marginal]") {
    auto n = MarginalLaw::normal(1.0, 4.0);
    CHECK(n.kind() == MarginalLaw::Kind::Normal);
    CHECK_THAT(n.cdf(1.0), WithinAbs(0.5, 1e-15));
    CHECK_THAT(n.quantile(norm_cdf(1.5)), WithinAbs(4.0, 1e-9));

    auto d = MarginalLaw::discrete({3, 1, 2}, {0.2, 0.5, 0.3});
    CHECK_THAT(d.mean(), WithinAbs(0.5 + 0.6 + 0.6, 1e-15));
    CHECK_THAT(d.cdf(1.5), WithinAbs(0.5, 1e-15));
    CHECK(d.quantile(0.5) == 1.0);  // left-continuous inverse
    CHECK(d.quantile(0.5000001) == 2.0);
    CHECK(d.quantile(0.95) == 3.0);

    auto b = MarginalLaw::bernoulli(0.3);
    CHECK_THAT(b.variance(), WithinAbs(0.21, 1e-15));

    auto mix = MarginalLaw::mixture({{0.5, -1.0, 1.0}, {0.5, 1.0, 1.0}});
    CHECK_THAT(mix.mean(), WithinAbs(0.0, 1e-15));
    CHECK_THAT(mix.variance(), WithinAbs(2.0, 1e-14));
    CHECK_THAT(mix.cdf(mix.quantile(0.8)), WithinAbs(0.8, 1e-10));

    // Zero-sd components become atoms; all-zero collapses to discrete.
    auto atoms = MarginalLaw::mixture({{0.25, 0.0, 0.0}, {0.75, 2.0, 0.0}});
    CHECK(atoms.kind() == MarginalLaw::Kind::Discrete);
    auto single = MarginalLaw::mixture({{1.0, 3.0, 2.0}});
    CHECK(single.kind() == MarginalLaw::Kind::Normal);

    auto e = MarginalLaw::empirical({3.0, 1.0, 2.0, 4.0});
    CHECK(e.quantile(0.25) == 1.0);
    CHECK(e.quantile(0.26) == 2.0);
    CHECK_THAT(e.mean(), WithinAbs(2.5, 1e-15));
}

TEST_CASE("equal laws have equal keys", "[marginal]") {
    CHECK(MarginalLaw::normal(0, 1).key() == MarginalLaw::normal(0, 1).key());
    CHECK(MarginalLaw::normal(0, 1).key() != MarginalLaw::normal(0, 2).key());
    CHECK(MarginalLaw::discrete({1, 0}, {0.5, 0.5}).key() == MarginalLaw::discrete({0, 1}, {0.5, 0.5}).key());
}

TEST_CASE("draws follow the law", "[marginal]") {
    auto rng = make_stream(3, 0);
    auto mix = MarginalLaw::mixture({{0.3, -2.0, 0.5}, {0.7, 1.0, 1.0}});
    auto x = mix.draw(200000, rng);
    double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double v = 0;
    for (double y : x) v += (y - m) * (y - m);
    v /= x.size();
    CHECK_THAT(m, WithinAbs(mix.mean(), 0.02));
    CHECK_THAT(v, WithinAbs(mix.variance(), 0.03));
}

// ── extreme couplings ───────────────────────────────────────────────────────

TEST_CASE("normal pairs have closed-form coupling moments", "[coupling]") {
    auto a = MarginalLaw::normal(1.0, 4.0), b = MarginalLaw::normal(-0.5, 0.25);
    CHECK_THAT(comonotone_msd(a, b), WithinAbs(2.25 + std::pow(2.0 - 0.5, 2), 1e-12));
    CHECK_THAT(countermonotone_msd(a, b), WithinAbs(2.25 + std::pow(2.0 + 0.5, 2), 1e-12));
    CHECK_THAT(comonotone_msd(a, a), WithinAbs(0.0, 1e-14));
}

TEST_CASE("normal versus point mass", "[coupling]") {
    // Any coupling with a constant gives E(A - c)^2.
    auto a = MarginalLaw::normal(0.3, 2.0), c = MarginalLaw::discrete({1.0}, {1.0});
    CHECK_THAT(comonotone_msd(a, c), WithinAbs(2.0 + 0.49, 1e-9));
    CHECK_THAT(countermonotone_msd(a, c), WithinAbs(2.0 + 0.49, 1e-9));
}

TEST_CASE("mixture couplings agree with sorted samples", "[coupling]") {
    auto a = MarginalLaw::mixture({{0.25, 0.0, 0.7}, {0.5, 1.0, 0.7}, {0.25, 2.0, 0.7}});
    auto b = MarginalLaw::mixture({{0.5, 0.0, 0.3}, {0.5, 3.0, 1.5}});
    // Brute force: E[(Qa(U) - Qb(U))^2] by midpoint rule on u.
    const int n = 400000;
    double co = 0, counter = 0;
    for (int i = 0; i < n; ++i) {
        double u = (i + 0.5) / n;
        co += std::pow(a.quantile(u) - b.quantile(u), 2);
        counter += std::pow(a.quantile(u) - b.quantile(1 - u), 2);
    }
    CHECK_THAT(comonotone_msd(a, b), WithinAbs(co / n, 2e-4));
    CHECK_THAT(countermonotone_msd(a, b), WithinAbs(counter / n, 2e-4));
}

TEST_CASE("discrete couplings match the transport oracle", "[coupling]") {
    auto a = MarginalLaw::discrete({0, 1, 3}, {0.2, 0.5, 0.3});
    auto b = MarginalLaw::discrete({-1, 2}, {0.6, 0.4});
    auto o = frechet_oracle(a, b);
    CHECK_THAT(comonotone_msd(a, b), WithinAbs(o.min, 1e-12));
    CHECK_THAT(countermonotone_msd(a, b), WithinAbs(o.max, 1e-12));
    CHECK(o.min <= o.max);
}

TEST_CASE("transport oracle on a permutation problem", "[coupling]") {
    // Uniform on three points each: the extremes are the sorted and reversed
    // matchings, checkable by enumerating all 6 permutations.
    std::vector<double> x{0, 1, 5}, y{-2, 2, 3};
    auto a = MarginalLaw::discrete(x, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto b = MarginalLaw::discrete(y, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    std::vector<int> perm{0, 1, 2};
    double lo = 1e300, hi = -1e300;
    do {
        double s = 0;
        for (int i = 0; i < 3; ++i) s += std::pow(x[i] - y[perm[i]], 2) / 3;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    auto o = frechet_oracle(a, b);
    CHECK_THAT(o.min, WithinAbs(lo, 1e-12));
    CHECK_THAT(o.max, WithinAbs(hi, 1e-12));
}

TEST_CASE("LP solver handles a small problem", "[coupling]") {
    // min -x1 - x2 s.t. x1 + x3 = 2, x2 + x4 = 3.
    auto x = solve_standard_lp({{1, 0, 1, 0}, {0, 1, 0, 1}}, {2, 3}, {-1, -1, 0, 0});
    CHECK_THAT(x[0], WithinAbs(2.0, 1e-12));
    CHECK_THAT(x[1], WithinAbs(3.0, 1e-12));
    CHECK_THROWS_AS(solve_standard_lp({{1, 1}}, {-1}, {1, 1}), std::runtime_error);
    std::vector<double> v(13), p(13, 1.0 / 13);
    std::iota(v.begin(), v.end(), 0.0);
    auto big = MarginalLaw::discrete(v, p);
    CHECK_THROWS_AS(frechet_oracle(big, big), std::invalid_argument);
}

// ── single-stratum bounds ───────────────────────────────────────────────────

TEST_CASE("three standard normal laws give xi_u = 4/3", "[bounds]") {
    std::vector<WeightedLaw> laws;
    for (int i = 0; i < 3; ++i) laws.push_back({1.0 / 3.0, MarginalLaw::normal(0, 1)});
    CHECK_THAT(xi_u_from_laws(laws), WithinAbs(4.0 / 3.0, 1e-12));
    CHECK_THAT(xi_l_from_laws(laws), WithinAbs(0.0, 1e-12));
}

TEST_CASE("laws must carry unit total weight", "[bounds]") {
    std::vector<WeightedLaw> laws{{0.5, MarginalLaw::normal(0, 1)}, {0.4, MarginalLaw::normal(1, 1)}};
    CHECK_THROWS_AS(xi_l_from_laws(laws), std::invalid_argument);
}

TEST_CASE("location shifts attain the lower bound", "[bounds]") {
    // Y(g) = g + N(0, s2): comonotone coupling removes the noise entirely.
    std::vector<WeightedLaw> laws{{0.25, MarginalLaw::normal(0, 1)},
                                  {0.5, MarginalLaw::normal(1, 1)},
                                  {0.25, MarginalLaw::normal(2, 1)}};
    // Var(Y) = 1/2 + 1, xi = Var(g) / Var(Y).
    CHECK_THAT(xi_l_from_laws(laws), WithinAbs(0.5 / 1.5, 1e-12));
    // Countermonotone off-diagonal pairs: E(g-g')^2 + 4 P(g != g').
    double pne = 1 - (0.0625 + 0.25 + 0.0625);
    CHECK_THAT(xi_u_from_laws(laws), WithinAbs((1.0 + 4 * pne) / 3.0, 1e-12));
}

// ── model-level bounds ──────────────────────────────────────────────────────

namespace {

PhenotypeModel table1_model(const std::string& ph) {
    return parse_model("mode = population\nsymbol g1 : genotype ~ bernoulli(0.5)\n"
                       "symbol e1 : latent ~ normal(0, 0.25)\nsymbol e2 : latent ~ normal(0, 0.25)\n"
                       "phenotype = " + ph + "\n");
}

}  // namespace

TEST_CASE("xi_l of a genotype-scaled noise term", "[bounds]") {
    for (double beta : {0.5, 1.0, 2.0}) {
        auto m = table1_model(format_number(beta) + "*g1*e2 + e1");
        double expected = std::pow(std::sqrt(beta * beta + 1) - 1, 2) / (4 + 2 * beta * beta);
        CHECK_THAT(xi_l(m).value, WithinAbs(expected, 1e-10));
    }
}

TEST_CASE("xi_u of the additive model", "[bounds]") {
    // Y = g1 + e1: off-diagonal pairs differ by 1 with sd 1/2 each.
    auto m = table1_model("g1 + e1");
    double var_y = 0.25 + 0.25;
    CHECK_THAT(xi_u(m).value, WithinAbs(0.5 * (1.0 + 1.0) / (2 * var_y), 1e-10));
}

TEST_CASE("sorted-sample and quadrature xi_l agree on mixtures", "[bounds]") {
    auto m = parse_model("mode = population\nsymbol g1 : genotype ~ hwe(0.5)\n"
                         "symbol e1 : latent ~ normal(0, 0.5)\n"
                         "symbol e2 : latent ~ discrete(0:1/16, 0.5:4/16, 1:6/16, 1.5:4/16, 2:1/16)\n"
                         "phenotype = g1*e2 + e1\n");
    EngineOptions quad;
    EngineOptions sorted;
    sorted.xi_l_method = XiLowerMethod::SortedSample;
    sorted.mc_n = 200000;
    auto q = xi_l(m, quad), s = xi_l(m, sorted);
    CHECK(q.method == Method::Analytic);
    CHECK(s.method == Method::MonteCarlo);
    CHECK(s.se > 0.0);
    CHECK(std::abs(q.value - s.value) <= 4 * s.se + 2e-3);
}
