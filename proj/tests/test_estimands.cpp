// Heritability estimands, counterfactual kinds, twins, sibling models, reports.
#include "cfh/coupling.hpp"
#include "cfh/estimands.hpp"
#include "cfh/genetics.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace cfh;
using Catch::Matchers::WithinAbs;

namespace {

const std::string kPop = "mode = population\n"
                         "symbol g1 : genotype ~ hwe(0.5)\n"
                         "symbol g2 : genotype ~ hwe(0.5)\n"
                         "symbol x1 : observed ~ discrete(0:1/16, 0.5:4/16, 1:6/16, 1.5:4/16, 2:1/16)\n"
                         "symbol e1 : latent ~ normal(0, 0.5)\n"
                         "symbol e2 : latent ~ discrete(0:1/16, 0.5:4/16, 1:6/16, 1.5:4/16, 2:1/16)\n";

PhenotypeModel pop(const std::string& ph) { return parse_model(kPop + "phenotype = " + ph + "\n"); }

PhenotypeModel one_locus_family(double p, double a, double d, double var_f, double var_e) {
    // f(0) = -a, f(1) = d, f(2) = a, written as a polynomial in the dosage.
    // f(g) = -a + (a + d) g + (-d) g (g - 1) ... expanded: -a + (a + 2d) g - d g^2.
    std::string f = format_number(-a) + " + " + format_number(a + 2 * d) + "*g + " + format_number(-d) + "*g*g";
    return parse_model("mode = within_family\nsymbol g : genotype ~ hwe(" + format_number(p) +
                       ")\nsymbol fam : family ~ normal(0, " + format_number(var_f) +
                       ")\nsymbol e : latent ~ normal(0, " + format_number(var_e) + ")\nphenotype = " + f +
                       " + fam + e\n");
}

}  // namespace

TEST_CASE("broad and narrow heritability of an epistatic model", "[estimands]") {
    // g1 g2: E = 1, E^2 = 9/4, Var = 5/4; additive projection g1 + g2 - 1, Var 1.
    auto m = pop("g1*g2 + e1");
    CHECK_THAT(broad_h2(m).value, WithinAbs(1.25 / 1.75, 1e-12));
    CHECK_THAT(narrow_h2(m).value, WithinAbs(1.0 / 1.75, 1e-12));
}

TEST_CASE("narrow heritability with collinear dosages uses the minimum-norm fit", "[estimands]") {
    auto m = parse_model("mode = population\nsymbol g : genotype ~ hwe(0.5)\n"
                         "symbol h : genotype ~ discrete(1:1)\nsymbol e : latent ~ normal(0, 1)\n"
                         "phenotype = g + h + e\n");
    CHECK_THAT(narrow_h2(m).value, WithinAbs(0.5 / 1.5, 1e-12));
}

TEST_CASE("population xi with a latent interaction", "[estimands]") {
    // D = (G - G') e2: E D^2 = 2 Var(G) E e2^2 = 1.25; Var Y = 1.375.
    auto m = pop("g1*e2 + e1");
    CHECK_THAT(xi(m, CounterfactualKind::Unrelated).value, WithinAbs(1.25 / 2.75, 1e-12));
    Analysis a({m}, EngineOptions{});
    CHECK_THAT(potential_outcome_correlation(a).value, WithinAbs(1 - 1.25 / 2.75, 1e-12));
    CHECK_THROWS_AS(xi(m, CounterfactualKind::Fraternal), std::invalid_argument);
}

TEST_CASE("moment bounds", "[estimands]") {
    auto mb = moment_bounds(pop("g1*x1 + e1"));
    CHECK_THAT(mb.xi_l_prime.value, WithinAbs(0.625 / 1.375, 1e-12));
    CHECK_THAT(mb.xi_u_prime.value, WithinAbs(1.125 / 1.375, 1e-12));
}

TEST_CASE("counterfactual kind names", "[estimands]") {
    CHECK(parse_kind("fraternal") == CounterfactualKind::Fraternal);
    CHECK(to_string(CounterfactualKind::Adopted) == "adopted");
    CHECK(default_kind(FamilyMode::Population) == CounterfactualKind::Unrelated);
    CHECK(default_kind(FamilyMode::WithinFamily) == CounterfactualKind::Fraternal);
    CHECK_THROWS_AS(parse_kind("cousin"), std::invalid_argument);
}

TEST_CASE("twin quantities for one locus", "[estimands][twins]") {
    double p = 0.3, a = 1.0, d = 0.5, vf = 0.4, ve = 1.0;
    auto m = one_locus_family(p, a, d, vf, ve);
    AlleleFrequency f(p);
    OneLocusEffects fx{a, d, 0.0};
    double va = additive_variance(f, fx), vd = dominance_variance(f, fx);
    double vy = va + vd + vf + ve;
    auto t = twin_quantities(m);
    CHECK_THAT(t.rho_mz.value, WithinAbs((va + vd + vf) / vy, 1e-12));
    CHECK_THAT(t.rho_dz.value, WithinAbs((0.5 * va + 0.25 * vd + vf) / vy, 1e-12));
    CHECK_THAT(t.h2_twin.value, WithinAbs((va + 1.5 * vd) / vy, 1e-12));
    CHECK_THAT(xi(m, CounterfactualKind::Fraternal).value, WithinAbs((0.5 * va + 0.75 * vd) / vy, 1e-12));
    CHECK_THROWS_AS(twin_quantities(pop("g1 + e1")), std::invalid_argument);
}

TEST_CASE("unrelated kind in within-family mode", "[estimands]") {
    // Additive, no family or derived symbols: unrelated xi is Var(f(G)) / Var(Y).
    auto m = one_locus_family(0.5, 1.0, 0.0, 0.0, 1.0);
    CHECK_THAT(xi(m, CounterfactualKind::Unrelated).value, WithinAbs(0.5 / 1.5, 1e-12));
    // Adopted: G'' from an unrelated family, so also unrelated to G.
    CHECK_THAT(xi(m, CounterfactualKind::Adopted).value, WithinAbs(0.5 / 1.5, 1e-12));
}

TEST_CASE("sibling model without indirect effects", "[estimands][rdr]") {
    SiblingModel s;
    s.p = 0.5;
    s.f_direct = parse_expression("g");
    s.f_indirect = parse_expression("0");
    s.var_f = 0.0;
    s.var_e = 0.5;
    auto q = rdr_quantities(s);
    CHECK_THAT(q.h2_rdr.value, WithinAbs(0.5, 1e-12));
    CHECK_THAT(q.xi_fraternal.value, WithinAbs(0.25, 1e-12));
}

TEST_CASE("negative indirect effects push adopted xi above one", "[estimands][rdr]") {
    SiblingModel s;
    s.p = 0.5;
    s.f_direct = parse_expression("g");
    s.f_indirect = parse_expression("-0.5*g");
    s.var_f = 0.0;
    s.var_e = 0.05;
    // Var(G - Gs/2) = 1/2 + 1/8 - 1/4; Var Y = 0.425.
    auto q = rdr_quantities(s);
    CHECK_THAT(q.h2_rdr.value, WithinAbs(0.5 / 0.425, 1e-12));
    CHECK_THAT(q.xi_adopted.value, WithinAbs(0.5 / 0.425, 1e-12));
    auto rep = report(s.to_model());
    bool warned = false;
    for (const auto& w : rep.warnings) warned = warned || w.find("adopted") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("genetic correlation between two traits", "[estimands]") {
    auto y = pop("g1 + e1");
    auto z = pop("g1 + g2 + e1");
    // Shared e1 cancels in the differences: Cov(Dy, Dz) = E (G1 - G1')^2 = 1.
    auto r = genetic_correlation(y, z);
    CHECK_THAT(r.value, WithinAbs(1.0 / (2 * std::sqrt(1.0 * 1.5)), 1e-12));
    CHECK_THAT(genetic_correlation(y, y).value, WithinAbs(0.5, 1e-12));  // equals xi for Y = Z
}

TEST_CASE("report lists every estimand and satisfies the bound chain", "[estimands][report]") {
    auto rep = report(pop("g1*x1 + e1"));
    for (const char* n : {"narrow_h2", "broad_H2", "xi", "xi_l_prime", "xi_l", "xi_u", "xi_u_prime"})
        CHECK(rep.find(n) != nullptr);
    CHECK(rep.find("h2_twin") == nullptr);
    CHECK_THROWS_AS(rep.value("h2_twin"), std::out_of_range);
    CHECK(rep.kind == CounterfactualKind::Unrelated);
    CHECK(rep.digest.size() == 16);
    double l = rep.value("xi_l"), x = rep.value("xi"), lp = rep.value("xi_l_prime");
    CHECK(lp <= l + 1e-12);
    CHECK(l <= x + 1e-12);
    CHECK(x <= std::min(rep.value("xi_u"), rep.value("xi_u_prime")) + 1e-12);

    auto fam = report(one_locus_family(0.4, 1.0, 0.3, 0.2, 1.0));
    for (const char* n : {"h2_twin", "rho_MZ", "rho_DZ", "xi_adopted"}) CHECK(fam.find(n) != nullptr);
    CHECK(fam.kind == CounterfactualKind::Fraternal);
}
