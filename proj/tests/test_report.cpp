// Report rendering and the built-in table scenarios.
#include "cfh/report_io.hpp"
#include "cfh/scenarios.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace cfh;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("fixed-point formatting", "[report]") {
    CHECK(format_fixed(0.5) == "0.500000");
    CHECK(format_fixed(-1e-9) == "0.000000");
    CHECK(format_fixed(1.0 / 3.0, 2) == "0.33");
    CHECK(format_fixed(-2.5, 1) == "-2.5");
}

TEST_CASE("CSV layout", "[report]") {
    std::vector<ReportRow> rows{{"xi", {0.25, 0.0, Method::Analytic}, 0.25, true},
                                {"xi_l", {0.1, 0.002, Method::MonteCarlo}, 0.2, false},
                                {"h2", {0.5, 0.01, Method::PlugIn}, std::nullopt, std::nullopt}};
    auto l = lines(to_csv(rows));
    REQUIRE(l.size() == 4);
    CHECK(l[0] == "estimand,value,method,stderr,paper_value,delta,pass");
    CHECK(l[1] == "xi,0.250000,analytic,,0.25,0.000000,PASS");
    CHECK(l[2] == "xi_l,0.100000,monte-carlo,0.002000,0.20,-0.100000,FAIL");
    CHECK(l[3] == "h2,0.500000,plug-in,0.010000,,,");
}

TEST_CASE("Markdown layout", "[report]") {
    std::vector<ReportRow> rows{{"xi", {0.25, 0.0, Method::Analytic}, std::nullopt, std::nullopt}};
    auto l = lines(to_markdown(rows, "Title", {"a note"}));
    CHECK(l[0] == "## Title");
    CHECK(l[2] == "- a note");
    CHECK(l[4] == "| estimand | value | method | stderr | paper_value | delta | pass |");
    CHECK(l[6] == "| xi | 0.250000 | analytic |  |  |  |  |");
}

TEST_CASE("embedded reference tables", "[scenarios]") {
    auto t2 = table_scenarios(2);
    auto t3 = table_scenarios(3);
    REQUIRE(t2.size() == 10);
    REQUIRE(t3.size() == 10);
    CHECK(t2[0].columns.size() == 6);
    CHECK(t3[0].columns.size() == 7);
    CHECK(t2[2].label == "g1*e2+e1");
    CHECK(t2[5].reference[1] == 0.30);
    CHECK(t3[1].reference[3] == 0.79);
    CHECK(t3[0].model.mode == FamilyMode::WithinFamily);
    CHECK_THROWS_AS(table_scenarios(4), std::invalid_argument);
}

TEST_CASE("scenario model text declares only used symbols", "[scenarios]") {
    auto t = scenario_model_text(2, 1);
    CHECK(t.find("x1") == std::string::npos);
    CHECK(t.find("e2") == std::string::npos);
    CHECK(scenario_model_text(3, 4).find("derived = (g1f + g1m)/2") != std::string::npos);
    CHECK(scenario_model_text(2, 4).find("x1 : observed") != std::string::npos);
    CHECK_THROWS_AS(scenario_model_text(2, 11), std::invalid_argument);
}

TEST_CASE("Table 1 models cover five rows", "[scenarios]") {
    auto rows = table1_rows({2.0, 0.5, 1.0});
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].closed_form[0] == Catch::Approx((0.25 + 1.0) / (0.25 + 1.0 + 1.0)));
    CHECK(rows[2].model.find("x1") == nullptr);
    CHECK(rows[3].model.find("x1") != nullptr);
}

TEST_CASE("Table 3 reproduces every cell", "[scenarios]") {
    EngineOptions o;
    o.mc_n = 20000;
    auto cells = run_table(3, o, 0.01);
    REQUIRE(cells.size() == 70);
    for (const auto& c : cells) {
        INFO("row " << c.row << " " << c.estimand << " = " << c.estimate.value << " vs " << c.reference);
        CHECK(c.pass);
    }
    auto rows = rows_from_table(cells);
    CHECK(rows[0].estimand == "row1.narrow_h2");
    CHECK_THROWS_AS(run_table(3, o, 0.0), std::invalid_argument);
}
