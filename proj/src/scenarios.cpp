#include "cfh/scenarios.hpp"
#include "cfh/coupling.hpp"
#include "cfh/estimands.hpp"

#include <json.hpp>

#include <cmath>
#include <set>
#include <stdexcept>

namespace cfh {

namespace {

const char* const kPX = "discrete(0:1/16, 0.5:4/16, 1:6/16, 1.5:4/16, 2:1/16)";

const std::vector<std::string> kPhenotypes = {
    "g1 + g2 + e1",      "g1*g2 + e1",      "g1*e2 + e1",      "g1 + x1 + e1",      "g1*x1 + e1",
    "ind(g1 + g2 + e1)", "ind(g1*g2 + e1)", "ind(g1*e2 + e1)", "ind(g1 + x1 + e1)", "ind(g1*x1 + e1)",
};

bool uses(const std::string& phenotype, const std::string& sym) { return phenotype.find(sym) != std::string::npos; }

std::string table1_text(const std::string& phenotype) {
    std::string t = "mode = population\n";
    t += "symbol g1 : genotype ~ bernoulli(0.5)\n";
    t += "symbol g2 : genotype ~ bernoulli(0.5)\n";
    if (uses(phenotype, "x1")) t += "symbol x1 : observed ~ normal(0, 0.25)\n";
    t += "symbol e1 : latent ~ normal(0, 0.25)\n";
    if (uses(phenotype, "e2")) t += "symbol e2 : latent ~ normal(0, 0.25)\n";
    return t + "phenotype = " + phenotype + "\n";
}

}  // namespace

std::string scenario_model_text(int table, int row) {
    if (table != 2 && table != 3) throw std::invalid_argument("built-in scenarios exist for tables 2 and 3");
    if (row < 1 || row > 10) throw std::invalid_argument("table rows are numbered 1 to 10");
    const std::string& ph = kPhenotypes[static_cast<std::size_t>(row - 1)];
    std::string t = table == 2 ? "mode = population\n" : "mode = within_family\n";
    t += "symbol g1 : genotype ~ hwe(0.5)\n";
    t += "symbol g2 : genotype ~ hwe(0.5)\n";
    if (uses(ph, "x1")) {
        if (table == 2)
            t += std::string("symbol x1 : observed ~ ") + kPX + "\n";
        else
            t += "symbol x1 : derived = (g1f + g1m)/2\n";
    }
    t += "symbol e1 : latent ~ normal(0, 0.5)\n";
    if (uses(ph, "e2")) t += std::string("symbol e2 : latent ~ ") + kPX + "\n";
    return t + "phenotype = " + ph + "\n";
}

std::vector<Table1Row> table1_rows(const Table1Params& p) {
    const double b = p.beta, b1 = p.beta1, b2 = p.beta2;
    auto num = [](double v) { return "(" + format_number(v) + ")"; };
    std::vector<Table1Row> rows;

    double s = b1 * b1 + b2 * b2;
    double r1 = s / (s + 1.0);
    rows.push_back({1, "beta1 g1 + beta2 g2 + E1",
                    parse_model(table1_text(num(b1) + "*g1 + " + num(b2) + "*g2 + e1")),
                    {r1, r1, r1, r1, r1, 1.0}});

    double d2 = 4.0 + 3.0 * b * b;
    double r2 = 3.0 * b * b / d2;
    rows.push_back({2, "beta g1 g2 + E1", parse_model(table1_text(num(b) + "*g1*g2 + e1")),
                    {2.0 * b * b / d2, r2, r2, r2, r2, 1.0}});

    double d3 = 4.0 + 2.0 * b * b;
    double l3 = std::pow(std::sqrt(b * b + 1.0) - 1.0, 2) / d3;
    rows.push_back({3, "beta g1 E2 + E1", parse_model(table1_text(num(b) + "*g1*e2 + e1")),
                    {0.0, 0.0, b * b / d3, 0.0, l3, 1.0}});

    double d4 = b1 * b1 + b2 * b2 + 1.0;
    double r4 = b1 * b1 / d4;
    rows.push_back({4, "beta1 g1 + beta2 X + E1",
                    parse_model(table1_text(num(b1) + "*g1 + " + num(b2) + "*x1 + e1")),
                    {r4, r4, r4, r4, r4, (1.0 + b1 * b1) / d4}});

    double r5 = b * b / d3;
    rows.push_back({5, "beta g1 X + E1", parse_model(table1_text(num(b) + "*g1*x1 + e1")),
                    {0.0, 0.0, r5, r5, r5, (4.0 + b * b) / d3}});
    return rows;
}

std::vector<ScenarioRow> table_scenarios(int table) {
    if (table != 2 && table != 3) throw std::invalid_argument("built-in scenarios exist for tables 2 and 3");
    auto doc = nlohmann::json::parse(reference_tables_json());
    const auto& t = doc.at("tables").at(std::to_string(table));
    std::vector<std::string> columns = t.at("columns").get<std::vector<std::string>>();
    std::vector<ScenarioRow> rows;
    for (const auto& r : t.at("rows")) {
        ScenarioRow sr;
        sr.table = table;
        sr.row = r.at("row").get<int>();
        sr.label = r.at("phenotype").get<std::string>();
        sr.model = parse_model(scenario_model_text(table, sr.row));
        sr.columns = columns;
        for (const auto& c : columns) sr.reference.push_back(r.at("values").at(c).get<double>());
        rows.push_back(std::move(sr));
    }
    return rows;
}

std::vector<TableCell> run_table(int table, const EngineOptions& options, double tolerance) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    std::vector<TableCell> cells;
    for (const auto& sr : table_scenarios(table)) {
        Analysis a({sr.model}, options);
        CounterfactualKind kind = default_kind(sr.model.mode);
        auto mb = moment_bounds(a);
        for (std::size_t c = 0; c < sr.columns.size(); ++c) {
            const std::string& name = sr.columns[c];
            Estimate e;
            if (name == "narrow_h2")
                e = narrow_h2(a);
            else if (name == "broad_H2")
                e = broad_h2(a);
            else if (name == "xi")
                e = xi(a, kind);
            else if (name == "h2_twin")
                e = twin_quantities(a).h2_twin;
            else if (name == "xi_l_prime")
                e = mb.xi_l_prime;
            else if (name == "xi_l")
                e = xi_l(a);
            else if (name == "xi_u_prime")
                e = mb.xi_u_prime;
            else
                throw std::logic_error("unknown reference column '" + name + "'");
            TableCell cell;
            cell.row = sr.row;
            cell.label = sr.label;
            cell.estimand = name;
            cell.estimate = e;
            cell.reference = sr.reference[c];
            cell.delta = e.value - cell.reference;
            cell.pass = std::abs(cell.delta) <= tolerance;
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

}  // namespace cfh
