// cfh -- command-line front end.
//
//   cfh report <model-file> [--kind K] [--format csv|markdown]
//   cfh table1 [--beta B] [--beta1 B1] [--beta2 B2]
//   cfh table2 | table3 [--seed S] [--tol T] [--mc-n N] [--xi-l sorted|quadrature]
//   cfh estimate --data FILE --g COLS... --y COL [--x COLS...] [--bootstrap R]
//   cfh plant --design FILE [--simulate R]
//   cfh simulate <model-file> --n N --out FILE
//
// Exit codes: 0 success, 1 a table comparison or report invariant failed,
// 2 invalid input. CFH_SEED sets the default seed.
#include "cfh/coupling.hpp"
#include "cfh/empirical.hpp"
#include "cfh/estimands.hpp"
#include "cfh/moments.hpp"
#include "cfh/plant.hpp"
#include "cfh/report_io.hpp"
#include "cfh/scenarios.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace cfh;

std::uint64_t default_seed() {
    if (const char* s = std::getenv("CFH_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("CFH_SEED is not an integer: '") + s + "'");
        }
    }
    return EngineOptions{}.seed;
}

struct Common {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t mc_n = 1'000'000;
    std::size_t threads = 0;
    std::string format = "csv";

    EngineOptions options() const {
        EngineOptions o;
        o.seed = seed_set ? seed : default_seed();
        o.mc_n = mc_n;
        o.threads = threads;
        return o;
    }
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&c](const std::uint64_t& s) { c.seed = s, c.seed_set = true; }, "random seed (default $CFH_SEED)");
    sub->add_option("--mc-n", c.mc_n, "Monte Carlo draws per stratum")->check(CLI::PositiveNumber);
    sub->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "markdown"}));
}

void emit(const Common& c, const std::vector<ReportRow>& rows, const std::string& title,
          const std::vector<std::string>& notes) {
    if (c.format == "markdown") {
        std::cout << to_markdown(rows, title, notes);
    } else {
        for (const auto& n : notes) std::cerr << "# " << n << '\n';
        std::cout << to_csv(rows);
    }
}

int run_report(const Common& c, const std::string& path, const std::string& kind) {
    PhenotypeModel m = load_model(path);
    std::optional<CounterfactualKind> k;
    if (!kind.empty()) k = parse_kind(kind);
    HeritabilityReport rep = report(m, c.options(), k);
    std::vector<std::string> notes{"model digest " + rep.digest, "counterfactual kind " + to_string(rep.kind),
                                   "engine class " + to_string(rep.engine_class)};
    for (const auto& w : rep.warnings) notes.push_back("warning: " + w);
    emit(c, rows_from_report(rep), "Heritability report", notes);
    return 0;
}

int run_table1(const Common& c, const Table1Params& p) {
    EngineOptions o = c.options();
    std::vector<ReportRow> rows;
    bool ok = true;
    for (const auto& r : table1_rows(p)) {
        Analysis a({r.model}, o);
        auto mb = moment_bounds(a);
        std::array<Estimate, 6> v{narrow_h2(a), broad_h2(a), xi(a, CounterfactualKind::Unrelated),
                                  mb.xi_l_prime, xi_l(a), mb.xi_u_prime};
        for (std::size_t k = 0; k < v.size(); ++k) {
            bool pass = std::abs(v[k].value - r.closed_form[k]) <= 1e-9;
            ok = ok && pass;
            rows.push_back({"row" + std::to_string(r.row) + "." + kTable1Columns[k], v[k], r.closed_form[k], pass});
        }
    }
    // Closed forms are printed in the paper_value column with two decimals in
    // markdown; the CSV keeps them for the delta column.
    emit(c, rows, "Table 1 at beta=" + format_number(p.beta) + ", beta1=" + format_number(p.beta1) +
                      ", beta2=" + format_number(p.beta2),
         {"paper_value holds the closed-form column evaluated at these parameters"});
    return ok ? 0 : 1;
}

int run_table(const Common& c, int table, double tol, const std::string& xi_l_method) {
    if (c.mc_n < 10'000) throw std::invalid_argument("table reproduction needs --mc-n >= 10000");
    EngineOptions o = c.options();
    o.xi_l_method = xi_l_method == "quadrature" ? XiLowerMethod::Quadrature : XiLowerMethod::SortedSample;
    auto cells = run_table(table, o, tol);
    std::size_t failed = 0;
    for (const auto& cell : cells)
        if (!cell.pass) ++failed;
    emit(c, rows_from_table(cells), "Table " + std::to_string(table),
         {std::to_string(cells.size() - failed) + " of " + std::to_string(cells.size()) + " cells within " +
          format_number(tol)});
    return failed == 0 ? 0 : 1;
}

int run_estimate(const Common& c, const std::string& data, const TableSchema& schema, std::size_t bootstrap) {
    Dataset d = load_table(data, schema);
    EngineOptions o = c.options();
    EmpiricalBounds b = estimate_bounds(d, bootstrap, o.seed, o.threads);
    std::vector<std::string> notes{std::to_string(b.rows_used) + " rows in " + std::to_string(b.cells_used) +
                                       " cells",
                                   "xi_l uses interpolated empirical quantile coupling (plug-in construction)"};
    for (const auto& w : b.warnings) notes.push_back("warning: " + w);
    emit(c, rows_from_bounds(b), "Plug-in bounds", notes);
    return 0;
}

int run_plant(const Common& c, const std::string& path, std::size_t simulate) {
    PlantDesign d = load_plant_design(path);
    PlantHeritability h = plant_heritability(d);
    std::vector<ReportRow> rows{{"xi", {h.xi, 0.0, Method::Analytic}, std::nullopt, std::nullopt},
                                {"h2_plant", {h.h2_plant, 0.0, Method::Analytic}, std::nullopt, std::nullopt}};
    if (simulate > 0) {
        EngineOptions o = c.options();
        PlantSimulation s = simulate_plant(d, simulate, o.seed, o.threads);
        rows.push_back({"xi_simulated", s.xi, std::nullopt, std::nullopt});
        if (s.h2_plant) rows.push_back({"h2_plant_simulated", *s.h2_plant, std::nullopt, std::nullopt});
    }
    emit(c, rows, "Entry-mean heritability", {std::string("design mode ") +
                                                  (d.mode == PlantMode::Fixed ? "fixed" : "random")});
    return 0;
}

int run_simulate(const Common& c, const std::string& path, std::size_t n, const std::string& out,
                 const std::string& coupling) {
    PhenotypeModel m = load_model(path);
    EngineOptions o = c.options();
    SampleTable t = mc_sample(m, n, o.seed, coupling == "none" ? Coupling::None : Coupling::SharedEnvPair, o.threads);
    write_sample_csv(t, out);
    std::cerr << "wrote " << t.rows() << " rows to " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual heritability and its bounds"};
    app.require_subcommand(1);
    Common common;

    auto* rep = app.add_subcommand("report", "full heritability report for a model file");
    std::string model_path, kind;
    rep->add_option("model", model_path, "model file")->required();
    rep->add_option("--kind", kind, "counterfactual kind")->check(CLI::IsMember({"unrelated", "fraternal", "adopted"}));
    add_common(rep, common);

    auto* t1 = app.add_subcommand("table1", "evaluate the Table 1 models against their closed forms");
    Table1Params p1;
    t1->add_option("--beta", p1.beta, "beta for the single-coefficient rows");
    t1->add_option("--beta1", p1.beta1, "beta1 for the two-coefficient rows");
    t1->add_option("--beta2", p1.beta2, "beta2 for the two-coefficient rows");
    add_common(t1, common);

    double tol = 0.01;
    std::string xi_l_method = "sorted";
    std::vector<CLI::App*> tables;
    for (const char* name : {"table2", "table3"}) {
        auto* t = app.add_subcommand(name, std::string("reproduce ") + (name[5] == '2' ? "Table 2" : "Table 3"));
        t->add_option("--tol", tol, "comparison tolerance")->check(CLI::PositiveNumber);
        t->add_option("--xi-l", xi_l_method, "xi_l method")->check(CLI::IsMember({"sorted", "quadrature"}));
        add_common(t, common);
        tables.push_back(t);
    }

    auto* est = app.add_subcommand("estimate", "plug-in bounds from a CSV file");
    std::string data_path;
    TableSchema schema;
    std::size_t bootstrap = 200;
    est->add_option("--data", data_path, "CSV file with a header row")->required();
    est->add_option("--x", schema.x, "observed covariate columns");
    est->add_option("--g", schema.g, "genotype columns")->required();
    est->add_option("--y", schema.y, "phenotype column")->required();
    est->add_option("--bootstrap", bootstrap, "bootstrap replicates")->check(CLI::PositiveNumber);
    add_common(est, common);

    auto* pl = app.add_subcommand("plant", "entry-mean heritability for a trial design");
    std::string design_path;
    std::size_t plant_reps = 0;
    pl->add_option("--design", design_path, "JSON design file")->required();
    pl->add_option("--simulate", plant_reps, "also simulate this many trials");
    add_common(pl, common);

    auto* sim = app.add_subcommand("simulate", "export a synthetic sample of (X, G, Y) rows");
    std::string sim_model, sim_out, coupling = "shared";
    std::size_t sim_n = 0;
    sim->add_option("model", sim_model, "model file")->required();
    sim->add_option("--n", sim_n, "rows")->required()->check(CLI::PositiveNumber);
    sim->add_option("--out", sim_out, "output CSV")->required();
    sim->add_option("--coupling", coupling, "Y' coupling")->check(CLI::IsMember({"shared", "none"}));
    add_common(sim, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (rep->parsed()) return run_report(common, model_path, kind);
        if (t1->parsed()) return run_table1(common, p1);
        if (tables[0]->parsed()) return run_table(common, 2, tol, xi_l_method);
        if (tables[1]->parsed()) return run_table(common, 3, tol, xi_l_method);
        if (est->parsed()) return run_estimate(common, data_path, schema, bootstrap);
        if (pl->parsed()) return run_plant(common, design_path, plant_reps);
        if (sim->parsed()) return run_simulate(common, sim_model, sim_n, sim_out, coupling);
    } catch (const InconsistencyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
