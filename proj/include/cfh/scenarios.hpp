// =============================================================================
// scenarios.hpp -- built-in table scenarios and their reference values.
//
// Table 1: g1, g2 ~ bernoulli(1/2); x1 observed ~ N(0, 1/4); e1, e2 latent
//          ~ N(0, 1/4); population mode.
// Table 2: g1, g2 ~ hwe(1/2); e1 ~ N(0, 1/2); e2 and observed x1 ~ P_X with
//          P_X = {0:1/16, 0.5:4/16, 1:6/16, 1.5:4/16, 2:1/16}; population mode.
// Table 3: as Table 2 in within_family mode with x1 = (g1f + g1m)/2 and the
//          fraternal counterfactual.
// =============================================================================
#pragma once

#include "cfh/engine.hpp"
#include "cfh/model.hpp"

#include <array>
#include <string>
#include <vector>

namespace cfh {

struct Table1Params {
    double beta = 1.0;
    double beta1 = 1.0;
    double beta2 = 1.0;
};

inline const std::vector<std::string> kTable1Columns = {"narrow_h2", "broad_H2", "xi",
                                                        "xi_l_prime", "xi_l", "xi_u_prime"};

struct Table1Row {
    int row = 0;
    std::string label;
    PhenotypeModel model;
    std::array<double, 6> closed_form{};  // in kTable1Columns order
};

std::vector<Table1Row> table1_rows(const Table1Params& params);

struct ScenarioRow {
    int table = 0;
    int row = 0;
    std::string label;
    PhenotypeModel model;
    std::vector<std::string> columns;
    std::vector<double> reference;  // two-decimal reference values, aligned with columns
};

// Table 2 or 3; throws std::invalid_argument for any other id.
std::vector<ScenarioRow> table_scenarios(int table);

// Model text for a row of Table 2 or 3, e.g. to save and edit.
std::string scenario_model_text(int table, int row);

struct TableCell {
    int row = 0;
    std::string label;
    std::string estimand;
    Estimate estimate;
    double reference = 0.0;
    double delta = 0.0;
    bool pass = false;
};

// Computes every reference cell of Table 2 or 3 and compares at `tolerance`.
std::vector<TableCell> run_table(int table, const EngineOptions& options, double tolerance);

// Embedded copy of data/reference_tables.json.
const char* reference_tables_json();

}  // namespace cfh
