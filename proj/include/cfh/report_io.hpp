// CSV and Markdown rendering of reports and table comparisons.
//
// CSV schema: estimand,value,method,stderr,paper_value,delta,pass
// Values use six decimals; empty fields mean "not applicable".
#pragma once

#include "cfh/empirical.hpp"
#include "cfh/estimands.hpp"
#include "cfh/scenarios.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cfh {

struct ReportRow {
    std::string estimand;
    Estimate estimate;
    std::optional<double> paper_value;
    std::optional<bool> pass;
};

std::vector<ReportRow> rows_from_report(const HeritabilityReport& report);
// Estimand names are prefixed with the row, e.g. "row3.xi_l".
std::vector<ReportRow> rows_from_table(const std::vector<TableCell>& cells);
std::vector<ReportRow> rows_from_bounds(const EmpiricalBounds& bounds);

std::string format_fixed(double v, int decimals = 6);

std::string to_csv(const std::vector<ReportRow>& rows);
// `notes` are emitted as bullet lines above the table.
std::string to_markdown(const std::vector<ReportRow>& rows, const std::string& title,
                        const std::vector<std::string>& notes = {});

}  // namespace cfh
