#include "cfh/report_io.hpp"

#include <charconv>
#include <cmath>

namespace cfh {

std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // Avoid printing -0.000000.
    if (std::abs(v) < 0.5 * std::pow(10.0, -decimals)) v = 0.0;
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
    (void)ec;
    return std::string(buf, p);
}

std::vector<ReportRow> rows_from_report(const HeritabilityReport& report) {
    std::vector<ReportRow> rows;
    for (const auto& e : report.entries) rows.push_back({e.name, e.estimate, std::nullopt, std::nullopt});
    return rows;
}

std::vector<ReportRow> rows_from_table(const std::vector<TableCell>& cells) {
    std::vector<ReportRow> rows;
    for (const auto& c : cells)
        rows.push_back({"row" + std::to_string(c.row) + "." + c.estimand, c.estimate, c.reference, c.pass});
    return rows;
}

std::vector<ReportRow> rows_from_bounds(const EmpiricalBounds& b) {
    std::vector<ReportRow> rows{{"xi_l_prime", b.xi_l_prime, std::nullopt, std::nullopt},
                                {"xi_l", b.xi_l, std::nullopt, std::nullopt},
                                {"xi_u_prime", b.xi_u_prime, std::nullopt, std::nullopt}};
    if (b.xi_u) rows.push_back({"xi_u", *b.xi_u, std::nullopt, std::nullopt});
    return rows;
}

namespace {

std::vector<std::string> fields(const ReportRow& r) {
    std::string se = r.estimate.method == Method::Analytic ? "" : format_fixed(r.estimate.se);
    std::string ref = r.paper_value ? format_fixed(*r.paper_value, 2) : "";
    std::string delta = r.paper_value ? format_fixed(r.estimate.value - *r.paper_value) : "";
    std::string pass = r.pass ? (*r.pass ? "PASS" : "FAIL") : "";
    return {r.estimand, format_fixed(r.estimate.value), to_string(r.estimate.method), se, ref, delta, pass};
}

}  // namespace

std::string to_csv(const std::vector<ReportRow>& rows) {
    std::string out = "estimand,value,method,stderr,paper_value,delta,pass\n";
    for (const auto& r : rows) {
        auto f = fields(r);
        for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
        out += '\n';
    }
    return out;
}

std::string to_markdown(const std::vector<ReportRow>& rows, const std::string& title,
                        const std::vector<std::string>& notes) {
    std::string out;
    if (!title.empty()) out += "## " + title + "\n\n";
    for (const auto& n : notes) out += "- " + n + "\n";
    if (!notes.empty()) out += "\n";
    out += "| estimand | value | method | stderr | paper_value | delta | pass |\n";
    out += "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        auto f = fields(r);
        out += "|";
        for (const auto& x : f) out += " " + x + " |";
        out += "\n";
    }
    return out;
}

}  // namespace cfh
