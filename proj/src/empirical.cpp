#include "cfh/empirical.hpp"
#include "cfh/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace cfh {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    return ec == std::errc() && p == e && std::isfinite(v);
}

// Interpolated empirical quantile at u in (0,1).
double interp_quantile(const std::vector<double>& v, double u) {
    const std::size_t n = v.size();
    double pos = u * static_cast<double>(n) - 0.5;
    if (pos <= 0.0) return v.front();
    if (pos >= static_cast<double>(n - 1)) return v.back();
    auto i = static_cast<std::size_t>(pos);
    double f = pos - static_cast<double>(i);
    return v[i] + f * (v[i + 1] - v[i]);
}

double coupled_msd(const std::vector<double>& a, const std::vector<double>& b, bool counter) {
    if (a.size() == b.size()) {
        const std::size_t n = a.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = a[i] - (counter ? b[n - 1 - i] : b[i]);
            s += d * d;
        }
        return s / static_cast<double>(n);
    }
    const std::size_t m = std::max(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double u = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        double d = interp_quantile(a, u) - interp_quantile(b, counter ? 1.0 - u : u);
        s += d * d;
    }
    return s / static_cast<double>(m);
}

struct CellData {
    std::size_t x_group = 0;
    std::size_t g_id = 0;
    std::vector<double> sorted;
};

// {xi_l', xi_u', xi_l, xi_u or NaN}; cells with fewer than two values are skipped.
std::vector<double> plug_in(const std::vector<CellData>& cells, std::size_t n_groups, bool binary) {
    struct Stat {
        double n = 0, mean = 0, var = 0;
    };
    std::vector<Stat> st(cells.size());
    std::vector<double> gn(n_groups, 0.0), gsum(n_groups, 0.0), gss(n_groups, 0.0);
    double n = 0.0, sum = 0.0, ss = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& v = cells[c].sorted;
        if (v.size() < 2) continue;
        double s1 = 0.0;
        for (double y : v) s1 += y;
        double m = s1 / static_cast<double>(v.size());
        double s2 = 0.0;
        for (double y : v) s2 += (y - m) * (y - m);
        st[c] = {static_cast<double>(v.size()), m, s2 / static_cast<double>(v.size() - 1)};
        std::size_t x = cells[c].x_group;
        gn[x] += st[c].n;
        gsum[x] += s1;
        gss[x] += s2 + st[c].n * m * m;
        n += st[c].n;
        sum += s1;
        ss += s2 + st[c].n * m * m;
    }
    if (n < 2.0) throw DegeneratePhenotype();
    double mean = sum / n;
    double var_y = (ss - n * mean * mean) / (n - 1.0);
    require_positive_variance(var_y, ss / n);

    double e_var_x = 0.0, e_var_mean = 0.0;
    for (std::size_t x = 0; x < n_groups; ++x) {
        if (gn[x] < 2.0) continue;
        double mx = gsum[x] / gn[x];
        e_var_x += gn[x] / n * (gss[x] - gn[x] * mx * mx) / (gn[x] - 1.0);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (st[c].n < 2.0) continue;
        std::size_t x = cells[c].x_group;
        double mx = gsum[x] / gn[x];
        e_var_mean += st[c].n / n * (st[c].mean - mx) * (st[c].mean - mx);
    }

    double co = 0.0, counter = 0.0;
    for (std::size_t a = 0; a < cells.size(); ++a) {
        if (st[a].n < 2.0) continue;
        for (std::size_t b = a + 1; b < cells.size(); ++b) {
            if (st[b].n < 2.0 || cells[b].x_group != cells[a].x_group) continue;
            double gx = gn[cells[a].x_group];
            double wt = 2.0 * (gx / n) * (st[a].n / gx) * (st[b].n / gx);
            co += wt * coupled_msd(cells[a].sorted, cells[b].sorted, false);
            if (binary) counter += wt * coupled_msd(cells[a].sorted, cells[b].sorted, true);
        }
    }
    return {e_var_mean / var_y, e_var_x / var_y, co / (2.0 * var_y),
            binary ? counter / (2.0 * var_y) : std::nan("")};
}

}  // namespace

Dataset make_dataset(TableSchema schema, std::vector<std::string> x_labels, std::vector<std::vector<double>> g,
                     std::vector<double> y) {
    if (x_labels.size() != y.size() || g.size() != y.size())
        throw std::invalid_argument("dataset columns have different lengths");
    if (y.empty()) throw std::invalid_argument("dataset has no rows");
    Dataset d;
    d.schema = std::move(schema);
    d.x_labels = std::move(x_labels);
    d.g = std::move(g);
    d.y = std::move(y);

    std::map<std::pair<std::string, std::vector<double>>, std::vector<double>> cells;
    for (std::size_t i = 0; i < d.y.size(); ++i) cells[{d.x_labels[i], d.g[i]}].push_back(d.y[i]);
    for (const auto& [key, ys] : cells) {
        CellSummary c;
        c.x_label = key.first;
        c.g = key.second;
        c.count = ys.size();
        double m = 0.0;
        for (double v : ys) m += v;
        m /= static_cast<double>(ys.size());
        c.mean = m;
        if (ys.size() >= 2) {
            double s = 0.0;
            for (double v : ys) s += (v - m) * (v - m);
            c.variance = s / static_cast<double>(ys.size() - 1);
        } else {
            c.excluded = true;
            std::string gtxt;
            for (double v : c.g) gtxt += (gtxt.empty() ? "" : ",") + format_number(v);
            d.warnings.push_back("cell x=(" + c.x_label + ") g=(" + gtxt + ") has " + std::to_string(ys.size()) +
                                 " row; excluded");
        }
        d.cells.push_back(std::move(c));
    }
    return d;
}

Dataset load_table(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read data file '" + path + "'");
    if (schema.g.empty()) throw std::invalid_argument("schema needs at least one genotype column");
    if (schema.y.empty()) throw std::invalid_argument("schema needs a phenotype column");
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("data file '" + path + "' is empty");
    auto header = split_csv(line);
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument("missing column '" + name + "' in '" + path + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> xc, gc;
    for (const auto& n : schema.x) xc.push_back(col(n));
    for (const auto& n : schema.g) gc.push_back(col(n));
    std::size_t yc = col(schema.y);

    std::vector<std::string> xl;
    std::vector<std::vector<double>> g;
    std::vector<double> y;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != header.size())
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
        std::string label;
        for (std::size_t k = 0; k < xc.size(); ++k) {
            if (f[xc[k]].empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty x value");
            label += (k ? "," : "") + f[xc[k]];
        }
        std::vector<double> gv;
        for (std::size_t c : gc) {
            double v;
            if (!parse_double(f[c], v))
                throw std::invalid_argument("line " + std::to_string(lineno) + ": non-numeric genotype '" + f[c] + "'");
            gv.push_back(v);
        }
        double yv;
        if (!parse_double(f[yc], yv))
            throw std::invalid_argument("line " + std::to_string(lineno) + ": non-numeric phenotype '" + f[yc] + "'");
        xl.push_back(std::move(label));
        g.push_back(std::move(gv));
        y.push_back(yv);
    }
    return make_dataset(schema, std::move(xl), std::move(g), std::move(y));
}

Dataset dataset_from_sample(const SampleTable& s, const std::vector<std::string>& x_columns,
                            const std::vector<std::string>& g_columns) {
    auto find_in = [](const std::vector<std::string>& names, const std::string& n) {
        auto it = std::find(names.begin(), names.end(), n);
        if (it == names.end()) throw std::invalid_argument("sample has no column '" + n + "'");
        return static_cast<std::size_t>(it - names.begin());
    };
    std::vector<std::size_t> xi, gi;
    for (const auto& n : x_columns) xi.push_back(find_in(s.x_names, n));
    for (const auto& n : g_columns) gi.push_back(find_in(s.genotype_names, n));
    std::vector<std::string> xl(s.rows());
    std::vector<std::vector<double>> g(s.rows());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        std::string label;
        for (std::size_t k = 0; k < xi.size(); ++k) label += (k ? "," : "") + format_number(s.x[xi[k]][r]);
        xl[r] = std::move(label);
        for (std::size_t c : gi) g[r].push_back(s.g[c][r]);
    }
    return make_dataset({x_columns, g_columns, "y"}, std::move(xl), std::move(g), s.y);
}

EmpiricalBounds estimate_bounds(const Dataset& data, std::size_t bootstrap, std::uint64_t seed, std::size_t threads) {
    // Rows of usable cells, grouped by cell and sorted within it.
    std::map<std::pair<std::string, std::vector<double>>, std::size_t> cell_of;
    std::vector<CellData> cells;
    std::map<std::string, std::size_t> group_of;
    std::map<std::vector<double>, std::size_t> g_of;
    for (const auto& c : data.cells) {
        if (c.excluded) continue;
        auto gx = group_of.emplace(c.x_label, group_of.size()).first->second;
        auto gg = g_of.emplace(c.g, g_of.size()).first->second;
        cell_of[{c.x_label, c.g}] = cells.size();
        cells.push_back({gx, gg, {}});
    }
    if (cells.empty()) throw std::invalid_argument("no cell has at least two rows");
    for (std::size_t i = 0; i < data.rows(); ++i) {
        auto it = cell_of.find({data.x_labels[i], data.g[i]});
        if (it != cell_of.end()) cells[it->second].sorted.push_back(data.y[i]);
    }
    std::size_t used = 0;
    for (auto& c : cells) {
        std::stable_sort(c.sorted.begin(), c.sorted.end());
        used += c.sorted.size();
    }
    const bool binary = g_of.size() == 2;
    const std::size_t n_groups = group_of.size();
    std::vector<double> point = plug_in(cells, n_groups, binary);

    // Bootstrap over usable rows.
    std::vector<std::size_t> offset(cells.size() + 1, 0);
    for (std::size_t c = 0; c < cells.size(); ++c) offset[c + 1] = offset[c] + cells[c].sorted.size();
    std::vector<std::vector<double>> reps(bootstrap);
    parallel_for(bootstrap, threads, [&](std::size_t r) {
        auto rng = make_stream(seed, r, 0xB007);
        std::vector<std::uint32_t> counts(used, 0);
        std::uniform_int_distribution<std::size_t> pick(0, used - 1);
        for (std::size_t i = 0; i < used; ++i) ++counts[pick(rng)];
        std::vector<CellData> bc(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            bc[c].x_group = cells[c].x_group;
            bc[c].g_id = cells[c].g_id;
            for (std::size_t k = offset[c]; k < offset[c + 1]; ++k)
                bc[c].sorted.insert(bc[c].sorted.end(), counts[k], cells[c].sorted[k - offset[c]]);
        }
        try {
            reps[r] = plug_in(bc, n_groups, binary);
        } catch (const DegeneratePhenotype&) {
            reps[r] = {};
        }
    });
    auto se = [&](std::size_t k) {
        std::vector<double> v;
        for (const auto& r : reps)
            if (!r.empty()) v.push_back(r[k]);
        if (v.size() < 2) return 0.0;
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    EmpiricalBounds out;
    out.xi_l_prime = {point[0], se(0), Method::PlugIn};
    out.xi_u_prime = {point[1], se(1), Method::PlugIn};
    out.xi_l = {point[2], se(2), Method::PlugIn};
    if (binary) out.xi_u = Estimate{point[3], se(3), Method::PlugIn};
    out.rows_used = used;
    out.cells_used = cells.size();
    out.warnings = data.warnings;
    return out;
}

}  // namespace cfh
