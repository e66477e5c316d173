// =============================================================================
// empirical.hpp -- plug-in estimates of the identifiable bounds from a table
// of (X, G, Y) rows with discrete X and G.
//
// Within each (x, g) cell the mean and the n-1 variance are estimated; cells
// with fewer than two rows are excluded and reported. xi_l couples cells that
// share x through their empirical quantile functions: both cells are
// resampled to the larger count by linear interpolation of the order
// statistics, so equal counts reduce to pairing equal-index order statistics.
// This xi_l estimator is our own construction; the population quantity is
// what it targets.
// =============================================================================
#pragma once

#include "cfh/engine.hpp"
#include "cfh/moments.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cfh {

struct TableSchema {
    std::vector<std::string> x;  // may be empty: a single stratum
    std::vector<std::string> g;
    std::string y;
};

struct CellSummary {
    std::string x_label;
    std::vector<double> g;
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // n-1 divisor; 0 when count < 2
    bool excluded = false;
};

struct Dataset {
    TableSchema schema;
    std::vector<std::string> x_labels;   // per row, x columns joined by ','
    std::vector<std::vector<double>> g;  // per row
    std::vector<double> y;
    std::vector<CellSummary> cells;      // sorted by (x label, g)
    std::vector<std::string> warnings;
    std::size_t rows() const { return y.size(); }
};

// Builds the cell table and flags undersized cells.
Dataset make_dataset(TableSchema schema, std::vector<std::string> x_labels, std::vector<std::vector<double>> g,
                     std::vector<double> y);

// Comma-separated file with a header row. Throws std::invalid_argument on a
// missing column, a short row, or a non-numeric genotype or phenotype.
Dataset load_table(const std::string& path, const TableSchema& schema);

// Uses the observed and derived columns of a sample as X.
Dataset dataset_from_sample(const SampleTable& sample, const std::vector<std::string>& x_columns,
                            const std::vector<std::string>& g_columns);

struct EmpiricalBounds {
    Estimate xi_l_prime;
    Estimate xi_u_prime;
    Estimate xi_l;
    std::optional<Estimate> xi_u;  // only when G takes two values
    std::size_t rows_used = 0;
    std::size_t cells_used = 0;
    std::vector<std::string> warnings;
};

// Standard errors from a nonparametric bootstrap over rows; replicate r uses
// the stream (seed, r), so results do not depend on `threads`.
EmpiricalBounds estimate_bounds(const Dataset& data, std::size_t bootstrap = 200, std::uint64_t seed = 20240917,
                                std::size_t threads = 0);

}  // namespace cfh
