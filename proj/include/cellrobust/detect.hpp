#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cellrobust/data_matrix.hpp"
#include "cellrobust/matrix.hpp"
#include "cellrobust/univar.hpp"

namespace cellrobust {

/// Per-cell detection result. For every observed cell,
/// flags(i,j) == (|stdres(i,j)| > cutoff); missing cells are never
/// flagged and carry stdres 0.
struct CellFlags {
    BoolMat flags;
    Matrix stdres;
    Matrix predicted;
    std::vector<std::uint8_t> row_flags;  // > 50% of a row's observed cells flagged
    double cutoff = kDefaultCutoff;
    BoolMat missing;

    std::size_t flagged_count() const { return flags.count(); }
};

/// Marginal filter: columnwise robust z-scores against the cutoff.
/// The prediction for every cell is its column median.
CellFlags flag_univariate(const DataMatrix& x, double cutoff = kDefaultCutoff);

struct DdcOptions {
    double corr_threshold = 0.5;
    double cutoff = kDefaultCutoff;
    std::size_t max_predictors = 10;
};

/// DDC-style detector: each standardized cell is predicted as the weighted
/// median of slope-scaled values of correlated columns, and cells with a
/// large standardized residual are flagged. Columns without any predictor
/// above the correlation threshold fall back to the marginal filter.
/// Requires n >= 20 and d >= 2.
CellFlags ddc(const DataMatrix& x, const DdcOptions& opts = {});

/// Cellmap grid: yellow for cells in line with their prediction, red/blue
/// ramps for cells above/below it (saturating at |stdres| = 10), white for
/// missing. Byte-deterministic for fixed input.
std::string cellmap_svg(const CellFlags& flags, const std::vector<std::string>& row_names,
                        const std::vector<std::string>& col_names);

void write_cellmap(const CellFlags& flags, const std::vector<std::string>& row_names,
                   const std::vector<std::string>& col_names, const std::string& path);

/// Weighted median: smallest value whose cumulative weight reaches half the
/// total; averages with the next distinct value on an exact split.
double weighted_median(std::vector<std::pair<double, double>> value_weight);

}  // namespace cellrobust
