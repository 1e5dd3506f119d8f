#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cellrobust/matrix.hpp"

namespace cellrobust {

/// n x d data matrix with a per-cell missingness mask. The stored number
/// of a missing cell is meaningless and ignored by every operation.
struct DataMatrix {
    Matrix values;
    BoolMat missing;
    std::vector<std::string> col_names;
    std::vector<std::string> row_names;

    std::size_t n() const { return values.rows(); }
    std::size_t d() const { return values.cols(); }

    bool is_missing(std::size_t i, std::size_t j) const { return missing(i, j); }

    /// Observed values of column j, in row order.
    Vector observed_col(std::size_t j) const;
    std::size_t observed_count_col(std::size_t j) const;
    std::size_t observed_count_row(std::size_t i) const;
    bool has_missing() const { return missing.count() > 0; }

    /// Wraps a plain matrix: no missing cells, default names V1..Vd / 1..n.
    static DataMatrix from_matrix(Matrix m);
};

std::vector<std::string> default_col_names(std::size_t d);
std::vector<std::string> default_row_names(std::size_t n);

/// CSV reader. Empty fields and "NA" denote missing cells. A header row
/// and a leading row-name column are auto-detected (any non-numeric,
/// non-NA content). Ragged rows and unparseable fields raise DataError
/// with the row/column location.
DataMatrix read_csv(const std::string& path);
DataMatrix parse_csv(std::string_view text, std::string_view origin = "<memory>");

/// Writer: shortest round-trip number formatting, "NA" for missing cells.
/// Row names are emitted only when they differ from the 1..n default, so
/// plain matrices round-trip bit-exactly.
std::string to_csv(const DataMatrix& m);
void write_csv(const DataMatrix& m, const std::string& path);

/// Reads the whole file; DataError (naming the path) when unreadable.
std::string read_text_file(const std::string& path);

/// Writes via a temp file in the same directory followed by a rename.
void write_text_atomic(const std::string& path, std::string_view content);

std::string format_double(double v);

}  // namespace cellrobust
