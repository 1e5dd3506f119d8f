#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cellrobust/data_matrix.hpp"
#include "cellrobust/detect.hpp"
#include "cellrobust/linalg.hpp"
#include "cellrobust/matrix.hpp"

namespace cellrobust {

/// Contingency table: nonnegative counts, no all-zero row or column.
struct ContingencyTable {
    Matrix counts;
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;

    static ContingencyTable from_data(const DataMatrix& data);
};

/// Weighted centered row profiles S = D_r^{1/2} (R - 1 c') D_c^{-1/2}
/// together with the row and column masses r and c. S annihilates
/// sqrt(c), so rank(S) <= min(n, d) - 1.
struct ProfileDecomposition {
    Matrix s;
    Vector row_masses;
    Vector col_masses;
};

ProfileDecomposition profile_matrix(const ContingencyTable& table);

struct CASolution {
    Matrix s;
    Matrix u;      // n x k
    Vector gamma;  // k nonincreasing singular values
    Matrix v;      // d x k
    Matrix row_pc;
    Matrix col_pc;
    std::size_t k = 0;
    std::optional<CellFlags> flags;  // present for the robust variant
    Vector row_masses;
    Vector col_masses;
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;
};

/// SVD of S truncated to k components; principal coordinates
/// D_r^{-1/2} U Gamma and D_c^{-1/2} V Gamma. k may not exceed the
/// structural rank bound min(n, d) - 1 (trailing zero singular values are
/// fine: an independence table yields all-zero coordinates).
CASolution classical_ca(const ContingencyTable& table, std::size_t k);

struct RobustPcaOptions {
    double cutoff = kDefaultCutoff;
    int max_iter = 20;
    double ddc_corr_threshold = 0.5;
};

struct RobustPcaResult {
    Matrix scores;      // n x k, of the cleaned matrix
    Matrix loadings;    // d x k, orthonormal columns
    Vector eigenvalues; // gamma_j^2 / n of the cleaned matrix
    Matrix cleaned;     // input with flagged cells imputed by fitted values
    CellFlags flags;
    int iterations = 0;
};

/// Cellwise-robust zero-center PCA: initial cell cleaning with the ddc
/// detector (skipped when its n >= 20, d >= 2 preconditions fail),
/// followed by alternating rank-k projection, residual-based re-flagging
/// against the ORIGINAL matrix, and re-imputation with fitted values.
/// k = 0 selects the smallest rank explaining at least 80% of the
/// initial spectrum.
RobustPcaResult robust_pca_zero_center(const Matrix& s, std::size_t k,
                                       const RobustPcaOptions& opts = {});

/// profile_matrix + robust_pca_zero_center; Gamma = sqrt(n * eigenvalues),
/// U = scores * Gamma^{-1}. Errors when a requested component has a zero
/// singular value. k = 0 selects the rank automatically as above.
CASolution robust_ca(const ContingencyTable& table, std::size_t k,
                     const RobustPcaOptions& opts = {});

/// Biplot of the first two principal coordinates: labeled row points and
/// column arrows from the origin. Requires k >= 2. Deterministic bytes.
std::string biplot_svg(const CASolution& sol);

void write_biplot(const CASolution& sol, const std::string& path);

}  // namespace cellrobust
