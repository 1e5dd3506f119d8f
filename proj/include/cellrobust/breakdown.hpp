#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cellrobust/data_matrix.hpp"
#include "cellrobust/matrix.hpp"

namespace cellrobust {

/// Probability that a row holds at least one contaminated cell when each
/// cell is independently contaminated with probability eps:
/// 1 - (1 - eps)^d.
double contamination_probability(double eps, std::size_t d);

/// A contaminated copy of a dataset plus bookkeeping about what changed.
struct AttackResult {
    DataMatrix contaminated;
    BoolMat replaced;
    std::vector<std::size_t> per_column_count;
    double param = 0.0;  // c for the location attack, beta0 for regression
};

/// Moves every row onto the hyperplane sum_j x_j = c by replacing one
/// round-robin cell per row; at most ceil(n/d) replacements per column.
/// Requires c > max_i sum_j x_ij and n >= d.
AttackResult hyperplane_attack_location(const DataMatrix& x, double c);

/// Keeps row 1 and moves every other row onto the affine hyperplane
/// sum_j x_j = sum_j x_1j (one round-robin cell per row; at most
/// ceil((n-1)/d) per column). Any covariance estimator with the exact fit
/// property becomes singular on the result. When n <= d the data already
/// lies in a lower-dimensional subspace and zero replacements are returned.
AttackResult implosion_attack(const DataMatrix& x);

/// For z = (x_1..x_p, y): puts every case except the first onto the
/// hyperplane y = alpha0 + beta0 * sum_j x_j where
/// alpha0 = y_1 - beta0 * sum_j x_1j, replacing one round-robin cell per
/// case across all p+1 columns; at most ceil((n-1)/(p+1)) per column.
AttackResult regression_attack(const DataMatrix& z, double beta0);

using LocationEstimator = std::function<Vector(const DataMatrix&)>;

/// Replaces k cells per column by `value` (rows chosen so contaminated
/// cases overlap as little as possible: cell i of column j goes to row
/// (j*k + i) mod n).
DataMatrix contaminate_per_column(const DataMatrix& x, std::size_t k, double value);

/// Smallest fraction k/n (k = cells contaminated per column) at which
/// ||estimate|| exceeds the threshold; 0.5 when it never does for
/// k <= n/2.
double empirical_breakdown(const LocationEstimator& estimator, const DataMatrix& x,
                           double value, double threshold);

enum class CurveEstimator { Mean, SpatialMedian, CoordMedian, CoordUnivMcd };

std::string curve_estimator_name(CurveEstimator e);

struct BreakdownCurve {
    std::size_t n = 0;
    std::size_t d = 0;
    double value = 0.0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
    std::vector<CurveEstimator> estimators;
    std::vector<std::size_t> ks;  // 0 .. n/2
    Matrix mean_norms;            // ks.size() x estimators.size()
};

/// Empirical breakdown curves on standard Gaussian data: for each k the
/// mean over `reps` replications of ||estimate|| per estimator.
/// Replication r uses its own generator seeded with seed + r, so results
/// do not depend on scheduling; `threads` > 1 runs replications in
/// parallel.
BreakdownCurve breakdown_curve(const std::vector<CurveEstimator>& estimators, std::size_t n,
                               std::size_t d, double value, std::size_t reps,
                               std::uint64_t seed, unsigned threads = 1);

std::string breakdown_curve_csv(const BreakdownCurve& curve);
std::string breakdown_curve_svg(const BreakdownCurve& curve);

}  // namespace cellrobust
