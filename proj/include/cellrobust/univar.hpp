#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace cellrobust {

enum class RobustScaleKind { Mad, Qn };

/// Standard Gaussian consistency factors: MAD uses 1.4826, Qn uses 2.2219.
inline constexpr double kMadFactor = 1.4826;
inline constexpr double kQnFactor = 2.2219;

/// sqrt of the 0.99 quantile of chi-squared with 1 df: the default cell
/// flagging cutoff.
inline constexpr double kDefaultCutoff = 2.5758293035489004;

/// Sample median; averages the two middle order statistics for even length.
double median(std::span<const double> x);

/// 1.4826 * median(|x_i - median(x)|).
double mad(std::span<const double> x);

/// 2.2219 * k-th order statistic of the pairwise distances |x_i - x_j|,
/// i < j, with k = C(h, 2), h = floor(n/2) + 1. Naive O(n^2) enumeration.
double qn(std::span<const double> x);

double robust_scale(std::span<const double> x, RobustScaleKind kind);

struct LocationScale {
    double location;
    double scale;
};

/// Univariate MCD over the h-subsets of x: the optimal subset is a
/// contiguous window of the sorted sample. The scale is the window's
/// standard deviation times the Gaussian consistency factor at
/// coverage h/n. Requires floor(n/2)+1 <= h <= n.
LocationScale univariate_mcd(std::span<const double> x, std::size_t h);

/// 1 / sqrt of the variance of the standard normal truncated to its
/// central `coverage` probability mass; equals 1 at coverage 1.
double mcd_consistency_factor(double coverage);

struct SpearmanResult {
    double rho = 0.0;
    bool degenerate = false;
};

/// Pearson correlation of average ranks. A constant input yields
/// rho = 0 with the degenerate flag set.
SpearmanResult spearman_corr(std::span<const double> x, std::span<const double> y);

/// (x_i - median) / MAD-scale. Throws DataError naming `label` when the
/// scale is zero.
std::vector<double> robust_zscores(std::span<const double> x, std::string_view label = {});

/// Average ranks (1-based, ties averaged).
std::vector<double> average_ranks(std::span<const double> x);

double mean(std::span<const double> x);

/// Quantile function of the standard normal distribution.
double normal_quantile(double p);

double normal_pdf(double x);

}  // namespace cellrobust
