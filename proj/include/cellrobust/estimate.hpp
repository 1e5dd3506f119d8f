#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cellrobust/data_matrix.hpp"
#include "cellrobust/detect.hpp"
#include "cellrobust/linalg.hpp"
#include "cellrobust/matrix.hpp"
#include "cellrobust/univar.hpp"

namespace cellrobust {

/// Location vector and symmetric PSD covariance matrix plus fit metadata.
/// n_used(j, l) counts the observations that informed sigma(j, l)
/// (pairwise-complete counts; the diagonal holds per-column counts).
struct CovModel {
    Vector mu;
    Matrix sigma;
    std::string method;
    Matrix n_used;
    std::optional<double> loglik;

    std::size_t dim() const { return mu.size(); }
};

inline double mahalanobis_sq(const Vector& x, const CovModel& model) {
    return mahalanobis_sq(x, model.mu, model.sigma);
}

enum class LocationKind { Median, UnivMcd };

/// Columnwise robust location, missing cells skipped. For UnivMcd, h
/// defaults to floor(m/2)+1 of each column's observed count m; an explicit
/// h is clamped into the valid range per column.
Vector coordwise_location(const DataMatrix& x, LocationKind kind,
                          std::optional<std::size_t> h = std::nullopt);

/// Weiszfeld iteration for the minimizer of sum_i ||x_i - m||, with the
/// Vardi-Zhang handling when an iterate lands on a data point. Requires
/// complete data and at least two distinct points.
Vector spatial_median(const DataMatrix& x, double tol = 1e-9, int max_iter = 1000);

/// Sample mean and covariance (denominator n-1); complete data only.
CovModel classical_cov(const DataMatrix& x);

/// Mean and covariance with the MLE denominator n; complete data only.
CovModel classical_mle(const DataMatrix& x);

struct EmOptions {
    double tol = 1e-8;
    int max_iter = 200;
    double ridge = 1e-6;
};

struct EmFit {
    CovModel model;
    Matrix imputed;  // conditional means in missing cells
    int iterations = 0;
    std::vector<double> loglik_trace;
};

/// Gaussian EM for incomplete data, grouped by missingness pattern.
/// Initialized from coordinatewise medians and MAD^2; the covariance is
/// floored at ridge * trace(Sigma)/d via psd_repair whenever needed.
/// Stops when the observed-data log-likelihood improves by less than tol.
EmFit em_mle(const DataMatrix& x, const EmOptions& opts = {});

enum class DetectorKind { Univariate, Ddc };

struct TwoStepFit {
    EmFit em;
    CellFlags flags;
};

/// Filter-then-MLE: flag cells, set them missing, run em_mle.
TwoStepFit two_step_cov(const DataMatrix& x, DetectorKind detector = DetectorKind::Ddc,
                        double cutoff = kDefaultCutoff);

/// Rank-based pairwise covariance: sigma_jl = s_j * s_l * r_jl with
/// r = 2 sin(pi * spearman / 6), repaired to lambda_min >= floor
/// (default 1e-4 times the squared median column scale).
CovModel pairwise_cov(const DataMatrix& x, RobustScaleKind kind = RobustScaleKind::Mad,
                      std::optional<double> floor = std::nullopt);

/// Assembly seam used by pairwise_cov and its tests: builds
/// scales-and-correlation covariance and applies psd_repair.
Matrix pairwise_sigma_from(const Vector& scales, const Matrix& corr, double floor);

}  // namespace cellrobust
