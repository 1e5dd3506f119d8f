#pragma once

#include <cstddef>
#include <string>

#include "cellrobust/data_matrix.hpp"
#include "cellrobust/estimate.hpp"

namespace cellrobust {

struct RegFit {
    double alpha = 0.0;
    Vector beta;
    double sigma_hat = 0.0;
    std::string source_model;
    bool sigma_clamped = false;  // set when the plug-in variance went negative
};

/// Regression coefficients from a joint location/covariance model:
/// beta = Sigma_xx^{-1} Sigma_xy, alpha = mu_y - mu_x' beta,
/// sigma_hat = sqrt(Sigma_yy - beta' Sigma_xx beta), clamped at 0.
/// Requires lambda_min(Sigma_xx) > 1e-10.
RegFit plugin_regression(const CovModel& model, std::size_t response_index);

/// Through-the-origin variant built on raw second moments
/// (Sigma + mu mu'); alpha is fixed at 0.
RegFit plugin_regression_no_intercept(const CovModel& model, std::size_t response_index);

/// AR(p) embedding: row t = (y_{t-1}, ..., y_{t-p}, y_t) for
/// t = p+1..n, so the last column is the response. Size (n-p) x (p+1).
DataMatrix ar_design(const Vector& y, std::size_t p);

enum class CovMethod { Classical, TwoStep, Pairwise };

/// ar_design followed by the chosen covariance estimator and
/// plugin_regression on the last column.
RegFit ar_fit(const Vector& y, std::size_t p, CovMethod method, bool intercept = true);

const char* cov_method_name(CovMethod m);

}  // namespace cellrobust
