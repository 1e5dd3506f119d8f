#include "cellrobust/regress.hpp"

#include <cmath>
#include <sstream>

#include "cellrobust/errors.hpp"
#include "cellrobust/linalg.hpp"

namespace cellrobust {

namespace {

struct Partition {
    std::vector<std::size_t> xs;
    std::size_t y;
};

Partition partition_indices(const CovModel& model, std::size_t response_index) {
    const std::size_t d = model.dim();
    if (response_index >= d) throw DataError("plugin_regression: response index out of range");
    Partition p;
    p.y = response_index;
    for (std::size_t j = 0; j < d; ++j)
        if (j != response_index) p.xs.push_back(j);
    if (p.xs.empty()) throw DataError("plugin_regression: no predictor columns");
    return p;
}

RegFit solve_from_moments(const Matrix& mxx, const Vector& mxy, double myy,
                          const Vector& mu_x, double mu_y, bool intercept,
                          const std::string& method) {
    const double lmin = min_eigenvalue(mxx);
    if (lmin <= 1e-10) {
        std::ostringstream msg;
        msg << "plugin_regression: predictor covariance is near-singular (lambda_min = " << lmin
            << "); apply psd_repair or drop collinear variables";
        throw DataError(msg.str());
    }
    const Matrix chol = cholesky(mxx);
    RegFit fit;
    fit.source_model = method;
    fit.beta = cholesky_solve(chol, mxy);
    fit.alpha = intercept ? mu_y - dot(mu_x, fit.beta) : 0.0;

    double quad = 0.0;
    for (std::size_t a = 0; a < fit.beta.size(); ++a)
        for (std::size_t b = 0; b < fit.beta.size(); ++b)
            quad += fit.beta[a] * mxx(a, b) * fit.beta[b];
    double s2 = myy - quad;
    if (s2 < 0.0) {
        s2 = 0.0;
        fit.sigma_clamped = true;
    }
    fit.sigma_hat = std::sqrt(s2);
    return fit;
}

}  // namespace

RegFit plugin_regression(const CovModel& model, std::size_t response_index) {
    const Partition p = partition_indices(model, response_index);
    const std::size_t k = p.xs.size();
    Matrix sxx(k, k);
    Vector sxy(k);
    Vector mu_x(k);
    for (std::size_t a = 0; a < k; ++a) {
        mu_x[a] = model.mu[p.xs[a]];
        sxy[a] = model.sigma(p.xs[a], p.y);
        for (std::size_t b = 0; b < k; ++b) sxx(a, b) = model.sigma(p.xs[a], p.xs[b]);
    }
    return solve_from_moments(sxx, sxy, model.sigma(p.y, p.y), mu_x, model.mu[p.y], true,
                              model.method);
}

RegFit plugin_regression_no_intercept(const CovModel& model, std::size_t response_index) {
    const Partition p = partition_indices(model, response_index);
    const std::size_t k = p.xs.size();
    Matrix mxx(k, k);
    Vector mxy(k);
    Vector mu_x(k);
    for (std::size_t a = 0; a < k; ++a) {
        mu_x[a] = model.mu[p.xs[a]];
        mxy[a] = model.sigma(p.xs[a], p.y) + model.mu[p.xs[a]] * model.mu[p.y];
        for (std::size_t b = 0; b < k; ++b)
            mxx(a, b) = model.sigma(p.xs[a], p.xs[b]) + model.mu[p.xs[a]] * model.mu[p.xs[b]];
    }
    const double myy = model.sigma(p.y, p.y) + model.mu[p.y] * model.mu[p.y];
    return solve_from_moments(mxx, mxy, myy, mu_x, model.mu[p.y], false, model.method);
}

DataMatrix ar_design(const Vector& y, std::size_t p) {
    const std::size_t n = y.size();
    if (p < 1) throw DataError("ar_design: order must be at least 1");
    if (n <= p) throw DataError("ar_design: series shorter than the order");

    Matrix z(n - p, p + 1);
    for (std::size_t t = p; t < n; ++t) {
        const std::size_t row = t - p;
        for (std::size_t j = 0; j < p; ++j) z(row, j) = y[t - 1 - j];
        z(row, p) = y[t];
    }
    DataMatrix out = DataMatrix::from_matrix(std::move(z));
    for (std::size_t j = 0; j < p; ++j) out.col_names[j] = "lag" + std::to_string(j + 1);
    out.col_names[p] = "y";
    return out;
}

const char* cov_method_name(CovMethod m) {
    switch (m) {
        case CovMethod::Classical: return "classical";
        case CovMethod::TwoStep: return "twostep";
        case CovMethod::Pairwise: return "pairwise";
    }
    return "?";
}

RegFit ar_fit(const Vector& y, std::size_t p, CovMethod method, bool intercept) {
    const DataMatrix z = ar_design(y, p);
    CovModel model;
    switch (method) {
        case CovMethod::Classical: model = classical_cov(z); break;
        case CovMethod::TwoStep: model = two_step_cov(z).em.model; break;
        case CovMethod::Pairwise: model = pairwise_cov(z); break;
    }
    return intercept ? plugin_regression(model, p)
                     : plugin_regression_no_intercept(model, p);
}

}  // namespace cellrobust
