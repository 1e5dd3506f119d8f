#include "cellrobust/univar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "cellrobust/errors.hpp"

namespace cellrobust {

namespace {

double median_of_sorted(const std::vector<double>& s) {
    const std::size_t n = s.size();
    if (n % 2 == 1) return s[n / 2];
    return 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

}  // namespace

double median(std::span<const double> x) {
    if (x.empty()) throw DataError("median: empty input");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return median_of_sorted(s);
}

double mad(std::span<const double> x) {
    const double m = median(x);
    std::vector<double> dev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dev[i] = std::abs(x[i] - m);
    std::sort(dev.begin(), dev.end());
    return kMadFactor * median_of_sorted(dev);
}

double qn(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw DataError("qn: need at least 2 values");
    const std::size_t h = n / 2 + 1;
    const std::size_t k = h * (h - 1) / 2;  // C(h, 2)
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) dists.push_back(std::abs(x[i] - x[j]));
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     dists.end());
    return kQnFactor * dists[k - 1];
}

double robust_scale(std::span<const double> x, RobustScaleKind kind) {
    if (x.size() < 2) throw DataError("robust_scale: need at least 2 values");
    return kind == RobustScaleKind::Mad ? mad(x) : qn(x);
}

double mcd_consistency_factor(double coverage) {
    if (coverage >= 1.0) return 1.0;
    const double q = normal_quantile(0.5 * (1.0 + coverage));
    const double trunc_var = 1.0 - 2.0 * q * normal_pdf(q) / coverage;
    return 1.0 / std::sqrt(trunc_var);
}

LocationScale univariate_mcd(std::span<const double> x, std::size_t h) {
    const std::size_t n = x.size();
    if (h < n / 2 + 1 || h > n) {
        std::ostringstream msg;
        msg << "univariate_mcd: h = " << h << " outside [" << (n / 2 + 1) << ", " << n << "]";
        throw DataError(msg.str());
    }
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());

    double best_ss = std::numeric_limits<double>::infinity();
    double best_mean = 0.0;
    for (std::size_t j = 0; j + h <= n; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < h; ++i) m += s[j + i];
        m /= static_cast<double>(h);
        double ss = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double d = s[j + i] - m;
            ss += d * d;
        }
        if (ss < best_ss) {
            best_ss = ss;
            best_mean = m;
        }
    }
    const double var = h > 1 ? best_ss / static_cast<double>(h - 1) : 0.0;
    const double factor = mcd_consistency_factor(static_cast<double>(h) / static_cast<double>(n));
    return {best_mean, std::sqrt(var) * factor};
}

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman_corr(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("spearman_corr: length mismatch");
    if (x.size() < 3) throw DataError("spearman_corr: need at least 3 pairs");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);

    const double mx = mean(rx);
    const double my = mean(ry);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
    return {sxy / std::sqrt(sxx * syy), false};
}

std::vector<double> robust_zscores(std::span<const double> x, std::string_view label) {
    const double m = median(x);
    const double s = mad(x);
    if (s <= 0.0) {
        std::string msg = "robust_zscores: zero robust scale";
        if (!label.empty()) msg += " in column " + std::string(label);
        throw DataError(msg);
    }
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / s;
    return z;
}

double mean(std::span<const double> x) {
    if (x.empty()) throw DataError("mean: empty input");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Acklam's rational approximation refined with one Halley step; good to
// about 1e-15 over (0, 1).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DataError("normal_quantile: p outside [0, 1]");
    }
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against the exact CDF via erfc.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace cellrobust
