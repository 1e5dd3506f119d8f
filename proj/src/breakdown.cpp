#include "cellrobust/breakdown.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "cellrobust/errors.hpp"
#include "cellrobust/estimate.hpp"
#include "cellrobust/rng.hpp"
#include "cellrobust/svg.hpp"

namespace cellrobust {

double contamination_probability(double eps, std::size_t d) {
    if (eps < 0.0 || eps > 1.0) throw DataError("contamination_probability: eps outside [0, 1]");
    if (d == 0) throw DataError("contamination_probability: d must be positive");
    return 1.0 - std::pow(1.0 - eps, static_cast<double>(d));
}

namespace {

AttackResult init_attack(const DataMatrix& x, double param) {
    AttackResult a;
    a.contaminated = x;
    a.replaced = BoolMat(x.n(), x.d());
    a.per_column_count.assign(x.d(), 0);
    a.param = param;
    return a;
}

double row_sum(const Matrix& m, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j);
    return s;
}

void replace_to_row_sum(AttackResult& a, std::size_t i, std::size_t j, double target_sum) {
    Matrix& v = a.contaminated.values;
    const double rest = row_sum(v, i) - v(i, j);
    v(i, j) = target_sum - rest;
    a.replaced.set(i, j, true);
    ++a.per_column_count[j];
}

}  // namespace

AttackResult hyperplane_attack_location(const DataMatrix& x, double c) {
    if (x.has_missing()) throw DataError("hyperplane_attack_location: missing cells not supported");
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    if (n < d) throw DataError("hyperplane_attack_location: requires n >= d");
    for (std::size_t i = 0; i < n; ++i)
        if (row_sum(x.values, i) >= c)
            throw DataError("hyperplane_attack_location: c must exceed every row sum");

    AttackResult a = init_attack(x, c);
    for (std::size_t i = 0; i < n; ++i) replace_to_row_sum(a, i, i % d, c);
    return a;
}

AttackResult implosion_attack(const DataMatrix& x) {
    if (x.has_missing()) throw DataError("implosion_attack: missing cells not supported");
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    // n <= d: the points already span a lower-dimensional affine subspace,
    // so zero replacements suffice.
    AttackResult a = init_attack(x, 0.0);
    if (n <= d) return a;

    const double target = row_sum(x.values, 0);
    a.param = target;
    for (std::size_t i = 1; i < n; ++i) replace_to_row_sum(a, i, (i - 1) % d, target);
    return a;
}

AttackResult regression_attack(const DataMatrix& z, double beta0) {
    if (z.has_missing()) throw DataError("regression_attack: missing cells not supported");
    const std::size_t n = z.n();
    const std::size_t cols = z.d();  // p covariates plus the response
    if (cols < 2) throw DataError("regression_attack: need at least one covariate column");
    if (n <= cols) throw DataError("regression_attack: requires n > p + 1");
    if (beta0 == 0.0) throw DataError("regression_attack: beta0 must be nonzero");

    const std::size_t p = cols - 1;
    double x1_sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) x1_sum += z.values(0, j);
    const double alpha0 = z.values(0, p) - beta0 * x1_sum;

    AttackResult a = init_attack(z, beta0);
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t j = (i - 1) % cols;
        Matrix& v = a.contaminated.values;
        double xsum = 0.0;
        for (std::size_t l = 0; l < p; ++l) xsum += v(i, l);
        if (j == p) {
            v(i, p) = alpha0 + beta0 * xsum;
        } else {
            // Solve y = alpha0 + beta0 * (sum_{l != j} x_l + x_j) for x_j;
            // every slope equals beta0 != 0, so this is always possible.
            v(i, j) = (v(i, p) - alpha0) / beta0 - (xsum - v(i, j));
        }
        a.replaced.set(i, j, true);
        ++a.per_column_count[j];
    }
    return a;
}

DataMatrix contaminate_per_column(const DataMatrix& x, std::size_t k, double value) {
    DataMatrix out = x;
    const std::size_t n = x.n();
    for (std::size_t j = 0; j < x.d(); ++j)
        for (std::size_t i = 0; i < k; ++i) out.values((j * k + i) % n, j) = value;
    return out;
}

double empirical_breakdown(const LocationEstimator& estimator, const DataMatrix& x,
                           double value, double threshold) {
    const std::size_t n = x.n();
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const DataMatrix contaminated = contaminate_per_column(x, k, value);
        if (norm2(estimator(contaminated)) > threshold)
            return static_cast<double>(k) / static_cast<double>(n);
    }
    return 0.5;
}

std::string curve_estimator_name(CurveEstimator e) {
    switch (e) {
        case CurveEstimator::Mean: return "mean";
        case CurveEstimator::SpatialMedian: return "spatial_median";
        case CurveEstimator::CoordMedian: return "coord_median";
        case CurveEstimator::CoordUnivMcd: return "coord_univ_mcd";
    }
    return "?";
}

namespace {

Vector run_estimator(CurveEstimator e, const DataMatrix& x) {
    switch (e) {
        case CurveEstimator::Mean: {
            Vector mu(x.d(), 0.0);
            for (std::size_t i = 0; i < x.n(); ++i)
                for (std::size_t j = 0; j < x.d(); ++j) mu[j] += x.values(i, j);
            for (double& v : mu) v /= static_cast<double>(x.n());
            return mu;
        }
        case CurveEstimator::SpatialMedian:
            // Curve means need norm-level accuracy only. At k = n/2 the
            // contaminated rows form two equal-mass clusters whose objective
            // is nearly flat along the connecting segment; Weiszfeld creeps
            // there and tighter step tolerances become unreachable.
            return spatial_median(x, 1e-3, 100000);
        case CurveEstimator::CoordMedian:
            return coordwise_location(x, LocationKind::Median);
        case CurveEstimator::CoordUnivMcd:
            return coordwise_location(x, LocationKind::UnivMcd);
    }
    throw DataError("unknown estimator");
}

}  // namespace

BreakdownCurve breakdown_curve(const std::vector<CurveEstimator>& estimators, std::size_t n,
                               std::size_t d, double value, std::size_t reps,
                               std::uint64_t seed, unsigned threads) {
    if (n < 2 || d < 1 || reps < 1) throw DataError("breakdown_curve: bad parameters");

    BreakdownCurve curve;
    curve.n = n;
    curve.d = d;
    curve.value = value;
    curve.reps = reps;
    curve.seed = seed;
    curve.estimators = estimators;
    for (std::size_t k = 0; k <= n / 2; ++k) curve.ks.push_back(k);

    const std::size_t nk = curve.ks.size();
    const std::size_t ne = estimators.size();
    std::vector<Matrix> per_rep(reps);

    auto run_rep = [&](std::size_t r) {
        Rng rng(seed + r);
        Matrix base(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) base(i, j) = rng.normal();
        const DataMatrix clean = DataMatrix::from_matrix(std::move(base));

        Matrix norms(nk, ne);
        for (std::size_t ki = 0; ki < nk; ++ki) {
            const DataMatrix data = contaminate_per_column(clean, curve.ks[ki], value);
            for (std::size_t ei = 0; ei < ne; ++ei)
                norms(ki, ei) = norm2(run_estimator(estimators[ei], data));
        }
        per_rep[r] = std::move(norms);
    };

    if (threads <= 1) {
        for (std::size_t r = 0; r < reps; ++r) run_rep(r);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const unsigned nthreads = std::min<unsigned>(threads, static_cast<unsigned>(reps));
        std::mutex mu;
        std::exception_ptr failure;
        for (unsigned t = 0; t < nthreads; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    std::size_t r;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= reps || failure) return;
                        r = next++;
                    }
                    try {
                        run_rep(r);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(mu);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    curve.mean_norms = Matrix(nk, ne);
    for (std::size_t r = 0; r < reps; ++r) curve.mean_norms += per_rep[r];
    curve.mean_norms *= 1.0 / static_cast<double>(reps);
    return curve;
}

std::string breakdown_curve_csv(const BreakdownCurve& curve) {
    std::string out = "k,fraction";
    for (CurveEstimator e : curve.estimators) out += "," + curve_estimator_name(e);
    out += "\n";
    for (std::size_t ki = 0; ki < curve.ks.size(); ++ki) {
        out += std::to_string(curve.ks[ki]);
        out += ",";
        out += format_double(static_cast<double>(curve.ks[ki]) / static_cast<double>(curve.n));
        for (std::size_t ei = 0; ei < curve.estimators.size(); ++ei)
            out += "," + format_double(curve.mean_norms(ki, ei));
        out += "\n";
    }
    return out;
}

std::string breakdown_curve_svg(const BreakdownCurve& curve) {
    const double width = 640.0, height = 420.0;
    const double ml = 70.0, mr = 160.0, mt = 30.0, mb = 50.0;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double ymax = 1.0;
    for (std::size_t ki = 0; ki < curve.ks.size(); ++ki)
        for (std::size_t ei = 0; ei < curve.estimators.size(); ++ei)
            ymax = std::max(ymax, curve.mean_norms(ki, ei));
    ymax *= 1.05;

    const std::vector<std::string> palette = {"#D62728", "#1F77B4", "#2CA02C", "#9467BD",
                                              "#FF7F0E", "#8C564B"};

    SvgWriter svg(width, height);
    svg.line(ml, mt, ml, mt + ph, "#000000", 1.0);
    svg.line(ml, mt + ph, ml + pw, mt + ph, "#000000", 1.0);

    for (int tick = 0; tick <= 5; ++tick) {
        const double fx = static_cast<double>(tick) / 5.0;  // 0 .. 50 percent
        const double x = ml + fx * pw;
        svg.line(x, mt + ph, x, mt + ph + 5.0, "#000000", 1.0);
        svg.text(x, mt + ph + 20.0, std::to_string(tick * 10) + "%", 11.0, "middle");
    }
    for (int tick = 0; tick <= 4; ++tick) {
        const double fy = static_cast<double>(tick) / 4.0;
        const double y = mt + ph - fy * ph;
        svg.line(ml - 5.0, y, ml, y, "#000000", 1.0);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", fy * ymax);
        svg.text(ml - 8.0, y + 4.0, buf, 11.0, "end");
    }
    svg.text(ml + pw / 2.0, height - 12.0, "contaminated cells per column", 12.0, "middle");
    svg.text(0, 0, "mean estimate norm", 12.0, "middle",
             "translate(16," + SvgWriter::num(mt + ph / 2.0) + ") rotate(-90)");

    const double half = static_cast<double>(curve.n) / 2.0;
    for (std::size_t ei = 0; ei < curve.estimators.size(); ++ei) {
        std::string pts;
        for (std::size_t ki = 0; ki < curve.ks.size(); ++ki) {
            const double fx = static_cast<double>(curve.ks[ki]) / half;
            const double fy = curve.mean_norms(ki, ei) / ymax;
            if (ki) pts += " ";
            pts += SvgWriter::num(ml + fx * pw) + "," + SvgWriter::num(mt + ph - fy * ph);
        }
        const std::string& color = palette[ei % palette.size()];
        svg.polyline(pts, color, 1.5);
        const double ly = mt + 16.0 + 18.0 * static_cast<double>(ei);
        svg.line(ml + pw + 10.0, ly - 4.0, ml + pw + 34.0, ly - 4.0, color, 2.0);
        svg.text(ml + pw + 40.0, ly, curve_estimator_name(curve.estimators[ei]), 11.0);
    }
    return svg.finish();
}

}  // namespace cellrobust
