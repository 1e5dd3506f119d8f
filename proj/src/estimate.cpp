#include "cellrobust/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "cellrobust/errors.hpp"

namespace cellrobust {

Vector coordwise_location(const DataMatrix& x, LocationKind kind,
                          std::optional<std::size_t> h) {
    Vector mu(x.d());
    for (std::size_t j = 0; j < x.d(); ++j) {
        const Vector col = x.observed_col(j);
        if (col.empty())
            throw DataError("coordwise_location: column " + x.col_names[j] + " is empty");
        if (kind == LocationKind::Median) {
            mu[j] = median(col);
        } else {
            const std::size_t m = col.size();
            std::size_t hj = h.value_or(m / 2 + 1);
            hj = std::clamp(hj, m / 2 + 1, m);
            mu[j] = univariate_mcd(col, hj).location;
        }
    }
    return mu;
}

Vector spatial_median(const DataMatrix& x, double tol, int max_iter) {
    if (x.has_missing()) throw DataError("spatial_median: missing cells not supported");
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    if (n == 0) throw DataError("spatial_median: empty data");
    if (n == 1) return x.values.row(0);

    bool all_same = true;
    for (std::size_t i = 1; i < n && all_same; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (x.values(i, j) != x.values(0, j)) { all_same = false; break; }
    if (all_same) throw DataError("spatial_median: all points identical");

    Vector y = coordwise_location(x, LocationKind::Median);
    constexpr double kAnchorTol = 1e-12;

    for (int iter = 0; iter < max_iter; ++iter) {
        Vector tnum(d, 0.0);
        double tden = 0.0;
        Vector r(d, 0.0);
        std::size_t anchors = 0;

        for (std::size_t i = 0; i < n; ++i) {
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.values(i, j) - y[j];
                dist += diff * diff;
            }
            dist = std::sqrt(dist);
            if (dist <= kAnchorTol) {
                ++anchors;
                continue;
            }
            const double w = 1.0 / dist;
            tden += w;
            for (std::size_t j = 0; j < d; ++j) {
                tnum[j] += w * x.values(i, j);
                r[j] += w * (x.values(i, j) - y[j]);
            }
        }

        Vector next(d);
        if (anchors == 0) {
            for (std::size_t j = 0; j < d; ++j) next[j] = tnum[j] / tden;
        } else {
            // Subgradient test at a data point; damped Vardi-Zhang step
            // otherwise.
            const double rn = norm2(r);
            if (rn <= static_cast<double>(anchors)) return y;
            const double eta = static_cast<double>(anchors) / rn;
            for (std::size_t j = 0; j < d; ++j)
                next[j] = (1.0 - eta) * (tnum[j] / tden) + eta * y[j];
        }

        double step = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = next[j] - y[j];
            step += diff * diff;
        }
        y = std::move(next);
        if (std::sqrt(step) < tol) return y;
    }

    std::ostringstream msg;
    msg << "spatial_median: no convergence after " << max_iter << " iterations; last iterate (";
    for (std::size_t j = 0; j < d; ++j) msg << (j ? ", " : "") << y[j];
    msg << ")";
    throw DataError(msg.str());
}

namespace {

CovModel moments(const DataMatrix& x, double denom_offset, const std::string& method) {
    if (x.has_missing()) throw DataError(method + ": missing cells not supported");
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    if (n < 2) throw DataError(method + ": need at least 2 rows");

    CovModel m;
    m.method = method;
    m.mu.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) m.mu[j] += x.values(i, j);
    for (double& v : m.mu) v /= static_cast<double>(n);

    m.sigma = Matrix(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dj = x.values(i, j) - m.mu[j];
            for (std::size_t l = j; l < d; ++l)
                m.sigma(j, l) += dj * (x.values(i, l) - m.mu[l]);
        }
    }
    const double denom = static_cast<double>(n) - denom_offset;
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t l = j; l < d; ++l) {
            m.sigma(j, l) /= denom;
            m.sigma(l, j) = m.sigma(j, l);
        }
    m.n_used = Matrix(d, d, static_cast<double>(n));
    return m;
}

// Fills missing cells with conditional means under N(mu, sigma).
void impute_conditional_means(const DataMatrix& x,
                              const std::map<std::string, std::vector<std::size_t>>& patterns,
                              const Vector& mu, const Matrix& sigma, Matrix& imputed) {
    const std::size_t d = x.d();
    for (const auto& [key, rows] : patterns) {
        std::vector<std::size_t> obs, mis;
        for (std::size_t j = 0; j < d; ++j)
            (key[j] == '0' ? obs : mis).push_back(j);
        if (mis.empty()) continue;
        const std::size_t no = obs.size();
        const std::size_t nm = mis.size();

        Matrix sigma_oo(no, no);
        for (std::size_t a = 0; a < no; ++a)
            for (std::size_t b = 0; b < no; ++b) sigma_oo(a, b) = sigma(obs[a], obs[b]);
        const Matrix chol = cholesky(sigma_oo);
        Matrix sigma_mo(nm, no);
        for (std::size_t a = 0; a < nm; ++a)
            for (std::size_t b = 0; b < no; ++b) sigma_mo(a, b) = sigma(mis[a], obs[b]);

        for (std::size_t i : rows) {
            Vector xo(no);
            for (std::size_t a = 0; a < no; ++a) xo[a] = x.values(i, obs[a]) - mu[obs[a]];
            const Vector w = cholesky_solve(chol, xo);
            for (std::size_t a = 0; a < nm; ++a) {
                double v = mu[mis[a]];
                for (std::size_t b = 0; b < no; ++b) v += sigma_mo(a, b) * w[b];
                imputed(i, mis[a]) = v;
            }
        }
    }
}

Matrix pairwise_counts(const DataMatrix& x) {
    const std::size_t d = x.d();
    Matrix counts(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t l = j; l < d; ++l) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < x.n(); ++i)
                if (!x.is_missing(i, j) && !x.is_missing(i, l)) ++c;
            counts(j, l) = static_cast<double>(c);
            counts(l, j) = counts(j, l);
        }
    }
    return counts;
}

}  // namespace

CovModel classical_cov(const DataMatrix& x) { return moments(x, 1.0, "classical"); }

CovModel classical_mle(const DataMatrix& x) { return moments(x, 0.0, "classical_mle"); }

EmFit em_mle(const DataMatrix& x, const EmOptions& opts) {
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    for (std::size_t j = 0; j < d; ++j)
        if (x.observed_count_col(j) < 2)
            throw DataError("em_mle: column " + x.col_names[j] + " has fewer than 2 observed values");
    for (std::size_t i = 0; i < n; ++i)
        if (x.observed_count_row(i) == 0)
            throw DataError("em_mle: row " + std::to_string(i + 1) + " is fully missing");

    // Group rows by missingness pattern; std::map keeps the order stable.
    std::map<std::string, std::vector<std::size_t>> patterns;
    for (std::size_t i = 0; i < n; ++i) {
        std::string key(d, '0');
        for (std::size_t j = 0; j < d; ++j)
            if (x.is_missing(i, j)) key[j] = '1';
        patterns[key].push_back(i);
    }

    Vector mu(d);
    Matrix sigma(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        const Vector col = x.observed_col(j);
        mu[j] = median(col);
        const double s = mad(col);
        sigma(j, j) = std::max(s * s, 1e-12);
    }

    EmFit fit;
    fit.imputed = x.values;
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        const double floor_val = opts.ridge * sigma.trace() / static_cast<double>(d);
        if (min_eigenvalue(sigma) < floor_val) sigma = psd_repair(sigma, floor_val);

        Vector sum_x(d, 0.0);
        Matrix sum_xx(d, d);
        double loglik = 0.0;

        for (const auto& [key, rows] : patterns) {
            std::vector<std::size_t> obs, mis;
            for (std::size_t j = 0; j < d; ++j)
                (key[j] == '0' ? obs : mis).push_back(j);
            const std::size_t no = obs.size();
            const std::size_t nm = mis.size();

            Matrix sigma_oo(no, no);
            for (std::size_t a = 0; a < no; ++a)
                for (std::size_t b = 0; b < no; ++b) sigma_oo(a, b) = sigma(obs[a], obs[b]);
            const Matrix chol = cholesky(sigma_oo);
            const double logdet = cholesky_logdet(chol);

            Matrix sigma_mo(nm, no);
            for (std::size_t a = 0; a < nm; ++a)
                for (std::size_t b = 0; b < no; ++b) sigma_mo(a, b) = sigma(mis[a], obs[b]);

            // Conditional covariance of the missing block, shared by the
            // whole pattern: Sigma_mm - Sigma_mo Sigma_oo^{-1} Sigma_om.
            Matrix cond(nm, nm);
            Matrix solve_om;
            if (nm > 0) {
                solve_om = cholesky_solve(chol, sigma_mo.transposed());  // no x nm
                for (std::size_t a = 0; a < nm; ++a)
                    for (std::size_t b = 0; b < nm; ++b) {
                        double v = sigma(mis[a], mis[b]);
                        for (std::size_t c = 0; c < no; ++c) v -= sigma_mo(a, c) * solve_om(c, b);
                        cond(a, b) = v;
                    }
            }

            for (std::size_t i : rows) {
                Vector xo(no);
                for (std::size_t a = 0; a < no; ++a) xo[a] = x.values(i, obs[a]) - mu[obs[a]];
                const Vector w = cholesky_solve(chol, xo);
                loglik -= 0.5 * (static_cast<double>(no) * std::log(2.0 * std::numbers::pi) +
                                 logdet + dot(xo, w));

                Vector filled(d);
                for (std::size_t a = 0; a < no; ++a) filled[obs[a]] = x.values(i, obs[a]);
                for (std::size_t a = 0; a < nm; ++a) {
                    double v = mu[mis[a]];
                    for (std::size_t b = 0; b < no; ++b) v += sigma_mo(a, b) * w[b];
                    filled[mis[a]] = v;
                    fit.imputed(i, mis[a]) = v;
                }
                for (std::size_t j = 0; j < d; ++j) {
                    sum_x[j] += filled[j];
                    for (std::size_t l = j; l < d; ++l) sum_xx(j, l) += filled[j] * filled[l];
                }
                for (std::size_t a = 0; a < nm; ++a)
                    for (std::size_t b = 0; b < nm; ++b) {
                        const std::size_t ja = mis[a], jb = mis[b];
                        if (ja <= jb) sum_xx(ja, jb) += cond(a, b);
                    }
            }
        }

        for (std::size_t j = 0; j < d; ++j) mu[j] = sum_x[j] / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = j; l < d; ++l) {
                const double v = sum_xx(j, l) / static_cast<double>(n) - mu[j] * mu[l];
                sigma(j, l) = v;
                sigma(l, j) = v;
            }

        fit.loglik_trace.push_back(loglik);
        fit.iterations = iter;
        if (iter > 1 && loglik - prev_ll < opts.tol) {
            fit.model.mu = mu;
            fit.model.sigma = sigma;
            fit.model.method = "em_mle";
            fit.model.n_used = pairwise_counts(x);
            fit.model.loglik = loglik;
            impute_conditional_means(x, patterns, mu, sigma, fit.imputed);
            return fit;
        }
        prev_ll = loglik;
    }

    std::ostringstream msg;
    msg << "em_mle: no convergence after " << opts.max_iter << " iterations; loglik trace tail:";
    const std::size_t tail = std::min<std::size_t>(fit.loglik_trace.size(), 5);
    for (std::size_t i = fit.loglik_trace.size() - tail; i < fit.loglik_trace.size(); ++i)
        msg << " " << fit.loglik_trace[i];
    throw DataError(msg.str());
}

TwoStepFit two_step_cov(const DataMatrix& x, DetectorKind detector, double cutoff) {
    CellFlags flags;
    if (detector == DetectorKind::Ddc) {
        DdcOptions opts;
        opts.cutoff = cutoff;
        flags = ddc(x, opts);
    } else {
        flags = flag_univariate(x, cutoff);
    }

    DataMatrix filtered = x;
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t j = 0; j < x.d(); ++j)
            if (flags.flags(i, j)) filtered.missing.set(i, j, true);

    for (std::size_t j = 0; j < x.d(); ++j)
        if (filtered.observed_count_col(j) < 2)
            throw DataError("two_step_cov: flagging left column " + x.col_names[j] +
                            " with fewer than 2 observed cells");

    TwoStepFit out;
    out.flags = std::move(flags);
    out.em = em_mle(filtered);
    out.em.model.method = "two_step";
    return out;
}

Matrix pairwise_sigma_from(const Vector& scales, const Matrix& corr, double floor) {
    const std::size_t d = scales.size();
    Matrix sigma(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        sigma(j, j) = scales[j] * scales[j];
        for (std::size_t l = j + 1; l < d; ++l) {
            sigma(j, l) = scales[j] * scales[l] * corr(j, l);
            sigma(l, j) = sigma(j, l);
        }
    }
    return psd_repair(sigma, floor);
}

CovModel pairwise_cov(const DataMatrix& x, RobustScaleKind kind, std::optional<double> floor) {
    const std::size_t d = x.d();
    if (d < 2) throw DataError("pairwise_cov: need at least 2 columns");

    Vector scales(d);
    for (std::size_t j = 0; j < d; ++j) {
        const Vector col = x.observed_col(j);
        if (col.size() < 2)
            throw DataError("pairwise_cov: column " + x.col_names[j] + " has fewer than 2 values");
        scales[j] = robust_scale(col, kind);
        if (scales[j] <= 0.0)
            throw DataError("pairwise_cov: zero scale in column " + x.col_names[j]);
    }

    // Gaussian-consistent transform of the Spearman correlation.
    Matrix corr(d, d);
    for (std::size_t j = 0; j < d; ++j) corr(j, j) = 1.0;
    for (std::size_t j = 0; j + 1 < d; ++j) {
        for (std::size_t l = j + 1; l < d; ++l) {
            Vector a, b;
            for (std::size_t i = 0; i < x.n(); ++i) {
                if (x.is_missing(i, j) || x.is_missing(i, l)) continue;
                a.push_back(x.values(i, j));
                b.push_back(x.values(i, l));
            }
            double r = 0.0;
            if (a.size() >= 3) {
                const SpearmanResult sr = spearman_corr(a, b);
                if (!sr.degenerate) r = 2.0 * std::sin(std::numbers::pi * sr.rho / 6.0);
            }
            corr(j, l) = r;
            corr(l, j) = r;
        }
    }

    Vector sorted_scales = scales;
    std::sort(sorted_scales.begin(), sorted_scales.end());
    const double med_scale = sorted_scales.size() % 2 == 1
                                 ? sorted_scales[sorted_scales.size() / 2]
                                 : 0.5 * (sorted_scales[sorted_scales.size() / 2 - 1] +
                                          sorted_scales[sorted_scales.size() / 2]);
    const double fl = floor.value_or(1e-4 * med_scale * med_scale);

    CovModel m;
    m.method = "pairwise";
    m.mu = coordwise_location(x, LocationKind::Median);
    m.sigma = pairwise_sigma_from(scales, corr, fl);
    m.n_used = pairwise_counts(x);
    return m;
}

}  // namespace cellrobust
