#include "cellrobust/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cellrobust/errors.hpp"

namespace cellrobust {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// One-sided Jacobi (Hestenes) on a tall matrix a (n >= d): columns are
// rotated until mutually orthogonal; the accumulated rotations form V.
void one_sided_jacobi(Matrix& a, Matrix& v) {
    const std::size_t n = a.rows();
    const std::size_t d = a.cols();
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = a(i, p), xq = a(i, q);
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if (apq == 0.0) continue;
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq)) continue;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;

                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = a(i, p), xq = a(i, q);
                    a(i, p) = c * xp - s * xq;
                    a(i, q) = s * xp + c * xq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }
}

// Fill U columns whose singular value is (numerically) zero with an
// orthonormal completion, scanning canonical basis vectors in order so
// the result is deterministic.
void complete_basis(Matrix& u, const std::vector<std::size_t>& missing_cols) {
    const std::size_t n = u.rows();
    const std::size_t k = u.cols();
    std::size_t next = 0;
    for (std::size_t jm : missing_cols) {
        for (; next < n; ++next) {
            Vector cand(n, 0.0);
            cand[next] = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == jm) continue;
                bool is_pending = false;
                for (std::size_t other : missing_cols)
                    if (other == j && other > jm) { is_pending = true; break; }
                if (is_pending) continue;
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += u(i, j) * cand[i];
                for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * u(i, j);
            }
            const double nrm = norm2(cand);
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < n; ++i) u(i, jm) = cand[i] / nrm;
                ++next;
                break;
            }
        }
    }
}

void apply_sign_convention(Matrix& u, Matrix& v) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < v.rows(); ++i) {
            const double a = std::abs(v(i, j));
            if (a > best) { best = a; arg = i; }
        }
        if (v(arg, j) < 0.0) {
            for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
            for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
        }
    }
}

}  // namespace

Matrix SvdResult::reconstruct() const {
    Matrix usv(u.rows(), v.rows());
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t k = 0; k < singular_values.size(); ++k) {
            const double us = u(i, k) * singular_values[k];
            if (us == 0.0) continue;
            for (std::size_t j = 0; j < v.rows(); ++j) usv(i, j) += us * v(j, k);
        }
    return usv;
}

SvdResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw DataError("svd: empty matrix");
    if (!m.all_finite()) throw DataError("svd: input contains non-finite entries");

    const bool flip = m.rows() < m.cols();
    Matrix a = flip ? m.transposed() : m;
    const std::size_t n = a.rows();
    const std::size_t d = a.cols();

    Matrix v = Matrix::identity(d);
    one_sided_jacobi(a, v);

    Vector sv(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a(i, j) * a(i, j);
        sv[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    Matrix u(n, d), vs(d, d);
    Vector sorted(d);
    const double smax = sv.empty() ? 0.0 : sv[order[0]];
    const double tol = std::max(n, d) * kEps * smax;
    std::vector<std::size_t> zero_cols;
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t src = order[j];
        sorted[j] = sv[src];
        for (std::size_t i = 0; i < d; ++i) vs(i, j) = v(i, src);
        if (sv[src] > tol && sv[src] > 0.0) {
            for (std::size_t i = 0; i < n; ++i) u(i, j) = a(i, src) / sv[src];
        } else {
            sorted[j] = sv[src];  // keep the tiny value, only U needs completion
            zero_cols.push_back(j);
        }
    }
    if (!zero_cols.empty()) complete_basis(u, zero_cols);

    SvdResult out;
    if (flip) {
        out.u = vs;
        out.v = u;
    } else {
        out.u = u;
        out.v = vs;
    }
    out.singular_values = sorted;
    apply_sign_convention(out.u, out.v);
    return out;
}

SvdResult svd(const Matrix& m, std::size_t k) {
    const std::size_t kk = std::min(m.rows(), m.cols());
    if (k > kk) throw DataError("svd: requested rank exceeds min(n,d)");
    SvdResult full = svd(m);
    if (k == kk) return full;
    SvdResult out;
    out.singular_values.assign(full.singular_values.begin(),
                               full.singular_values.begin() + static_cast<std::ptrdiff_t>(k));
    out.u = Matrix(full.u.rows(), k);
    out.v = Matrix(full.v.rows(), k);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < full.u.rows(); ++i) out.u(i, j) = full.u(i, j);
        for (std::size_t i = 0; i < full.v.rows(); ++i) out.v(i, j) = full.v(i, j);
    }
    return out;
}

std::size_t svd_rank(const SvdResult& s, std::size_t n, std::size_t d) {
    if (s.singular_values.empty()) return 0;
    const double tol = static_cast<double>(std::max(n, d)) * kEps * s.singular_values[0];
    std::size_t r = 0;
    for (double v : s.singular_values)
        if (v > tol) ++r;
    return r;
}

SymEig sym_eig(const Matrix& s) {
    const std::size_t n = s.rows();
    if (n != s.cols()) throw DataError("sym_eig: matrix not square");
    Matrix a = s;
    Matrix v = Matrix::identity(n);
    const int max_sweeps = 100;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= 1e-14 * std::max(1.0, a.max_abs())) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - sn * aiq;
                    a(i, q) = sn * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - sn * aqi;
                    a(q, i) = sn * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - sn * viq;
                    v(i, q) = sn * vip + c * viq;
                }
            }
        }
    }

    SymEig out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });
    Vector vals(n);
    Matrix vecs(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        vals[j] = out.values[order[j]];
        for (std::size_t i = 0; i < n; ++i) vecs(i, j) = v(i, order[j]);
    }
    out.values = std::move(vals);
    out.vectors = std::move(vecs);
    return out;
}

double min_eigenvalue(const Matrix& s) { return sym_eig(s).values.front(); }

Matrix psd_repair(const Matrix& s, double floor) {
    const std::size_t n = s.rows();
    if (n != s.cols()) throw DataError("psd_repair: matrix not square");
    const double scale = std::max(1.0, s.max_abs());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(s(i, j) - s(j, i)) > 1e-10 * scale) {
                std::ostringstream msg;
                msg << "psd_repair: input not symmetric at (" << i << "," << j << ")";
                throw DataError(msg.str());
            }
    const double lmin = min_eigenvalue(s);
    if (lmin >= floor) return s;
    const double c = floor - lmin;
    Matrix out = s;
    for (std::size_t i = 0; i < n; ++i) out(i, i) += c;
    return out;
}

Matrix cholesky(const Matrix& s) {
    const std::size_t n = s.rows();
    if (n != s.cols()) throw DataError("cholesky: matrix not square");
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = s(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (sum <= 0.0) {
                    std::ostringstream msg;
                    msg << "cholesky: matrix not positive definite (pivot " << i
                        << " = " << sum << ")";
                    throw DataError(msg.str());
                }
                l(i, j) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    return l;
}

Vector cholesky_solve(const Matrix& lower, const Vector& b) {
    const std::size_t n = lower.rows();
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= lower(i, k) * y[k];
        y[i] = sum / lower(i, i);
    }
    Vector x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= lower(k, ii) * x[k];
        x[ii] = sum / lower(ii, ii);
    }
    return x;
}

Matrix cholesky_solve(const Matrix& lower, const Matrix& b) {
    Matrix x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) x.set_col(j, cholesky_solve(lower, b.col(j)));
    return x;
}

double cholesky_logdet(const Matrix& lower) {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
    return 2.0 * s;
}

double mahalanobis_sq(const Vector& x, const Vector& mu, const Matrix& sigma) {
    if (x.size() != mu.size() || sigma.rows() != x.size())
        throw DataError("mahalanobis_sq: dimension mismatch");
    const double lmin = min_eigenvalue(sigma);
    if (lmin <= 1e-12) {
        std::ostringstream msg;
        msg << "mahalanobis_sq: covariance is singular (lambda_min = " << lmin
            << "); apply psd_repair first";
        throw DataError(msg.str());
    }
    Vector diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - mu[i];
    const Matrix l = cholesky(sigma);
    const Vector sol = cholesky_solve(l, diff);
    return dot(diff, sol);
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError("max_principal_angle: shape mismatch");
    const Matrix m = a.transposed() * b;
    const SvdResult s = svd(m);
    double cmin = 1.0;
    for (double v : s.singular_values) cmin = std::min(cmin, v);
    cmin = std::clamp(cmin, -1.0, 1.0);
    return std::acos(cmin);
}

}  // namespace cellrobust
