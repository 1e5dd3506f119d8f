#include "cellrobust/ca.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cellrobust/errors.hpp"
#include "cellrobust/svg.hpp"

namespace cellrobust {

ContingencyTable ContingencyTable::from_data(const DataMatrix& data) {
    if (data.has_missing()) throw DataError("contingency table: missing cells not allowed");
    for (std::size_t i = 0; i < data.n(); ++i)
        for (std::size_t j = 0; j < data.d(); ++j)
            if (data.values(i, j) < 0.0)
                throw DataError("contingency table: negative count at row " +
                                std::to_string(i + 1) + ", column " + std::to_string(j + 1));
    ContingencyTable t;
    t.counts = data.values;
    t.row_names = data.row_names;
    t.col_names = data.col_names;
    return t;
}

ProfileDecomposition profile_matrix(const ContingencyTable& table) {
    const std::size_t n = table.counts.rows();
    const std::size_t d = table.counts.cols();
    double total = 0.0;
    for (double v : table.counts.data()) total += v;
    if (total <= 0.0) throw DataError("profile_matrix: table total is zero");

    ProfileDecomposition out;
    out.row_masses.assign(n, 0.0);
    out.col_masses.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double p = table.counts(i, j) / total;
            out.row_masses[i] += p;
            out.col_masses[j] += p;
        }
    for (std::size_t i = 0; i < n; ++i)
        if (out.row_masses[i] <= 0.0)
            throw DataError("profile_matrix: row " +
                            (i < table.row_names.size() ? table.row_names[i]
                                                        : std::to_string(i + 1)) +
                            " has zero total");
    for (std::size_t j = 0; j < d; ++j)
        if (out.col_masses[j] <= 0.0)
            throw DataError("profile_matrix: column " +
                            (j < table.col_names.size() ? table.col_names[j]
                                                        : std::to_string(j + 1)) +
                            " has zero total");

    // S_ij = (P_ij - r_i c_j) / sqrt(r_i c_j)
    out.s = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double p = table.counts(i, j) / total;
            out.s(i, j) = (p - out.row_masses[i] * out.col_masses[j]) /
                          std::sqrt(out.row_masses[i] * out.col_masses[j]);
        }
    return out;
}

namespace {

Matrix principal_coords(const Matrix& vectors, const Vector& gamma, const Vector& masses) {
    Matrix pc(vectors.rows(), gamma.size());
    for (std::size_t i = 0; i < vectors.rows(); ++i) {
        const double w = 1.0 / std::sqrt(masses[i]);
        for (std::size_t j = 0; j < gamma.size(); ++j) pc(i, j) = w * vectors(i, j) * gamma[j];
    }
    return pc;
}

}  // namespace

CASolution classical_ca(const ContingencyTable& table, std::size_t k) {
    ProfileDecomposition prof = profile_matrix(table);
    const std::size_t n = prof.s.rows();
    const std::size_t d = prof.s.cols();
    const std::size_t max_k = std::min(n, d) - 1;
    if (k < 1 || k > max_k)
        throw DataError("classical_ca: k must be between 1 and min(n,d)-1 = " +
                        std::to_string(max_k));

    const SvdResult dec = svd(prof.s, k);

    CASolution sol;
    sol.s = std::move(prof.s);
    sol.u = dec.u;
    sol.gamma = dec.singular_values;
    sol.v = dec.v;
    sol.k = k;
    sol.row_masses = std::move(prof.row_masses);
    sol.col_masses = std::move(prof.col_masses);
    sol.row_names = table.row_names;
    sol.col_names = table.col_names;
    sol.row_pc = principal_coords(sol.u, sol.gamma, sol.row_masses);
    sol.col_pc = principal_coords(sol.v, sol.gamma, sol.col_masses);
    return sol;
}

RobustPcaResult robust_pca_zero_center(const Matrix& s, std::size_t k,
                                       const RobustPcaOptions& opts) {
    const std::size_t n = s.rows();
    const std::size_t d = s.cols();
    if (n == 0 || d == 0) throw DataError("robust_pca_zero_center: empty matrix");

    // Initial cell cleaning with ddc when its preconditions hold.
    BoolMat flags(n, d);
    Matrix cleaned = s;
    if (n >= 20 && d >= 2) {
        DdcOptions dopts;
        dopts.cutoff = opts.cutoff;
        dopts.corr_threshold = opts.ddc_corr_threshold;
        const CellFlags initial = ddc(DataMatrix::from_matrix(s), dopts);
        flags = initial.flags;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (flags(i, j)) cleaned(i, j) = initial.predicted(i, j);
    }

    SvdResult dec = svd(cleaned);
    if (k == 0) {
        // Smallest rank explaining at least 80% of the spectrum.
        double total = 0.0;
        for (double g : dec.singular_values) total += g * g;
        if (total <= 0.0) throw DataError("robust_pca_zero_center: zero matrix after cleaning");
        double cum = 0.0;
        for (std::size_t j = 0; j < dec.singular_values.size(); ++j) {
            cum += dec.singular_values[j] * dec.singular_values[j];
            if (cum / total >= 0.80) {
                k = j + 1;
                break;
            }
        }
    }
    if (k >= n) throw DataError("robust_pca_zero_center: k must be below n");
    if (k > std::min(n, d)) throw DataError("robust_pca_zero_center: k exceeds min(n,d)");
    if (k > svd_rank(dec, n, d))
        throw DataError("robust_pca_zero_center: k exceeds the rank of the cleaned matrix");

    auto truncate_v = [&](const SvdResult& full) {
        Matrix v(d, k);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < k; ++j) v(i, j) = full.v(i, j);
        return v;
    };

    Matrix v = truncate_v(dec);
    Matrix stdres(n, d);
    Matrix fit(n, d);
    int iterations = 0;

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        iterations = iter;
        fit = (cleaned * v) * v.transposed();

        // Residuals are always measured against the original matrix.
        BoolMat new_flags(n, d);
        for (std::size_t j = 0; j < d; ++j) {
            Vector col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = s(i, j) - fit(i, j);
            const double scale = std::max(mad(col), 1e-12);
            for (std::size_t i = 0; i < n; ++i) {
                stdres(i, j) = col[i] / scale;
                new_flags.set(i, j, std::abs(stdres(i, j)) > opts.cutoff);
            }
        }

        cleaned = s;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (new_flags(i, j)) cleaned(i, j) = fit(i, j);

        dec = svd(cleaned);
        const Matrix v_new = truncate_v(dec);
        const double angle = max_principal_angle(v, v_new);
        const bool stable_flags = new_flags == flags;
        flags = new_flags;
        v = v_new;
        if (stable_flags || angle < 1e-8) break;
    }

    RobustPcaResult out;
    out.loadings = v;
    out.scores = cleaned * v;
    out.cleaned = cleaned;
    out.eigenvalues.resize(k);
    for (std::size_t j = 0; j < k; ++j)
        out.eigenvalues[j] = dec.singular_values[j] * dec.singular_values[j] /
                             static_cast<double>(n);
    out.iterations = iterations;
    out.flags.flags = flags;
    out.flags.stdres = stdres;
    out.flags.predicted = fit;
    out.flags.cutoff = opts.cutoff;
    out.flags.missing = BoolMat(n, d);
    out.flags.row_flags.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < d; ++j)
            if (flags(i, j)) ++c;
        if (static_cast<double>(c) > 0.5 * static_cast<double>(d)) out.flags.row_flags[i] = 1;
    }
    return out;
}

CASolution robust_ca(const ContingencyTable& table, std::size_t k,
                     const RobustPcaOptions& opts) {
    ProfileDecomposition prof = profile_matrix(table);
    const std::size_t n = prof.s.rows();
    const std::size_t d = prof.s.cols();
    const std::size_t max_k = std::min(n, d) - 1;
    if (k > max_k)
        throw DataError("robust_ca: k must be at most min(n,d)-1 = " + std::to_string(max_k));

    const RobustPcaResult pca = robust_pca_zero_center(prof.s, k, opts);
    const std::size_t kk = pca.eigenvalues.size();

    Vector gamma(kk);
    for (std::size_t j = 0; j < kk; ++j) {
        gamma[j] = std::sqrt(static_cast<double>(n) * pca.eigenvalues[j]);
        // Profile-space singular values are O(1); anything at rounding level
        // means the component does not exist (e.g. an independence table).
        if (gamma[j] <= 1e-12)
            throw DataError("robust_ca: component " + std::to_string(j + 1) +
                            " has a zero singular value");
    }

    CASolution sol;
    sol.s = std::move(prof.s);
    sol.gamma = gamma;
    sol.v = pca.loadings;
    sol.u = Matrix(n, kk);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < kk; ++j) sol.u(i, j) = pca.scores(i, j) / gamma[j];
    sol.k = kk;
    sol.flags = pca.flags;
    sol.row_masses = std::move(prof.row_masses);
    sol.col_masses = std::move(prof.col_masses);
    sol.row_names = table.row_names;
    sol.col_names = table.col_names;
    sol.row_pc = principal_coords(sol.u, sol.gamma, sol.row_masses);
    sol.col_pc = principal_coords(sol.v, sol.gamma, sol.col_masses);
    return sol;
}

std::string biplot_svg(const CASolution& sol) {
    if (sol.k < 2) throw DataError("biplot: need at least 2 components");

    const double width = 560.0, height = 560.0;
    const double margin = 50.0;
    const double span = width - 2.0 * margin;

    // Coordinates below rounding level render as the origin.
    double extent = 1e-6;
    for (std::size_t i = 0; i < sol.row_pc.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) extent = std::max(extent, std::abs(sol.row_pc(i, j)));
    for (std::size_t i = 0; i < sol.col_pc.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) extent = std::max(extent, std::abs(sol.col_pc(i, j)));
    extent *= 1.12;

    auto px = [&](double v) { return margin + (v + extent) / (2.0 * extent) * span; };
    auto py = [&](double v) { return margin + (extent - v) / (2.0 * extent) * span; };

    SvgWriter svg(width, height);
    svg.line(px(-extent), py(0.0), px(extent), py(0.0), "#CCCCCC", 1.0);
    svg.line(px(0.0), py(-extent), px(0.0), py(extent), "#CCCCCC", 1.0);

    for (std::size_t j = 0; j < sol.col_pc.rows(); ++j) {
        const double x = sol.col_pc(j, 0), y = sol.col_pc(j, 1);
        svg.line(px(0.0), py(0.0), px(x), py(y), "#D62728", 1.5);
        // Arrowhead: two short strokes back from the tip.
        const double len = std::hypot(x, y);
        if (len > 1e-12) {
            const double ux = x / len, uy = y / len;
            const double hx = 0.03 * extent;
            const double bx = x - hx * ux, by = y - hx * uy;
            const double oxx = -uy * 0.015 * extent, oxy = ux * 0.015 * extent;
            svg.line(px(x), py(y), px(bx + oxx), py(by + oxy), "#D62728", 1.5);
            svg.line(px(x), py(y), px(bx - oxx), py(by - oxy), "#D62728", 1.5);
        }
        svg.text(px(x) + 4.0, py(y) - 4.0, sol.col_names[j], 11.0, "start", "", "#D62728");
    }
    for (std::size_t i = 0; i < sol.row_pc.rows(); ++i) {
        const double x = sol.row_pc(i, 0), y = sol.row_pc(i, 1);
        svg.circle(px(x), py(y), 2.5, "#1F77B4");
        svg.text(px(x) + 4.0, py(y) + 3.0, sol.row_names[i], 9.0, "start", "", "#1F77B4");
    }
    return svg.finish();
}

void write_biplot(const CASolution& sol, const std::string& path) {
    write_text_atomic(path, biplot_svg(sol));
}

}  // namespace cellrobust
