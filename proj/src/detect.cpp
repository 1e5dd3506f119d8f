#include "cellrobust/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cellrobust/errors.hpp"
#include "cellrobust/svg.hpp"

namespace cellrobust {

namespace {

struct ColumnStats {
    double med;
    double scale;
};

std::vector<ColumnStats> column_stats(const DataMatrix& x) {
    std::vector<ColumnStats> stats(x.d());
    for (std::size_t j = 0; j < x.d(); ++j) {
        const Vector col = x.observed_col(j);
        if (col.empty()) throw DataError("detect: column " + x.col_names[j] + " has no observed values");
        const double m = median(col);
        const double s = mad(col);
        if (s <= 0.0)
            throw DataError("detect: zero robust scale in column " + x.col_names[j]);
        stats[j] = {m, s};
    }
    return stats;
}

void fill_row_flags(CellFlags& f, const DataMatrix& x) {
    f.row_flags.assign(x.n(), 0);
    for (std::size_t i = 0; i < x.n(); ++i) {
        std::size_t observed = 0, flagged = 0;
        for (std::size_t j = 0; j < x.d(); ++j) {
            if (x.is_missing(i, j)) continue;
            ++observed;
            if (f.flags(i, j)) ++flagged;
        }
        if (observed > 0 && static_cast<double>(flagged) > 0.5 * static_cast<double>(observed))
            f.row_flags[i] = 1;
    }
}

}  // namespace

double weighted_median(std::vector<std::pair<double, double>> vw) {
    if (vw.empty()) throw DataError("weighted_median: empty input");
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& [v, w] : vw) total += w;
    const double half = 0.5 * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < vw.size(); ++i) {
        cum += vw[i].second;
        if (cum >= half - 1e-12 * total) {
            if (std::abs(cum - half) <= 1e-12 * total && i + 1 < vw.size())
                return 0.5 * (vw[i].first + vw[i + 1].first);
            return vw[i].first;
        }
    }
    return vw.back().first;
}

CellFlags flag_univariate(const DataMatrix& x, double cutoff) {
    const std::vector<ColumnStats> stats = column_stats(x);
    CellFlags f;
    f.cutoff = cutoff;
    f.flags = BoolMat(x.n(), x.d());
    f.stdres = Matrix(x.n(), x.d());
    f.predicted = Matrix(x.n(), x.d());
    f.missing = x.missing;

    for (std::size_t j = 0; j < x.d(); ++j) {
        for (std::size_t i = 0; i < x.n(); ++i) {
            f.predicted(i, j) = stats[j].med;
            if (x.is_missing(i, j)) continue;
            const double z = (x.values(i, j) - stats[j].med) / stats[j].scale;
            f.stdres(i, j) = z;
            f.flags.set(i, j, std::abs(z) > cutoff);
        }
    }
    fill_row_flags(f, x);
    return f;
}

CellFlags ddc(const DataMatrix& x, const DdcOptions& opts) {
    const std::size_t n = x.n();
    const std::size_t d = x.d();
    if (n < 20) throw DataError("ddc: need at least 20 rows");
    if (d < 2) throw DataError("ddc: need at least 2 columns");

    const std::vector<ColumnStats> stats = column_stats(x);

    // Standardized matrix; missing cells stay missing.
    Matrix z(n, d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (!x.is_missing(i, j))
                z(i, j) = (x.values(i, j) - stats[j].med) / stats[j].scale;

    // Robust correlations between all column pairs on pairwise-complete rows.
    Matrix corr(d, d);
    for (std::size_t j = 0; j < d; ++j) corr(j, j) = 1.0;
    for (std::size_t j = 0; j + 1 < d; ++j) {
        for (std::size_t k = j + 1; k < d; ++k) {
            Vector a, b;
            for (std::size_t i = 0; i < n; ++i) {
                if (x.is_missing(i, j) || x.is_missing(i, k)) continue;
                a.push_back(z(i, j));
                b.push_back(z(i, k));
            }
            double r = 0.0;
            if (a.size() >= 3) {
                const SpearmanResult sr = spearman_corr(a, b);
                if (!sr.degenerate) r = sr.rho;
            }
            corr(j, k) = r;
            corr(k, j) = r;
        }
    }

    // Retained predictors per column: strongest correlations first.
    std::vector<std::vector<std::size_t>> predictors(d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<std::size_t> cand;
        for (std::size_t k = 0; k < d; ++k)
            if (k != j && std::abs(corr(j, k)) >= opts.corr_threshold) cand.push_back(k);
        std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(corr(j, a)) > std::abs(corr(j, b));
        });
        if (cand.size() > opts.max_predictors) cand.resize(opts.max_predictors);
        predictors[j] = std::move(cand);
    }

    // Predicted standardized cells: weighted median of slope-scaled
    // predictor values, zero when nothing is available.
    Matrix zhat(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::pair<double, double>> vw;
            for (std::size_t k : predictors[j]) {
                if (x.is_missing(i, k)) continue;
                vw.emplace_back(corr(j, k) * z(i, k), std::abs(corr(j, k)));
            }
            zhat(i, j) = vw.empty() ? 0.0 : weighted_median(std::move(vw));
        }
    }

    // Residuals on observed cells, standardized by the column residual MAD.
    CellFlags f;
    f.cutoff = opts.cutoff;
    f.flags = BoolMat(n, d);
    f.stdres = Matrix(n, d);
    f.predicted = Matrix(n, d);
    f.missing = x.missing;

    for (std::size_t j = 0; j < d; ++j) {
        Vector res;
        res.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!x.is_missing(i, j)) res.push_back(z(i, j) - zhat(i, j));
        const double rscale = std::max(mad(res), 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            f.predicted(i, j) = stats[j].med + stats[j].scale * zhat(i, j);
            if (x.is_missing(i, j)) continue;
            const double s = (z(i, j) - zhat(i, j)) / rscale;
            f.stdres(i, j) = s;
            f.flags.set(i, j, std::abs(s) > opts.cutoff);
        }
    }
    fill_row_flags(f, x);
    return f;
}

namespace {

// Color ramps: residual magnitude `cutoff` maps to the light end, 10 to the
// darkest shade.
const char* kYellow = "#FFFF00";
const char* kWhite = "#FFFFFF";
const char* kRedLight = "#FFCCCC";
const char* kRedDark = "#990000";
const char* kBlueLight = "#CCCCFF";
const char* kBlueDark = "#000099";
constexpr double kSaturation = 10.0;

std::string cell_color(double stdres, double cutoff, bool missing) {
    if (missing) return kWhite;
    const double a = std::abs(stdres);
    if (a <= cutoff) return kYellow;
    const double t = (a - cutoff) / (kSaturation - cutoff);
    return stdres > 0.0 ? SvgWriter::lerp_color(kRedLight, kRedDark, t)
                        : SvgWriter::lerp_color(kBlueLight, kBlueDark, t);
}

}  // namespace

std::string cellmap_svg(const CellFlags& flags, const std::vector<std::string>& row_names,
                        const std::vector<std::string>& col_names) {
    const std::size_t n = flags.stdres.rows();
    const std::size_t d = flags.stdres.cols();
    if (row_names.size() != n || col_names.size() != d)
        throw DataError("cellmap: name dimensions do not match the flags");

    const double cell = 24.0;
    std::size_t max_row_chars = 1;
    for (const auto& s : row_names) max_row_chars = std::max(max_row_chars, s.size());
    std::size_t max_col_chars = 1;
    for (const auto& s : col_names) max_col_chars = std::max(max_col_chars, s.size());

    const double left = 10.0 + 7.0 * static_cast<double>(max_row_chars);
    const double top = 10.0 + 6.5 * static_cast<double>(max_col_chars);
    const double width = left + cell * static_cast<double>(d) + 10.0;
    const double height = top + cell * static_cast<double>(n) + 10.0;

    SvgWriter svg(width, height);
    for (std::size_t j = 0; j < d; ++j) {
        const double x = left + cell * (static_cast<double>(j) + 0.5);
        svg.text(0, 0, col_names[j], 11.0, "start",
                 "translate(" + SvgWriter::num(x + 4.0) + "," + SvgWriter::num(top - 4.0) +
                     ") rotate(-90)");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double y = top + cell * (static_cast<double>(i) + 0.5);
        svg.text(left - 5.0, y + 4.0, row_names[i], 11.0, "end");
        for (std::size_t j = 0; j < d; ++j) {
            const double x = left + cell * static_cast<double>(j);
            const bool miss = flags.missing.rows() == n && flags.missing(i, j);
            svg.rect(x, top + cell * static_cast<double>(i), cell, cell,
                     cell_color(flags.stdres(i, j), flags.cutoff, miss), "#888888", 0.5);
        }
    }
    return svg.finish();
}

void write_cellmap(const CellFlags& flags, const std::vector<std::string>& row_names,
                   const std::vector<std::string>& col_names, const std::string& path) {
    write_text_atomic(path, cellmap_svg(flags, row_names, col_names));
}

}  // namespace cellrobust
