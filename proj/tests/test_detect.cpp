#include "doctest.h"

#include <cmath>
#include <fstream>
#include <string>

#include "cellrobust/detect.hpp"
#include "cellrobust/errors.hpp"
#include "cellrobust/rng.hpp"

using namespace cellrobust;

namespace {

// Gaussian data with covariance Sigma_jk = rho^{|j-k|} via the AR(1)
// construction x_j = rho * x_{j-1} + sqrt(1-rho^2) * e_j.
Matrix ar1_gaussian(Rng& rng, std::size_t n, std::size_t d, double rho) {
    Matrix x(n, d);
    const double s = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        for (std::size_t j = 1; j < d; ++j) x(i, j) = rho * x(i, j - 1) + s * rng.normal();
    }
    return x;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("flag_univariate flags exactly the gross cell") {
    // Bounded noise keeps every clean z-score under the cutoff, so the
    // single planted cell is the only flag.
    Rng rng(3);
    const std::size_t n = 100;
    Matrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 2; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
    x(17, 0) = 50.0;

    const CellFlags f = flag_univariate(DataMatrix::from_matrix(x));
    CHECK(f.flagged_count() == 1);
    CHECK(f.flags(17, 0));
    CHECK(f.predicted(0, 0) == f.predicted(5, 0));  // columnwise median prediction
}

TEST_CASE("flag_univariate rejects a zero-scale column") {
    Matrix x(100, 1);
    x(99, 0) = 50.0;  // 99 zeros and one gross value: MAD is zero
    try {
        flag_univariate(DataMatrix::from_matrix(x));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("V1") != std::string::npos);
    }
}

TEST_CASE("flag_univariate clean gaussian flag rate is near 1 percent") {
    Rng rng(2024);
    Matrix x(1000, 5);
    for (std::size_t i = 0; i < 1000; ++i)
        for (std::size_t j = 0; j < 5; ++j) x(i, j) = rng.normal();
    const CellFlags f = flag_univariate(DataMatrix::from_matrix(x));
    for (std::size_t j = 0; j < 5; ++j) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < 1000; ++i)
            if (f.flags(i, j)) ++c;
        const double rate = static_cast<double>(c) / 1000.0;
        CHECK(rate >= 0.005);
        CHECK(rate <= 0.015);
    }
}

TEST_CASE("flag_univariate is invariant under a column affine transform") {
    Rng rng(8);
    Matrix x(60, 3);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
    x(5, 1) = 9.0;

    const CellFlags base = flag_univariate(DataMatrix::from_matrix(x));
    Matrix t = x;
    for (std::size_t i = 0; i < 60; ++i) t(i, 1) = -3.0 * t(i, 1) + 4.0;
    const CellFlags shifted = flag_univariate(DataMatrix::from_matrix(t));

    CHECK(shifted.flags == base.flags);
    for (std::size_t i = 0; i < 60; ++i)
        CHECK(std::abs(shifted.stdres(i, 1)) ==
              doctest::Approx(std::abs(base.stdres(i, 1))).epsilon(1e-9));
}

TEST_CASE("flag_univariate never flags missing cells and applies the row rule") {
    Matrix x(30, 4);
    Rng rng(12);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = 2.0 * rng.uniform() - 1.0;
    for (std::size_t j = 0; j < 3; ++j) x(7, j) = 40.0;  // 3 of 4 cells gross
    DataMatrix dm = DataMatrix::from_matrix(x);
    dm.missing.set(2, 2, true);

    const CellFlags f = flag_univariate(dm);
    CHECK_FALSE(f.flags(2, 2));
    CHECK(f.stdres(2, 2) == 0.0);
    CHECK(f.row_flags[7] == 1);
    CHECK(f.row_flags[6] == 0);
}

TEST_CASE("ddc flags the structural outlier the marginal filter misses") {
    // Strong negative correlation; the planted point is marginally
    // unremarkable in both coordinates but violates the joint pattern.
    Rng rng(51);
    const std::size_t n = 100;
    Matrix x = ar1_gaussian(rng, n, 2, -0.9);
    x(0, 0) = 1.8;
    x(0, 1) = 1.8;

    const DataMatrix dm = DataMatrix::from_matrix(x);
    const CellFlags uni = flag_univariate(dm);
    CHECK_FALSE(uni.flags(0, 0));
    CHECK_FALSE(uni.flags(0, 1));

    const CellFlags dd = ddc(dm);
    CHECK((dd.flags(0, 0) || dd.flags(0, 1)));
}

TEST_CASE("ddc detection quality on the 10 percent cells scenario") {
    Rng rng(17);
    const std::size_t n = 1000, d = 10;
    Matrix x = ar1_gaussian(rng, n, d, -0.9);
    BoolMat truth(n, d);
    std::size_t planted = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (rng.uniform() < 0.10) {
                x(i, j) = 5.0;
                truth.set(i, j, true);
                ++planted;
            }

    const CellFlags f = ddc(DataMatrix::from_matrix(x));
    std::size_t hit = 0, false_pos = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (truth(i, j) && f.flags(i, j)) ++hit;
            if (!truth(i, j) && f.flags(i, j)) ++false_pos;
        }
    const double recall = static_cast<double>(hit) / static_cast<double>(planted);
    const double fpr = static_cast<double>(false_pos) /
                       static_cast<double>(n * d - planted);
    CHECK(recall >= 0.9);
    CHECK(fpr <= 0.05);
}

TEST_CASE("ddc on clean correlated data stays under 2.5 percent flags") {
    Rng rng(23);
    const Matrix x = ar1_gaussian(rng, 1000, 10, -0.9);
    const CellFlags f = ddc(DataMatrix::from_matrix(x));
    const double rate = static_cast<double>(f.flagged_count()) / 10000.0;
    CHECK(rate <= 0.025);
}

TEST_CASE("ddc falls back to the marginal filter without correlated columns") {
    Rng rng(31);
    Matrix x(1000, 4);
    for (std::size_t i = 0; i < 1000; ++i)
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = rng.normal();
    x(3, 2) = 8.0;

    const DataMatrix dm = DataMatrix::from_matrix(x);
    const CellFlags uni = flag_univariate(dm);
    const CellFlags dd = ddc(dm);
    CHECK(dd.flags == uni.flags);
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(dd.stdres(i, 0) == doctest::Approx(uni.stdres(i, 0)).epsilon(1e-9));
}

TEST_CASE("ddc never flags missing cells") {
    Rng rng(41);
    Matrix x = ar1_gaussian(rng, 50, 4, -0.9);
    DataMatrix dm = DataMatrix::from_matrix(x);
    dm.missing.set(0, 0, true);
    dm.missing.set(12, 3, true);
    const CellFlags f = ddc(dm);
    CHECK_FALSE(f.flags(0, 0));
    CHECK_FALSE(f.flags(12, 3));
    CHECK(f.stdres(0, 0) == 0.0);
}

TEST_CASE("ddc commutes with column permutations") {
    Rng rng(43);
    const Matrix x = ar1_gaussian(rng, 80, 4, -0.9);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Matrix xp(80, 4);
    for (std::size_t i = 0; i < 80; ++i)
        for (std::size_t j = 0; j < 4; ++j) xp(i, j) = x(i, perm[j]);

    const CellFlags base = ddc(DataMatrix::from_matrix(x));
    const CellFlags permuted = ddc(DataMatrix::from_matrix(xp));
    for (std::size_t i = 0; i < 80; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(permuted.flags(i, j) == base.flags(i, perm[j]));
}

TEST_CASE("ddc validates its preconditions") {
    Matrix small(10, 3, 1.0);
    CHECK_THROWS_AS(ddc(DataMatrix::from_matrix(small)), DataError);
    Matrix narrow(30, 1, 1.0);
    CHECK_THROWS_AS(ddc(DataMatrix::from_matrix(narrow)), DataError);
}

TEST_CASE("weighted median matches the plain median on equal weights") {
    CHECK(weighted_median({{3, 1}, {1, 1}, {2, 1}}) == 2.0);
    CHECK(weighted_median({{4, 1}, {1, 1}, {3, 1}, {2, 1}}) == 2.5);
    CHECK(weighted_median({{5, 10}, {1, 1}}) == 5.0);
}

TEST_CASE("cellmap colors follow the residual ramp") {
    CellFlags f;
    f.cutoff = kDefaultCutoff;
    f.stdres = Matrix::from_rows({{0.0, 10.0}, {-10.0, 2.6}});
    f.flags = BoolMat(2, 2);
    f.flags.set(0, 1, true);
    f.flags.set(1, 0, true);
    f.flags.set(1, 1, true);
    f.predicted = Matrix(2, 2);
    f.missing = BoolMat(2, 2);
    f.row_flags = {0, 0};

    const std::string svg = cellmap_svg(f, {"a", "b"}, {"u", "v"});
    CHECK(svg.find("#FFFF00") != std::string::npos);  // clean cell
    CHECK(svg.find("#990000") != std::string::npos);  // +10: darkest red
    CHECK(svg.find("#000099") != std::string::npos);  // -10: darkest blue
}

TEST_CASE("cellmap of an all-clean 2x2 grid has four yellow cells") {
    CellFlags f;
    f.cutoff = kDefaultCutoff;
    f.stdres = Matrix(2, 2);
    f.flags = BoolMat(2, 2);
    f.predicted = Matrix(2, 2);
    f.missing = BoolMat(2, 2);
    f.row_flags = {0, 0};
    const std::string svg = cellmap_svg(f, {"r1", "r2"}, {"c1", "c2"});
    std::size_t yellow = 0, pos = 0;
    while ((pos = svg.find("#FFFF00", pos)) != std::string::npos) {
        ++yellow;
        pos += 7;
    }
    CHECK(yellow == 4);
}

TEST_CASE("cellmap golden file") {
    CellFlags f;
    f.cutoff = kDefaultCutoff;
    f.stdres = Matrix::from_rows({{0.2, -0.4, 3.1},
                                  {5.5, 0.0, -2.9},
                                  {-0.1, 12.0, 0.7},
                                  {0.9, -1.2, -15.0},
                                  {2.0, 0.3, 0.0}});
    f.flags = BoolMat(5, 3);
    f.missing = BoolMat(5, 3);
    f.missing.set(4, 2, true);
    f.predicted = Matrix(5, 3);
    f.row_flags.assign(5, 0);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            f.flags.set(i, j, std::abs(f.stdres(i, j)) > f.cutoff);

    const std::string svg =
        cellmap_svg(f, {"r1", "r2", "r3", "r4", "r5"}, {"alpha", "beta", "gamma"});
    const std::string golden = read_file(std::string(GOLDEN_DIR) + "/cellmap_5x3.svg");
    CHECK(svg == golden);
}
