#include "doctest.h"

#include <cmath>
#include <vector>

#include "cellrobust/errors.hpp"
#include "cellrobust/estimate.hpp"
#include "cellrobust/rng.hpp"

using namespace cellrobust;

namespace {

DataMatrix gaussian_data(std::uint64_t seed, std::size_t n, std::size_t d) {
    Rng rng(seed);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
    return DataMatrix::from_matrix(std::move(x));
}

Matrix ar1_gaussian(Rng& rng, std::size_t n, std::size_t d, double rho) {
    Matrix x(n, d);
    const double s = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        for (std::size_t j = 1; j < d; ++j) x(i, j) = rho * x(i, j - 1) + s * rng.normal();
    }
    return x;
}

double objective(const DataMatrix& x, double mx, double my) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i)
        f += std::hypot(x.values(i, 0) - mx, x.values(i, 1) - my);
    return f;
}

// Gaussian KL divergence D(N(0, a) || N(0, b)) for covariance comparison.
double cov_kl(const Matrix& a, const Matrix& b) {
    const Matrix lb = cholesky(b);
    const Matrix sol = cholesky_solve(lb, a);
    const double tr = sol.trace();
    const double logdet_a = cholesky_logdet(cholesky(a));
    const double logdet_b = cholesky_logdet(lb);
    return 0.5 * (tr - static_cast<double>(a.rows()) - (logdet_a - logdet_b));
}

}  // namespace

TEST_CASE("coordwise median of a small matrix") {
    const DataMatrix x = DataMatrix::from_matrix(
        Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}}));
    const Vector mu = coordwise_location(x, LocationKind::Median);
    CHECK(mu[0] == 0.0);
    CHECK(mu[1] == 0.0);
}

TEST_CASE("coordwise median resists 49 percent column contamination") {
    DataMatrix x = gaussian_data(71, 100, 2);
    for (std::size_t i = 0; i < 49; ++i) x.values(i, 0) = 1e6;
    const Vector mu = coordwise_location(x, LocationKind::Median);
    CHECK(std::abs(mu[0]) < 4.0);
    const Vector mcd = coordwise_location(x, LocationKind::UnivMcd);
    CHECK(std::abs(mcd[0]) < 4.0);
}

TEST_CASE("coordwise location skips missing cells and rejects empty columns") {
    DataMatrix x = DataMatrix::from_matrix(Matrix::from_rows({{1, 5}, {2, 6}, {3, 7}}));
    x.missing.set(2, 0, true);
    const Vector mu = coordwise_location(x, LocationKind::Median);
    CHECK(mu[0] == 1.5);
    CHECK(mu[1] == 6.0);

    for (std::size_t i = 0; i < 3; ++i) x.missing.set(i, 1, true);
    CHECK_THROWS_AS(coordwise_location(x, LocationKind::Median), DataError);
}

TEST_CASE("spatial median of a single point is the point") {
    const DataMatrix x = DataMatrix::from_matrix(Matrix::from_rows({{2.5, -1.0}}));
    const Vector m = spatial_median(x);
    CHECK(m[0] == 2.5);
    CHECK(m[1] == -1.0);
}

TEST_CASE("spatial median of the unit cross is the origin") {
    const DataMatrix x = DataMatrix::from_matrix(
        Matrix::from_rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}}));
    const Vector m = spatial_median(x);
    CHECK(std::abs(m[0]) < 1e-9);
    CHECK(std::abs(m[1]) < 1e-9);
}

TEST_CASE("spatial median matches a refined grid search") {
    const DataMatrix x = gaussian_data(5, 100, 2);
    const Vector w = spatial_median(x, 1e-11, 5000);
    const double fw = objective(x, w[0], w[1]);

    double cx = 0.0, cy = 0.0, best = objective(x, 0.0, 0.0);
    double span = 3.0;
    for (int stage = 0; stage < 8; ++stage) {
        double bx = cx, by = cy;
        for (int a = -20; a <= 20; ++a)
            for (int b = -20; b <= 20; ++b) {
                const double px = cx + span * static_cast<double>(a) / 20.0;
                const double py = cy + span * static_cast<double>(b) / 20.0;
                const double f = objective(x, px, py);
                if (f < best) {
                    best = f;
                    bx = px;
                    by = py;
                }
            }
        cx = bx;
        cy = by;
        span /= 10.0;
    }
    CHECK(fw <= best + 1e-6);
    CHECK(std::abs(fw - best) < 1e-6);
}

TEST_CASE("spatial median stays put when started on the optimal data point") {
    // Heavy multiplicity at the origin makes the data point itself optimal;
    // the subgradient test must accept it instead of dividing by zero.
    const DataMatrix x = DataMatrix::from_matrix(
        Matrix::from_rows({{0, 0}, {0, 0}, {0, 0}, {5, 0}, {0, 5}}));
    const Vector m = spatial_median(x);
    CHECK(std::abs(m[0]) < 1e-9);
    CHECK(std::abs(m[1]) < 1e-9);
}

TEST_CASE("spatial median input validation") {
    DataMatrix x = gaussian_data(6, 10, 2);
    x.missing.set(0, 0, true);
    CHECK_THROWS_AS(spatial_median(x), DataError);

    const DataMatrix same = DataMatrix::from_matrix(Matrix(5, 2, 3.0));
    CHECK_THROWS_AS(spatial_median(same), DataError);
}

TEST_CASE("classical covariance of two points") {
    const CovModel m = classical_cov(DataMatrix::from_matrix(Matrix::from_rows({{0, 0}, {2, 2}})));
    CHECK(m.mu[0] == 1.0);
    CHECK(m.mu[1] == 1.0);
    CHECK(m.sigma(0, 0) == 2.0);
    CHECK(m.sigma(0, 1) == 2.0);
    CHECK(m.sigma(1, 1) == 2.0);
}

TEST_CASE("classical covariance is singular on a hyperplane") {
    Rng rng(9);
    Matrix x(20, 3);
    for (std::size_t i = 0; i < 20; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        x(i, 2) = x(i, 0) + x(i, 1);  // exact linear dependence
    }
    const CovModel m = classical_cov(DataMatrix::from_matrix(x));
    CHECK(std::abs(min_eigenvalue(m.sigma)) < 1e-12);
}

TEST_CASE("classical covariance approaches the truth on gaussian data") {
    const CovModel m = classical_cov(gaussian_data(33, 200, 4));
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(m.mu[j]) < 0.25);
        for (std::size_t l = 0; l < 4; ++l)
            CHECK(std::abs(m.sigma(j, l) - (j == l ? 1.0 : 0.0)) < 0.3);
    }
}

TEST_CASE("classical covariance rejects missing data and single rows") {
    DataMatrix x = gaussian_data(12, 5, 2);
    x.missing.set(1, 1, true);
    CHECK_THROWS_AS(classical_cov(x), DataError);
    CHECK_THROWS_AS(classical_cov(gaussian_data(13, 1, 2)), DataError);
}

TEST_CASE("em_mle on complete data equals the classical MLE") {
    const DataMatrix x = gaussian_data(55, 40, 3);
    const EmFit fit = em_mle(x);
    const CovModel direct = classical_mle(x);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(fit.model.mu[j] == doctest::Approx(direct.mu[j]).epsilon(1e-12));
        for (std::size_t l = 0; l < 3; ++l)
            CHECK(fit.model.sigma(j, l) == doctest::Approx(direct.sigma(j, l)).epsilon(1e-10));
    }
}

TEST_CASE("em_mle imputes the conditional mean in the bivariate case") {
    Rng rng(77);
    const std::size_t n = 60;
    Matrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = 0.8 * x(i, 0) + 0.6 * rng.normal();
    }
    DataMatrix dm = DataMatrix::from_matrix(x);
    dm.missing.set(4, 0, true);  // hide one cell of the first column

    const EmFit fit = em_mle(dm);
    const CovModel& m = fit.model;
    // Closed-form conditional mean from the fitted parameters.
    const double expected =
        m.mu[0] + m.sigma(0, 1) / m.sigma(1, 1) * (x(4, 1) - m.mu[1]);
    CHECK(fit.imputed(4, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("em_mle log-likelihood never decreases") {
    Rng seeds(123);
    for (int rep = 0; rep < 50; ++rep) {
        const std::uint64_t seed = seeds.next_u64();
        Rng rng(seed);
        const std::size_t n = 40, d = 3;
        Matrix x = ar1_gaussian(rng, n, d, 0.6);
        DataMatrix dm = DataMatrix::from_matrix(std::move(x));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (rng.uniform() < 0.15) dm.missing.set(i, j, true);
        bool ok = true;
        for (std::size_t j = 0; j < d && ok; ++j)
            if (dm.observed_count_col(j) < 2) ok = false;
        for (std::size_t i = 0; i < n && ok; ++i)
            if (dm.observed_count_row(i) == 0) ok = false;
        if (!ok) continue;

        const EmFit fit = em_mle(dm);
        for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
            CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - 1e-9);
    }
}

TEST_CASE("em_mle validates column and row coverage") {
    DataMatrix x = gaussian_data(14, 6, 2);
    for (std::size_t i = 0; i < 5; ++i) x.missing.set(i, 1, true);
    CHECK_THROWS_AS(em_mle(x), DataError);

    DataMatrix y = gaussian_data(15, 6, 2);
    y.missing.set(3, 0, true);
    y.missing.set(3, 1, true);
    CHECK_THROWS_AS(em_mle(y), DataError);
}

TEST_CASE("two_step_cov with zero flags equals em_mle equals classical MLE") {
    const DataMatrix x = gaussian_data(91, 60, 3);
    // A huge cutoff guarantees an empty flag set.
    const TwoStepFit two = two_step_cov(x, DetectorKind::Ddc, 1e9);
    CHECK(two.flags.flagged_count() == 0);
    const EmFit full = em_mle(x);
    const CovModel direct = classical_mle(x);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(two.em.model.mu[j] == doctest::Approx(full.model.mu[j]).epsilon(1e-12));
        CHECK(two.em.model.mu[j] == doctest::Approx(direct.mu[j]).epsilon(1e-12));
        for (std::size_t l = 0; l < 3; ++l) {
            CHECK(two.em.model.sigma(j, l) ==
                  doctest::Approx(full.model.sigma(j, l)).epsilon(1e-10));
            CHECK(two.em.model.sigma(j, l) == doctest::Approx(direct.sigma(j, l)).epsilon(1e-10));
        }
    }
}

TEST_CASE("two_step_cov on clean data stays close to classical") {
    const DataMatrix x = gaussian_data(101, 400, 4);
    const TwoStepFit two = two_step_cov(x);
    const CovModel cls = classical_cov(x);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(two.em.model.mu[j] - cls.mu[j]) < 0.1);
        for (std::size_t l = 0; l < 4; ++l)
            CHECK(std::abs(two.em.model.sigma(j, l) - cls.sigma(j, l)) < 0.15);
    }
}

TEST_CASE("two_step_cov beats classical by a wide margin under contamination") {
    // 10% of cells set to 5 on strongly dependent gaussian data.
    Rng rng(57);
    const std::size_t n = 1000, d = 10;
    Matrix x = ar1_gaussian(rng, n, d, -0.9);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (rng.uniform() < 0.10) x(i, j) = 5.0;

    Matrix truth(d, d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t l = 0; l < d; ++l)
            truth(j, l) = std::pow(-0.9, std::abs(static_cast<double>(j) -
                                                  static_cast<double>(l)));

    const DataMatrix dm = DataMatrix::from_matrix(std::move(x));
    const double kl_two = cov_kl(two_step_cov(dm).em.model.sigma, truth);
    const double kl_classical = cov_kl(classical_cov(dm).sigma, truth);
    CHECK(kl_two <= 0.1 * kl_classical);
}

TEST_CASE("pairwise covariance of independent columns is near the identity") {
    const CovModel m = pairwise_cov(gaussian_data(121, 2000, 3));
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t l = 0; l < 3; ++l)
            CHECK(std::abs(m.sigma(j, l) - (j == l ? 1.0 : 0.0)) < 0.15);
}

TEST_CASE("pairwise covariance of a perfectly correlated pair") {
    Rng rng(131);
    Matrix x(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = 2.0 * x(i, 0);
    }
    const DataMatrix dm = DataMatrix::from_matrix(std::move(x));
    const double s0 = mad(dm.observed_col(0));
    const double s1 = mad(dm.observed_col(1));
    const CovModel m = pairwise_cov(dm);
    // Spearman 1 maps to 2 sin(pi/6) = 1, so the off-diagonal is the scale
    // product; the repair step only lifts the diagonal of this singular
    // matrix.
    CHECK(m.sigma(0, 1) == doctest::Approx(s0 * s1).epsilon(1e-9));
    CHECK(min_eigenvalue(m.sigma) >= -1e-12);
}

TEST_CASE("pairwise assembly repairs the engineered indefinite matrix") {
    const Matrix corr = Matrix::from_rows({{1.0, 0.9, -0.9},
                                           {0.9, 1.0, 0.9},
                                           {-0.9, 0.9, 1.0}});
    CHECK(min_eigenvalue(corr) < 0.0);  // genuinely indefinite input
    const double floor = 1e-4;
    const Matrix sigma = pairwise_sigma_from({1.0, 1.0, 1.0}, corr, floor);
    CHECK(min_eigenvalue(sigma) >= floor - 1e-12);
}

TEST_CASE("pairwise correlation part is invariant under monotone transforms") {
    Rng rng(141);
    const Matrix x = ar1_gaussian(rng, 200, 3, 0.7);
    Matrix t = x;
    for (std::size_t i = 0; i < 200; ++i) {
        t(i, 0) = std::exp(x(i, 0));
        t(i, 2) = x(i, 2) * x(i, 2) * x(i, 2);
    }
    const CovModel a = pairwise_cov(DataMatrix::from_matrix(x));
    const CovModel b = pairwise_cov(DataMatrix::from_matrix(t));
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t l = j + 1; l < 3; ++l) {
            const double ra = a.sigma(j, l) / std::sqrt(a.sigma(j, j) * a.sigma(l, l));
            const double rb = b.sigma(j, l) / std::sqrt(b.sigma(j, j) * b.sigma(l, l));
            CHECK(ra == doctest::Approx(rb).epsilon(1e-9));
        }
}

TEST_CASE("pairwise covariance rejects zero-scale columns") {
    Matrix x(30, 2);
    Rng rng(151);
    for (std::size_t i = 0; i < 30; ++i) x(i, 0) = rng.normal();  // column 2 constant
    CHECK_THROWS_AS(pairwise_cov(DataMatrix::from_matrix(std::move(x))), DataError);
}

TEST_CASE("mahalanobis model overload") {
    CovModel m;
    m.mu = {0.0, 0.0};
    m.sigma = Matrix::from_rows({{4.0, 0.0}, {0.0, 1.0}});
    CHECK(mahalanobis_sq({2.0, 1.0}, m) == doctest::Approx(2.0));
}
