#include "doctest.h"

#include <cmath>
#include <vector>

#include "rankinfer/rank_tests.hpp"
#include "rankinfer/sim_lab.hpp"
#include "test_helpers.hpp"

using namespace rankinfer;
using testutil::random_matrix;
using testutil::random_orthonormal;
using testutil::random_with_rank;

TEST_SUITE_BEGIN("rank_tests");

TEST_CASE("critical_value picks the floor(B(1-alpha))-th order statistic") {
    // The cutoff is the empirical 1-alpha quantile: for values 1..10 the
    // index floor(B(1-alpha)) counts from the smallest value upward.
    std::vector<double> values;
    for (int i = 1; i <= 10; ++i) values.push_back(i);
    CHECK(critical_value(values, 0.05) == 9.0);  // floor(9.5) = 9th smallest
    CHECK(critical_value(values, 0.5) == 5.0);   // 5th smallest
    std::vector<double> constant(37, 3.25);
    for (double alpha : {0.01, 0.10, 0.5, 0.9}) {
        CHECK(critical_value(constant, alpha) == 3.25);
    }
    CHECK_THROWS_AS(critical_value({1.0}, 0.5), InsufficientDraws);
    CHECK_THROWS_AS(critical_value(values, 1.5), InvalidArgument);
}

TEST_CASE("critical_value is nonincreasing in alpha") {
    CounterRng rng(7301, 0);
    std::vector<double> values;
    for (int i = 0; i < 500; ++i) values.push_back(rng.normal());
    double previous = std::numeric_limits<double>::infinity();
    for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5, 0.8}) {
        const double cv = critical_value(values, alpha);
        CHECK(cv <= previous);
        previous = cv;
    }
    // The 1-alpha quantile at small alpha sits in the upper tail.
    CHECK(critical_value(values, 0.05) > 0.0);
}

TEST_CASE("p_value follows the (1 + count) / (B + 1) convention") {
    std::vector<double> draws;
    for (int i = 0; i < 499; ++i) draws.push_back(static_cast<double>(i));
    CHECK(p_value(draws, 1e9) == doctest::Approx(1.0 / 500.0));
    CHECK(p_value(draws, -1.0) == doctest::Approx(1.0));

    std::vector<double> many;
    for (int i = 0; i < 999; ++i) many.push_back(static_cast<double>(i));
    CHECK(p_value(many, 499.0) == doctest::Approx(0.5).epsilon(2.0 / 1000.0));
}

TEST_CASE("chi-squared quantiles against reference values") {
    CHECK(chi2_quantile(1, 0.95) == doctest::Approx(3.8414588206941254).epsilon(1e-10));
    CHECK(chi2_quantile(4, 0.95) == doctest::Approx(9.487729036781154).epsilon(1e-10));
    CHECK(chi2_quantile(1, 0.5) == doctest::Approx(0.45493642311957305).epsilon(1e-10));
    for (int df : {1, 2, 5, 16, 36}) {
        for (double p : {0.01, 0.5, 0.9, 0.95, 0.995}) {
            CHECK(chi2_cdf(chi2_quantile(df, p), df) == doctest::Approx(p).epsilon(1e-10));
        }
    }
}

TEST_CASE("cov_iid estimates the identity for independent standard normals") {
    // E[vec(VZ^T) vec(VZ^T)^T] = E[ZZ^T] (x) E[VV^T] = I4 for V,Z ~ N(0,I2).
    const std::int64_t n = 100000;
    CounterRng rng(7302, 0);
    std::vector<Vector> vs, zs;
    for (std::int64_t i = 0; i < n; ++i) {
        Vector v(2), z(2);
        v << rng.normal(), rng.normal();
        z << rng.normal(), rng.normal();
        vs.push_back(v);
        zs.push_back(z);
    }
    const VecCovariance cov = cov_iid(vs, zs);
    // Entrywise 5 standard errors; the diagonal terms average (V_i Z_j)^2
    // whose variance is E[V^4]E[Z^4] - 1 = 8.
    const double tol = 5.0 * std::sqrt(8.0) / std::sqrt(static_cast<double>(n));
    CHECK((cov.omega - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < tol);
    CHECK(cov.kind == CovarianceKind::IIDSample);
    CHECK(cov.flags.empty());
}

TEST_CASE("cov_iid flags a constant sample") {
    std::vector<Matrix> sample(10, Matrix::Ones(1, 2));
    const VecCovariance cov = cov_iid(sample);
    CHECK(cov.omega.isZero(0.0));
    CHECK(!cov.flags.empty());
}

TEST_CASE("cov_iid matches the scalar variance in one dimension") {
    CounterRng rng(7303, 0);
    std::vector<Vector> vs, zs;
    std::vector<double> products;
    for (int i = 0; i < 500; ++i) {
        Vector v(1), z(1);
        v << rng.normal();
        z << 0.3 * rng.normal() + 0.1;
        vs.push_back(v);
        zs.push_back(z);
        products.push_back(v(0) * z(0));
    }
    double mean = 0.0;
    for (double p : products) mean += p;
    mean /= static_cast<double>(products.size());
    double var = 0.0;
    for (double p : products) var += (p - mean) * (p - mean);
    var /= static_cast<double>(products.size() - 1);

    const VecCovariance cov = cov_iid(vs, zs);
    CHECK(cov.omega(0, 0) == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("cov_hacc_one_lag agrees with cov_iid on white noise") {
    CounterRng rng(7304, 0);
    std::vector<Matrix> series;
    for (int i = 0; i < 10000; ++i) series.push_back(random_matrix(1, 2, rng));
    const VecCovariance hacc = cov_hacc_one_lag(series);
    const VecCovariance iid = cov_iid(series);
    CHECK((hacc.omega - iid.omega).norm() <= 0.10 * iid.omega.norm());
    CHECK(hacc.kind == CovarianceKind::HACCOneLag);
}

TEST_CASE("cov_hacc_one_lag recovers the MA(1) long-run variance") {
    // u_t = e_t + theta e_{t-1} has long-run variance (1 + theta)^2.
    const double theta = 0.5;
    CounterRng rng(7305, 0);
    std::vector<Matrix> series;
    double previous = rng.normal();
    for (int i = 0; i < 100000; ++i) {
        const double current = rng.normal();
        Matrix u(1, 1);
        u(0, 0) = current + theta * previous;
        previous = current;
        series.push_back(u);
    }
    const VecCovariance cov = cov_hacc_one_lag(series);
    CHECK(cov.omega(0, 0) == doctest::Approx((1 + theta) * (1 + theta)).epsilon(0.10));
}

TEST_CASE("cov_hacc_one_lag flags a constant series") {
    std::vector<Matrix> series(10, Matrix::Ones(2, 1));
    const VecCovariance cov = cov_hacc_one_lag(series);
    CHECK(cov.omega.isZero(1e-15));
    CHECK(!cov.flags.empty());
}

TEST_CASE("kp_statistic reduces to n sigma_2^2 under an identity weight") {
    CounterRng rng(7306, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix values = random_matrix(2, 2, rng);
        const double n = 700.0;
        const MatrixEstimate est(values, std::sqrt(n));
        VecCovariance omega;
        omega.omega = Matrix::Identity(4, 4);
        const SpectralDecomposition dec = svd(values);
        const double expected = n * dec.singular_values(1) * dec.singular_values(1);
        CHECK(kp_statistic(est, omega, 1) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("kp_statistic is zero when the trailing block vanishes") {
    Matrix values = Matrix::Zero(2, 2);
    values(0, 0) = 1.0;
    const MatrixEstimate est(values, 10.0);
    VecCovariance omega;
    omega.omega = Matrix::Identity(4, 4);
    CHECK(kp_statistic(est, omega, 1) == 0.0);
}

TEST_CASE("kp_statistic has the chi-squared mean under the null") {
    // vec(Z_i) ~ N(vec(diag(1,0)), I4): sqrt(n)(Pi_hat - Pi0) is exactly
    // standard Gaussian, so the statistic at r = 1 is asymptotically
    // chi-squared(1) with mean (m-r)(k-r) = 1.
    const std::int64_t n = 1000;
    const int reps = 5000;
    double mean_stat = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        CounterRng rng(6000 + static_cast<std::uint64_t>(rep), 0);
        std::vector<Matrix> sample;
        sample.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            Matrix z(2, 2);
            z << 1.0 + rng.normal(), rng.normal(), rng.normal(), rng.normal();
            sample.push_back(z);
        }
        Matrix pi_hat = Matrix::Zero(2, 2);
        for (const Matrix& z : sample) pi_hat += z;
        pi_hat /= static_cast<double>(n);
        const MatrixEstimate est(pi_hat, std::sqrt(static_cast<double>(n)), n);
        mean_stat += kp_statistic(est, cov_iid(sample), 1);
    }
    mean_stat /= static_cast<double>(reps);
    CHECK(mean_stat == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("kp_statistic is invariant to simultaneous rotations") {
    CounterRng rng(7307, 0);
    std::vector<Matrix> contributions;
    for (int i = 0; i < 400; ++i) contributions.push_back(random_matrix(2, 2, rng));
    Matrix pi_hat = Matrix::Zero(2, 2);
    for (const Matrix& c : contributions) pi_hat += c;
    pi_hat /= 400.0;
    const MatrixEstimate est(pi_hat, 20.0, 400);
    const VecCovariance omega = cov_iid(contributions);
    const double base = kp_statistic(est, omega, 1);

    for (int trial = 0; trial < 10; ++trial) {
        const Matrix rot_v = random_orthonormal(2, rng);
        const Matrix rot_z = random_orthonormal(2, rng);
        const MatrixEstimate rotated(rot_v * pi_hat * rot_z.transpose(), 20.0, 400);
        const Matrix kron = detail::kronecker(rot_z, rot_v);
        VecCovariance omega_rotated;
        omega_rotated.omega = kron * omega.omega * kron.transpose();
        CHECK(kp_statistic(rotated, omega_rotated, 1) ==
              doctest::Approx(base).epsilon(1e-8));
    }
}

TEST_CASE("rs_statistic equals n * phi_r") {
    CounterRng rng(7308, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + static_cast<int>(rng.next_below(3));
        const int m = k + static_cast<int>(rng.next_below(3));
        const Matrix values = random_matrix(m, k, rng);
        const double n = 123.0;
        const MatrixEstimate est(values, std::sqrt(n));
        const int r = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
        const double expected = n * phi_r(values, r);
        const double actual = rs_statistic(est, r);
        CHECK(std::abs(actual - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
    const MatrixEstimate zero(Matrix::Zero(3, 2), 5.0);
    CHECK(rs_statistic(zero, 1) == 0.0);

    Matrix diag = Matrix::Zero(3, 3);
    diag.diagonal() << 3.0, 2.0, 1.0;
    const double n = 77.0;
    const MatrixEstimate scaled(diag / std::sqrt(n), std::sqrt(n));
    CHECK(rs_statistic(scaled, 1) == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("cf_one_step on fully degenerate data accepts") {
    const MatrixEstimate est(Matrix::Zero(3, 3), 10.0);
    BootstrapEnsemble ensemble;
    ensemble.B = 100;
    ensemble.draws.assign(100, Matrix::Zero(3, 3));
    DerivativeEstimator analytic{DerivativeKind::Analytic, 0.2, 1, std::nullopt};
    const TestResult res = cf_one_step(est, ensemble, 1, 0.05, analytic);
    CHECK(res.statistic == 0.0);
    CHECK(*res.critical_value == 0.0);
    CHECK_FALSE(res.reject);  // strict inequality resolves the tie conservatively
    CHECK(*res.estimated_rank == 0);

    DerivativeEstimator numerical{DerivativeKind::Numerical, 0.2, 1, std::nullopt};
    const TestResult res_n = cf_one_step(est, ensemble, 1, 0.05, numerical);
    CHECK_FALSE(res_n.reject);
}

TEST_CASE("cf_one_step validates the estimator") {
    const MatrixEstimate est(Matrix::Identity(3, 3), 10.0);
    BootstrapEnsemble ensemble;
    ensemble.B = 50;
    ensemble.draws.assign(50, Matrix::Zero(3, 3));
    DerivativeEstimator wrong_r{DerivativeKind::Analytic, 0.2, 2, std::nullopt};
    CHECK_THROWS_AS(cf_one_step(est, ensemble, 1, 0.05, wrong_r), InvalidArgument);
}

TEST_CASE("CF decisions are scale equivariant") {
    CounterRng rng(7309, 0);
    const std::int64_t n = 400;
    std::vector<Matrix> contributions;
    {
        Matrix pi0 = Matrix::Zero(3, 3);
        pi0(0, 0) = 1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            Vector v(3), u(3);
            for (int j = 0; j < 3; ++j) v(j) = rng.normal();
            for (int j = 0; j < 3; ++j) u(j) = rng.normal();
            const Vector z = pi0.transpose() * v + 0.3 * u;
            contributions.push_back(v * z.transpose());
        }
    }
    const double c = 7.5;
    std::vector<Matrix> scaled;
    for (const Matrix& x : contributions) scaled.push_back(c * x);

    auto estimate = [&](const std::vector<Matrix>& sample) {
        Matrix mean = Matrix::Zero(3, 3);
        for (const Matrix& x : sample) mean += x;
        mean /= static_cast<double>(sample.size());
        return MatrixEstimate(mean, std::sqrt(static_cast<double>(sample.size())),
                              static_cast<std::int64_t>(sample.size()));
    };
    const MatrixEstimate base = estimate(contributions);
    const MatrixEstimate scaled_est = estimate(scaled);
    const BootstrapEnsemble ens = draw_empirical(contributions, 300, 12);
    const BootstrapEnsemble ens_scaled = draw_empirical(scaled, 300, 12);

    const double kappa = std::pow(static_cast<double>(n), -0.25);
    for (int r = 0; r < 3; ++r) {
        // CF-N with the same kappa: statistic and every phi'' value scale by
        // c^2, so the decision is unchanged exactly.
        DerivativeEstimator numerical{DerivativeKind::Numerical, kappa, r, std::nullopt};
        const TestResult a = cf_one_step(base, ens, r, 0.05, numerical);
        const TestResult b = cf_one_step(scaled_est, ens_scaled, r, 0.05, numerical);
        CHECK(a.reject == b.reject);
        CHECK(b.statistic == doctest::Approx(c * c * a.statistic).epsilon(1e-10));
        CHECK(*b.critical_value ==
              doctest::Approx(c * c * *a.critical_value).epsilon(1e-10));

        // CF-A under the c * kappa threshold rescaling keeps r_hat and the
        // decision unchanged.
        DerivativeEstimator analytic{DerivativeKind::Analytic, kappa, r, std::nullopt};
        DerivativeEstimator analytic_scaled{DerivativeKind::Analytic, c * kappa, r,
                                            std::nullopt};
        const TestResult fa = cf_one_step(base, ens, r, 0.05, analytic);
        const TestResult fb = cf_one_step(scaled_est, ens_scaled, r, 0.05, analytic_scaled);
        CHECK(*fa.estimated_rank == *fb.estimated_rank);
        CHECK(fa.reject == fb.reject);
    }
}

TEST_CASE("cf_two_step validates beta and rejects immediately when r_hat > r") {
    const MatrixEstimate est(Matrix::Identity(3, 3), 10.0);
    BootstrapEnsemble ensemble;
    ensemble.B = 100;
    ensemble.draws.assign(100, Matrix::Zero(3, 3));
    CHECK_THROWS_AS(cf_two_step(est, ensemble, 1, 0.05, 0.05, 1), InvalidArgument);
    CHECK_THROWS_AS(cf_two_step(est, ensemble, 1, 0.05, 0.06, 1), InvalidArgument);

    const TestResult res = cf_two_step(est, ensemble, 1, 0.05, 0.005, 3);
    CHECK(res.reject);
    CHECK_FALSE(res.p_value.has_value());
    CHECK_FALSE(res.critical_value.has_value());
    CHECK(*res.estimated_rank == 3);
}

TEST_CASE("kp_test calibration: size near alpha when rank equals r") {
    // Quick version of the calibration checks; the full-scale versions run
    // in the acceptance suite.
    const std::int64_t n = 1000;
    const int reps = 400;
    int rejections = 0;
    for (int rep = 0; rep < reps; ++rep) {
        CounterRng rng(8800 + static_cast<std::uint64_t>(rep), 0);
        std::vector<Matrix> sample;
        for (std::int64_t i = 0; i < n; ++i) {
            Matrix z(2, 2);
            z << 1.0 + rng.normal(), rng.normal(), rng.normal(), rng.normal();
            sample.push_back(z);
        }
        Matrix pi_hat = Matrix::Zero(2, 2);
        for (const Matrix& z : sample) pi_hat += z;
        pi_hat /= static_cast<double>(n);
        const MatrixEstimate est(pi_hat, std::sqrt(static_cast<double>(n)), n);
        if (kp_test(est, cov_iid(sample), 1, 0.05).reject) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / reps;
    CHECK(rate > 0.02);
    CHECK(rate < 0.09);
}

TEST_CASE("kp_test is invalid under the degenerate null: direction of the bias") {
    // Pi0 = 0 (rank 0 < r = 1): under Omega2 the chi-squared(1) reference is
    // stochastically dominated (over-rejection), under Omega1 it dominates
    // (under-rejection).
    const std::int64_t n = 1000;
    const int reps = 400;
    int reject_omega2 = 0, reject_omega1 = 0;
    for (int rep = 0; rep < reps; ++rep) {
        for (int which = 0; which < 2; ++which) {
            const Matrix omega = which == 0 ? sim::omega1() : sim::omega2();
            const auto sample = sim::gen_gaussian_direct(
                omega, 0.0, n, 4400 + static_cast<std::uint64_t>(rep * 2 + which));
            Matrix pi_hat = Matrix::Zero(2, 2);
            for (const Matrix& z : sample) pi_hat += z;
            pi_hat /= static_cast<double>(n);
            const MatrixEstimate est(pi_hat, std::sqrt(static_cast<double>(n)), n);
            const bool reject = kp_test(est, cov_iid(sample), 1, 0.05).reject;
            if (which == 0 && reject) ++reject_omega1;
            if (which == 1 && reject) ++reject_omega2;
        }
    }
    CHECK(static_cast<double>(reject_omega2) / reps > 0.07);  // reference 0.115
    CHECK(static_cast<double>(reject_omega1) / reps < 0.03);  // reference 0.005
}

TEST_CASE("kp_m_test rejects only when every sub-test rejects") {
    // rank(Pi0) = 1 with a strong signal: the j = 0 test rejects, the j = 1
    // test accepts, so the multiple test accepts at r = 1.
    const std::int64_t n = 500;
    CounterRng rng(7310, 0);
    std::vector<Matrix> sample;
    for (std::int64_t i = 0; i < n; ++i) {
        Matrix z(2, 2);
        z << 1.0 + 0.1 * rng.normal(), 0.1 * rng.normal(), 0.1 * rng.normal(),
            0.1 * rng.normal();
        sample.push_back(z);
    }
    Matrix pi_hat = Matrix::Zero(2, 2);
    for (const Matrix& z : sample) pi_hat += z;
    pi_hat /= static_cast<double>(n);
    const MatrixEstimate est(pi_hat, std::sqrt(static_cast<double>(n)), n);
    const VecCovariance omega = cov_iid(sample);

    const TestResult at_zero = kp_test(est, omega, 0, 0.05);
    const TestResult at_one = kp_test(est, omega, 1, 0.05);
    CHECK(at_zero.reject);
    CHECK_FALSE(at_one.reject);

    const TestResult multiple = kp_m_test(est, omega, 1, 0.05);
    CHECK_FALSE(multiple.reject);
    CHECK(*multiple.p_value >= *at_one.p_value - 1e-15);
    CHECK(multiple.method == "kp-m");
}

TEST_CASE("sequential_kp_rank finds the first accepted rank") {
    const std::int64_t n = 500;
    CounterRng rng(7311, 0);
    std::vector<Matrix> sample;
    for (std::int64_t i = 0; i < n; ++i) {
        Matrix z(2, 2);
        z << 1.0 + 0.1 * rng.normal(), 0.1 * rng.normal(), 0.1 * rng.normal(),
            0.1 * rng.normal();
        sample.push_back(z);
    }
    Matrix pi_hat = Matrix::Zero(2, 2);
    for (const Matrix& z : sample) pi_hat += z;
    pi_hat /= static_cast<double>(n);
    const MatrixEstimate est(pi_hat, std::sqrt(static_cast<double>(n)), n);
    CHECK(sequential_kp_rank(est, cov_iid(sample), 0.05) == 1);
}

TEST_SUITE_END();
