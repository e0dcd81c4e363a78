#include "pupilkit/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace pupilkit;
using Eigen::VectorXd;

namespace {

VectorXd to_vec(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("pearson on perfect linear relations") {
    VectorXd x(5);
    x << 1, 2, 3, 4, 5;
    const VectorXd y = 2.0 * x.array() + 1.0;
    auto [r, p] = metrics::pearson(x, y);
    CHECK(r == doctest::Approx(1.0));
    CHECK(p == doctest::Approx(0.0).epsilon(1e-12));

    auto [rn, pn] = metrics::pearson(x, VectorXd(-x));
    CHECK(rn == doctest::Approx(-1.0));
    CHECK(pn == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pearson hand-computed example") {
    VectorXd x(5), y(5);
    x << 1, 2, 3, 4, 5;
    y << 2, 1, 4, 3, 5;
    auto [r, p] = metrics::pearson(x, y);
    CHECK(r == doctest::Approx(0.8).epsilon(1e-12));
    // t = 0.8*sqrt(3/0.36) on 3 dof; two-sided tail ~0.104
    CHECK(p == doctest::Approx(0.104).epsilon(2e-3));
    CHECK(p == doctest::Approx(oracles::t_two_sided_p(0.8 * std::sqrt(3.0 / 0.36), 3)).epsilon(1e-8));
}

TEST_CASE("pearson rejects degenerate inputs") {
    VectorXd x(2), y(2);
    x << 1, 2;
    y << 3, 4;
    CHECK_THROWS_AS(metrics::pearson(x, y), DataError);

    VectorXd c = VectorXd::Constant(5, 3.0);
    VectorXd v(5);
    v << 1, 2, 3, 4, 5;
    CHECK_THROWS_AS(metrics::pearson(c, v), NumericError);
}

TEST_CASE("p-values match numerical t-integration for n <= 50") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tval(-4.0, 4.0);
    for (int n = 3; n <= 50; n += 4) {
        const double dof = n - 2;
        for (int rep = 0; rep < 4; ++rep) {
            const double t = tval(rng);
            const double exact = metrics::student_t_two_sided_p(t, dof);
            const double numeric = oracles::t_two_sided_p(t, dof);
            CHECK(exact == doctest::Approx(numeric).epsilon(1e-6));
        }
    }
}

TEST_CASE("r2_score basics and arithmetic example") {
    VectorXd obs(3), pred(3);
    obs << 1, 2, 3;
    pred << 1, 2, 4;
    CHECK(metrics::r2_score(obs, obs) == doctest::Approx(1.0));
    CHECK(metrics::r2_score(obs, VectorXd::Constant(3, obs.mean())) == doctest::Approx(0.0));
    CHECK(metrics::r2_score(obs, pred) == doctest::Approx(0.5));
}

TEST_CASE("nrmse arithmetic example and scale invariance") {
    VectorXd obs(2), pred(2);
    obs << 0, 2;
    pred << 1, 1;
    CHECK(metrics::nrmse(obs, pred) == doctest::Approx(0.5));
    CHECK(metrics::nrmse(obs, obs) == doctest::Approx(0.0));
    CHECK(metrics::nrmse(VectorXd(10 * obs), VectorXd(10 * pred)) ==
          doctest::Approx(metrics::nrmse(obs, pred)));
    CHECK_THROWS_AS(metrics::nrmse(VectorXd::Constant(3, 1.0), VectorXd::Constant(3, 1.0)),
                    NumericError);
}

TEST_CASE("metrics match brute-force oracles on random series") {
    std::mt19937_64 rng(202);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 5 + static_cast<int>(rng() % 40);
        std::vector<double> obs(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            obs[static_cast<std::size_t>(i)] = noise(rng);
            pred[static_cast<std::size_t>(i)] = 0.5 * obs[static_cast<std::size_t>(i)] + noise(rng);
        }
        const VectorXd vo = to_vec(obs), vp = to_vec(pred);
        auto [r, p] = metrics::pearson(vo, vp);
        CHECK(r == doctest::Approx(oracles::pearson_r(obs, pred)).epsilon(1e-9));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(metrics::r2_score(vo, vp) == doctest::Approx(oracles::r2(obs, pred)).epsilon(1e-9));
        CHECK(metrics::nrmse(vo, vp) == doctest::Approx(oracles::nrmse(obs, pred)).epsilon(1e-9));
    }
}

TEST_CASE("pearson invariance under affine transforms") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 1.0);
    VectorXd x(20), y(20);
    for (int i = 0; i < 20; ++i) {
        x[i] = noise(rng);
        y[i] = 0.3 * x[i] + noise(rng);
    }
    auto [r0, p0] = metrics::pearson(x, y);
    auto [r1, p1] = metrics::pearson(VectorXd(3.0 * x.array() + 5.0), y);
    CHECK(r1 == doctest::Approx(r0).epsilon(1e-12));
    CHECK(p1 == doctest::Approx(p0).epsilon(1e-9));
    auto [r2, p2] = metrics::pearson(VectorXd(-2.0 * x.array() + 1.0), y);
    CHECK(r2 == doctest::Approx(-r0).epsilon(1e-12));
    (void)p2;
}
