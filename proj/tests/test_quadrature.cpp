#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gmplan/quadrature.hpp"

using namespace gmplan;

namespace {

double double_factorial(int n) {
    double out = 1.0;
    for (int k = n; k > 1; k -= 2) out *= k;
    return out;
}

}  // namespace

TEST_CASE("low-degree rules match the hand-derived roots and weights") {
    SUBCASE("p=1 is the mean") {
        const GHRule rule = gh_rule(1);
        CHECK(rule.sigma_points(0) == 0.0);
        CHECK(rule.weights(0) == 1.0);
    }
    SUBCASE("p=2: roots of He_2 = x^2 - 1") {
        const GHRule rule = gh_rule(2);
        CHECK(rule.sigma_points(0) == doctest::Approx(-1.0));
        CHECK(rule.sigma_points(1) == doctest::Approx(1.0));
        CHECK(rule.weights(0) == doctest::Approx(0.5));
        CHECK(rule.weights(1) == doctest::Approx(0.5));
    }
    SUBCASE("p=3: roots of He_3 = x^3 - 3x") {
        const GHRule rule = gh_rule(3);
        CHECK(rule.sigma_points(0) == doctest::Approx(-std::sqrt(3.0)));
        CHECK(rule.sigma_points(1) == doctest::Approx(0.0));
        CHECK(rule.sigma_points(2) == doctest::Approx(std::sqrt(3.0)));
        CHECK(rule.weights(0) == doctest::Approx(1.0 / 6.0));
        CHECK(rule.weights(1) == doctest::Approx(2.0 / 3.0));
        CHECK(rule.weights(2) == doctest::Approx(1.0 / 6.0));
    }
    SUBCASE("weights are positive and sum to one up to p=20") {
        for (int p = 1; p <= 20; ++p) {
            const GHRule rule = gh_rule(p);
            CHECK(rule.weights.minCoeff() > 0.0);
            CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK((rule.sigma_points.reverse() + rule.sigma_points).norm() < 1e-9);
        }
    }
    SUBCASE("degree out of range") {
        CHECK_THROWS_AS(gh_rule(0), std::invalid_argument);
        CHECK_THROWS_AS(gh_rule(21), std::invalid_argument);
    }
}

TEST_CASE("p=3 integrates monomials up to degree 5 exactly under N(0,1)") {
    const GHRule rule = gh_rule(3);
    const Eigen::VectorXd mean = Eigen::VectorXd::Zero(1);
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(1, 1);
    for (int k = 0; k <= 5; ++k) {
        const double expected = k % 2 == 1 ? 0.0 : double_factorial(k - 1);
        const double got =
            gh_expect(rule, [k](const Eigen::VectorXd& x) { return std::pow(x(0), k); }, mean,
                      cov);
        CHECK(std::abs(got - expected) < 1e-12);
    }
}

TEST_CASE("basic expectations") {
    const GHRule rule = gh_rule(3);
    Eigen::VectorXd mean(2);
    mean << 0.7, -0.2;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.3, 0.4, 0.4, 0.9;

    SUBCASE("constants pass through") {
        const double got =
            gh_expect(rule, [](const Eigen::VectorXd&) { return 4.2; }, mean, cov);
        CHECK(got == doctest::Approx(4.2).epsilon(1e-13));
    }
    SUBCASE("second moment of the standard normal") {
        const double got = gh_expect(
            rule, [](const Eigen::VectorXd& x) { return x(0) * x(0); },
            Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
        CHECK(got == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("fourth moment of the standard normal") {
        const double got = gh_expect(
            rule, [](const Eigen::VectorXd& x) { return std::pow(x(0), 4); },
            Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
        CHECK(got == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("vector- and matrix-valued integrands reproduce Gaussian moments") {
        const Eigen::VectorXd first =
            gh_expect(rule, [](const Eigen::VectorXd& x) { return x; }, mean, cov);
        CHECK((first - mean).norm() < 1e-12);
        const Eigen::MatrixXd second = gh_expect(
            rule,
            [&](const Eigen::VectorXd& x) {
                return ((x - mean) * (x - mean).transpose()).eval();
            },
            mean, cov);
        CHECK((second - cov).norm() < 1e-12);
    }
}

TEST_CASE("affine consistency: E[phi] under N(m,P) equals E[phi(Lz+m)] under N(0,I)") {
    const GHRule rule = gh_rule(4);
    Eigen::VectorXd mean(2);
    mean << 1.0, -2.0;
    Eigen::MatrixXd cov(2, 2);
    cov << 2.0, 0.5, 0.5, 1.5;
    const Eigen::MatrixXd sqrt_cov = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

    auto phi = [](const Eigen::VectorXd& x) { return std::sin(x(0)) + x(1) * x(1); };
    const double direct = gh_expect(rule, phi, mean, cov);
    const double standardized = gh_expect(
        rule,
        [&](const Eigen::VectorXd& z) { return phi(sqrt_cov * z + mean); },
        Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    CHECK(direct == doctest::Approx(standardized).epsilon(1e-12));
}

TEST_CASE("agreement with Monte Carlo on exp(-||x||^2) in 2D") {
    const GHRule rule = gh_rule(10);
    Eigen::VectorXd mean(2);
    mean << 0.3, -0.1;
    Eigen::MatrixXd cov(2, 2);
    cov << 0.8, 0.2, 0.2, 0.6;
    auto phi = [](const Eigen::VectorXd& x) { return std::exp(-x.squaredNorm()); };
    const double quadrature_value = gh_expect(rule, phi, mean, cov);

    std::mt19937_64 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::MatrixXd sqrt_cov = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d z(gauss(rng), gauss(rng));
        const double v = phi(mean + sqrt_cov * z);
        sum += v;
        sum_sq += v * v;
    }
    const double mc_mean = sum / n;
    const double mc_se = std::sqrt((sum_sq / n - mc_mean * mc_mean) / n);
    CHECK(std::abs(quadrature_value - mc_mean) < 3.0 * mc_se);
}

TEST_CASE("error paths") {
    const GHRule rule = gh_rule(3);
    SUBCASE("non-positive-definite covariance") {
        Eigen::MatrixXd bad(2, 2);
        bad << 1.0, 2.0, 2.0, 1.0;
        CHECK_THROWS_AS(
            gh_expect(rule, [](const Eigen::VectorXd&) { return 1.0; },
                      Eigen::VectorXd::Zero(2), bad),
            FactorizationError);
    }
    SUBCASE("sigma-point budget") {
        const int n = 16;  // 3^16 > 1e7
        CHECK_THROWS_AS(
            gh_expect(rule, [](const Eigen::VectorXd&) { return 1.0; },
                      Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)),
            CapacityError);
    }
}
