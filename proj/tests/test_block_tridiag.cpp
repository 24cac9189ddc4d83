#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <random>

#include "gmplan/block_tridiag.hpp"

using namespace gmplan;

namespace {

/// Random SPD block-tridiagonal matrix via P = S S^T + c I restricted to the
/// tridiagonal pattern of a Gauss-Markov precision.
BlockTridiag random_spd(int nb, int bs, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    BlockTridiag m(nb, bs);
    for (int i = 0; i < nb; ++i) {
        Eigen::MatrixXd s = Eigen::MatrixXd::NullaryExpr(bs, bs, [&] { return gauss(rng); });
        m.diag(i) = s * s.transpose() + 3.0 * bs * Eigen::MatrixXd::Identity(bs, bs);
    }
    for (int i = 0; i + 1 < nb; ++i)
        m.lower(i) = Eigen::MatrixXd::NullaryExpr(bs, bs, [&] { return gauss(rng); });
    return m;
}

}  // namespace

TEST_CASE("factorization matches dense Cholesky solve and log-determinant") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int nb = 2 + trial % 5;
        const int bs = 1 + trial % 4;
        const BlockTridiag m = random_spd(nb, bs, rng);
        const Eigen::MatrixXd dense = m.dense();

        BlockTridiagLLT llt;
        REQUIRE(llt.compute(m));

        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::VectorXd rhs =
            Eigen::VectorXd::NullaryExpr(m.dim(), [&] { return gauss(rng); });
        const Eigen::VectorXd x = llt.solve(rhs);
        CHECK((dense * x - rhs).norm() < 1e-9 * rhs.norm());

        const double expected_logdet =
            2.0 * Eigen::MatrixXd(dense.llt().matrixL()).diagonal().array().log().sum();
        CHECK(llt.log_det() == doctest::Approx(expected_logdet).epsilon(1e-10));
    }
}

TEST_CASE("selected inverse equals the dense inverse on the tridiagonal blocks") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int nb = 2 + trial % 6;
        const int bs = 1 + (trial + 1) % 4;
        const BlockTridiag m = random_spd(nb, bs, rng);
        const Eigen::MatrixXd inv = m.dense().inverse();

        BlockTridiagLLT llt;
        REQUIRE(llt.compute(m));
        const auto marg = llt.marginals();
        for (int i = 0; i < nb; ++i)
            CHECK((marg.diag[i] - inv.block(i * bs, i * bs, bs, bs)).norm() < 1e-9);
        for (int i = 0; i + 1 < nb; ++i)
            CHECK((marg.upper[i] - inv.block(i * bs, (i + 1) * bs, bs, bs)).norm() < 1e-9);
    }
}

TEST_CASE("solve_lt produces samples with the right covariance structure") {
    // L^{-T} z has covariance P^{-1} exactly; verify the algebra via
    // (L^{-T} z)^T P (L^{-T} z) = ||z||^2.
    std::mt19937 rng(5);
    const BlockTridiag m = random_spd(4, 3, rng);
    BlockTridiagLLT llt;
    REQUIRE(llt.compute(m));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd z =
            Eigen::VectorXd::NullaryExpr(m.dim(), [&] { return gauss(rng); });
        const Eigen::VectorXd x = llt.solve_lt(z);
        CHECK(x.dot(m.dense() * x) == doctest::Approx(z.squaredNorm()).epsilon(1e-10));
    }
}

TEST_CASE("indefinite matrices are rejected") {
    BlockTridiag m(2, 2);
    m.diag(0) = Eigen::Matrix2d::Identity();
    m.diag(1) = -Eigen::Matrix2d::Identity();
    BlockTridiagLLT llt;
    CHECK_FALSE(llt.compute(m));
}

TEST_CASE("dense round trip and scaled add") {
    std::mt19937 rng(3);
    const BlockTridiag a = random_spd(3, 2, rng);
    const BlockTridiag b = random_spd(3, 2, rng);
    BlockTridiag sum = a;
    sum.add_scaled(b, 0.25);
    CHECK((sum.dense() - (a.dense() + 0.25 * b.dense())).norm() < 1e-14);

    const BlockTridiag back = BlockTridiag::from_dense(a.dense(), 3, 2);
    CHECK((back.dense() - a.dense()).norm() == 0.0);
}
