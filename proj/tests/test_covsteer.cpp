#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "gmplan/covsteer.hpp"
#include "gmplan/gp_prior.hpp"

using namespace gmplan;

namespace {

LTVSystem single_integrator(double epsilon) {
    LTVSystem sys;
    sys.state_dim = 1;
    sys.control_dim = 1;
    sys.epsilon = epsilon;
    sys.A = [](double) { return Eigen::MatrixXd::Zero(1, 1); };
    sys.a = [](double) { return Eigen::VectorXd::Zero(1); };
    sys.B = [](double) { return Eigen::MatrixXd::Identity(1, 1); };
    return sys;
}

SteeringProblem brownian_bridge_problem() {
    SteeringProblem prob;
    prob.sys = single_integrator(1.0);
    prob.horizon = 1.0;
    prob.mu0 = Eigen::VectorXd::Zero(1);
    prob.muT = Eigen::VectorXd::Zero(1);
    prob.K0 = Eigen::MatrixXd::Identity(1, 1);
    prob.KT = Eigen::MatrixXd::Identity(1, 1);
    prob.nodes = 201;
    prob.substeps = 10;
    return prob;
}

double trapezoid_energy(const Eigen::VectorXd& times,
                        const std::vector<Eigen::VectorXd>& control) {
    double acc = 0.0;
    for (int j = 1; j < times.size(); ++j)
        acc += 0.5 * (control[j - 1].squaredNorm() + control[j].squaredNorm()) *
               (times(j) - times(j - 1));
    return acc;
}

}  // namespace

TEST_CASE("scalar bridge: boundary-symmetric problem returns to the start covariance") {
    const SteeringProblem prob = brownian_bridge_problem();
    const SteeringSolution sol = solve_covariance(prob);

    // hand-derived initial Riccati value: pi_0^2 - 3 pi_0 + 1 = 0, regular branch
    const double expected_pi0 = (3.0 - std::sqrt(5.0)) / 2.0;
    CHECK(sol.riccati.front()(0, 0) == doctest::Approx(expected_pi0).epsilon(1e-8));

    CHECK(sol.nominal_cov.back()(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(sol.nominal_mean.back()(0)) < 1e-9);

    SUBCASE("coupling holds at both boundaries") {
        const double eps = prob.sys.epsilon;
        CHECK(sol.riccati.front()(0, 0) + sol.riccati_dual.front()(0, 0) ==
              doctest::Approx(eps / prob.K0(0, 0)).epsilon(1e-9));
        CHECK(sol.riccati.back()(0, 0) + sol.riccati_dual.back()(0, 0) ==
              doctest::Approx(eps / prob.KT(0, 0)).epsilon(1e-7));
    }
    SUBCASE("time-reversal symmetry: Pi_t = H_{T-t}") {
        const int nodes = static_cast<int>(sol.times.size());
        for (int j = 0; j < nodes; j += 20)
            CHECK(sol.riccati[j](0, 0) ==
                  doctest::Approx(sol.riccati_dual[nodes - 1 - j](0, 0)).epsilon(1e-6));
    }
}

TEST_CASE("Riccati flow satisfies the differential equation") {
    SteeringProblem prob = brownian_bridge_problem();
    prob.Q = [](double) { return 0.3 * Eigen::MatrixXd::Identity(1, 1); };
    const SteeringSolution sol = solve_covariance(prob);
    const double h = sol.times(1) - sol.times(0);
    for (int j = 10; j + 10 < sol.times.size(); j += 25) {
        const double dpi = (sol.riccati[j + 1](0, 0) - sol.riccati[j - 1](0, 0)) / (2.0 * h);
        const double pi = sol.riccati[j](0, 0);
        const double rhs = -(2.0 * 0.0 * pi - pi * pi + 0.3);  // A = 0, BB^T = 1
        CHECK(dpi == doctest::Approx(rhs).epsilon(1e-4));
    }
}

TEST_CASE("mean steering solves the minimum-energy boundary value problem") {
    LTVSystem sys = constant_velocity_system(1);
    sys.epsilon = 1.0;
    SteeringProblem prob;
    prob.sys = sys;
    prob.horizon = 1.0;
    prob.mu0 = Eigen::Vector2d(0.0, 0.0);
    prob.muT = Eigen::Vector2d(1.0, 0.0);
    prob.K0 = 0.1 * Eigen::Matrix2d::Identity();
    prob.KT = 0.1 * Eigen::Matrix2d::Identity();
    prob.nodes = 501;
    prob.substeps = 4;

    const MeanSolution sol = solve_mean(prob);

    SUBCASE("cubic symmetry: midpoint position is one half") {
        const int mid = 250;
        CHECK(sol.mean[mid](0) == doctest::Approx(0.5).epsilon(1e-8));
    }
    SUBCASE("control energy matches the Grammian quadratic form") {
        CHECK(trapezoid_energy(sol.times, sol.control) == doctest::Approx(12.0).epsilon(1e-4));
        const double grammian_energy = min_energy_energy(
            constant_velocity_system(1), Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 0.0, 1.0);
        CHECK(trapezoid_energy(sol.times, sol.control) ==
              doctest::Approx(grammian_energy).epsilon(1e-4));
    }
    SUBCASE("endpoints hit the boundary") {
        CHECK((sol.mean.front() - prob.mu0).norm() < 1e-12);
        CHECK((sol.mean.back() - prob.muT).norm() < 1e-8);
    }
}

TEST_CASE("free-drift endpoints need no mean control") {
    LTVSystem sys = constant_velocity_system(1);
    sys.epsilon = 1.0;
    SteeringProblem prob;
    prob.sys = sys;
    prob.horizon = 2.0;
    prob.mu0 = Eigen::Vector2d(0.5, 1.0);
    prob.muT = transition_matrix(sys, 0.0, 2.0) * prob.mu0;
    prob.K0 = 0.1 * Eigen::Matrix2d::Identity();
    prob.KT = 0.1 * Eigen::Matrix2d::Identity();
    prob.nodes = 101;
    const MeanSolution sol = solve_mean(prob);
    for (const auto& v : sol.control) CHECK(v.norm() < 1e-8);
}

TEST_CASE("constant linear cost term makes the open-loop control affine in time") {
    SteeringProblem prob;
    prob.sys = single_integrator(1.0);
    prob.horizon = 1.0;
    prob.r = [](double) { return Eigen::VectorXd::Constant(1, 0.7); };
    prob.mu0 = Eigen::VectorXd::Zero(1);
    prob.muT = Eigen::VectorXd::Ones(1);
    prob.K0 = Eigen::MatrixXd::Identity(1, 1);
    prob.KT = Eigen::MatrixXd::Identity(1, 1);
    prob.nodes = 101;
    const MeanSolution sol = solve_mean(prob);
    // lambda' = -r, so v = -lambda rises linearly with slope r
    for (int j = 1; j < sol.times.size(); ++j) {
        const double slope =
            (sol.control[j](0) - sol.control[j - 1](0)) / (sol.times(j) - sol.times(j - 1));
        CHECK(slope == doctest::Approx(0.7).epsilon(1e-8));
    }
}

TEST_CASE("closed-loop propagation") {
    SUBCASE("zero gain pure diffusion grows variance linearly") {
        const LTVSystem sys = single_integrator(1.0);
        GainSchedule gains;
        gains.times = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
        gains.gain.assign(11, Eigen::MatrixXd::Zero(1, 1));
        gains.feedforward.assign(11, Eigen::VectorXd::Zero(1));
        const auto moments = closed_loop_propagate(sys, gains, Eigen::VectorXd::Zero(1),
                                                   Eigen::MatrixXd::Zero(1, 1), 20);
        for (int j = 0; j < moments.times.size(); ++j)
            CHECK(moments.cov[j](0, 0) == doctest::Approx(moments.times(j)).epsilon(1e-12));
    }
    SUBCASE("noise-free propagation conjugates by the transition matrix") {
        LTVSystem sys = constant_velocity_system(1);
        sys.epsilon = 0.0;
        GainSchedule gains;
        gains.times = Eigen::VectorXd::LinSpaced(21, 0.0, 1.5);
        gains.gain.assign(21, Eigen::MatrixXd::Zero(1, 2));
        gains.feedforward.assign(21, Eigen::VectorXd::Zero(1));
        Eigen::Matrix2d k0;
        k0 << 0.3, 0.1, 0.1, 0.2;
        const auto moments =
            closed_loop_propagate(sys, gains, Eigen::Vector2d(1.0, -0.5), k0, 50);
        const Eigen::MatrixXd phi = transition_matrix(sys, 0.0, 1.5);
        CHECK((moments.cov.back() - phi * k0 * phi.transpose()).norm() < 1e-10);
        CHECK((moments.mean.back() - phi * Eigen::Vector2d(1.0, -0.5)).norm() < 1e-10);
    }
}

TEST_CASE("constant-velocity steering hits the boundary moments") {
    LTVSystem sys = constant_velocity_system(1);
    sys.epsilon = 0.5;
    SteeringProblem prob;
    prob.sys = sys;
    prob.horizon = 3.0;
    prob.mu0 = Eigen::Vector2d(0.0, 0.0);
    prob.muT = Eigen::Vector2d(5.0, 0.0);
    prob.K0 = 0.01 * Eigen::Matrix2d::Identity();
    prob.KT = 0.05 * Eigen::Matrix2d::Identity();
    prob.nodes = 0;  // default resolution
    prob.substeps = 10;
    prob.Q = [](double) { return 0.2 * Eigen::MatrixXd::Identity(2, 2); };
    prob.r = [](double) { return Eigen::VectorXd::Constant(2, 0.05); };

    const SteeringSolution sol = solve_covariance(prob);
    const double cov_err = (sol.nominal_cov.back() - prob.KT).norm() / prob.KT.norm();
    const double mean_err = (sol.nominal_mean.back() - prob.muT).norm();
    CHECK(cov_err < 1e-3);
    CHECK(mean_err < 1e-4);

    SUBCASE("Pi stays symmetric") {
        for (const auto& pi : sol.riccati)
            CHECK((pi - pi.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("halving the step shrinks the terminal error at second order") {
        SteeringProblem coarse = prob;
        coarse.nodes = 31;
        coarse.substeps = 1;
        SteeringProblem fine = prob;
        fine.nodes = 61;
        fine.substeps = 1;
        const SteeringSolution sol_coarse = solve_covariance(coarse);
        const SteeringSolution sol_fine = solve_covariance(fine);
        auto err = [&](const SteeringSolution& s) {
            return (s.nominal_cov.back() - prob.KT).norm() / prob.KT.norm() +
                   (s.nominal_mean.back() - prob.muT).norm();
        };
        CHECK(err(sol_coarse) / err(sol_fine) >= 3.0);
    }
}

TEST_CASE("mean control reproduces the minimum-energy cost across random boundaries") {
    const LTVSystem base = constant_velocity_system(1);
    std::srand(19);
    for (int trial = 0; trial < 10; ++trial) {
        LTVSystem sys = base;
        sys.epsilon = 1.0;
        SteeringProblem prob;
        prob.sys = sys;
        prob.horizon = 0.8 + 0.3 * trial;
        prob.mu0 = Eigen::Vector2d::Random();
        prob.muT = Eigen::Vector2d::Random();
        prob.K0 = 0.1 * Eigen::Matrix2d::Identity();
        prob.KT = 0.1 * Eigen::Matrix2d::Identity();
        prob.nodes = 2001;
        const MeanSolution sol = solve_mean(prob);
        const double energy = trapezoid_energy(sol.times, sol.control);
        const double expected = min_energy_energy(
            base, Eigen::Vector2d::Zero(),
            (prob.muT - transition_matrix(base, 0.0, prob.horizon) * prob.mu0).eval(), 0.0,
            prob.horizon);
        if (expected > 1e-8)
            CHECK(std::abs(energy - expected) / expected < 1e-6);
    }
}

TEST_CASE("epsilon must be positive") {
    SteeringProblem prob = brownian_bridge_problem();
    prob.sys.epsilon = 0.0;
    CHECK_THROWS_AS(solve_covariance(prob), std::invalid_argument);
}
