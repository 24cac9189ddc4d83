#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gmplan/linsys.hpp"

namespace gmplan {

/// Continuous-time linear covariance steering problem: drive the state
/// distribution of
///   dX = A X dt + a dt + B (u dt + sqrt(epsilon) dW)
/// from N(mu0, K0) at t = 0 to N(muT, KT) at t = T while minimizing
///   E int_0^T [ 1/2 ||u||^2 + 1/2 X^T Q(t) X + X^T r(t) ] dt.
struct SteeringProblem {
    LTVSystem sys;  // epsilon > 0 required
    double horizon = 1.0;
    std::function<Eigen::MatrixXd(double)> Q;  // null means zero
    std::function<Eigen::VectorXd(double)> r;  // null means zero
    Eigen::VectorXd mu0, muT;
    Eigen::MatrixXd K0, KT;

    int nodes = 0;     // storage grid nodes; 0 derives from steps_per_unit_time
    int substeps = 10; // integration steps between consecutive nodes
    int steps_per_unit_time = 200;

    Eigen::VectorXd make_times() const;
};

/// Time-indexed affine feedback schedule u(t, x) = K(t) x + d(t), linearly
/// interpolated between nodes.
struct GainSchedule {
    Eigen::VectorXd times;
    std::vector<Eigen::MatrixXd> gain;
    std::vector<Eigen::VectorXd> feedforward;

    std::pair<Eigen::MatrixXd, Eigen::VectorXd> at(double t) const;
};

/// Solution of the steering problem on a uniform fine grid.
struct SteeringSolution {
    Eigen::VectorXd times;
    std::vector<Eigen::MatrixXd> riccati;       // Pi_t
    std::vector<Eigen::MatrixXd> riccati_dual;  // H_t (the co-state Riccati flow)
    GainSchedule gains;                         // K_t = -B^T Pi_t and d_t
    std::vector<Eigen::VectorXd> mean;          // optimal mean x*_t
    std::vector<Eigen::VectorXd> open_loop;     // v*_t
    std::vector<Eigen::VectorXd> nominal_mean;  // closed-loop z_t
    std::vector<Eigen::MatrixXd> nominal_cov;   // closed-loop Sigma_t
};

/// Mean steering only: the two-point boundary value problem
///   min int 1/2 ||v||^2 + 1/2 x^T Q x + x^T r,  xdot = A x + a + B v,
/// with x(0) = mu0, x(T) = muT, solved through the Hamiltonian system.
struct MeanSolution {
    Eigen::VectorXd times;
    std::vector<Eigen::VectorXd> mean;     // x*_t
    std::vector<Eigen::VectorXd> control;  // v*_t
};
MeanSolution solve_mean(const SteeringProblem& prob);

/// Full covariance steering: solves the coupled Riccati pair with the split
/// boundary conditions eps K0^{-1} = Pi_0 + H_0, eps KT^{-1} = Pi_T + H_T
/// by reducing to an algebraic equation in Pi_0 through the Hamiltonian
/// transition matrix (damped-Newton fallback when the algebraic branch is
/// unusable), then assembles gains, feedforward, and closed-loop moments.
SteeringSolution solve_covariance(const SteeringProblem& prob);

/// Closed-loop moment propagation under u = K(t) x + d(t):
///   zdot = (A + B K) z + a + B d
///   Sigmadot = (A + B K) Sigma + Sigma (A + B K)^T + eps B B^T,
/// Heun-integrated on the schedule's grid with `substeps` refinement.
struct PropagatedMoments {
    Eigen::VectorXd times;
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> cov;
};
PropagatedMoments closed_loop_propagate(const LTVSystem& sys, const GainSchedule& gains,
                                        const Eigen::VectorXd& mu0, const Eigen::MatrixXd& K0,
                                        int substeps);

}  // namespace gmplan
