#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmplan/covsteer.hpp"
#include "gmplan/gvi.hpp"
#include "gmplan/linsys.hpp"

namespace gmplan {

struct PGCSConfig {
    int iterations = 30;          // I_M
    double epsilon = 0.1;         // noise intensity
    double step_size = 2.0;       // proximal step eta
    double backtrack_ratio = 0.5; // beta in (0, 1)
    int max_backtracks = 6;       // M_beta
    double tolerance = 1e-6;      // convergence threshold on the cost decrease
    int nodes = 50;               // storage grid nodes over the horizon
    int substeps = 10;            // integration steps between nodes

    void validate() const;
};

/// One outer-loop iterate: the Gauss-Markov parameterization (A_t, a_t), its
/// nominal moments, and the nominal-trajectory collision cost.
struct PGCSIterate {
    Eigen::VectorXd times;
    std::vector<Eigen::MatrixXd> A;
    std::vector<Eigen::VectorXd> a;
    std::vector<Eigen::VectorXd> mean;  // z_t
    std::vector<Eigen::MatrixXd> cov;   // Sigma_t
    double cost = 0.0;                  // V_k
    double step_size = 0.0;             // eta accepted for this iterate
    bool hit_backtrack_budget = false;
};

/// Quadratic expansion data of the collision cost at one nominal state.
struct CostExpansion {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;  // Gauss-Newton, PSD
};
CostExpansion quad_approx_cost(const CollisionEnv& env, const Eigen::VectorXd& z);

/// Per-node coefficients of the inner linear covariance steering problem.
struct SteeringCoefficients {
    std::vector<Eigen::MatrixXd> A_bar;
    std::vector<Eigen::VectorXd> a_bar;
    std::vector<Eigen::MatrixXd> Q;
    std::vector<Eigen::VectorXd> r;
};
SteeringCoefficients compute_Qr(const PGCSIterate& iterate, const LTVSystem& base,
                                double step_size, const CollisionEnv& env);

struct PGCSBoundary {
    double horizon = 1.0;  // moments pinned at t = 0 and t = horizon
    Eigen::VectorXd mu0, muT;
    Eigen::MatrixXd K0, KT;
};

/// One proximal step: propagate the nominal, assemble coefficients, solve the
/// inner steering, and form the candidate closed-loop system.
PGCSIterate pgcs_step(const PGCSIterate& iterate, const LTVSystem& base,
                      const PGCSBoundary& boundary, double step_size,
                      const CollisionEnv& env, const PGCSConfig& config);

struct PGCSResult {
    SteeringSolution solution;       // gains w.r.t. the base system + nominal moments
    std::vector<PGCSIterate> history;
    bool converged = false;
    bool failed = false;
    std::string failure_reason;
};

/// Algorithm: proximal-gradient covariance steering with nonlinear
/// hinge-loss state cost and backtracking step-size selection.
PGCSResult pgcs_solve(const LTVSystem& base, const PGCSBoundary& boundary,
                      const CollisionEnv& env, const PGCSConfig& config);

/// Nominal-trajectory collision cost: trapezoidal integral of the hinge cost
/// along the mean.
double nominal_cost(const CollisionEnv& env, const Eigen::VectorXd& times,
                    const std::vector<Eigen::VectorXd>& mean);

}  // namespace gmplan
