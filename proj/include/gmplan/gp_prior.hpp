#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gmplan/block_tridiag.hpp"
#include "gmplan/linsys.hpp"

namespace gmplan {

/// Boundary marginals of the trajectory prior.
struct BoundaryConditions {
    Eigen::VectorXd mu0;
    Eigen::MatrixXd K0;
    Eigen::VectorXd muN;
    Eigen::MatrixXd KN;
};

/// Linear map extracting a factor's variables from the joint vector. Factors
/// touch one support state or two consecutive ones, so the map is an index
/// range rather than an explicit matrix.
struct FactorMap {
    int first_state = 0;
    int num_states = 1;

    Eigen::VectorXd extract(const Eigen::VectorXd& joint, int block_size) const {
        return joint.segment(first_state * block_size, num_states * block_size);
    }
};

enum class PriorFactorKind { BoundaryStart, Dynamics, BoundaryGoal };

/// Quadratic prior factor ||Lambda dx - Psi dmu||^2_weight on the deviation
/// dx from the prior mean. The deviation prior mean dmu being zero, Psi is
/// retained for reference but inert in evaluations.
struct PriorFactor {
    FactorMap map;
    PriorFactorKind kind = PriorFactorKind::Dynamics;
    Eigen::MatrixXd state_map;  // Lambda
    Eigen::MatrixXd mean_map;   // Psi
    Eigen::MatrixXd weight;
};

/// Discretized Gauss-Markov trajectory prior: joint mean, block-sparse
/// precision G^T Q^{-1} G, and the pieces needed to factorize it.
///
/// `mean` is the mean of the conditioned prior (Markov chain from
/// N(mu0, K0) conditioned on the terminal observation N(muN, KN)); when the
/// boundary is consistent with free propagation it coincides with the
/// propagated mean.
struct GaussMarkovPrior {
    TimeGrid grid;
    int state_dim = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd propagated_mean;            // free propagation from mu0
    std::vector<Eigen::MatrixXd> transitions;   // Phi(t_{i+1}, t_i)
    std::vector<Eigen::VectorXd> drifts;        // int Phi a over each interval
    std::vector<Eigen::MatrixXd> qinv_blocks;   // [K0^{-1}, Q_01^{-1}, ..., KN^{-1}]
    BlockTridiag precision;                     // K^{-1} = G^T Q^{-1} G
    BoundaryConditions boundary;

    int num_states() const { return grid.num_states(); }
    int joint_dim() const { return num_states() * state_dim; }

    /// The rectangular ((N+2) x (N+1) block) sparse assembly matrix: identity
    /// diagonal, -Phi subdiagonal, trailing identity row block.
    Eigen::MatrixXd assembly_dense() const;
    Eigen::MatrixXd qinv_dense() const;
};

/// Build the prior over `grid` for the given system and boundary marginals.
/// Throws RankError naming the interval if a Grammian is singular.
GaussMarkovPrior build_prior(const LTVSystem& sys, const TimeGrid& grid,
                             const BoundaryConditions& boundary);

/// The N+2 quadratic factors of the prior: one boundary factor per end and a
/// dynamics factor per interval.
std::vector<PriorFactor> prior_factors(const GaussMarkovPrior& prior);

/// Minimum control energy int ||u_t||^2 dt needed to drive the deviation
/// from dx_i at ti to dx_j at tj; equals the Grammian-weighted quadratic form
/// ||dx_j - Phi(tj,ti) dx_i||^2_{Q^{-1}}.
double min_energy_energy(const LTVSystem& sys, const Eigen::VectorXd& dx_i,
                         const Eigen::VectorXd& dx_j, double ti, double tj,
                         int substeps = 100);

}  // namespace gmplan
