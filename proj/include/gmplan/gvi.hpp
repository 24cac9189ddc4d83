#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "gmplan/block_tridiag.hpp"
#include "gmplan/environment.hpp"
#include "gmplan/gp_prior.hpp"
#include "gmplan/quadrature.hpp"

namespace gmplan {

/// Collision environment shared by the solvers.
struct CollisionEnv {
    RobotModel robot;
    SignedDistanceField sdf;
    CollisionParams params;
};

/// Proposal distribution over the joint support states: mean and sparse
/// precision with the prior's block-tridiagonal pattern.
struct GaussianTrajectory {
    Eigen::VectorXd mean;
    BlockTridiag precision;
};

struct GVIConfig {
    double step_size = 0.9;       // backtracking base eta in (0, 1)
    int max_backtracks = 10;      // I_b
    double temp_low = 1.0;
    double temp_high = 10.0;
    int low_temp_iterations = -1; // iterations before the high-temperature
                                  // phase; -1 means half the budget
    int iterations = 60;
    int gh_degree = 3;
    double tolerance = 1e-8;      // stop when the cost decrease falls below

    int resolved_low_iterations() const {
        return low_temp_iterations >= 0 ? low_temp_iterations : iterations / 2;
    }
    void validate() const;
};

/// Cost breakdown of a proposal, mirroring the experiment tables: MP is
/// prior + collision, the entropy column is log det of the precision, and
/// total = MP + entropy.
struct CostReport {
    double prior = 0.0;
    double collision = 0.0;
    double mp = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

/// Closed-form value/derivatives of the quadratic factor
///   J = E[ || Lambda x - Psi mu ||^2_weight ],  x ~ N(mean, cov):
///   value = Tr(Lambda^T W Lambda cov) + e^T W e,  e = Lambda mean - Psi mu,
///   dJ/dmean = 2 Lambda^T W e,   d2J/dmean2 = 2 Lambda^T W Lambda.
struct QuadFactorDerivs {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};
QuadFactorDerivs quad_factor_derivs(const Eigen::MatrixXd& state_map,
                                    const Eigen::MatrixXd& mean_map,
                                    const Eigen::MatrixXd& weight,
                                    const Eigen::VectorXd& marginal_mean,
                                    const Eigen::MatrixXd& marginal_cov,
                                    const Eigen::VectorXd& prior_mean);

/// Gauss-Hermite estimates of the three expectations a natural-gradient step
/// needs from a nonlinear factor: E[psi], E[(x-m) psi], E[(x-m)(x-m)^T psi].
struct NLFactorDerivs {
    double e_psi = 0.0;
    Eigen::VectorXd e_y_psi;
    Eigen::MatrixXd e_yy_psi;
};
NLFactorDerivs nl_factor_derivs(const std::function<double(const Eigen::VectorXd&)>& cost,
                                const Eigen::VectorXd& marginal_mean,
                                const Eigen::MatrixXd& marginal_cov, const GHRule& rule);

struct NaturalGradientStep {
    Eigen::VectorXd dmean;
    BlockTridiag dprecision;
    double cost = 0.0;  // optimizer cost at the current iterate
};

struct BacktrackResult {
    GaussianTrajectory accepted;
    double cost = 0.0;
    bool stalled = false;
    int shrink_count = 0;  // R of the accepted candidate
};

/// Natural-gradient Gaussian variational inference over the factorized
/// motion-planning posterior (prior factors in closed form, collision
/// factors by Gauss-Hermite quadrature).
class GVISolver {
  public:
    GVISolver(const GaussMarkovPrior& prior, const CollisionEnv& env, GVIConfig config);

    /// One natural-gradient step at temperature `temperature`.
    NaturalGradientStep natural_gradient_step(const GaussianTrajectory& q,
                                              double temperature) const;

    /// Backtracking line search: accepts the first step eta^R (R = 1..I_b)
    /// with positive-definite precision and strictly decreased cost.
    BacktrackResult backtrack(const GaussianTrajectory& q, const Eigen::VectorXd& dmean,
                              const BlockTridiag& dprecision, double temperature) const;

    /// Optimizer objective: E[psi]/temperature + 0.5 log det precision.
    double cost(const GaussianTrajectory& q, double temperature) const;

    CostReport cost_report(const GaussianTrajectory& q) const;

    /// Default proposal: straight-line positions, zero velocities, prior
    /// precision.
    GaussianTrajectory default_init() const;

    struct Result {
        GaussianTrajectory distribution;
        std::vector<CostReport> history;
        bool stalled = false;
        int iterations_run = 0;
    };
    Result solve(std::optional<GaussianTrajectory> q0 = std::nullopt) const;

    const GaussMarkovPrior& prior() const { return prior_; }

  private:
    struct FactorDerivatives {
        double value = 0.0;           // E[psi] contribution
        Eigen::VectorXd grad;         // dJ/dmu on the factor block
        Eigen::MatrixXd hess;         // d2J/dmu2 on the factor block
    };
    FactorDerivatives prior_factor_derivs(const PriorFactor& factor,
                                          const Eigen::VectorXd& marginal_mean,
                                          const Eigen::MatrixXd& marginal_cov) const;
    FactorDerivatives collision_factor_derivs(int state_index,
                                              const Eigen::VectorXd& marginal_mean,
                                              const Eigen::MatrixXd& marginal_cov) const;
    Eigen::MatrixXd marginal_cov(const BlockTridiagLLT::Marginals& m, const FactorMap& map) const;
    double expected_cost(const GaussianTrajectory& q,
                         const BlockTridiagLLT::Marginals& marg) const;

    GaussMarkovPrior prior_;
    CollisionEnv env_;
    GVIConfig config_;
    GHRule rule_;
    std::vector<PriorFactor> factors_;
};

/// Convenience wrapper running the full two-phase schedule.
GVISolver::Result gvi_solve(const GaussMarkovPrior& prior, const CollisionEnv& env,
                            const GVIConfig& config,
                            std::optional<GaussianTrajectory> q0 = std::nullopt);

}  // namespace gmplan
