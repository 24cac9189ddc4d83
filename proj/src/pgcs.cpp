#include "gmplan/pgcs.hpp"

#include <cmath>

namespace gmplan {

namespace {

/// Pseudo-inverse of B B^T via SVD with a relative singular-value cutoff.
Eigen::MatrixXd bbt_pseudo_inverse(const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd bbt = b * b.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(bbt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cutoff = 1e-10 * svd.singularValues().maxCoeff();
    Eigen::VectorXd inv = svd.singularValues();
    for (int i = 0; i < inv.size(); ++i) inv(i) = inv(i) > cutoff ? 1.0 / inv(i) : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Left pseudo-inverse of B (full column rank for the systems used here).
Eigen::MatrixXd left_pseudo_inverse(const Eigen::MatrixXd& b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cutoff = 1e-10 * svd.singularValues().maxCoeff();
    Eigen::VectorXd inv = svd.singularValues();
    for (int i = 0; i < inv.size(); ++i) inv(i) = inv(i) > cutoff ? 1.0 / inv(i) : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Piecewise-linear interpolation of per-node matrices.
template <typename T>
T interp(const Eigen::VectorXd& times, const std::vector<T>& values, double t) {
    const int count = static_cast<int>(times.size());
    if (t <= times(0)) return values.front();
    if (t >= times(count - 1)) return values.back();
    int lo = 0;
    int hi = count - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (times(mid) <= t ? lo : hi) = mid;
    }
    const double w = (t - times(lo)) / (times(hi) - times(lo));
    return (1.0 - w) * values[lo] + w * values[hi];
}

/// Propagate the Gauss-Markov nominal moments of dX = A^k X + a^k + sqrt(eps) B dW.
void propagate_nominal(PGCSIterate& it, const LTVSystem& base, const PGCSBoundary& boundary,
                       double epsilon, int substeps) {
    const int n = base.state_dim;
    const int nodes = static_cast<int>(it.times.size());
    it.mean.assign(nodes, Eigen::VectorXd());
    it.cov.assign(nodes, Eigen::MatrixXd());
    it.mean[0] = boundary.mu0;
    it.cov[0] = boundary.K0;

    auto field = [&](double t, const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
        const Eigen::MatrixXd a_t = interp(it.times, it.A, t);
        const Eigen::VectorXd drift = interp(it.times, it.a, t);
        const Eigen::MatrixXd b_t = base.B(t);
        Eigen::MatrixXd ds(n, n + 1);
        ds.col(0) = a_t * s.col(0) + drift;
        const Eigen::MatrixXd cov = s.rightCols(n);
        ds.rightCols(n) =
            a_t * cov + cov * a_t.transpose() + epsilon * b_t * b_t.transpose();
        return ds;
    };
    Eigen::MatrixXd state(n, n + 1);
    state.col(0) = boundary.mu0;
    state.rightCols(n) = boundary.K0;
    for (int j = 1; j < nodes; ++j) {
        state = heun_integrate(field, state, it.times(j - 1), it.times(j), substeps);
        Eigen::MatrixXd cov = state.rightCols(n);
        cov = 0.5 * (cov + cov.transpose()).eval();
        state.rightCols(n) = cov;
        it.mean[j] = state.col(0);
        it.cov[j] = cov;
    }
}

}  // namespace

void PGCSConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("PGCSConfig: iterations must be >= 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("PGCSConfig: epsilon must be > 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("PGCSConfig: step_size must be > 0");
    if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0))
        throw std::invalid_argument("PGCSConfig: backtrack_ratio must be in (0, 1)");
    if (max_backtracks < 1) throw std::invalid_argument("PGCSConfig: max_backtracks must be >= 1");
    if (nodes < 2) throw std::invalid_argument("PGCSConfig: need at least 2 grid nodes");
    if (substeps < 1) throw std::invalid_argument("PGCSConfig: substeps must be >= 1");
}

CostExpansion quad_approx_cost(const CollisionEnv& env, const Eigen::VectorXd& z) {
    CostExpansion out;
    out.value = collision_cost(env.robot, env.sdf, env.params, z);
    auto [grad, hess] = collision_grad(env.robot, env.sdf, env.params, z);
    out.grad = std::move(grad);
    out.hess = std::move(hess);
    return out;
}

SteeringCoefficients compute_Qr(const PGCSIterate& iterate, const LTVSystem& base,
                                double step_size, const CollisionEnv& env) {
    const int nodes = static_cast<int>(iterate.times.size());
    const double eta = step_size;
    const double blend = eta / (1.0 + eta);
    const double mix = eta / ((1.0 + eta) * (1.0 + eta));

    SteeringCoefficients coeff;
    coeff.A_bar.resize(nodes);
    coeff.a_bar.resize(nodes);
    coeff.Q.resize(nodes);
    coeff.r.resize(nodes);

    for (int j = 0; j < nodes; ++j) {
        const double t = iterate.times(j);
        const Eigen::MatrixXd a_base = base.A(t);
        const Eigen::VectorXd drift_base = base.a(t);
        const Eigen::MatrixXd b_t = base.B(t);
        const Eigen::MatrixXd bbt_pinv = bbt_pseudo_inverse(b_t);

        const Eigen::MatrixXd da = iterate.A[j] - a_base;
        const Eigen::VectorXd ddrift = iterate.a[j] - drift_base;

        coeff.A_bar[j] = (iterate.A[j] + eta * a_base) / (1.0 + eta);
        coeff.a_bar[j] = (iterate.a[j] + eta * drift_base) / (1.0 + eta);

        const CostExpansion expansion = quad_approx_cost(env, iterate.mean[j]);
        // The grad Tr(hess * Sigma) term vanishes: the Gauss-Newton Hessian
        // is held locally constant in the state.
        coeff.Q[j] = blend * expansion.hess + mix * da.transpose() * bbt_pinv * da;
        coeff.Q[j] = 0.5 * (coeff.Q[j] + coeff.Q[j].transpose()).eval();
        coeff.r[j] = blend * expansion.grad - blend * expansion.hess * iterate.mean[j] +
                     mix * da.transpose() * bbt_pinv * ddrift;
    }
    return coeff;
}

double nominal_cost(const CollisionEnv& env, const Eigen::VectorXd& times,
                    const std::vector<Eigen::VectorXd>& mean) {
    double total = 0.0;
    double prev = collision_cost(env.robot, env.sdf, env.params, mean.front());
    for (int j = 1; j < static_cast<int>(times.size()); ++j) {
        const double cur = collision_cost(env.robot, env.sdf, env.params, mean[j]);
        total += 0.5 * (prev + cur) * (times(j) - times(j - 1));
        prev = cur;
    }
    return total;
}

PGCSIterate pgcs_step(const PGCSIterate& iterate, const LTVSystem& base,
                      const PGCSBoundary& boundary, double step_size,
                      const CollisionEnv& env, const PGCSConfig& config) {
    const int nodes = static_cast<int>(iterate.times.size());
    const SteeringCoefficients coeff = compute_Qr(iterate, base, step_size, env);

    SteeringProblem inner;
    inner.sys.state_dim = base.state_dim;
    inner.sys.control_dim = base.control_dim;
    inner.sys.epsilon = config.epsilon;
    inner.sys.A = [times = iterate.times, a = coeff.A_bar](double t) {
        return interp(times, a, t);
    };
    inner.sys.a = [times = iterate.times, a = coeff.a_bar](double t) {
        return interp(times, a, t);
    };
    inner.sys.B = base.B;
    inner.Q = [times = iterate.times, q = coeff.Q](double t) { return interp(times, q, t); };
    inner.r = [times = iterate.times, r = coeff.r](double t) { return interp(times, r, t); };
    inner.horizon = iterate.times(nodes - 1);
    inner.mu0 = boundary.mu0;
    inner.muT = boundary.muT;
    inner.K0 = boundary.K0;
    inner.KT = boundary.KT;
    inner.nodes = nodes;
    inner.substeps = config.substeps;

    const SteeringSolution steer = solve_covariance(inner);

    PGCSIterate candidate;
    candidate.times = iterate.times;
    candidate.A.resize(nodes);
    candidate.a.resize(nodes);
    for (int j = 0; j < nodes; ++j) {
        const Eigen::MatrixXd b_t = base.B(iterate.times(j));
        candidate.A[j] = coeff.A_bar[j] + b_t * steer.gains.gain[j];
        candidate.a[j] = coeff.a_bar[j] + b_t * steer.gains.feedforward[j];
    }
    propagate_nominal(candidate, base, boundary, config.epsilon, config.substeps);
    candidate.cost = nominal_cost(env, candidate.times, candidate.mean);
    candidate.step_size = step_size;
    return candidate;
}

PGCSResult pgcs_solve(const LTVSystem& base, const PGCSBoundary& boundary,
                      const CollisionEnv& env, const PGCSConfig& config) {
    config.validate();
    const int n = base.state_dim;
    if (boundary.mu0.size() != n || boundary.muT.size() != n)
        throw std::invalid_argument("pgcs_solve: boundary mean dimension mismatch");
    if (boundary.K0.rows() != n || boundary.KT.rows() != n)
        throw std::invalid_argument("pgcs_solve: boundary covariance dimension mismatch");
    if (!(boundary.horizon > 0.0))
        throw std::invalid_argument("pgcs_solve: horizon must be > 0");

    PGCSResult result;

    // iteration 0: the prior system with zero feedback
    PGCSIterate current;
    current.times = Eigen::VectorXd::LinSpaced(config.nodes, 0.0, boundary.horizon);
    current.A.resize(config.nodes);
    current.a.resize(config.nodes);
    for (int j = 0; j < config.nodes; ++j) {
        current.A[j] = base.A(current.times(j));
        current.a[j] = base.a(current.times(j));
    }
    propagate_nominal(current, base, boundary, config.epsilon, config.substeps);
    current.cost = nominal_cost(env, current.times, current.mean);
    result.history.push_back(current);

    for (int k = 1; k <= config.iterations; ++k) {
        double eta = config.step_size;
        PGCSIterate candidate;
        bool accepted = false;
        try {
            for (int j = 1; j <= config.max_backtracks; ++j) {
                candidate = pgcs_step(current, base, boundary, eta, env, config);
                if (candidate.cost < current.cost || j == config.max_backtracks) {
                    candidate.hit_backtrack_budget =
                        j == config.max_backtracks && candidate.cost >= current.cost;
                    accepted = true;
                    break;
                }
                eta *= config.backtrack_ratio;
            }
        } catch (const std::exception& err) {
            result.failed = true;
            result.failure_reason =
                "iteration " + std::to_string(k) + ": " + err.what();
            break;
        }
        if (!accepted) break;

        const double decrease = current.cost - candidate.cost;
        current = std::move(candidate);
        result.history.push_back(current);
        if (decrease > 0.0 && decrease < config.tolerance) {
            result.converged = true;
            break;
        }
    }

    // net gains w.r.t. the base system: A^k = A + B K*, a^k = a + B d*
    const int nodes = config.nodes;
    result.solution.times = current.times;
    result.solution.gains.times = current.times;
    result.solution.gains.gain.resize(nodes);
    result.solution.gains.feedforward.resize(nodes);
    for (int j = 0; j < nodes; ++j) {
        const double t = current.times(j);
        const Eigen::MatrixXd b_pinv = left_pseudo_inverse(base.B(t));
        result.solution.gains.gain[j] = b_pinv * (current.A[j] - base.A(t));
        result.solution.gains.feedforward[j] = b_pinv * (current.a[j] - base.a(t));
    }
    result.solution.nominal_mean = current.mean;
    result.solution.nominal_cov = current.cov;
    return result;
}

}  // namespace gmplan
