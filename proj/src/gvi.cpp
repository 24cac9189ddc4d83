#include "gmplan/gvi.hpp"

#include <cmath>
#include <limits>

namespace gmplan {

void GVIConfig::validate() const {
    if (!(step_size > 0.0 && step_size < 1.0))
        throw std::invalid_argument("GVIConfig: step_size must be in (0, 1)");
    if (max_backtracks < 1) throw std::invalid_argument("GVIConfig: max_backtracks must be >= 1");
    if (iterations < 1) throw std::invalid_argument("GVIConfig: iterations must be >= 1");
    if (resolved_low_iterations() > iterations)
        throw std::invalid_argument("GVIConfig: low_temp_iterations exceeds the budget");
    if (!(temp_low > 0.0) || !(temp_high > 0.0))
        throw std::invalid_argument("GVIConfig: temperatures must be positive");
    if (gh_degree < 1 || gh_degree > 20)
        throw std::invalid_argument("GVIConfig: gh_degree must be in [1, 20]");
}

QuadFactorDerivs quad_factor_derivs(const Eigen::MatrixXd& state_map,
                                    const Eigen::MatrixXd& mean_map,
                                    const Eigen::MatrixXd& weight,
                                    const Eigen::VectorXd& marginal_mean,
                                    const Eigen::MatrixXd& marginal_cov,
                                    const Eigen::VectorXd& prior_mean) {
    const auto rows = state_map.rows();
    if (weight.rows() != rows || mean_map.rows() != rows)
        throw std::invalid_argument("quad_factor_derivs: row dimension mismatch");
    if (state_map.cols() != marginal_mean.size() || marginal_cov.rows() != marginal_mean.size())
        throw std::invalid_argument("quad_factor_derivs: marginal dimension mismatch");
    if (mean_map.cols() != prior_mean.size())
        throw std::invalid_argument("quad_factor_derivs: prior mean dimension mismatch");

    const Eigen::VectorXd residual = state_map * marginal_mean - mean_map * prior_mean;
    const Eigen::MatrixXd weighted_map = state_map.transpose() * weight * state_map;
    QuadFactorDerivs out;
    out.value = (weighted_map * marginal_cov).trace() + residual.dot(weight * residual);
    out.grad = 2.0 * state_map.transpose() * (weight * residual);
    out.hess = 2.0 * weighted_map;
    return out;
}

NLFactorDerivs nl_factor_derivs(const std::function<double(const Eigen::VectorXd&)>& cost,
                                const Eigen::VectorXd& marginal_mean,
                                const Eigen::MatrixXd& marginal_cov, const GHRule& rule) {
    const int n = static_cast<int>(marginal_mean.size());
    NLFactorDerivs out;
    out.e_y_psi = Eigen::VectorXd::Zero(n);
    out.e_yy_psi = Eigen::MatrixXd::Zero(n, n);

    detail::GHPointIterator it(rule, marginal_mean, marginal_cov);
    Eigen::VectorXd x;
    double w = 0.0;
    while (it.next(x, w)) {
        const double psi = cost(x);
        if (psi == 0.0) continue;
        const Eigen::VectorXd y = x - marginal_mean;
        const double wpsi = w * psi;
        out.e_psi += wpsi;
        out.e_y_psi += wpsi * y;
        out.e_yy_psi += wpsi * y * y.transpose();
    }
    out.e_yy_psi = 0.5 * (out.e_yy_psi + out.e_yy_psi.transpose()).eval();
    return out;
}

GVISolver::GVISolver(const GaussMarkovPrior& prior, const CollisionEnv& env, GVIConfig config)
    : prior_(prior), env_(env), config_(std::move(config)) {
    config_.validate();
    if (env_.robot.dof * 2 != prior_.state_dim)
        throw std::invalid_argument("GVISolver: robot dof inconsistent with prior state_dim");
    rule_ = gh_rule(config_.gh_degree);
    factors_ = prior_factors(prior_);
}

Eigen::MatrixXd GVISolver::marginal_cov(const BlockTridiagLLT::Marginals& m,
                                        const FactorMap& map) const {
    const int d = prior_.state_dim;
    if (map.num_states == 1) return m.diag[map.first_state];
    Eigen::MatrixXd cov(2 * d, 2 * d);
    const int i = map.first_state;
    cov.topLeftCorner(d, d) = m.diag[i];
    cov.bottomRightCorner(d, d) = m.diag[i + 1];
    cov.topRightCorner(d, d) = m.upper[i];
    cov.bottomLeftCorner(d, d) = m.upper[i].transpose();
    return cov;
}

GVISolver::FactorDerivatives GVISolver::prior_factor_derivs(
    const PriorFactor& factor, const Eigen::VectorXd& marginal_mean,
    const Eigen::MatrixXd& marginal_cov) const {
    // Deviation form: the factor acts on dx = x - prior_mean whose own prior
    // mean is zero, so the mean_map term drops out. The 1/2 matches the
    // prior exponent.
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(factor.mean_map.cols());
    QuadFactorDerivs q = quad_factor_derivs(factor.state_map, factor.mean_map, factor.weight,
                                            marginal_mean, marginal_cov, zero);
    FactorDerivatives out;
    out.value = 0.5 * q.value;
    out.grad = 0.5 * q.grad;
    out.hess = 0.5 * q.hess;
    return out;
}

GVISolver::FactorDerivatives GVISolver::collision_factor_derivs(
    int, const Eigen::VectorXd& marginal_mean, const Eigen::MatrixXd& marginal_cov) const {
    auto cost_fn = [this](const Eigen::VectorXd& x) {
        return collision_cost(env_.robot, env_.sdf, env_.params, x);
    };
    NLFactorDerivs nl = nl_factor_derivs(cost_fn, marginal_mean, marginal_cov, rule_);

    Eigen::LLT<Eigen::MatrixXd> llt(marginal_cov);
    if (llt.info() != Eigen::Success)
        throw FactorizationError("GVISolver: marginal covariance is not positive definite");
    FactorDerivatives out;
    out.value = nl.e_psi;
    // dJ/dmu = Sigma^{-1} E[y psi]
    out.grad = llt.solve(nl.e_y_psi);
    // d2J/dmu2 = Sigma^{-1} E[y y^T psi] Sigma^{-1} - Sigma^{-1} E[psi]
    const Eigen::MatrixXd inner = llt.solve(llt.solve(nl.e_yy_psi).transpose());
    const Eigen::MatrixXd prec =
        llt.solve(Eigen::MatrixXd::Identity(marginal_cov.rows(), marginal_cov.cols()));
    out.hess = inner - prec * nl.e_psi;
    out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();
    return out;
}

NaturalGradientStep GVISolver::natural_gradient_step(const GaussianTrajectory& q,
                                                     double temperature) const {
    const int d = prior_.state_dim;
    const int n_states = prior_.num_states();
    if (q.mean.size() != prior_.joint_dim())
        throw std::invalid_argument("natural_gradient_step: proposal dimension mismatch");

    BlockTridiagLLT llt;
    if (!llt.compute(q.precision))
        throw FactorizationError("natural_gradient_step: proposal precision not PD");
    const auto marg = llt.marginals();

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q.mean.size());
    BlockTridiag hess(n_states, d);
    double value = 0.0;

    for (const auto& factor : factors_) {
        const Eigen::VectorXd dev =
            factor.map.extract(q.mean, d) - factor.map.extract(prior_.mean, d);
        const Eigen::MatrixXd cov = marginal_cov(marg, factor.map);
        const FactorDerivatives fd = prior_factor_derivs(factor, dev, cov);
        value += fd.value;
        const int i = factor.map.first_state;
        grad.segment(i * d, factor.map.num_states * d) += fd.grad;
        hess.diag(i) += fd.hess.topLeftCorner(d, d);
        if (factor.map.num_states == 2) {
            hess.diag(i + 1) += fd.hess.bottomRightCorner(d, d);
            hess.lower(i) += fd.hess.bottomLeftCorner(d, d);
        }
    }
    for (int i = 0; i < n_states; ++i) {
        const FactorDerivatives fd =
            collision_factor_derivs(i, q.mean.segment(i * d, d), marg.diag[i]);
        value += fd.value;
        grad.segment(i * d, d) += fd.grad;
        hess.diag(i) += fd.hess;
    }

    NaturalGradientStep step;
    step.dmean = llt.solve(-grad / temperature);
    step.dprecision = hess;  // becomes H/T - Sigma^{-1}
    for (int i = 0; i < n_states; ++i) {
        step.dprecision.diag(i) = step.dprecision.diag(i) / temperature - q.precision.diag(i);
        if (i + 1 < n_states)
            step.dprecision.lower(i) =
                step.dprecision.lower(i) / temperature - q.precision.lower(i);
    }
    step.cost = value / temperature + 0.5 * llt.log_det();
    return step;
}

double GVISolver::expected_cost(const GaussianTrajectory& q,
                                const BlockTridiagLLT::Marginals& marg) const {
    const int d = prior_.state_dim;
    double value = 0.0;
    for (const auto& factor : factors_) {
        const Eigen::VectorXd dev =
            factor.map.extract(q.mean, d) - factor.map.extract(prior_.mean, d);
        value += prior_factor_derivs(factor, dev, marginal_cov(marg, factor.map)).value;
    }
    auto cost_fn = [this](const Eigen::VectorXd& x) {
        return collision_cost(env_.robot, env_.sdf, env_.params, x);
    };
    for (int i = 0; i < prior_.num_states(); ++i)
        value += nl_factor_derivs(cost_fn, q.mean.segment(i * d, d), marg.diag[i], rule_).e_psi;
    return value;
}

double GVISolver::cost(const GaussianTrajectory& q, double temperature) const {
    BlockTridiagLLT llt;
    if (!llt.compute(q.precision))
        throw FactorizationError("GVISolver::cost: precision not PD");
    return expected_cost(q, llt.marginals()) / temperature + 0.5 * llt.log_det();
}

BacktrackResult GVISolver::backtrack(const GaussianTrajectory& q, const Eigen::VectorXd& dmean,
                                     const BlockTridiag& dprecision,
                                     double temperature) const {
    const double incumbent_cost = cost(q, temperature);
    double scale = 1.0;
    for (int r = 1; r <= config_.max_backtracks; ++r) {
        scale *= config_.step_size;
        GaussianTrajectory candidate;
        candidate.mean = q.mean + scale * dmean;
        candidate.precision = q.precision;
        candidate.precision.add_scaled(dprecision, scale);
        candidate.precision.symmetrize();

        BlockTridiagLLT llt;
        if (!llt.compute(candidate.precision)) continue;
        const double c = expected_cost(candidate, llt.marginals()) / temperature +
                         0.5 * llt.log_det();
        if (c < incumbent_cost) {
            return {std::move(candidate), c, false, r};
        }
    }
    return {q, incumbent_cost, true, config_.max_backtracks};
}

CostReport GVISolver::cost_report(const GaussianTrajectory& q) const {
    BlockTridiagLLT llt;
    if (!llt.compute(q.precision))
        throw FactorizationError("GVISolver::cost_report: precision not PD");
    const auto marg = llt.marginals();
    const int d = prior_.state_dim;
    const int n_states = prior_.num_states();

    // prior cost 0.5 [ Tr(K^{-1} Sigma) + dmu^T K^{-1} dmu ] using only the
    // tridiagonal blocks of Sigma
    double trace = 0.0;
    for (int i = 0; i < n_states; ++i)
        trace += (prior_.precision.diag(i) * marg.diag[i]).trace();
    for (int i = 0; i + 1 < n_states; ++i)
        trace += 2.0 * (prior_.precision.lower(i) * marg.upper[i]).trace();

    const Eigen::VectorXd dev = q.mean - prior_.mean;
    double quad = 0.0;
    for (int i = 0; i < n_states; ++i) {
        quad += dev.segment(i * d, d).dot(prior_.precision.diag(i) * dev.segment(i * d, d));
        if (i + 1 < n_states)
            quad += 2.0 * dev.segment((i + 1) * d, d)
                              .dot(prior_.precision.lower(i) * dev.segment(i * d, d));
    }

    CostReport report;
    report.prior = 0.5 * (trace + quad);
    auto cost_fn = [this](const Eigen::VectorXd& x) {
        return collision_cost(env_.robot, env_.sdf, env_.params, x);
    };
    for (int i = 0; i < n_states; ++i)
        report.collision +=
            nl_factor_derivs(cost_fn, q.mean.segment(i * d, d), marg.diag[i], rule_).e_psi;
    report.mp = report.prior + report.collision;
    report.entropy = llt.log_det();
    report.total = report.mp + report.entropy;
    return report;
}

GaussianTrajectory GVISolver::default_init() const {
    const int d = prior_.state_dim;
    const int dof = d / 2;
    const int n_states = prior_.num_states();
    GaussianTrajectory q;
    q.mean.resize(prior_.joint_dim());
    const Eigen::VectorXd p0 = prior_.boundary.mu0.head(dof);
    const Eigen::VectorXd pN = prior_.boundary.muN.head(dof);
    for (int i = 0; i < n_states; ++i) {
        const double s = n_states == 1 ? 0.0 : static_cast<double>(i) / (n_states - 1);
        q.mean.segment(i * d, dof) = (1.0 - s) * p0 + s * pN;
        q.mean.segment(i * d + dof, dof).setZero();
    }
    q.precision = prior_.precision;
    return q;
}

GVISolver::Result GVISolver::solve(std::optional<GaussianTrajectory> q0) const {
    GaussianTrajectory q = q0.has_value() ? std::move(*q0) : default_init();
    if (q.mean.size() != prior_.joint_dim())
        throw std::invalid_argument("gvi_solve: initial proposal dimension mismatch");

    Result result;
    const int switch_at = config_.resolved_low_iterations();
    double temperature = switch_at > 0 ? config_.temp_low : config_.temp_high;
    // re-initialization also applies when the low-temperature phase is empty
    if (switch_at == 0) q.precision = prior_.precision;

    int consecutive_stalls = 0;
    double last_cost = std::numeric_limits<double>::infinity();
    bool switched = switch_at == 0;

    for (int it = 0; it < config_.iterations; ++it) {
        if (!switched && it == switch_at) {
            temperature = config_.temp_high;
            q.precision = prior_.precision;  // re-initialize the precision variable
            last_cost = std::numeric_limits<double>::infinity();
            consecutive_stalls = 0;
            switched = true;
        }

        const NaturalGradientStep step = natural_gradient_step(q, temperature);
        BacktrackResult bt = backtrack(q, step.dmean, step.dprecision, temperature);
        q = std::move(bt.accepted);
        result.history.push_back(cost_report(q));
        ++result.iterations_run;

        if (bt.stalled) {
            if (++consecutive_stalls >= 2) {
                if (switched) {
                    result.stalled = true;
                    break;
                }
                // low-temperature phase can make no further progress
                consecutive_stalls = 0;
                if (!switched && switch_at < config_.iterations) {
                    temperature = config_.temp_high;
                    q.precision = prior_.precision;
                    last_cost = std::numeric_limits<double>::infinity();
                    switched = true;
                }
                continue;
            }
        } else {
            consecutive_stalls = 0;
            const double decrease = last_cost - bt.cost;
            if (decrease >= 0.0 && decrease < config_.tolerance) {
                if (switched) break;
                temperature = config_.temp_high;
                q.precision = prior_.precision;
                last_cost = std::numeric_limits<double>::infinity();
                switched = true;
                continue;
            }
            last_cost = bt.cost;
        }
    }
    result.distribution = std::move(q);
    return result;
}

GVISolver::Result gvi_solve(const GaussMarkovPrior& prior, const CollisionEnv& env,
                            const GVIConfig& config, std::optional<GaussianTrajectory> q0) {
    GVISolver solver(prior, env, config);
    return solver.solve(std::move(q0));
}

}  // namespace gmplan
