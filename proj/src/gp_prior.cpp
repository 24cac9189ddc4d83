#include "gmplan/gp_prior.hpp"

#include <string>

namespace gmplan {

namespace {

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& m, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw RankError(what);
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

Eigen::MatrixXd GaussMarkovPrior::assembly_dense() const {
    const int d = state_dim;
    const int n_states = num_states();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero((n_states + 1) * d, n_states * d);
    for (int i = 0; i < n_states; ++i)
        g.block(i * d, i * d, d, d) = Eigen::MatrixXd::Identity(d, d);
    for (int i = 0; i + 1 < n_states; ++i) g.block((i + 1) * d, i * d, d, d) = -transitions[i];
    g.block(n_states * d, (n_states - 1) * d, d, d) = Eigen::MatrixXd::Identity(d, d);
    return g;
}

Eigen::MatrixXd GaussMarkovPrior::qinv_dense() const {
    const int d = state_dim;
    const int nb = static_cast<int>(qinv_blocks.size());
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nb * d, nb * d);
    for (int i = 0; i < nb; ++i) q.block(i * d, i * d, d, d) = qinv_blocks[i];
    return q;
}

GaussMarkovPrior build_prior(const LTVSystem& sys, const TimeGrid& grid,
                             const BoundaryConditions& boundary) {
    grid.validate();
    const int d = sys.state_dim;
    const int n_states = grid.num_states();
    const int n_intervals = grid.num_intervals();
    if (boundary.mu0.size() != d || boundary.muN.size() != d)
        throw std::invalid_argument("build_prior: boundary mean dimension mismatch");
    if (boundary.K0.rows() != d || boundary.KN.rows() != d)
        throw std::invalid_argument("build_prior: boundary covariance dimension mismatch");

    GaussMarkovPrior prior;
    prior.grid = grid;
    prior.state_dim = d;
    prior.boundary = boundary;

    prior.qinv_blocks.resize(n_intervals + 2);
    prior.qinv_blocks.front() = invert_spd(boundary.K0, "build_prior: K0 is not positive definite");
    prior.qinv_blocks.back() = invert_spd(boundary.KN, "build_prior: KN is not positive definite");

    prior.transitions.resize(n_intervals);
    prior.drifts.resize(n_intervals);
    prior.propagated_mean.resize(n_states * d);
    prior.propagated_mean.head(d) = boundary.mu0;
    for (int i = 0; i < n_intervals; ++i) {
        const double ti = grid.knots(i);
        const double tj = grid.knots(i + 1);
        prior.transitions[i] = transition_matrix(sys, ti, tj, grid.substeps);

        Eigen::MatrixXd gram = grammian(sys, ti, tj, grid.substeps);
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success)
            throw RankError("build_prior: singular Grammian on interval [" +
                            std::to_string(ti) + ", " + std::to_string(tj) + "]");
        prior.qinv_blocks[i + 1] = llt.solve(Eigen::MatrixXd::Identity(d, d));

        // propagate the mean through the interval; the drift increment is
        // what remains after the homogeneous transition
        auto mean_field = [&sys](double t, const Eigen::VectorXd& m) -> Eigen::VectorXd {
            return sys.A(t) * m + sys.a(t);
        };
        Eigen::VectorXd m_i = prior.propagated_mean.segment(i * d, d);
        Eigen::VectorXd m_j = heun_integrate(mean_field, m_i, ti, tj, grid.substeps);
        prior.propagated_mean.segment((i + 1) * d, d) = m_j;
        prior.drifts[i] = m_j - prior.transitions[i] * m_i;
    }

    // precision K^{-1} = G^T Q^{-1} G assembled blockwise
    BlockTridiag prec(n_states, d);
    for (int i = 0; i < n_states; ++i) {
        Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(d, d);
        if (i == 0) diag += prior.qinv_blocks.front();
        if (i > 0) diag += prior.qinv_blocks[i];
        if (i < n_intervals)
            diag += prior.transitions[i].transpose() * prior.qinv_blocks[i + 1] *
                    prior.transitions[i];
        if (i == n_states - 1) diag += prior.qinv_blocks.back();
        prec.diag(i) = 0.5 * (diag + diag.transpose());
        if (i < n_intervals) prec.lower(i) = -prior.qinv_blocks[i + 1] * prior.transitions[i];
    }
    prior.precision = prec;

    // conditioned mean: solve K^{-1} mu = G^T Q^{-1} c, where c carries the
    // start mean, the per-interval drift increments, and the goal mean
    Eigen::VectorXd info = Eigen::VectorXd::Zero(n_states * d);
    info.head(d) += prior.qinv_blocks.front() * boundary.mu0;
    for (int i = 0; i < n_intervals; ++i) {
        const Eigen::VectorXd weighted = prior.qinv_blocks[i + 1] * prior.drifts[i];
        info.segment((i + 1) * d, d) += weighted;
        info.segment(i * d, d) -= prior.transitions[i].transpose() * weighted;
    }
    info.tail(d) += prior.qinv_blocks.back() * boundary.muN;

    BlockTridiagLLT llt;
    if (!llt.compute(prec))
        throw FactorizationError("build_prior: joint precision is not positive definite");
    prior.mean = llt.solve(info);
    return prior;
}

std::vector<PriorFactor> prior_factors(const GaussMarkovPrior& prior) {
    const int d = prior.state_dim;
    const int n_intervals = prior.grid.num_intervals();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

    std::vector<PriorFactor> factors;
    factors.reserve(n_intervals + 2);

    PriorFactor start;
    start.map = {0, 1};
    start.kind = PriorFactorKind::BoundaryStart;
    start.state_map = eye;
    start.mean_map = Eigen::MatrixXd::Zero(d, d);
    start.weight = prior.qinv_blocks.front();
    factors.push_back(std::move(start));

    for (int i = 0; i < n_intervals; ++i) {
        PriorFactor dyn;
        dyn.map = {i, 2};
        dyn.kind = PriorFactorKind::Dynamics;
        dyn.state_map.resize(d, 2 * d);
        dyn.state_map.leftCols(d) = -prior.transitions[i];
        dyn.state_map.rightCols(d) = eye;
        dyn.mean_map.resize(d, 2 * d);
        dyn.mean_map.leftCols(d) = prior.transitions[i];
        dyn.mean_map.rightCols(d) = -eye;
        dyn.weight = prior.qinv_blocks[i + 1];
        factors.push_back(std::move(dyn));
    }

    PriorFactor goal;
    goal.map = {prior.num_states() - 1, 1};
    goal.kind = PriorFactorKind::BoundaryGoal;
    goal.state_map = eye;
    goal.mean_map = Eigen::MatrixXd::Zero(d, d);
    goal.weight = prior.qinv_blocks.back();
    factors.push_back(std::move(goal));
    return factors;
}

double min_energy_energy(const LTVSystem& sys, const Eigen::VectorXd& dx_i,
                         const Eigen::VectorXd& dx_j, double ti, double tj, int substeps) {
    if (!(tj > ti)) throw std::invalid_argument("min_energy_energy: need tj > ti");
    const Eigen::MatrixXd phi = transition_matrix(sys, ti, tj, substeps);
    const Eigen::MatrixXd gram = grammian(sys, ti, tj, substeps);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw RankError("min_energy_energy: singular Grammian on [" + std::to_string(ti) +
                        ", " + std::to_string(tj) + "]");
    const Eigen::VectorXd residual = dx_j - phi * dx_i;
    return residual.dot(llt.solve(residual));
}

}  // namespace gmplan
