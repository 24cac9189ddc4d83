#include "gmplan/covsteer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gmplan {

namespace {

Eigen::MatrixXd zero_or(const std::function<Eigen::MatrixXd(double)>& f, double t, int n) {
    return f ? f(t) : Eigen::MatrixXd::Zero(n, n);
}

Eigen::VectorXd zero_or(const std::function<Eigen::VectorXd(double)>& f, double t, int n) {
    return f ? f(t) : Eigen::VectorXd::Zero(n);
}

/// Hamiltonian matrix of the Riccati flow: [[A, -BB^T], [-Q, -A^T]].
Eigen::MatrixXd hamiltonian(const SteeringProblem& prob, double t) {
    const int n = prob.sys.state_dim;
    Eigen::MatrixXd ham(2 * n, 2 * n);
    const Eigen::MatrixXd a_mat = prob.sys.A(t);
    const Eigen::MatrixXd b_mat = prob.sys.B(t);
    ham.topLeftCorner(n, n) = a_mat;
    ham.topRightCorner(n, n) = -b_mat * b_mat.transpose();
    ham.bottomLeftCorner(n, n) = -zero_or(prob.Q, t, n);
    ham.bottomRightCorner(n, n) = -a_mat.transpose();
    return ham;
}

struct HamiltonianFlow {
    Eigen::VectorXd times;
    std::vector<Eigen::MatrixXd> transition;  // M(t_j, 0), 2n x 2n
    std::vector<Eigen::VectorXd> particular;  // int_0^{t_j} M(t_j, s) [a; -r] ds
};

/// Integrate the Hamiltonian transition matrix and the affine particular
/// solution over the storage grid.
HamiltonianFlow integrate_hamiltonian(const SteeringProblem& prob) {
    const int n = prob.sys.state_dim;
    HamiltonianFlow flow;
    flow.times = prob.make_times();
    const int nodes = static_cast<int>(flow.times.size());
    flow.transition.resize(nodes);
    flow.particular.resize(nodes);

    // augmented state [M | p], flowed jointly
    Eigen::MatrixXd state(2 * n, 2 * n + 1);
    state.leftCols(2 * n) = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    state.rightCols(1).setZero();
    flow.transition[0] = state.leftCols(2 * n);
    flow.particular[0] = state.rightCols(1);

    auto field = [&prob, n](double t, const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
        Eigen::MatrixXd ds = hamiltonian(prob, t) * s;
        ds.col(2 * n).head(n) += zero_or(prob.sys.a, t, n);
        ds.col(2 * n).tail(n) -= zero_or(prob.r, t, n);
        return ds;
    };
    for (int j = 1; j < nodes; ++j) {
        state = heun_integrate(field, state, flow.times(j - 1), flow.times(j), prob.substeps);
        flow.transition[j] = state.leftCols(2 * n);
        flow.particular[j] = state.rightCols(1);
    }
    return flow;
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success)
        throw FactorizationError("covsteer: eigendecomposition failed");
    return es.eigenvectors() *
           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success) throw FactorizationError(what);
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

/// Linear fractional image of S under the block transition [[m11,m12],[m21,m22]]:
/// (m21 + m22 S)(m11 + m12 S)^{-1}. Returns false if the denominator is singular.
bool lft(const Eigen::MatrixXd& m11, const Eigen::MatrixXd& m12, const Eigen::MatrixXd& m21,
         const Eigen::MatrixXd& m22, const Eigen::MatrixXd& s, Eigen::MatrixXd& out) {
    const Eigen::MatrixXd denom = m11 + m12 * s;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(denom);
    if (!lu.isInvertible()) return false;
    out = (m21 + m22 * s) * lu.inverse();
    return true;
}

/// Residual of the split boundary conditions as a function of Pi_0:
///   LFT_M(Pi_0) + LFT_N(eps K0^{-1} - Pi_0) - eps KT^{-1},
/// where N has the blocks (m11, -m12, -m21, m22).
struct BoundaryResidual {
    Eigen::MatrixXd m11, m12, m21, m22;
    Eigen::MatrixXd p0;  // eps K0^{-1}
    Eigen::MatrixXd pt;  // eps KT^{-1}

    bool eval(const Eigen::MatrixXd& pi0, Eigen::MatrixXd& res) const {
        Eigen::MatrixXd pi_t, h_t;
        if (!lft(m11, m12, m21, m22, pi0, pi_t)) return false;
        if (!lft(m11, -m12, -m21, m22, p0 - pi0, h_t)) return false;
        res = pi_t + h_t - pt;
        return true;
    }

    /// The discretized flow is symplectic only to the integrator's order; the
    /// boundary equations cannot be satisfied below this floor, which scales
    /// the acceptance thresholds.
    double residual_floor() const {
        const double defect = (m11 * m12.transpose() - m12 * m11.transpose()).norm();
        const double scale = std::max(1.0, m11.norm() * m12.norm());
        return (100.0 * defect / scale + 1e-10) * std::max(1.0, pt.norm());
    }
};

/// Damped Newton on vech(Pi_0) with a finite-difference Jacobian. Works on
/// the symmetrized residual; the skew part is an irreducible artifact of the
/// discretized flow.
bool newton_refine(const BoundaryResidual& boundary, Eigen::MatrixXd& pi0) {
    const int n = static_cast<int>(pi0.rows());
    const int m = n * (n + 1) / 2;
    auto pack = [&](const Eigen::MatrixXd& s) {
        Eigen::VectorXd v(m);
        int k = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) v(k++) = 0.5 * (s(i, j) + s(j, i));
        return v;
    };
    auto unpack = [&](const Eigen::VectorXd& v) {
        Eigen::MatrixXd s(n, n);
        int k = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                s(i, j) = v(k);
                s(j, i) = v(k);
                ++k;
            }
        return s;
    };

    Eigen::VectorXd x = pack(pi0);
    Eigen::MatrixXd res;
    if (!boundary.eval(unpack(x), res)) return false;
    double err = pack(res).norm();
    const double tol = 1e-12 * std::max(1.0, boundary.pt.norm());

    for (int iter = 0; iter < 60 && err > tol; ++iter) {
        Eigen::MatrixXd jac(m, m);
        const double h = 1e-6 * std::max(1.0, x.norm());
        for (int k = 0; k < m; ++k) {
            Eigen::VectorXd xp = x;
            xp(k) += h;
            Eigen::MatrixXd resp;
            if (!boundary.eval(unpack(xp), resp)) return false;
            jac.col(k) = (pack(resp) - pack(res)) / h;
        }
        const Eigen::VectorXd step = jac.fullPivLu().solve(-pack(res));
        double scale = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 30; ++bt) {
            Eigen::MatrixXd res_try;
            if (boundary.eval(unpack(x + scale * step), res_try) &&
                pack(res_try).norm() < err) {
                x += scale * step;
                res = res_try;
                err = pack(res).norm();
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }
    if (err > boundary.residual_floor()) return false;
    pi0 = unpack(x);
    return true;
}

}  // namespace

Eigen::VectorXd SteeringProblem::make_times() const {
    int count = nodes;
    if (count <= 0)
        count = std::max(2, static_cast<int>(std::ceil(steps_per_unit_time * horizon)) + 1);
    return Eigen::VectorXd::LinSpaced(count, 0.0, horizon);
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> GainSchedule::at(double t) const {
    const int count = static_cast<int>(times.size());
    if (count == 0) throw std::invalid_argument("GainSchedule::at: empty schedule");
    if (t <= times(0)) return {gain.front(), feedforward.front()};
    if (t >= times(count - 1)) return {gain.back(), feedforward.back()};
    int lo = 0;
    int hi = count - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (times(mid) <= t ? lo : hi) = mid;
    }
    const double w = (t - times(lo)) / (times(hi) - times(lo));
    return {(1.0 - w) * gain[lo] + w * gain[hi],
            (1.0 - w) * feedforward[lo] + w * feedforward[hi]};
}

MeanSolution solve_mean(const SteeringProblem& prob) {
    const int n = prob.sys.state_dim;
    if (prob.mu0.size() != n || prob.muT.size() != n)
        throw std::invalid_argument("solve_mean: boundary mean dimension mismatch");
    const HamiltonianFlow flow = integrate_hamiltonian(prob);
    const int nodes = static_cast<int>(flow.times.size());

    const Eigen::MatrixXd& mt = flow.transition.back();
    const Eigen::MatrixXd m11 = mt.topLeftCorner(n, n);
    const Eigen::MatrixXd m12 = mt.topRightCorner(n, n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m12);
    if (!lu.isInvertible())
        throw RankError("solve_mean: terminal mean unreachable (singular boundary map)");
    const Eigen::VectorXd lambda0 =
        lu.solve(prob.muT - m11 * prob.mu0 - flow.particular.back().head(n));

    MeanSolution sol;
    sol.times = flow.times;
    sol.mean.resize(nodes);
    sol.control.resize(nodes);
    Eigen::VectorXd boundary(2 * n);
    boundary << prob.mu0, lambda0;
    for (int j = 0; j < nodes; ++j) {
        const Eigen::VectorXd state = flow.transition[j] * boundary + flow.particular[j];
        sol.mean[j] = state.head(n);
        sol.control[j] = -prob.sys.B(flow.times(j)).transpose() * state.tail(n);
    }
    return sol;
}

SteeringSolution solve_covariance(const SteeringProblem& prob) {
    const int n = prob.sys.state_dim;
    if (!(prob.sys.epsilon > 0.0))
        throw std::invalid_argument("solve_covariance: epsilon must be > 0");
    if (prob.K0.rows() != n || prob.KT.rows() != n)
        throw std::invalid_argument("solve_covariance: boundary covariance dimension mismatch");

    const double eps = prob.sys.epsilon;
    const HamiltonianFlow flow = integrate_hamiltonian(prob);
    const int nodes = static_cast<int>(flow.times.size());

    const Eigen::MatrixXd& mt = flow.transition.back();
    BoundaryResidual boundary;
    boundary.m11 = mt.topLeftCorner(n, n);
    boundary.m12 = mt.topRightCorner(n, n);
    boundary.m21 = mt.bottomLeftCorner(n, n);
    boundary.m22 = mt.bottomRightCorner(n, n);
    boundary.p0 = eps * spd_inverse(prob.K0, "solve_covariance: K0 not positive definite");
    boundary.pt = eps * spd_inverse(prob.KT, "solve_covariance: KT not positive definite");

    // Algebraic reduction: with G = m11 + m12 (Pi_0 - P0/2), the boundary
    // conditions collapse to G P0^{-1} G^T = KT/eps + m12 P0 m12^T / 4 and
    // T = m12^{-1} G symmetric, i.e. T P0^{-1} T = m12^{-1} RHS m12^{-T}.
    Eigen::FullPivLU<Eigen::MatrixXd> m12_lu(boundary.m12);
    std::vector<Eigen::MatrixXd> candidates;
    if (m12_lu.isInvertible()) {
        const Eigen::MatrixXd m12_inv = m12_lu.inverse();
        const Eigen::MatrixXd rhs =
            prob.KT / eps + 0.25 * boundary.m12 * boundary.p0 * boundary.m12.transpose();
        const Eigen::MatrixXd r_tilde =
            0.5 * (m12_inv * rhs * m12_inv.transpose() +
                   (m12_inv * rhs * m12_inv.transpose()).transpose());
        const Eigen::MatrixXd p0_sqrt = spd_sqrt(boundary.p0);
        const Eigen::MatrixXd p0_isqrt =
            spd_inverse(p0_sqrt, "solve_covariance: degenerate boundary precision");
        const Eigen::MatrixXd core = spd_sqrt(p0_isqrt * r_tilde * p0_isqrt);
        const Eigen::MatrixXd t_mat = p0_sqrt * core * p0_sqrt;
        const Eigen::MatrixXd m12inv_m11 = m12_inv * boundary.m11;
        candidates.push_back(0.5 * boundary.p0 - t_mat - m12inv_m11);
        candidates.push_back(0.5 * boundary.p0 + t_mat - m12inv_m11);
    }

    // keep candidates whose boundary residual reaches the discretization
    // floor and whose Riccati flow stays regular over the horizon
    Eigen::MatrixXd pi0;
    bool found = false;
    double best_score = std::numeric_limits<double>::infinity();
    const double floor = boundary.residual_floor();
    for (auto& cand : candidates) {
        cand = 0.5 * (cand + cand.transpose()).eval();
        Eigen::MatrixXd res;
        if (!boundary.eval(cand, res)) continue;
        if (res.norm() > floor) continue;
        bool regular = true;
        double growth = 0.0;
        for (int j = 0; j < nodes; ++j) {
            const Eigen::MatrixXd denom = flow.transition[j].topLeftCorner(n, n) +
                                          flow.transition[j].topRightCorner(n, n) * cand;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(denom);
            if (!lu.isInvertible()) {
                regular = false;
                break;
            }
            growth = std::max(growth, lu.inverse().norm());
        }
        if (!regular) continue;
        if (growth < best_score) {
            best_score = growth;
            pi0 = cand;
            found = true;
        }
    }
    if (!found) {
        // damped-Newton fallback from the symmetric split
        pi0 = 0.5 * boundary.p0;
        if (!candidates.empty()) pi0 = candidates.front();
        if (!newton_refine(boundary, pi0))
            throw SolverError("solve_covariance: coupled Riccati boundary solve failed");
    }

    SteeringSolution sol;
    sol.times = flow.times;
    sol.riccati.resize(nodes);
    sol.riccati_dual.resize(nodes);
    sol.gains.times = flow.times;
    sol.gains.gain.resize(nodes);
    sol.gains.feedforward.resize(nodes);

    const Eigen::MatrixXd omega0 = pi0 - boundary.p0;  // -H_0 flows like Pi
    for (int j = 0; j < nodes; ++j) {
        const Eigen::MatrixXd m11 = flow.transition[j].topLeftCorner(n, n);
        const Eigen::MatrixXd m12 = flow.transition[j].topRightCorner(n, n);
        const Eigen::MatrixXd m21 = flow.transition[j].bottomLeftCorner(n, n);
        const Eigen::MatrixXd m22 = flow.transition[j].bottomRightCorner(n, n);
        Eigen::MatrixXd pi_j, omega_j;
        if (!lft(m11, m12, m21, m22, pi0, pi_j) || !lft(m11, m12, m21, m22, omega0, omega_j))
            throw SolverError("solve_covariance: Riccati flow singular at t = " +
                              std::to_string(flow.times(j)));
        sol.riccati[j] = 0.5 * (pi_j + pi_j.transpose());
        sol.riccati_dual[j] = -0.5 * (omega_j + omega_j.transpose());
        sol.gains.gain[j] = -prob.sys.B(flow.times(j)).transpose() * sol.riccati[j];
    }

    // mean problem and feedforward d = v* - K x*
    const MeanSolution mean_sol = [&] {
        MeanSolution ms;
        ms.times = flow.times;
        ms.mean.resize(nodes);
        ms.control.resize(nodes);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(boundary.m12);
        if (!lu.isInvertible())
            throw RankError("solve_covariance: terminal mean unreachable (singular boundary map)");
        const Eigen::VectorXd lambda0 =
            lu.solve(prob.muT - boundary.m11 * prob.mu0 - flow.particular.back().head(n));
        Eigen::VectorXd bnd(2 * n);
        bnd << prob.mu0, lambda0;
        for (int j = 0; j < nodes; ++j) {
            const Eigen::VectorXd state = flow.transition[j] * bnd + flow.particular[j];
            ms.mean[j] = state.head(n);
            ms.control[j] = -prob.sys.B(flow.times(j)).transpose() * state.tail(n);
        }
        return ms;
    }();
    sol.mean = mean_sol.mean;
    sol.open_loop = mean_sol.control;
    for (int j = 0; j < nodes; ++j)
        sol.gains.feedforward[j] = sol.open_loop[j] - sol.gains.gain[j] * sol.mean[j];

    const PropagatedMoments moments =
        closed_loop_propagate(prob.sys, sol.gains, prob.mu0, prob.K0, prob.substeps);
    sol.nominal_mean = moments.mean;
    sol.nominal_cov = moments.cov;
    return sol;
}

PropagatedMoments closed_loop_propagate(const LTVSystem& sys, const GainSchedule& gains,
                                        const Eigen::VectorXd& mu0, const Eigen::MatrixXd& K0,
                                        int substeps) {
    const int n = sys.state_dim;
    if (substeps < 1) throw std::invalid_argument("closed_loop_propagate: substeps must be >= 1");
    const int nodes = static_cast<int>(gains.times.size());
    PropagatedMoments out;
    out.times = gains.times;
    out.mean.resize(nodes);
    out.cov.resize(nodes);
    out.mean[0] = mu0;
    out.cov[0] = K0;

    // joint [z | Sigma] flow under the closed-loop system
    auto field = [&](double t, const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
        const auto [k_t, d_t] = gains.at(t);
        const Eigen::MatrixXd b_t = sys.B(t);
        const Eigen::MatrixXd a_cl = sys.A(t) + b_t * k_t;
        Eigen::MatrixXd ds(n, n + 1);
        const Eigen::VectorXd z = s.col(0);
        const Eigen::MatrixXd cov = s.rightCols(n);
        ds.col(0) = a_cl * z + sys.a(t) + b_t * d_t;
        ds.rightCols(n) = a_cl * cov + cov * a_cl.transpose() +
                          sys.epsilon * b_t * b_t.transpose();
        return ds;
    };

    Eigen::MatrixXd state(n, n + 1);
    state.col(0) = mu0;
    state.rightCols(n) = K0;
    for (int j = 1; j < nodes; ++j) {
        state = heun_integrate(field, state, gains.times(j - 1), gains.times(j), substeps);
        Eigen::MatrixXd cov = state.rightCols(n);
        cov = 0.5 * (cov + cov.transpose()).eval();
        state.rightCols(n) = cov;
        out.mean[j] = state.col(0);
        out.cov[j] = cov;
    }
    return out;
}

}  // namespace gmplan
