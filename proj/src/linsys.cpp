#include "gmplan/linsys.hpp"

#include <string>

namespace gmplan {

TimeGrid TimeGrid::uniform(double t_start, double t_end, int n, int substeps) {
    if (n < 2) throw std::invalid_argument("TimeGrid::uniform: need at least 2 knots");
    TimeGrid grid;
    grid.t0 = t_start;
    grid.tN = t_end;
    grid.knots = Eigen::VectorXd::LinSpaced(n, t_start, t_end);
    grid.substeps = substeps;
    grid.validate();
    return grid;
}

void TimeGrid::validate() const {
    if (knots.size() < 2) throw std::invalid_argument("TimeGrid: need at least 2 knots");
    if (knots(0) != t0 || knots(knots.size() - 1) != tN)
        throw std::invalid_argument("TimeGrid: knots must span [t0, tN]");
    for (int i = 0; i + 1 < knots.size(); ++i)
        if (!(knots(i) < knots(i + 1)))
            throw std::invalid_argument("TimeGrid: knots must be strictly increasing");
    if (substeps < 1) throw std::invalid_argument("TimeGrid: substeps must be >= 1");
}

Eigen::MatrixXd transition_matrix(const LTVSystem& sys, double s, double t, int substeps) {
    if (t < s) throw std::invalid_argument("transition_matrix: t must be >= s");
    const int n = sys.state_dim;
    if (t == s) return Eigen::MatrixXd::Identity(n, n);

    if (sys.is_constant_velocity) {
        const int dof = n / 2;
        Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
        phi.topRightCorner(dof, dof) = (t - s) * Eigen::MatrixXd::Identity(dof, dof);
        return phi;
    }

    auto field = [&sys](double tau, const Eigen::MatrixXd& phi) -> Eigen::MatrixXd {
        Eigen::MatrixXd a_tau = sys.A(tau);
        if (!a_tau.allFinite()) throw std::domain_error("transition_matrix: non-finite A(t)");
        return a_tau * phi;
    };
    return heun_integrate(field, Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)), s, t,
                          substeps);
}

Eigen::MatrixXd grammian(const LTVSystem& sys, double ti, double tj, int substeps) {
    if (!(tj > ti))
        throw std::invalid_argument("grammian: interval must have tj > ti (got [" +
                                    std::to_string(ti) + ", " + std::to_string(tj) + "])");
    const int n = sys.state_dim;
    const double dt = tj - ti;

    if (sys.is_constant_velocity) {
        const int dof = n / 2;
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dof, dof);
        Eigen::MatrixXd q(n, n);
        q.topLeftCorner(dof, dof) = dt * dt * dt / 3.0 * eye;
        q.topRightCorner(dof, dof) = dt * dt / 2.0 * eye;
        q.bottomLeftCorner(dof, dof) = dt * dt / 2.0 * eye;
        q.bottomRightCorner(dof, dof) = dt * eye;
        return q;
    }

    // Q(t) = int_ti^t Phi(t,s) B B^T Phi(t,s)^T ds satisfies the Lyapunov ODE
    // Q' = A Q + Q A^T + B B^T with Q(ti) = 0.
    auto field = [&sys](double tau, const Eigen::MatrixXd& q) -> Eigen::MatrixXd {
        Eigen::MatrixXd a_tau = sys.A(tau);
        Eigen::MatrixXd b_tau = sys.B(tau);
        if (!a_tau.allFinite() || !b_tau.allFinite())
            throw std::domain_error("grammian: non-finite system matrices");
        return a_tau * q + q * a_tau.transpose() + b_tau * b_tau.transpose();
    };
    Eigen::MatrixXd q = heun_integrate(field, Eigen::MatrixXd(Eigen::MatrixXd::Zero(n, n)),
                                       ti, tj, substeps);
    return 0.5 * (q + q.transpose());
}

LTVSystem constant_velocity_system(int dof) {
    if (dof < 1) throw std::invalid_argument("constant_velocity_system: dof must be >= 1");
    const int n = 2 * dof;
    LTVSystem sys;
    sys.state_dim = n;
    sys.control_dim = dof;
    sys.epsilon = 0.0;
    sys.is_constant_velocity = true;

    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(n, n);
    a_mat.topRightCorner(dof, dof) = Eigen::MatrixXd::Identity(dof, dof);
    Eigen::MatrixXd b_mat = Eigen::MatrixXd::Zero(n, dof);
    b_mat.bottomRows(dof) = Eigen::MatrixXd::Identity(dof, dof);

    sys.A = [a_mat](double) { return a_mat; };
    sys.a = [n](double) { return Eigen::VectorXd::Zero(n); };
    sys.B = [b_mat](double) { return b_mat; };
    return sys;
}

Eigen::VectorXd planar_quadrotor_drift(const Eigen::VectorXd& state, double gravity) {
    if (state.size() != 6)
        throw std::invalid_argument("planar_quadrotor_drift: state must be 6-dimensional");
    const double phi = state(2);
    const double vx = state(3);
    const double vz = state(4);
    const double phidot = state(5);
    Eigen::VectorXd f(6);
    f(0) = vx * std::cos(phi) - vz * std::sin(phi);
    f(1) = vx * std::sin(phi) + vz * std::cos(phi);
    f(2) = phidot;
    f(3) = vz * phidot - gravity * std::sin(phi);
    f(4) = -vx * phidot - gravity * std::cos(phi);
    f(5) = 0.0;
    return f;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearize_planar_quadrotor(
    const Eigen::VectorXd& nominal_state, double mass, double inertia, double arm,
    double gravity) {
    if (nominal_state.size() != 6)
        throw std::invalid_argument("linearize_planar_quadrotor: state must be 6-dimensional");
    if (!(mass > 0.0)) throw std::invalid_argument("linearize_planar_quadrotor: mass must be > 0");
    if (!(inertia > 0.0))
        throw std::invalid_argument("linearize_planar_quadrotor: inertia must be > 0");

    const double phi = nominal_state(2);
    const double vx = nominal_state(3);
    const double vz = nominal_state(4);
    const double phidot = nominal_state(5);
    const double c = std::cos(phi);
    const double s = std::sin(phi);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 6);
    A(0, 2) = -vx * s - vz * c;
    A(0, 3) = c;
    A(0, 4) = -s;
    A(1, 2) = vx * c - vz * s;
    A(1, 3) = s;
    A(1, 4) = c;
    A(2, 5) = 1.0;
    A(3, 2) = -gravity * c;
    A(3, 4) = phidot;
    A(3, 5) = vz;
    A(4, 2) = gravity * s;
    A(4, 3) = -phidot;
    A(4, 5) = -vx;

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 2);
    B(4, 0) = 1.0 / mass;
    B(4, 1) = 1.0 / mass;
    B(5, 0) = arm / inertia;
    B(5, 1) = -arm / inertia;
    return {A, B};
}

}  // namespace gmplan
