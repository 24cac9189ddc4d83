#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <utility>

#include "gmplan/errors.hpp"

namespace gmplan {

/// Time-varying linear stochastic system
///   dX = A(t) X dt + a(t) dt + B(t) (u dt + sqrt(epsilon) dW).
///
/// Coefficients are arbitrary finite functions of time over the planning
/// horizon. Systems built by constant_velocity_system() are tagged so that
/// transition matrices and controllability Grammians use their closed forms.
struct LTVSystem {
    int state_dim = 0;
    int control_dim = 0;
    std::function<Eigen::MatrixXd(double)> A;
    std::function<Eigen::VectorXd(double)> a;
    std::function<Eigen::MatrixXd(double)> B;
    double epsilon = 0.0;

    /// True for double-integrator systems with A = [0 I; 0 0], B = [0; I].
    bool is_constant_velocity = false;
};

/// Discretization of the horizon [t0, tN] into N+1 strictly increasing knots.
struct TimeGrid {
    double t0 = 0.0;
    double tN = 0.0;
    Eigen::VectorXd knots;
    int substeps = 10;  // integration steps per knot interval

    int num_states() const { return static_cast<int>(knots.size()); }
    int num_intervals() const { return num_states() - 1; }

    /// Uniform grid with n states over [t_start, t_end].
    static TimeGrid uniform(double t_start, double t_end, int n, int substeps = 10);

    void validate() const;
};

namespace detail {
template <typename State>
bool state_all_finite(const State& s) {
    if constexpr (std::is_arithmetic_v<State>) {
        return std::isfinite(s);
    } else {
        return s.allFinite();
    }
}
}  // namespace detail

/// One explicit Heun (improved Euler) step for y' = f(t, y):
///   y_next = y + h/2 (f(t, y) + f(t+h, y + h f(t, y))).
/// Second-order accurate. State may be a scalar or any Eigen vector/matrix.
template <typename Field, typename State>
State heun_step(Field&& f, const State& y, double t, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("heun_step: step size must be positive");
    const State k1 = f(t, y);
    if (!detail::state_all_finite(k1)) throw std::domain_error("heun_step: non-finite field value");
    const State predictor = y + h * k1;
    const State k2 = f(t + h, predictor);
    if (!detail::state_all_finite(k2)) throw std::domain_error("heun_step: non-finite field value");
    State out = y + 0.5 * h * (k1 + k2);
    if (!detail::state_all_finite(out)) throw std::domain_error("heun_step: non-finite state");
    return out;
}

/// Integrate y' = f(t, y) from t0 to t1 with `steps` Heun steps.
template <typename Field, typename State>
State heun_integrate(Field&& f, State y, double t0, double t1, int steps) {
    if (steps < 1) throw std::invalid_argument("heun_integrate: steps must be >= 1");
    const double h = (t1 - t0) / steps;
    if (h == 0.0) return y;
    for (int i = 0; i < steps; ++i) {
        y = heun_step(f, y, t0 + i * h, h);
    }
    return y;
}

/// State transition matrix Phi(t, s) of x' = A(t) x, i.e. the solution of
/// dPhi/dt = A(t) Phi with Phi(s, s) = I. Closed form for constant-velocity
/// systems, Heun integration with `substeps` steps otherwise.
Eigen::MatrixXd transition_matrix(const LTVSystem& sys, double s, double t, int substeps = 10);

/// Controllability Grammian over [ti, tj]:
///   Q = int_ti^tj Phi(tj, s) B(s) B(s)^T Phi(tj, s)^T ds.
/// Noise intensity epsilon is NOT folded in; callers scale where needed.
/// Computed as the solution of the Lyapunov ODE Q' = A Q + Q A^T + B B^T.
Eigen::MatrixXd grammian(const LTVSystem& sys, double ti, double tj, int substeps = 10);

/// Double-integrator ("constant velocity") system with `dof` position
/// coordinates: state [position; velocity], A = [0 I; 0 0], a = 0, B = [0; I].
LTVSystem constant_velocity_system(int dof);

/// Jacobians (A, B) of the planar quadrotor model with state
/// [p_x, p_z, phi, v_x, v_z, phi_dot] linearized at `nominal_state`.
/// B is the constant input matrix [0;0;0;0; 1/m 1/m; l/J -l/J].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearize_planar_quadrotor(
    const Eigen::VectorXd& nominal_state, double mass, double inertia, double arm,
    double gravity = 9.81);

/// Right-hand side of the nonlinear planar quadrotor dynamics (drift term
/// only, no input); used by the linearization and by tests.
Eigen::VectorXd planar_quadrotor_drift(const Eigen::VectorXd& state, double gravity = 9.81);

}  // namespace gmplan
