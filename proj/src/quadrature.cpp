#include "gmplan/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace gmplan {

double hermite_he(int n, double x) {
    if (n == 0) return 1.0;
    double prev = 1.0;
    double cur = x;
    for (int k = 1; k < n; ++k) {
        const double next = x * cur - k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

GHRule gh_rule(int p) {
    if (p < 1 || p > 20) throw std::invalid_argument("gh_rule: degree must be in [1, 20]");

    GHRule rule;
    rule.degree = p;
    if (p == 1) {
        rule.sigma_points = Eigen::VectorXd::Zero(1);
        rule.weights = Eigen::VectorXd::Ones(1);
        return rule;
    }

    // Roots of He_p are the eigenvalues of the Jacobi matrix with zeros on
    // the diagonal and sqrt(k) on the off-diagonals.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(p, p);
    for (int k = 1; k < p; ++k) {
        const double off = std::sqrt(static_cast<double>(k));
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    if (es.info() != Eigen::Success)
        throw FactorizationError("gh_rule: Jacobi eigendecomposition failed");
    rule.sigma_points = es.eigenvalues();

    double factorial = 1.0;
    for (int k = 2; k <= p; ++k) factorial *= k;

    rule.weights.resize(p);
    for (int i = 0; i < p; ++i) {
        const double h = hermite_he(p - 1, rule.sigma_points(i));
        rule.weights(i) = factorial / (static_cast<double>(p) * p * h * h);
    }
    // Enforce the exact symmetry the eigen-solver delivers only approximately.
    for (int i = 0; i < p / 2; ++i) {
        const int j = p - 1 - i;
        const double mag = 0.5 * (std::abs(rule.sigma_points(i)) + rule.sigma_points(j));
        rule.sigma_points(i) = -mag;
        rule.sigma_points(j) = mag;
        const double w = 0.5 * (rule.weights(i) + rule.weights(j));
        rule.weights(i) = w;
        rule.weights(j) = w;
    }
    if (p % 2 == 1) rule.sigma_points(p / 2) = 0.0;
    return rule;
}

}  // namespace gmplan
