#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gmplan/errors.hpp"

namespace gmplan {

/// One-dimensional Gauss-Hermite rule in the probabilists' convention: the
/// sigma points are the roots of He_p and the rule integrates polynomials of
/// degree <= 2p-1 exactly against the standard normal density.
struct GHRule {
    int degree = 0;
    Eigen::VectorXd sigma_points;
    Eigen::VectorXd weights;
};

/// Build the degree-p rule. Roots come from the eigenvalues of the symmetric
/// tridiagonal Jacobi matrix (off-diagonals sqrt(k)); the weights are
/// p! / (p^2 He_{p-1}(x_i)^2).
GHRule gh_rule(int p);

/// Probabilists' Hermite polynomial He_n evaluated by the three-term
/// recurrence. Exposed for tests.
double hermite_he(int n, double x);

namespace detail {

/// Iterates the p^n tensor-product sigma points of an n-dimensional rule,
/// yielding the transformed point sqrt(P) xi + m and the product weight.
class GHPointIterator {
  public:
    GHPointIterator(const GHRule& rule, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov, std::int64_t budget = 10000000) {
        const int n = static_cast<int>(mean.size());
        if (cov.rows() != n || cov.cols() != n)
            throw std::invalid_argument("gh_expect: mean/cov dimension mismatch");
        std::int64_t total = 1;
        for (int i = 0; i < n; ++i) {
            total *= rule.degree;
            if (total > budget)
                throw CapacityError(
                    "gh_expect: p^n sigma points exceed the budget; evaluate at the factor "
                    "level instead");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw FactorizationError("gh_expect: covariance is not positive definite");
        sqrt_cov_ = llt.matrixL();
        mean_ = mean;
        rule_ = &rule;
        index_.assign(n, 0);
        total_ = total;
        count_ = 0;
    }

    bool next(Eigen::VectorXd& point, double& weight) {
        if (count_ == total_) return false;
        const int n = static_cast<int>(mean_.size());
        Eigen::VectorXd xi(n);
        weight = 1.0;
        for (int i = 0; i < n; ++i) {
            xi(i) = rule_->sigma_points(index_[i]);
            weight *= rule_->weights(index_[i]);
        }
        point = mean_ + sqrt_cov_ * xi;
        // odometer increment
        for (int i = 0; i < n; ++i) {
            if (++index_[i] < rule_->degree) break;
            index_[i] = 0;
        }
        ++count_;
        return true;
    }

  private:
    const GHRule* rule_ = nullptr;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd sqrt_cov_;
    std::vector<int> index_;
    std::int64_t total_ = 0;
    std::int64_t count_ = 0;
};

}  // namespace detail

/// Tensor-product Gauss-Hermite expectation E[phi(X)] for X ~ N(mean, cov).
/// phi may return a double, vector, or matrix; the result has the same shape.
/// Exact for polynomials of per-axis degree <= 2p-1.
template <typename Phi>
auto gh_expect(const GHRule& rule, Phi&& phi, const Eigen::VectorXd& mean,
               const Eigen::MatrixXd& cov) {
    using Result = std::decay_t<decltype(phi(std::declval<const Eigen::VectorXd&>()))>;
    detail::GHPointIterator it(rule, mean, cov);
    Eigen::VectorXd x;
    double w = 0.0;
    if constexpr (std::is_arithmetic_v<Result>) {
        double acc = 0.0;
        while (it.next(x, w)) acc += w * phi(x);
        return acc;
    } else {
        if (!it.next(x, w)) throw std::invalid_argument("gh_expect: empty rule");
        auto acc = (w * phi(x)).eval();
        while (it.next(x, w)) acc += w * phi(x);
        return acc;
    }
}

}  // namespace gmplan
