#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gmplan/errors.hpp"

namespace gmplan {

/// Symmetric block-tridiagonal matrix with uniform block size. Stores the
/// diagonal blocks and the subdiagonal blocks (block (i+1, i)); the upper
/// blocks are implied by symmetry.
class BlockTridiag {
  public:
    BlockTridiag() = default;
    BlockTridiag(int num_blocks, int block_size);

    int num_blocks() const { return static_cast<int>(diag_.size()); }
    int block_size() const { return block_size_; }
    int dim() const { return num_blocks() * block_size_; }

    Eigen::MatrixXd& diag(int i) { return diag_[i]; }
    const Eigen::MatrixXd& diag(int i) const { return diag_[i]; }
    /// Block (i+1, i).
    Eigen::MatrixXd& lower(int i) { return lower_[i]; }
    const Eigen::MatrixXd& lower(int i) const { return lower_[i]; }

    void set_zero();
    void symmetrize();

    /// this += scale * other (same structure required).
    void add_scaled(const BlockTridiag& other, double scale);

    Eigen::MatrixXd dense() const;
    static BlockTridiag from_dense(const Eigen::MatrixXd& m, int num_blocks, int block_size);

    /// max |M - M^T| over the diagonal blocks.
    double symmetry_error() const;

  private:
    int block_size_ = 0;
    std::vector<Eigen::MatrixXd> diag_;
    std::vector<Eigen::MatrixXd> lower_;
};

/// Block Cholesky factorization P = L L^T of a symmetric positive definite
/// block-tridiagonal matrix; L is block lower bidiagonal. Provides solves,
/// log-determinant, sampling, and the selected inverse (the diagonal and
/// first off-diagonal blocks of P^{-1}) without forming dense inverses.
class BlockTridiagLLT {
  public:
    /// Factorizes. Returns false (and leaves the object unusable) if the
    /// matrix is not numerically positive definite.
    bool compute(const BlockTridiag& m);

    bool ok() const { return ok_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    /// x = L^{-T} z; maps white noise to samples with covariance P^{-1}.
    Eigen::VectorXd solve_lt(const Eigen::VectorXd& z) const;

    double log_det() const;

    struct Marginals {
        std::vector<Eigen::MatrixXd> diag;   // blocks (i, i) of P^{-1}
        std::vector<Eigen::MatrixXd> upper;  // blocks (i, i+1) of P^{-1}
    };
    /// Selected inverse of the block-tridiagonal matrix.
    Marginals marginals() const;

  private:
    bool ok_ = false;
    int block_size_ = 0;
    std::vector<Eigen::MatrixXd> chol_diag_;   // lower triangular D_i
    std::vector<Eigen::MatrixXd> chol_lower_;  // E_i = block (i+1, i) of L
};

}  // namespace gmplan
