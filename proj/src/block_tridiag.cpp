#include "gmplan/block_tridiag.hpp"

#include <cmath>

namespace gmplan {

BlockTridiag::BlockTridiag(int num_blocks, int block_size) : block_size_(block_size) {
    if (num_blocks < 1 || block_size < 1)
        throw std::invalid_argument("BlockTridiag: invalid dimensions");
    diag_.assign(num_blocks, Eigen::MatrixXd::Zero(block_size, block_size));
    lower_.assign(num_blocks - 1, Eigen::MatrixXd::Zero(block_size, block_size));
}

void BlockTridiag::set_zero() {
    for (auto& d : diag_) d.setZero();
    for (auto& l : lower_) l.setZero();
}

void BlockTridiag::symmetrize() {
    for (auto& d : diag_) d = 0.5 * (d + d.transpose()).eval();
}

void BlockTridiag::add_scaled(const BlockTridiag& other, double scale) {
    if (other.num_blocks() != num_blocks() || other.block_size() != block_size())
        throw std::invalid_argument("BlockTridiag::add_scaled: structure mismatch");
    for (int i = 0; i < num_blocks(); ++i) diag_[i] += scale * other.diag_[i];
    for (int i = 0; i + 1 < num_blocks(); ++i) lower_[i] += scale * other.lower_[i];
}

Eigen::MatrixXd BlockTridiag::dense() const {
    const int bs = block_size_;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < num_blocks(); ++i) m.block(i * bs, i * bs, bs, bs) = diag_[i];
    for (int i = 0; i + 1 < num_blocks(); ++i) {
        m.block((i + 1) * bs, i * bs, bs, bs) = lower_[i];
        m.block(i * bs, (i + 1) * bs, bs, bs) = lower_[i].transpose();
    }
    return m;
}

BlockTridiag BlockTridiag::from_dense(const Eigen::MatrixXd& m, int num_blocks,
                                      int block_size) {
    if (m.rows() != num_blocks * block_size || m.cols() != m.rows())
        throw std::invalid_argument("BlockTridiag::from_dense: dimension mismatch");
    BlockTridiag out(num_blocks, block_size);
    for (int i = 0; i < num_blocks; ++i)
        out.diag(i) = m.block(i * block_size, i * block_size, block_size, block_size);
    for (int i = 0; i + 1 < num_blocks; ++i)
        out.lower(i) = m.block((i + 1) * block_size, i * block_size, block_size, block_size);
    return out;
}

double BlockTridiag::symmetry_error() const {
    double err = 0.0;
    for (const auto& d : diag_)
        err = std::max(err, (d - d.transpose()).cwiseAbs().maxCoeff());
    return err;
}

bool BlockTridiagLLT::compute(const BlockTridiag& m) {
    ok_ = false;
    block_size_ = m.block_size();
    const int nb = m.num_blocks();
    chol_diag_.assign(nb, Eigen::MatrixXd());
    chol_lower_.assign(nb > 0 ? nb - 1 : 0, Eigen::MatrixXd());

    Eigen::MatrixXd schur = m.diag(0);
    for (int i = 0; i < nb; ++i) {
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (schur + schur.transpose()));
        if (llt.info() != Eigen::Success) return false;
        chol_diag_[i] = llt.matrixL();
        if (i + 1 < nb) {
            // E_i = P_{i+1,i} D_i^{-T}
            chol_lower_[i] = chol_diag_[i]
                                 .triangularView<Eigen::Lower>()
                                 .solve(m.lower(i).transpose())
                                 .transpose();
            schur = m.diag(i + 1) - chol_lower_[i] * chol_lower_[i].transpose();
        }
    }
    ok_ = true;
    return true;
}

Eigen::VectorXd BlockTridiagLLT::solve(const Eigen::VectorXd& rhs) const {
    if (!ok_) throw FactorizationError("BlockTridiagLLT::solve: factorization not available");
    const int bs = block_size_;
    const int nb = static_cast<int>(chol_diag_.size());
    if (rhs.size() != nb * bs)
        throw std::invalid_argument("BlockTridiagLLT::solve: dimension mismatch");

    // forward: L y = rhs
    Eigen::VectorXd y(rhs.size());
    for (int i = 0; i < nb; ++i) {
        Eigen::VectorXd b = rhs.segment(i * bs, bs);
        if (i > 0) b -= chol_lower_[i - 1] * y.segment((i - 1) * bs, bs);
        y.segment(i * bs, bs) = chol_diag_[i].triangularView<Eigen::Lower>().solve(b);
    }
    // backward: L^T x = y
    Eigen::VectorXd x(rhs.size());
    for (int i = nb - 1; i >= 0; --i) {
        Eigen::VectorXd b = y.segment(i * bs, bs);
        if (i + 1 < nb) b -= chol_lower_[i].transpose() * x.segment((i + 1) * bs, bs);
        x.segment(i * bs, bs) =
            chol_diag_[i].transpose().triangularView<Eigen::Upper>().solve(b);
    }
    return x;
}

Eigen::VectorXd BlockTridiagLLT::solve_lt(const Eigen::VectorXd& z) const {
    if (!ok_) throw FactorizationError("BlockTridiagLLT::solve_lt: factorization not available");
    const int bs = block_size_;
    const int nb = static_cast<int>(chol_diag_.size());
    if (z.size() != nb * bs)
        throw std::invalid_argument("BlockTridiagLLT::solve_lt: dimension mismatch");
    Eigen::VectorXd x(z.size());
    for (int i = nb - 1; i >= 0; --i) {
        Eigen::VectorXd b = z.segment(i * bs, bs);
        if (i + 1 < nb) b -= chol_lower_[i].transpose() * x.segment((i + 1) * bs, bs);
        x.segment(i * bs, bs) =
            chol_diag_[i].transpose().triangularView<Eigen::Upper>().solve(b);
    }
    return x;
}

double BlockTridiagLLT::log_det() const {
    if (!ok_) throw FactorizationError("BlockTridiagLLT::log_det: factorization not available");
    double ld = 0.0;
    for (const auto& d : chol_diag_) ld += d.diagonal().array().log().sum();
    return 2.0 * ld;
}

BlockTridiagLLT::Marginals BlockTridiagLLT::marginals() const {
    if (!ok_)
        throw FactorizationError("BlockTridiagLLT::marginals: factorization not available");
    const int nb = static_cast<int>(chol_diag_.size());
    const int bs = block_size_;
    Marginals out;
    out.diag.assign(nb, Eigen::MatrixXd());
    out.upper.assign(nb > 0 ? nb - 1 : 0, Eigen::MatrixXd());

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(bs, bs);
    // Backward recursion for the selected inverse:
    //   S_NN     = D_N^{-T} D_N^{-1}
    //   S_{i+1,i} = -S_{i+1,i+1} W_i,      W_i = E_i D_i^{-1}
    //   S_ii     = D_i^{-T} D_i^{-1} + W_i^T S_{i+1,i+1} W_i
    for (int i = nb - 1; i >= 0; --i) {
        Eigen::MatrixXd dinv = chol_diag_[i].triangularView<Eigen::Lower>().solve(eye);
        Eigen::MatrixXd base = dinv.transpose() * dinv;
        if (i == nb - 1) {
            out.diag[i] = base;
        } else {
            Eigen::MatrixXd w = chol_lower_[i] * dinv;
            out.upper[i] = (-out.diag[i + 1] * w).transpose();  // block (i, i+1)
            out.diag[i] = base + w.transpose() * out.diag[i + 1] * w;
        }
        out.diag[i] = 0.5 * (out.diag[i] + out.diag[i].transpose()).eval();
    }
    return out;
}

}  // namespace gmplan
