#pragma once

#include "cmest/core.hpp"

#include <cmath>
#include <optional>

namespace cmest {

/// Inner product <x, y>_S = x^T S y for a symmetric positive-definite S,
/// together with the factor S = L L^T. The map x -> L^T x is an isometry
/// from (R^d, <.,.>_S) onto (R^d, <.,.>), which is how every S-geometry
/// routine reduces to the Euclidean case.
///
/// Immutable after construction.
class SpdMetric {
public:
    static SpdMetric identity(Eigen::Index dim) { return SpdMetric(Matrix::Identity(dim, dim)); }

    explicit SpdMetric(const Matrix& s) : s_(s) {
        detail::require(s.rows() == s.cols(), "SpdMetric: matrix must be square");
        detail::require(s.rows() >= 1 && s.rows() <= kMaxDim, "SpdMetric: dimension must be in [1, 64]");
        detail::require(s.allFinite(), "SpdMetric: non-finite entry");
        const double scale = s.norm();
        detail::require(scale > 0.0, "SpdMetric: zero matrix");
        // ~100x double epsilon, relative to the Frobenius norm.
        detail::require((s - s.transpose()).norm() <= 1e-12 * scale, "SpdMetric: matrix is not symmetric");
        s_ = 0.5 * (s + s.transpose());

        Eigen::LLT<Matrix> llt(s_);
        if (llt.info() != Eigen::Success) throw InvalidArgument("SpdMetric: matrix is not positive definite");
        l_ = llt.matrixL();
        if ((s_ - l_ * l_.transpose()).norm() > 1e-10 * scale)
            throw InvalidArgument("SpdMetric: factorization residual too large");
        s_inv_ = llt.solve(Matrix::Identity(dim(), dim()));
        s_inv_ = 0.5 * (s_inv_ + s_inv_.transpose());
        if ((s_ * s_inv_ - Matrix::Identity(dim(), dim())).norm() > 1e-8)
            throw InvalidArgument("SpdMetric: matrix is too ill-conditioned to invert");
        is_identity_ = s_.isIdentity(0.0);
        is_diagonal_ = s_.isDiagonal(0.0);
    }

    Eigen::Index dim() const noexcept { return s_.rows(); }
    const Matrix& matrix() const noexcept { return s_; }
    const Matrix& factor() const noexcept { return l_; }
    const Matrix& inverse() const noexcept { return s_inv_; }
    bool is_identity() const noexcept { return is_identity_; }
    bool is_diagonal() const noexcept { return is_diagonal_; }

    /// Scalar sigma^2 when S = sigma^2 I.
    std::optional<double> isotropic_scale() const {
        const double s0 = s_(0, 0);
        if (s_.isApprox(s0 * Matrix::Identity(dim(), dim()), 0.0)) return s0;
        return std::nullopt;
    }

    double inner(const Vector& x, const Vector& y) const {
        detail::require_dim(x.size(), dim(), "SpdMetric::inner");
        detail::require_dim(y.size(), dim(), "SpdMetric::inner");
        if (is_identity_) return x.dot(y);
        return x.dot(s_ * y);
    }

    double norm(const Vector& x) const { return std::sqrt(std::max(0.0, inner(x, x))); }

    /// L^T x. ||to_isotropic(x)||_2 = ||x||_S.
    Vector to_isotropic(const Vector& x) const {
        detail::require_dim(x.size(), dim(), "SpdMetric::to_isotropic");
        if (is_identity_) return x;
        return l_.transpose() * x;
    }

    /// Inverse of to_isotropic: solves L^T x = y.
    Vector from_isotropic(const Vector& y) const {
        detail::require_dim(y.size(), dim(), "SpdMetric::from_isotropic");
        if (is_identity_) return y;
        return l_.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    /// Maps a row of constraint normals a (a^T x <= b) to isotropic
    /// coordinates: a^T x = (L^{-1} a)^T (L^T x).
    Matrix normals_to_isotropic(const Matrix& a) const {
        detail::require_dim(a.cols(), dim(), "SpdMetric::normals_to_isotropic");
        if (is_identity_) return a;
        return l_.triangularView<Eigen::Lower>().solve(a.transpose()).transpose();
    }

    /// S^{-1} v.
    Vector solve(const Vector& v) const {
        detail::require_dim(v.size(), dim(), "SpdMetric::solve");
        if (is_identity_) return v;
        return s_inv_ * v;
    }

private:
    Matrix s_;
    Matrix l_;
    Matrix s_inv_;
    bool is_identity_ = false;
    bool is_diagonal_ = false;
};

}  // namespace cmest
