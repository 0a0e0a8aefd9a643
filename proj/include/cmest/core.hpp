#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

// Largest dimension handled by the dense routines.
inline constexpr Eigen::Index kMaxDim = 64;

/// Base for every error raised by the library. The CLI maps subclasses to
/// exit codes: invalid input -> 1, numeric trouble -> 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    NumericFailure(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class InfeasibleSet : public Error {
public:
    using Error::Error;
};

class UnsupportedCase : public Error {
public:
    using Error::Error;
};

class ResourceLimit : public Error {
public:
    using Error::Error;
};

class DegenerateHessian : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw InvalidArgument(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                              ", expected " + std::to_string(want) + ")");
}

}  // namespace detail

/// Sample covariance (divisor n-1) of the columns of `samples`.
inline Matrix sample_covariance(const Matrix& samples) {
    const Eigen::Index n = samples.cols();
    detail::require(n >= 2, "sample_covariance: need at least two samples");
    const Vector mean = samples.rowwise().mean();
    const Matrix centered = samples.colwise() - mean;
    Matrix cov = centered * centered.transpose() / static_cast<double>(n - 1);
    return 0.5 * (cov + cov.transpose());
}

}  // namespace cmest
