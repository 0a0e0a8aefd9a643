#pragma once

// Limit law of sqrt(n)(theta_hat - theta*):
//   k D+pi_{Theta - theta*}^S(-S^{-1} grad Phi(theta*); Z),  Z ~ N(0, S^{-1} B S^{-1}),
// plus finite-difference probes of the support function of dPhi(theta).

#include "cmest/core.hpp"
#include "cmest/geometry.hpp"
#include "cmest/losses.hpp"
#include "cmest/metric.hpp"
#include "cmest/random.hpp"
#include "cmest/ustat.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace cmest {

using ScalarField = std::function<double(const Vector&)>;

struct LimitLawSpec {
    Vector theta_star;
    Vector grad_phi;
    SpdMetric s = SpdMetric::identity(1);
    Matrix b;
    ConvexSet set = FullSpace{1};
    int k = 1;
    bool b_repaired = false;  // set by validate() when B needed eigenvalue clipping

    /// Checks dimensions and PSD-ness of B (clipping small negative
    /// eigenvalues), and that -grad_phi is in the normal cone at theta_star.
    void validate(double normal_tol = 1e-6) {
        const Eigen::Index d = theta_star.size();
        detail::require(d >= 1, "limit law: empty theta_star");
        detail::require_dim(grad_phi.size(), d, "limit law: grad_phi");
        detail::require_dim(s.dim(), d, "limit law: S");
        detail::require(b.rows() == d && b.cols() == d, "limit law: B must be d x d");
        detail::require_dim(dim(set), d, "limit law: set");
        detail::require(k >= 1, "limit law: k must be >= 1");
        detail::require((b - b.transpose()).norm() <= 1e-8 * (1.0 + b.norm()), "limit law: B must be symmetric");
        b = 0.5 * (b + b.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
        const double lo = eig.eigenvalues().minCoeff();
        if (lo < 0.0) {
            detail::require(-lo <= 1e-3 * (1.0 + b.trace()), "limit law: B is not positive semidefinite");
            b_repaired = -lo > 1e-8 * std::max(b.trace(), 1e-300);
            b = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
        }
        if (!contains(set, theta_star, 1e-7)) throw InvalidArgument("limit law: theta_star is not in the set");
        if (!in_normal_cone(set, theta_star, -s.solve(grad_phi), s, normal_tol))
            throw InvalidArgument("limit law: -grad_phi is not in the normal cone at theta_star");
    }

    /// Covariance of Z.
    Matrix z_cov() const {
        const Matrix si = s.inverse();
        const Matrix c = si * b * si;
        return 0.5 * (c + c.transpose());
    }
};

/// Symmetrized central second differences. Throws DegenerateHessian when the
/// result is not positive definite.
inline SpdMetric estimate_hessian(const ScalarField& risk, const Vector& theta, double h = 1e-3) {
    detail::require(h > 0.0, "estimate_hessian: h must be positive");
    const Eigen::Index d = theta.size();
    Matrix hess(d, d);
    const double f0 = risk(theta);
    for (Eigen::Index i = 0; i < d; ++i) {
        const Vector ei = h * Vector::Unit(d, i);
        hess(i, i) = (risk(theta + ei) - 2.0 * f0 + risk(theta - ei)) / (h * h);
        for (Eigen::Index j = 0; j < i; ++j) {
            const Vector ej = h * Vector::Unit(d, j);
            const double v =
                (risk(theta + ei + ej) - risk(theta + ei - ej) - risk(theta - ei + ej) + risk(theta - ei - ej)) /
                (4.0 * h * h);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hess);
    if (!(eig.eigenvalues().minCoeff() > 1e-10 * (1.0 + eig.eigenvalues().cwiseAbs().maxCoeff())))
        throw DegenerateHessian("estimate_hessian: the Hessian estimate is not positive definite");
    try {
        return SpdMetric(hess);
    } catch (const InvalidArgument&) {
        throw DegenerateHessian("estimate_hessian: the Hessian estimate is too ill-conditioned");
    }
}

/// var g(X, theta*) from the sample covariance of per-datum subgradients.
inline Matrix estimate_b(const LossModel& loss, const Matrix& data, const Vector& theta) {
    detail::require(data.cols() >= 1000, "estimate_B: need at least 1000 data points");
    Matrix g(theta.size(), data.cols());
    for (Eigen::Index i = 0; i < data.cols(); ++i) g.col(i) = subgrad(loss, data.col(i), theta);
    return sample_covariance(g);
}

/// var E[g(X_1..X_k, theta*) | X_1] via sigma_hat.
inline Matrix estimate_b(const UKernel& kernel, const Matrix& data, const Vector& theta, std::uint64_t seed = 0) {
    detail::require(data.cols() >= 1000, "estimate_B: need at least 1000 data points");
    return sigma_hat(kernel, data, theta, seed);
}

struct LimitSamples {
    Matrix draws;  // d x n_draws
    bool fd_fallback = false;
};

inline LimitSamples sample_limit(const LimitLawSpec& spec, Eigen::Index n_draws, std::uint64_t seed) {
    detail::require(n_draws >= 1, "sample_limit: n_draws must be >= 1");
    const Eigen::Index d = spec.theta_star.size();
    const Matrix cov = spec.z_cov();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Matrix factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const ConvexSet shifted = translate(spec.set, spec.theta_star);
    const Vector x = -spec.s.solve(spec.grad_phi);

    LimitSamples out;
    out.draws.resize(d, n_draws);
    for (Eigen::Index i = 0; i < n_draws; ++i) {
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        const Vector z = factor * rng.normal_vector(d);
        Vector v;
        try {
            v = dproj(shifted, x, z, spec.s);
        } catch (const UnsupportedCase&) {
            v = dproj_fd(shifted, x, z, spec.s, 1e-6);
            out.fd_fallback = true;
        }
        out.draws.col(i) = static_cast<double>(spec.k) * v;
    }
    return out;
}

/// h_{dPhi(theta)}(t) = d+Phi(theta; t), as the Richardson combination
/// 2 D(h/2) - D(h) of forward differences D.
inline double support_fn_subdiff(const ScalarField& risk, const Vector& theta, const Vector& t, double h = 1e-3) {
    detail::require(h > 0.0, "support_fn_subdiff: h must be positive");
    detail::require_dim(t.size(), theta.size(), "support_fn_subdiff: t");
    const double f0 = risk(theta);
    const double d1 = (risk(theta + h * t) - f0) / h;
    const double d2 = (risk(theta + 0.5 * h * t) - f0) / (0.5 * h);
    return 2.0 * d2 - d1;
}

struct RecoveryCondition {
    bool interior_condition = false;
    bool cone_condition = false;
    double interior_min = 0.0;
    double cone_min = 0.0;
    double margin = 0.0;
};

namespace detail {

// Unit directions: the circle grid for d = 2, +-e_i plus seeded random
// directions otherwise.
inline std::vector<Vector> direction_grid(Eigen::Index d, int grid_size) {
    std::vector<Vector> out;
    if (d == 1) return {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    if (d == 2) {
        for (int i = 0; i < grid_size; ++i) {
            const double a = 2.0 * std::numbers::pi * i / grid_size;
            out.push_back((Vector(2) << std::cos(a), std::sin(a)).finished());
        }
        return out;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        out.push_back(Vector::Unit(d, i));
        out.push_back(-Vector::Unit(d, i));
    }
    CounterRng rng(kProbeSeed);
    while (static_cast<int>(out.size()) < grid_size) out.push_back(rng.normal_vector(d).normalized());
    return out;
}

}  // namespace detail

/// Tests 0 in int dPhi(theta*) (min support function over all directions)
/// and the cone condition (min over unit directions of the support cone),
/// each against the margin 2h.
inline RecoveryCondition check_exact_recovery_condition(const ScalarField& risk, const Vector& theta_star,
                                                        const ConvexSet& set, int grid_size = 64, double h = 1e-3) {
    detail::require(grid_size >= 16, "check_exact_recovery_condition: grid_size must be >= 16");
    const Eigen::Index d = theta_star.size();
    RecoveryCondition out;
    out.margin = 2.0 * h;
    out.interior_min = std::numeric_limits<double>::infinity();
    out.cone_min = std::numeric_limits<double>::infinity();
    const SpdMetric id = SpdMetric::identity(d);
    SupportConeRep cone = FullSpace{d};
    if (!std::holds_alternative<FullSpace>(set)) cone = support_cone(set, theta_star);
    for (const Vector& t : detail::direction_grid(d, grid_size)) {
        const double v = support_fn_subdiff(risk, theta_star, t, h);
        out.interior_min = std::min(out.interior_min, v);
        Vector c = project_cone(cone, t, id);
        const double len = c.norm();
        if (len <= 1e-12) continue;
        c /= len;
        out.cone_min = std::min(out.cone_min, support_fn_subdiff(risk, theta_star, c, h));
    }
    if (!std::isfinite(out.cone_min)) out.cone_min = 0.0;
    out.interior_condition = out.interior_min > out.margin;
    out.cone_condition = out.cone_min > out.margin;
    return out;
}

inline nlohmann::json limit_law_to_json(const LimitLawSpec& spec) {
    return {{"theta_star", detail::to_json_array(spec.theta_star)},
            {"grad_phi", detail::to_json_array(spec.grad_phi)},
            {"s", detail::to_json_array(spec.s.matrix())},
            {"b", detail::to_json_array(spec.b)},
            {"set", set_to_json(spec.set)},
            {"k", spec.k},
            {"b_repaired", spec.b_repaired}};
}

}  // namespace cmest
