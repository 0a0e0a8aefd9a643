#pragma once

// Data-generating laws for the experiments, and population risks
// Phi(theta) = E phi(X, theta) for them: closed forms where available,
// otherwise an average over a fixed Monte Carlo pool.

#include "cmest/core.hpp"
#include "cmest/geometry.hpp"
#include "cmest/losses.hpp"
#include "cmest/random.hpp"
#include "cmest/ustat.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cmest {

struct GaussianLaw {
    Vector mean;
    Matrix cov;
};

/// Finite discrete law sum_i w_i delta_{p_i}; points are columns.
struct AtomLaw {
    Matrix points;
    Vector weights;
};

/// x ~ N(0, x_cov), y = theta0^T x + sigma eps; datum (x, y).
struct RegressionLaw {
    Vector theta0;
    double sigma = 1.0;
    Matrix x_cov;
};

/// Independent uniform coordinates on [lo_i, hi_i].
struct UniformLaw {
    Vector lo;
    Vector hi;
};

using Distribution = std::variant<GaussianLaw, AtomLaw, RegressionLaw, UniformLaw>;

namespace detail {

// Symmetric square root factor F with F F^T = cov (cov PSD).
inline Matrix psd_factor(const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
    const Vector ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

inline void validate(const Distribution& dist) {
    std::visit(overloaded{[](const GaussianLaw& g) {
                              require(g.mean.size() >= 1, "gaussian: empty mean");
                              require(g.cov.rows() == g.mean.size() && g.cov.cols() == g.mean.size(),
                                      "gaussian: cov must be d x d");
                              require((g.cov - g.cov.transpose()).norm() <= 1e-12 * (1.0 + g.cov.norm()),
                                      "gaussian: cov must be symmetric");
                              Eigen::SelfAdjointEigenSolver<Matrix> eig(g.cov);
                              require(eig.eigenvalues().minCoeff() >= -1e-12 * (1.0 + g.cov.norm()),
                                      "gaussian: cov must be positive semidefinite");
                          },
                          [](const AtomLaw& a) {
                              require(a.points.cols() >= 1 && a.points.cols() == a.weights.size(),
                                      "atoms: one weight per point");
                              require((a.weights.array() >= 0.0).all(), "atoms: weights must be >= 0");
                              require(std::abs(a.weights.sum() - 1.0) <= 1e-12, "atoms: weights must sum to 1");
                          },
                          [](const RegressionLaw& r) {
                              require(r.theta0.size() >= 1, "regression: empty theta0");
                              require(r.sigma >= 0.0, "regression: sigma must be >= 0");
                              require(r.x_cov.rows() == r.theta0.size() && r.x_cov.cols() == r.theta0.size(),
                                      "regression: x_cov must be d x d");
                          },
                          [](const UniformLaw& u) {
                              require(u.lo.size() >= 1 && u.lo.size() == u.hi.size(), "uniform: bad bounds");
                              require((u.lo.array() <= u.hi.array()).all(), "uniform: lo must be <= hi");
                          }},
               dist);
}

}  // namespace detail

/// Length of one datum.
inline Eigen::Index datum_dim(const Distribution& dist) {
    return std::visit(overloaded{[](const GaussianLaw& g) { return g.mean.size(); },
                                 [](const AtomLaw& a) { return a.points.rows(); },
                                 [](const RegressionLaw& r) { return r.theta0.size() + 1; },
                                 [](const UniformLaw& u) { return u.lo.size(); }},
                      dist);
}

inline Vector mean_of(const Distribution& dist) {
    return std::visit(overloaded{[](const GaussianLaw& g) -> Vector { return g.mean; },
                                 [](const AtomLaw& a) -> Vector { return a.points * a.weights; },
                                 [](const RegressionLaw& r) -> Vector { return Vector::Zero(r.theta0.size() + 1); },
                                 [](const UniformLaw& u) -> Vector { return 0.5 * (u.lo + u.hi); }},
                      dist);
}

inline Matrix cov_of(const Distribution& dist) {
    return std::visit(overloaded{[](const GaussianLaw& g) -> Matrix { return g.cov; },
                                 [](const AtomLaw& a) -> Matrix {
                                     const Vector mu = a.points * a.weights;
                                     const Matrix c = a.points.colwise() - mu;
                                     return c * a.weights.asDiagonal() * c.transpose();
                                 },
                                 [](const RegressionLaw& r) -> Matrix {
                                     const Eigen::Index d = r.theta0.size();
                                     Matrix c(d + 1, d + 1);
                                     c.topLeftCorner(d, d) = r.x_cov;
                                     c.block(0, d, d, 1) = r.x_cov * r.theta0;
                                     c.block(d, 0, 1, d) = (r.x_cov * r.theta0).transpose();
                                     c(d, d) = r.theta0.dot(r.x_cov * r.theta0) + r.sigma * r.sigma;
                                     return c;
                                 },
                                 [](const UniformLaw& u) -> Matrix {
                                     const Vector w = u.hi - u.lo;
                                     return Matrix((w.array().square() / 12.0).matrix().asDiagonal());
                                 }},
                      dist);
}

/// Point symmetry: X - c and c - X have the same law.
inline std::optional<Vector> center_of_symmetry(const Distribution& dist) {
    if (std::holds_alternative<GaussianLaw>(dist) || std::holds_alternative<UniformLaw>(dist)) return mean_of(dist);
    return std::nullopt;
}

/// n i.i.d. draws as columns.
inline Matrix sample(const Distribution& dist, Eigen::Index n, CounterRng& rng) {
    detail::require(n >= 1, "sample: n must be >= 1");
    const Eigen::Index dd = datum_dim(dist);
    Matrix out(dd, n);
    std::visit(overloaded{[&](const GaussianLaw& g) {
                              const Matrix f = detail::psd_factor(g.cov);
                              for (Eigen::Index i = 0; i < n; ++i) out.col(i) = g.mean + f * rng.normal_vector(dd);
                          },
                          [&](const AtomLaw& a) {
                              Vector cdf(a.weights.size());
                              std::partial_sum(a.weights.begin(), a.weights.end(), cdf.begin());
                              for (Eigen::Index i = 0; i < n; ++i) {
                                  const double u = rng.uniform();
                                  Eigen::Index k = 0;
                                  while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
                                  out.col(i) = a.points.col(k);
                              }
                          },
                          [&](const RegressionLaw& r) {
                              const Eigen::Index d = r.theta0.size();
                              const Matrix f = detail::psd_factor(r.x_cov);
                              for (Eigen::Index i = 0; i < n; ++i) {
                                  const Vector x = f * rng.normal_vector(d);
                                  out.col(i).head(d) = x;
                                  out(d, i) = r.theta0.dot(x) + r.sigma * rng.normal();
                              }
                          },
                          [&](const UniformLaw& u) {
                              for (Eigen::Index i = 0; i < n; ++i)
                                  for (Eigen::Index j = 0; j < dd; ++j)
                                      out(j, i) = u.lo[j] + (u.hi[j] - u.lo[j]) * rng.uniform();
                          }},
               dist);
    return out;
}

// --- population risks --------------------------------------------------------

inline constexpr Eigen::Index kPopulationPool = 200'000;
inline constexpr std::uint64_t kPopulationSeed = 0x9091a7105eedULL;

/// Phi(theta) = E phi(X, theta) for a loss. Exact for atoms, the squared
/// loss, the linear loss and half-square regression under the regression
/// law; otherwise the average over a fixed pool of draws.
class PopulationRisk {
public:
    PopulationRisk(Distribution dist, LossModel loss, Eigen::Index pool = kPopulationPool)
        : dist_(std::move(dist)), loss_(std::move(loss)) {
        detail::validate(dist_);
        dim_ = param_dim(loss_, datum_dim(dist_));
        mean_ = mean_of(dist_);
        cov_ = cov_of(dist_);
        if (const auto* a = std::get_if<AtomLaw>(&dist_)) {
            method_ = "exact_atoms";
        } else if (std::holds_alternative<SquaredLoss>(loss_) || std::holds_alternative<LinearLoss>(loss_)) {
            method_ = "closed_form";
        } else if (const auto* rl = std::get_if<RegressionLoss>(&loss_);
                   rl && rl->inner.kind == ScalarLoss::Kind::half_square && std::holds_alternative<RegressionLaw>(dist_)) {
            method_ = "closed_form";
        } else {
            method_ = "mc_pool";
            CounterRng rng(kPopulationSeed);
            pool_ = sample(dist_, pool, rng);
        }
    }

    Eigen::Index dim() const { return dim_; }
    const std::string& method() const { return method_; }
    const Distribution& distribution() const { return dist_; }
    const LossModel& loss() const { return loss_; }

    double risk(const Vector& theta) const {
        detail::require_dim(theta.size(), dim_, "population risk: theta");
        if (const auto* a = std::get_if<AtomLaw>(&dist_)) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < a->points.cols(); ++i)
                acc += a->weights[i] * eval(loss_, a->points.col(i), theta);
            return acc;
        }
        if (method_ == "closed_form") {
            if (std::holds_alternative<SquaredLoss>(loss_))
                return 0.5 * (cov_.trace() + (mean_ - theta).squaredNorm());
            if (std::holds_alternative<LinearLoss>(loss_)) return mean_.dot(theta);
            const auto& r = std::get<RegressionLaw>(dist_);
            const Vector e = theta - r.theta0;
            return 0.5 * (e.dot(r.x_cov * e) + r.sigma * r.sigma);
        }
        return empirical_risk(loss_, pool_, theta);
    }

    Vector subgrad(const Vector& theta) const {
        detail::require_dim(theta.size(), dim_, "population risk: theta");
        if (const auto* a = std::get_if<AtomLaw>(&dist_)) {
            Vector acc = Vector::Zero(dim_);
            for (Eigen::Index i = 0; i < a->points.cols(); ++i)
                acc += a->weights[i] * cmest::subgrad(loss_, a->points.col(i), theta);
            return acc;
        }
        if (method_ == "closed_form") {
            if (std::holds_alternative<SquaredLoss>(loss_)) return theta - mean_;
            if (std::holds_alternative<LinearLoss>(loss_)) return mean_;
            const auto& r = std::get<RegressionLaw>(dist_);
            return r.x_cov * (theta - r.theta0);
        }
        return empirical_subgrad(loss_, pool_, theta);
    }

    Vector start() const {
        if (std::holds_alternative<RegressionLoss>(loss_) || std::holds_alternative<LinearLoss>(loss_))
            return Vector::Zero(dim_);
        return mean_;
    }

    double scale() const { return std::sqrt(std::max(cov_.trace(), 0.0)) + 1e-3 * (1.0 + mean_.norm()); }

    std::vector<Vector> candidates(const Vector& theta) const {
        const auto* a = std::get_if<AtomLaw>(&dist_);
        if (!a || std::holds_alternative<RegressionLoss>(loss_)) return {};
        std::vector<Vector> out;
        for (Eigen::Index i = 0; i < a->points.cols(); ++i) out.push_back(a->points.col(i));
        (void)theta;
        return out;
    }

private:
    Distribution dist_;
    LossModel loss_;
    Eigen::Index dim_ = 1;
    std::string method_;
    Vector mean_;
    Matrix cov_;
    Matrix pool_;
};

/// Phi(theta) = E phi(X_1..X_k, theta) for a U-kernel, over `tuples`
/// disjoint k-tuples of draws from a fixed stream.
class UPopulationRisk {
public:
    UPopulationRisk(Distribution dist, UKernel kernel, Eigen::Index tuples = kPopulationPool)
        : dist_(std::move(dist)), kernel_(std::move(kernel)) {
        detail::validate(dist_);
        CounterRng rng(kPopulationSeed);
        const int k = order(kernel_);
        // Disjoint tuples: tuple j uses draws j*k .. j*k+k-1.
        const Matrix draws = sample(dist_, tuples * k, rng);
        obj_.emplace(kernel_, draws, SubsetPlan::disjoint(tuples, k));
        mean_ = mean_of(dist_);
        cov_ = cov_of(dist_);
    }

    Eigen::Index dim() const { return obj_->dim(); }
    double risk(const Vector& theta) const { return obj_->risk(theta); }
    Vector subgrad(const Vector& theta) const { return obj_->subgrad(theta); }
    Vector start() const { return obj_->start(); }
    double scale() const { return obj_->scale(); }
    std::string method() const { return "mc_pool"; }

private:
    Distribution dist_;
    UKernel kernel_;
    std::optional<UObjective> obj_;
    Vector mean_;
    Matrix cov_;
};

// --- JSON -------------------------------------------------------------------

inline Distribution distribution_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    Distribution out;
    if (type == "gaussian") {
        GaussianLaw g;
        g.mean = detail::vector_from_json(j.at("mean"), "gaussian.mean");
        g.cov = j.contains("cov") ? detail::matrix_from_json(j.at("cov"), "gaussian.cov")
                                  : Matrix(Matrix::Identity(g.mean.size(), g.mean.size()));
        out = g;
    } else if (type == "atoms") {
        AtomLaw a;
        const Matrix rows = detail::matrix_from_json(j.at("points"), "atoms.points");
        a.points = rows.transpose();
        a.weights = detail::vector_from_json(j.at("weights"), "atoms.weights");
        out = a;
    } else if (type == "regression") {
        RegressionLaw r;
        r.theta0 = detail::vector_from_json(j.at("theta0"), "regression.theta0");
        r.sigma = j.value("sigma", 1.0);
        r.x_cov = j.contains("x_cov") ? detail::matrix_from_json(j.at("x_cov"), "regression.x_cov")
                                      : Matrix(Matrix::Identity(r.theta0.size(), r.theta0.size()));
        out = r;
    } else if (type == "uniform") {
        out = UniformLaw{detail::vector_from_json(j.at("lo"), "uniform.lo"), detail::vector_from_json(j.at("hi"), "uniform.hi")};
    } else {
        throw InvalidArgument("unknown distribution \"" + type + "\"");
    }
    detail::validate(out);
    return out;
}

}  // namespace cmest
