#pragma once

// Convex losses phi(x, theta) with a fixed subgradient selection g(x, theta).
// A dataset is a matrix whose columns are the data points.

#include "cmest/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace cmest {

/// Scalar convex function of a residual.
struct ScalarLoss {
    enum class Kind { half_square, square, abs, huber };
    Kind kind = Kind::half_square;
    double c = 1.0;  // huber threshold

    double value(double r) const {
        const double a = std::abs(r);
        switch (kind) {
            case Kind::half_square: return 0.5 * r * r;
            case Kind::square: return r * r;
            case Kind::abs: return a;
            case Kind::huber: return a <= c ? r * r : 2.0 * c * a - c * c;
        }
        return 0.0;
    }

    // Derivative; 0 at the kink of abs.
    double deriv(double r) const {
        switch (kind) {
            case Kind::half_square: return r;
            case Kind::square: return 2.0 * r;
            case Kind::abs: return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            case Kind::huber: return std::abs(r) <= c ? 2.0 * r : (r > 0.0 ? 2.0 * c : -2.0 * c);
        }
        return 0.0;
    }
};

/// Huber function h_c(t) for t >= 0.
inline double huber(double t, double c) { return t <= c ? t * t : 2.0 * c * t - c * c; }

/// 1/2 ||x - theta||^2.
struct SquaredLoss {};

/// ||x - theta||; the geometric median.
struct NormLoss {};

/// ||x - theta|| - (1 - 2 alpha) u^T (x - theta).
struct GeoQuantileLoss {
    double alpha = 0.5;
    Vector u;

    GeoQuantileLoss(double a, Vector dir) : alpha(a), u(std::move(dir)) {
        detail::require(alpha > 0.0 && alpha < 1.0, "GeoQuantileLoss: alpha must lie in (0, 1)");
        detail::require(u.size() >= 1 && std::abs(u.norm() - 1.0) <= 1e-12, "GeoQuantileLoss: u must be a unit vector");
    }
};

/// h_c(||x - theta||).
struct HuberLocLoss {
    double c = 1.0;

    explicit HuberLocLoss(double c_) : c(c_) { detail::require(c > 0.0, "HuberLocLoss: c must be positive"); }
};

/// l(y - theta^T x) on a datum (x, y) stored as the (d+1)-vector x || y.
struct RegressionLoss {
    ScalarLoss inner;
};

/// x^T theta.
struct LinearLoss {};

using LossModel = std::variant<SquaredLoss, NormLoss, GeoQuantileLoss, HuberLocLoss, RegressionLoss, LinearLoss>;

/// Length of a datum for a parameter of dimension d.
inline Eigen::Index datum_dim(const LossModel& loss, Eigen::Index param_dim) {
    return std::holds_alternative<RegressionLoss>(loss) ? param_dim + 1 : param_dim;
}

inline Eigen::Index param_dim(const LossModel& loss, Eigen::Index datum_dim) {
    return std::holds_alternative<RegressionLoss>(loss) ? datum_dim - 1 : datum_dim;
}

namespace detail {

template <class X>
double eval_one(const LossModel& loss, const X& x, const Vector& theta) {
    if (std::holds_alternative<SquaredLoss>(loss)) return 0.5 * (x - theta).squaredNorm();
    if (std::holds_alternative<NormLoss>(loss)) return (x - theta).norm();
    if (const auto* l = std::get_if<GeoQuantileLoss>(&loss))
        return (x - theta).norm() - (1.0 - 2.0 * l->alpha) * l->u.dot(x - theta);
    if (const auto* l = std::get_if<HuberLocLoss>(&loss)) return huber((x - theta).norm(), l->c);
    if (const auto* l = std::get_if<RegressionLoss>(&loss)) {
        const Eigen::Index d = theta.size();
        return l->inner.value(x[d] - x.head(d).dot(theta));
    }
    return x.dot(theta);
}

template <class X, class Out>
void add_subgrad(const LossModel& loss, const X& x, const Vector& theta, Out& acc) {
    if (std::holds_alternative<SquaredLoss>(loss)) {
        acc += theta - x;
    } else if (std::holds_alternative<NormLoss>(loss)) {
        const double r = (theta - x).norm();
        if (r > 0.0) acc += (theta - x) / r;
    } else if (const auto* l = std::get_if<GeoQuantileLoss>(&loss)) {
        // At the kink, -(1-2a)u from the unit ball cancels the linear part.
        const double r = (theta - x).norm();
        if (r > 0.0) acc += (theta - x) / r + (1.0 - 2.0 * l->alpha) * l->u;
    } else if (const auto* l = std::get_if<HuberLocLoss>(&loss)) {
        const double r = (theta - x).norm();
        if (r > 0.0) acc += (r <= l->c ? 2.0 : 2.0 * l->c / r) * (theta - x);
    } else if (const auto* l = std::get_if<RegressionLoss>(&loss)) {
        const Eigen::Index d = theta.size();
        acc -= l->inner.deriv(x[d] - x.head(d).dot(theta)) * x.head(d);
    } else {
        acc += x;
    }
}

inline void check_data(const LossModel& loss, const Matrix& data, const Vector& theta) {
    require(data.cols() >= 1, "loss: empty data");
    require_dim(data.rows(), datum_dim(loss, theta.size()), "loss: datum");
    if (const auto* l = std::get_if<GeoQuantileLoss>(&loss)) require_dim(l->u.size(), theta.size(), "GeoQuantileLoss: u");
}

}  // namespace detail

inline double eval(const LossModel& loss, const Vector& x, const Vector& theta) {
    detail::require_dim(x.size(), datum_dim(loss, theta.size()), "loss: datum");
    return detail::eval_one(loss, x, theta);
}

inline Vector subgrad(const LossModel& loss, const Vector& x, const Vector& theta) {
    detail::require_dim(x.size(), datum_dim(loss, theta.size()), "loss: datum");
    Vector g = Vector::Zero(theta.size());
    detail::add_subgrad(loss, x, theta, g);
    return g;
}

/// n^{-1} sum_i phi(X_i, theta).
inline double empirical_risk(const LossModel& loss, const Matrix& data, const Vector& theta) {
    detail::check_data(loss, data, theta);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.cols(); ++i) acc += detail::eval_one(loss, data.col(i), theta);
    return acc / static_cast<double>(data.cols());
}

/// n^{-1} sum_i g(X_i, theta).
inline Vector empirical_subgrad(const LossModel& loss, const Matrix& data, const Vector& theta) {
    detail::check_data(loss, data, theta);
    Vector g = Vector::Zero(theta.size());
    for (Eigen::Index i = 0; i < data.cols(); ++i) detail::add_subgrad(loss, data.col(i), theta, g);
    return g / static_cast<double>(data.cols());
}

/// Empirical risk as a solver oracle.
class EmpiricalRisk {
public:
    EmpiricalRisk(LossModel loss, Matrix data, Eigen::Index dim)
        : loss_(std::move(loss)), data_(std::move(data)), dim_(dim) {
        detail::check_data(loss_, data_, Vector::Zero(dim_));
        if (std::holds_alternative<SquaredLoss>(loss_)) {
            mean_ = data_.rowwise().mean();
            mean_sq_ = data_.colwise().squaredNorm().mean();
        }
    }

    Eigen::Index dim() const { return dim_; }
    const Matrix& data() const { return data_; }
    const LossModel& loss() const { return loss_; }

    // Squared loss goes through the sufficient statistics (mean, mean ||x||^2).
    double risk(const Vector& theta) const {
        if (mean_.size() > 0) {
            detail::require_dim(theta.size(), dim_, "loss: theta");
            return 0.5 * (mean_sq_ - 2.0 * theta.dot(mean_) + theta.squaredNorm());
        }
        return empirical_risk(loss_, data_, theta);
    }
    Vector subgrad(const Vector& theta) const {
        if (mean_.size() > 0) {
            detail::require_dim(theta.size(), dim_, "loss: theta");
            return theta - mean_;
        }
        return empirical_subgrad(loss_, data_, theta);
    }

    /// Data centroid for location losses, least squares for regression, 0
    /// for the linear loss.
    Vector start() const {
        if (std::holds_alternative<LinearLoss>(loss_)) return Vector::Zero(dim_);
        if (std::holds_alternative<RegressionLoss>(loss_)) {
            const Matrix x = data_.topRows(dim_).transpose();
            const Vector y = data_.row(dim_).transpose();
            return x.completeOrthogonalDecomposition().solve(y);
        }
        return data_.rowwise().mean();
    }

    /// Typical length scale of the problem.
    double scale() const {
        if (std::holds_alternative<RegressionLoss>(loss_) || std::holds_alternative<LinearLoss>(loss_))
            return 1.0 + start().norm();
        const Vector c = data_.rowwise().mean();
        const double spread = std::sqrt((data_.colwise() - c).squaredNorm() / static_cast<double>(data_.cols()));
        return spread > 0.0 ? spread : 1.0 + c.norm();
    }

    /// Data points closest to theta; minimizers of kinked location risks often
    /// sit exactly on one of them.
    std::vector<Vector> candidates(const Vector& theta) const {
        if (!std::holds_alternative<NormLoss>(loss_) && !std::holds_alternative<GeoQuantileLoss>(loss_)) return {};
        std::vector<std::pair<double, Eigen::Index>> dist;
        dist.reserve(static_cast<std::size_t>(data_.cols()));
        for (Eigen::Index i = 0; i < data_.cols(); ++i) dist.emplace_back((data_.col(i) - theta).squaredNorm(), i);
        const std::size_t keep = std::min<std::size_t>(4, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
        std::vector<Vector> out;
        for (std::size_t i = 0; i < keep; ++i) out.push_back(data_.col(dist[i].second));
        return out;
    }

private:
    LossModel loss_;
    Matrix data_;
    Eigen::Index dim_;
    Vector mean_;
    double mean_sq_ = 0.0;
};

// --- JSON -------------------------------------------------------------------

inline ScalarLoss scalar_loss_from_json(const nlohmann::json& j, ScalarLoss::Kind square_kind) {
    ScalarLoss out;
    const std::string inner = j.value("inner", std::string("square"));
    if (inner == "square") {
        out.kind = square_kind;
    } else if (inner == "abs") {
        out.kind = ScalarLoss::Kind::abs;
    } else if (inner == "huber") {
        out.kind = ScalarLoss::Kind::huber;
        out.c = j.value("c", 1.0);
        detail::require(out.c > 0.0, "huber: c must be positive");
    } else {
        throw InvalidArgument("unknown inner loss \"" + inner + "\"");
    }
    return out;
}

inline nlohmann::json scalar_loss_to_json(const ScalarLoss& l) {
    switch (l.kind) {
        case ScalarLoss::Kind::half_square:
        case ScalarLoss::Kind::square: return {{"inner", "square"}};
        case ScalarLoss::Kind::abs: return {{"inner", "abs"}};
        case ScalarLoss::Kind::huber: return {{"inner", "huber"}, {"c", l.c}};
    }
    return {};
}

/// {"loss": "squared"|"norm"|"geoquantile"|"huber"|"regression"|"linear", ...}
inline LossModel loss_from_json(const nlohmann::json& j, Eigen::Index param_dim) {
    const std::string name = j.at("loss").get<std::string>();
    if (name == "squared") return SquaredLoss{};
    if (name == "norm") return NormLoss{};
    if (name == "linear") return LinearLoss{};
    if (name == "huber") return HuberLocLoss(j.value("c", 1.0));
    if (name == "regression") return RegressionLoss{scalar_loss_from_json(j, ScalarLoss::Kind::half_square)};
    if (name == "geoquantile") {
        Vector u = Vector::Unit(param_dim, 0);
        if (j.contains("u")) {
            const auto& ju = j.at("u");
            u.resize(static_cast<Eigen::Index>(ju.size()));
            for (std::size_t i = 0; i < ju.size(); ++i) u[static_cast<Eigen::Index>(i)] = ju[i].get<double>();
        }
        return GeoQuantileLoss(j.value("alpha", 0.5), u);
    }
    throw InvalidArgument("unknown loss \"" + name + "\"");
}

}  // namespace cmest
