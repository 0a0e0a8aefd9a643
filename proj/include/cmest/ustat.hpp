#pragma once

// U-statistic risks Phi_n(theta) = C(n,k)^{-1} sum_I phi(X_I, theta).
//
// Every kernel here depends on its k-tuple only through a small feature:
//   Oja   phi = |c_I + a_I^T theta| / d!   (the determinant is affine in theta)
//   Gini  phi = l(v_I - theta),  v_I = ||x_1 - x_2||^p
//   MoM   phi = |v_I - theta|,   v_I = mean of the tuple
// so features are computed once per subset and the risk becomes an average
// over pseudo-observations.

#include "cmest/core.hpp"
#include "cmest/losses.hpp"
#include "cmest/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <variant>
#include <vector>

namespace cmest {

/// Oja simplex volume |det[x_1 - theta, ..., x_d - theta]| / d!, order k = d.
struct OjaKernel {
    Eigen::Index d = 2;
};

/// l(||x_1 - x_2||^p - theta), order 2, scalar theta.
struct GiniKernel {
    double p = 1.0;
    ScalarLoss inner{ScalarLoss::Kind::square, 1.0};
};

/// |(x_1 + ... + x_k)/k - theta|, scalar data and theta.
struct MoMKernel {
    int k = 2;
};

using UKernel = std::variant<OjaKernel, GiniKernel, MoMKernel>;

inline int order(const UKernel& kernel) {
    if (const auto* o = std::get_if<OjaKernel>(&kernel)) return static_cast<int>(o->d);
    if (const auto* m = std::get_if<MoMKernel>(&kernel)) return m->k;
    return 2;
}

inline Eigen::Index param_dim(const UKernel& kernel) {
    if (const auto* o = std::get_if<OjaKernel>(&kernel)) return o->d;
    return 1;
}

namespace detail {

inline void check_kernel(const UKernel& kernel, Eigen::Index datum_dim) {
    if (const auto* o = std::get_if<OjaKernel>(&kernel)) {
        require(o->d >= 1 && o->d <= kMaxDim, "OjaKernel: bad dimension");
        require_dim(datum_dim, o->d, "OjaKernel: datum");
    } else if (const auto* g = std::get_if<GiniKernel>(&kernel)) {
        require(g->p >= 1.0, "GiniKernel: p must be >= 1");
    } else {
        require(std::get<MoMKernel>(kernel).k >= 1, "MoMKernel: k must be >= 1");
        require_dim(datum_dim, 1, "MoMKernel: datum");
    }
}

inline double factorial(Eigen::Index d) {
    double f = 1.0;
    for (Eigen::Index i = 2; i <= d; ++i) f *= static_cast<double>(i);
    return f;
}

// det[x_1 - theta, ..., x_d - theta] = c + a^T theta.
inline std::pair<double, Vector> oja_affine(const Matrix& tuple) {
    const Eigen::Index d = tuple.rows();
    const double c = tuple.determinant();
    Vector a(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        Matrix shifted = tuple;
        shifted.row(j).array() -= 1.0;
        a[j] = shifted.determinant() - c;
    }
    return {c, a};
}

inline double scalar_feature(const UKernel& kernel, const Matrix& tuple) {
    if (const auto* g = std::get_if<GiniKernel>(&kernel)) {
        const double dist = (tuple.col(0) - tuple.col(1)).norm();
        return g->p == 1.0 ? dist : std::pow(dist, g->p);
    }
    return tuple.row(0).mean();
}

// Same feature, read straight from the data columns.
inline double scalar_feature(const UKernel& kernel, const Matrix& data, const std::vector<Eigen::Index>& idx) {
    if (const auto* g = std::get_if<GiniKernel>(&kernel)) {
        const double dist = (data.col(idx[0]) - data.col(idx[1])).norm();
        return g->p == 1.0 ? dist : std::pow(dist, g->p);
    }
    double acc = 0.0;
    for (Eigen::Index i : idx) acc += data(0, i);
    return acc / static_cast<double>(idx.size());
}

inline ScalarLoss scalar_inner(const UKernel& kernel) {
    if (const auto* g = std::get_if<GiniKernel>(&kernel)) return g->inner;
    return ScalarLoss{ScalarLoss::Kind::abs, 1.0};
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// phi(X_I, theta) for a tuple stored as the columns of `tuple`.
inline double kernel_eval(const UKernel& kernel, const Matrix& tuple, const Vector& theta) {
    detail::check_kernel(kernel, tuple.rows());
    detail::require(tuple.cols() == order(kernel), "kernel: tuple size must equal the kernel order");
    detail::require_dim(theta.size(), param_dim(kernel), "kernel: theta");
    if (std::holds_alternative<OjaKernel>(kernel)) {
        const auto [c, a] = detail::oja_affine(tuple);
        return std::abs(c + a.dot(theta)) / detail::factorial(tuple.rows());
    }
    return detail::scalar_inner(kernel).value(detail::scalar_feature(kernel, tuple) - theta[0]);
}

inline Vector kernel_subgrad(const UKernel& kernel, const Matrix& tuple, const Vector& theta) {
    detail::check_kernel(kernel, tuple.rows());
    detail::require(tuple.cols() == order(kernel), "kernel: tuple size must equal the kernel order");
    detail::require_dim(theta.size(), param_dim(kernel), "kernel: theta");
    if (std::holds_alternative<OjaKernel>(kernel)) {
        const auto [c, a] = detail::oja_affine(tuple);
        return detail::sign(c + a.dot(theta)) / detail::factorial(tuple.rows()) * a;
    }
    Vector g(1);
    g[0] = -detail::scalar_inner(kernel).deriv(detail::scalar_feature(kernel, tuple) - theta[0]);
    return g;
}

// --- subsets ----------------------------------------------------------------

inline constexpr std::uint64_t kEnumerationCap = 2'000'000;

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

/// k-subset with colex rank r: c_0 < ... < c_{k-1}, r = sum_i C(c_i, i+1).
inline void unrank_colex(std::uint64_t r, int k, std::uint64_t n, std::vector<Eigen::Index>& out) {
    out.resize(static_cast<std::size_t>(k));
    std::uint64_t hi = n;
    for (int i = k - 1; i >= 0; --i) {
        const auto need = static_cast<std::uint64_t>(i + 1);
        // Largest c in [i, hi) with C(c, i+1) <= r.
        std::uint64_t lo = static_cast<std::uint64_t>(i), top = hi - 1;
        while (lo < top) {
            const std::uint64_t mid = lo + (top - lo + 1) / 2;
            if (binomial(mid, need) <= r)
                lo = mid;
            else
                top = mid - 1;
        }
        out[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(lo);
        r -= binomial(lo, need);
        hi = lo;
    }
}

/// Which k-subsets of {0..n-1} a U-statistic averages over.
class SubsetPlan {
public:
    /// Every subset; fails past the enumeration cap.
    static SubsetPlan complete(Eigen::Index n, int k) {
        check(n, k);
        const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
        if (total > kEnumerationCap)
            throw ResourceLimit("U-statistic: C(n,k) = " + std::to_string(total) +
                                " exceeds the enumeration cap; pass an explicit budget");
        SubsetPlan p;
        p.n_ = n;
        p.k_ = k;
        p.total_ = total;
        return p;
    }

    /// `budget` subsets drawn uniformly without replacement (all of them when
    /// budget >= C(n,k)), visited in increasing rank order.
    static SubsetPlan sampled(Eigen::Index n, int k, std::uint64_t budget, std::uint64_t seed) {
        check(n, k);
        detail::require(budget >= 1, "U-statistic: budget must be >= 1");
        const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
        detail::require(total < std::numeric_limits<std::uint64_t>::max(), "U-statistic: C(n,k) overflows");
        SubsetPlan p;
        p.n_ = n;
        p.k_ = k;
        p.total_ = total;
        p.incomplete_ = true;
        CounterRng rng(seed);
        p.ranks_ = sample_without_replacement(total, std::min(budget, total), rng);
        std::sort(p.ranks_.begin(), p.ranks_.end());
        return p;
    }

    /// Consecutive disjoint blocks {jk, ..., jk+k-1}, j < tuples; n = tuples k.
    static SubsetPlan disjoint(Eigen::Index tuples, int k) {
        detail::require(tuples >= 1, "U-statistic: need at least one tuple");
        SubsetPlan p;
        p.n_ = tuples * k;
        p.k_ = k;
        check(p.n_, k);
        p.total_ = binomial(static_cast<std::uint64_t>(p.n_), static_cast<std::uint64_t>(k));
        p.incomplete_ = true;
        p.ranks_.reserve(static_cast<std::size_t>(tuples));
        for (Eigen::Index j = 0; j < tuples; ++j) {
            std::uint64_t r = 0;
            for (int i = 0; i < k; ++i)
                r += binomial(static_cast<std::uint64_t>(j * k + i), static_cast<std::uint64_t>(i + 1));
            p.ranks_.push_back(r);
        }
        return p;
    }

    static SubsetPlan make(Eigen::Index n, int k, std::optional<std::uint64_t> budget, std::uint64_t seed) {
        return budget ? sampled(n, k, *budget, seed) : complete(n, k);
    }

    Eigen::Index n() const { return n_; }
    int k() const { return k_; }
    bool incomplete() const { return incomplete_; }
    std::uint64_t size() const { return incomplete_ ? ranks_.size() : total_; }

    /// Calls f(indices) for each subset, in colex order.
    template <class F>
    void for_each(F&& f) const {
        std::vector<Eigen::Index> idx;
        if (incomplete_) {
            for (std::uint64_t r : ranks_) {
                unrank_colex(r, k_, static_cast<std::uint64_t>(n_), idx);
                f(static_cast<const std::vector<Eigen::Index>&>(idx));
            }
            return;
        }
        idx.resize(static_cast<std::size_t>(k_));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        for (;;) {
            f(static_cast<const std::vector<Eigen::Index>&>(idx));
            int i = 0;
            while (i < k_ && idx[static_cast<std::size_t>(i)] + 1 ==
                                 (i + 1 < k_ ? idx[static_cast<std::size_t>(i + 1)] : n_))
                ++i;
            if (i == k_) return;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = 0; j < i; ++j) idx[static_cast<std::size_t>(j)] = j;
        }
    }

private:
    static void check(Eigen::Index n, int k) {
        detail::require(k >= 1, "U-statistic: order must be >= 1");
        detail::require(n >= k, "U-statistic: need n >= k data points");
    }

    Eigen::Index n_ = 0;
    int k_ = 1;
    std::uint64_t total_ = 0;
    bool incomplete_ = false;
    std::vector<std::uint64_t> ranks_;
};

inline Matrix gather(const Matrix& data, const std::vector<Eigen::Index>& idx) {
    Matrix t(data.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) t.col(static_cast<Eigen::Index>(j)) = data.col(idx[j]);
    return t;
}

// --- risk as an optimization oracle ----------------------------------------

/// U-risk with precomputed per-subset features.
class UObjective {
public:
    UObjective(UKernel kernel, const Matrix& data, const SubsetPlan& plan) : kernel_(std::move(kernel)) {
        detail::check_kernel(kernel_, data.rows());
        detail::require(plan.n() == data.cols(), "UObjective: plan does not match the data");
        detail::require(plan.k() == order(kernel_), "UObjective: plan order does not match the kernel");
        incomplete_ = plan.incomplete();
        const auto count = static_cast<Eigen::Index>(plan.size());
        if (std::holds_alternative<OjaKernel>(kernel_)) {
            const Eigen::Index d = data.rows();
            oja_scale_ = 1.0 / detail::factorial(d);
            oja_c_.resize(count);
            oja_a_.resize(d, count);
            Eigen::Index j = 0;
            plan.for_each([&](const std::vector<Eigen::Index>& idx) {
                auto [c, a] = detail::oja_affine(gather(data, idx));
                oja_c_[j] = c;
                oja_a_.col(j) = a;
                ++j;
            });
            centroid_ = data.rowwise().mean();
            const double spread =
                std::sqrt((data.colwise() - centroid_).squaredNorm() / static_cast<double>(data.cols()));
            scale_ = spread > 0.0 ? spread : 1.0 + centroid_.norm();
        } else {
            inner_ = detail::scalar_inner(kernel_);
            std::vector<double> v;
            v.reserve(static_cast<std::size_t>(count));
            plan.for_each([&](const std::vector<Eigen::Index>& idx) {
                v.push_back(detail::scalar_feature(kernel_, data, idx));
            });
            std::sort(v.begin(), v.end());
            feats_ = std::move(v);
            prefix_.assign(feats_.size() + 1, 0.0);
            prefix_sq_.assign(feats_.size() + 1, 0.0);
            for (std::size_t i = 0; i < feats_.size(); ++i) {
                prefix_[i + 1] = prefix_[i] + feats_[i];
                prefix_sq_[i + 1] = prefix_sq_[i] + feats_[i] * feats_[i];
            }
            const double mean = prefix_.back() / static_cast<double>(feats_.size());
            centroid_ = Vector::Constant(1, mean);
            const double var = std::max(0.0, prefix_sq_.back() / static_cast<double>(feats_.size()) - mean * mean);
            scale_ = var > 0.0 ? std::sqrt(var) : 1.0 + std::abs(mean);
        }
    }

    Eigen::Index dim() const { return centroid_.size(); }
    bool incomplete() const { return incomplete_; }
    const UKernel& kernel() const { return kernel_; }
    Vector start() const { return centroid_; }
    double scale() const { return scale_; }

    double risk(const Vector& theta) const {
        detail::require_dim(theta.size(), dim(), "UObjective: theta");
        if (!feats_.empty() || oja_c_.size() == 0) return scalar_risk(theta[0]).first;
        const Vector r = (oja_c_.transpose() + theta.transpose() * oja_a_).transpose();
        return oja_scale_ * r.cwiseAbs().mean();
    }

    Vector subgrad(const Vector& theta) const {
        detail::require_dim(theta.size(), dim(), "UObjective: theta");
        if (!feats_.empty() || oja_c_.size() == 0) return Vector::Constant(1, scalar_risk(theta[0]).second);
        const Vector r = (oja_c_.transpose() + theta.transpose() * oja_a_).transpose();
        const Vector s = r.unaryExpr([](double v) { return detail::sign(v); });
        return oja_scale_ * (oja_a_ * s) / static_cast<double>(s.size());
    }

    /// Kink points near theta. Scalar features with abs inner: the nearest
    /// features. Oja: vertices cut out by d of the hyperplanes c_I + a_I^T t = 0
    /// closest to theta (the risk is piecewise linear with minima at vertices).
    std::vector<Vector> candidates(const Vector& theta) const {
        if (oja_c_.size() > 0) return oja_vertices(theta);
        if (feats_.empty() || inner_.kind != ScalarLoss::Kind::abs) return {};
        const auto it = std::lower_bound(feats_.begin(), feats_.end(), theta[0]);
        const auto pos = it - feats_.begin();
        std::vector<Vector> out;
        for (auto i = std::max<std::ptrdiff_t>(0, pos - 2);
             i < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(feats_.size()), pos + 2); ++i)
            out.push_back(Vector::Constant(1, feats_[static_cast<std::size_t>(i)]));
        return out;
    }

private:
    std::vector<Vector> oja_vertices(const Vector& theta) const {
        const Eigen::Index d = oja_a_.rows();
        std::vector<std::pair<double, Eigen::Index>> near;
        near.reserve(static_cast<std::size_t>(oja_c_.size()));
        for (Eigen::Index j = 0; j < oja_c_.size(); ++j) {
            const double len = oja_a_.col(j).norm();
            if (len > 0.0) near.emplace_back(std::abs(oja_c_[j] + oja_a_.col(j).dot(theta)) / len, j);
        }
        // Keep the number of d-subsets of the nearest planes in the hundreds.
        std::size_t keep = static_cast<std::size_t>(d) + 1;
        while (keep < near.size() && binomial(keep + 1, static_cast<std::uint64_t>(d)) <= 200) ++keep;
        if (near.size() < static_cast<std::size_t>(d)) return {};
        keep = std::min(keep, near.size());
        std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(keep), near.end());
        std::vector<Vector> out;
        Matrix a(d, d);
        Vector c(d);
        SubsetPlan::complete(static_cast<Eigen::Index>(keep), static_cast<int>(d))
            .for_each([&](const std::vector<Eigen::Index>& idx) {
                for (Eigen::Index r = 0; r < d; ++r) {
                    const Eigen::Index j = near[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])].second;
                    a.row(r) = oja_a_.col(j).transpose();
                    c[r] = -oja_c_[j];
                }
                const Eigen::FullPivLU<Matrix> lu(a);
                if (lu.rank() == d) out.push_back(lu.solve(c));
            });
        return out;
    }

    // (mean l(v - t), mean -l'(v - t)) from prefix sums over the sorted features.
    std::pair<double, double> scalar_risk(double t) const {
        const auto n = static_cast<double>(feats_.size());
        auto index_of = [&](double x, bool upper) {
            const auto it = upper ? std::upper_bound(feats_.begin(), feats_.end(), x)
                                  : std::lower_bound(feats_.begin(), feats_.end(), x);
            return static_cast<std::size_t>(it - feats_.begin());
        };
        // Sums over an index range [i, j): count, sum v, sum v^2.
        auto sums = [&](std::size_t i, std::size_t j) {
            return std::array<double, 3>{static_cast<double>(j - i), prefix_[j] - prefix_[i],
                                         prefix_sq_[j] - prefix_sq_[i]};
        };
        const std::size_t end = feats_.size();
        switch (inner_.kind) {
            case ScalarLoss::Kind::half_square:
            case ScalarLoss::Kind::square: {
                const double w = inner_.kind == ScalarLoss::Kind::square ? 1.0 : 0.5;
                const auto s = sums(0, end);
                const double val = s[2] - 2.0 * t * s[1] + s[0] * t * t;
                return {w * val / n, -2.0 * w * (s[1] - s[0] * t) / n};
            }
            case ScalarLoss::Kind::abs: {
                const std::size_t lo = index_of(t, false);
                const std::size_t hi = index_of(t, true);
                const auto below = sums(0, lo);
                const auto above = sums(hi, end);
                const double val = (t * below[0] - below[1]) + (above[1] - t * above[0]);
                return {val / n, (below[0] - above[0]) / n};
            }
            case ScalarLoss::Kind::huber: {
                // residual r = v - t; quadratic for |r| <= c, linear outside.
                const double c = inner_.c;
                const std::size_t lo = index_of(t - c, false);
                const std::size_t hi = index_of(t + c, true);
                const auto below = sums(0, lo);
                const auto mid = sums(lo, hi);
                const auto above = sums(hi, end);
                double val = mid[2] - 2.0 * t * mid[1] + mid[0] * t * t;
                val += 2.0 * c * (t * below[0] - below[1]) - c * c * below[0];
                val += 2.0 * c * (above[1] - t * above[0]) - c * c * above[0];
                const double grad = -2.0 * (mid[1] - mid[0] * t) + 2.0 * c * (below[0] - above[0]);
                return {val / n, grad / n};
            }
        }
        return {0.0, 0.0};
    }

    UKernel kernel_;
    bool incomplete_ = false;
    Vector centroid_;
    double scale_ = 1.0;
    // Oja features.
    double oja_scale_ = 1.0;
    Vector oja_c_;
    Matrix oja_a_;
    // Scalar features, sorted, with prefix sums.
    ScalarLoss inner_;
    std::vector<double> feats_;
    std::vector<double> prefix_;
    std::vector<double> prefix_sq_;
};

/// U-risk by direct summation over the plan's subsets.
inline double u_risk(const UKernel& kernel, const Matrix& data, const Vector& theta,
                     std::optional<std::uint64_t> budget = std::nullopt, std::uint64_t seed = 0) {
    const SubsetPlan plan = SubsetPlan::make(data.cols(), order(kernel), budget, seed);
    double acc = 0.0;
    plan.for_each([&](const std::vector<Eigen::Index>& idx) { acc += kernel_eval(kernel, gather(data, idx), theta); });
    return acc / static_cast<double>(plan.size());
}

inline Vector u_subgrad(const UKernel& kernel, const Matrix& data, const Vector& theta,
                        std::optional<std::uint64_t> budget = std::nullopt, std::uint64_t seed = 0) {
    const SubsetPlan plan = SubsetPlan::make(data.cols(), order(kernel), budget, seed);
    Vector acc = Vector::Zero(theta.size());
    plan.for_each(
        [&](const std::vector<Eigen::Index>& idx) { acc += kernel_subgrad(kernel, gather(data, idx), theta); });
    return acc / static_cast<double>(plan.size());
}

/// Plug-in estimate of Sigma = var(E[h(X_1, ..., X_k) | X_1]). For each i,
/// h is averaged over the subsets containing i: all of them when there are
/// at most 200, otherwise 200 drawn from a stream keyed by (seed, i).
/// `h` receives the k data indices.
inline Matrix sigma_hat(const std::function<Vector(const std::vector<Eigen::Index>&)>& h, Eigen::Index n, int k,
                        std::uint64_t seed = 0) {
    detail::require(k >= 1, "sigma_hat: order must be >= 1");
    detail::require(n >= k + 1, "sigma_hat: need n >= k + 1");
    constexpr std::uint64_t kPerPoint = 200;
    const auto others = static_cast<std::uint64_t>(n - 1);
    const std::uint64_t pool = binomial(others, static_cast<std::uint64_t>(k - 1));
    Matrix g;
    std::vector<Eigen::Index> sub, idx(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto visit = [&](const std::vector<Eigen::Index>& rest) {
            idx[0] = i;
            for (std::size_t j = 0; j < rest.size(); ++j) idx[j + 1] = rest[j] < i ? rest[j] : rest[j] + 1;
            return h(idx);
        };
        Vector acc;
        std::uint64_t used = 0;
        auto add = [&](const Vector& v) {
            if (acc.size() == 0) acc = Vector::Zero(v.size());
            acc += v;
            ++used;
        };
        if (k == 1) {
            add(visit({}));
        } else if (pool <= kPerPoint) {
            SubsetPlan::complete(static_cast<Eigen::Index>(others), k - 1)
                .for_each([&](const std::vector<Eigen::Index>& rest) { add(visit(rest)); });
        } else {
            CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
            for (std::uint64_t r : sample_without_replacement(pool, kPerPoint, rng)) {
                unrank_colex(r, k - 1, others, sub);
                add(visit(sub));
            }
        }
        if (g.size() == 0) g.resize(acc.size(), n);
        g.col(i) = acc / static_cast<double>(used);
    }
    return sample_covariance(g);
}

/// sigma_hat for a kernel's subgradient at theta.
inline Matrix sigma_hat(const UKernel& kernel, const Matrix& data, const Vector& theta, std::uint64_t seed = 0) {
    return sigma_hat(
        [&](const std::vector<Eigen::Index>& idx) { return kernel_subgrad(kernel, gather(data, idx), theta); },
        data.cols(), order(kernel), seed);
}

// --- JSON -------------------------------------------------------------------

/// {"ukernel": "oja"|"gini"|"mom", ...params}
inline UKernel kernel_from_json(const nlohmann::json& j, Eigen::Index datum_dim) {
    const std::string name = j.at("ukernel").get<std::string>();
    if (name == "oja") return OjaKernel{datum_dim};
    if (name == "gini") {
        GiniKernel g;
        g.p = j.value("p", 1.0);
        g.inner = scalar_loss_from_json(j, ScalarLoss::Kind::square);
        return g;
    }
    if (name == "mom") return MoMKernel{j.value("k", 2)};
    throw InvalidArgument("unknown ukernel \"" + name + "\"");
}

/// "all" -> nullopt, integer -> budget.
inline std::optional<std::uint64_t> budget_from_json(const nlohmann::json& j) {
    if (!j.contains("budget")) return std::nullopt;
    const auto& b = j.at("budget");
    if (b.is_string()) {
        detail::require(b.get<std::string>() == "all", "budget: expected \"all\" or a positive integer");
        return std::nullopt;
    }
    detail::require(b.is_number_integer() && b.get<long long>() >= 1, "budget: expected \"all\" or a positive integer");
    return b.get<std::uint64_t>();
}

}  // namespace cmest
