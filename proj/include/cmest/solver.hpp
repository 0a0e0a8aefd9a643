#pragma once

// Projected subgradient descent in the S geometry:
//   theta <- pi^S(theta - eta S^{-1} g)
// run in epochs. Step j of an epoch is eta = c / j^e, with the step length
// eta ||g|| capped at c r / j^e (r the problem scale). Each epoch restarts
// from the better of its suffix average and its best iterate and halves c
// for the next one. A first-order certificate is checked after every
// epoch; a projected step that does not move ends the epoch early.

#include "cmest/core.hpp"
#include "cmest/geometry.hpp"
#include "cmest/metric.hpp"
#include "cmest/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <vector>

namespace cmest {

/// Anything with risk(theta), subgrad(theta), dim(), start() and scale().
template <class O>
concept RiskOracle = requires(const O& o, const Vector& t) {
    { o.risk(t) } -> std::convertible_to<double>;
    { o.subgrad(t) } -> std::convertible_to<Vector>;
    { o.dim() } -> std::convertible_to<Eigen::Index>;
    { o.start() } -> std::convertible_to<Vector>;
    { o.scale() } -> std::convertible_to<double>;
};

struct SolverConfig {
    enum class StepRule { decaying, polyak };

    int max_iter = 20000;
    double tol = 1e-7;
    StepRule step_rule = StepRule::decaying;
    double step_c = 1.0;
    double step_exponent = 0.75;
    std::optional<double> f_min;  // polyak only
    double suffix_fraction = 0.5;
    int epoch_length = 0;  // 0: max(100, max_iter / 20)
    int n_probes = 0;      // 0: 2 d + 8

    void validate() const {
        detail::require(max_iter >= 1, "solver: max_iter must be >= 1");
        detail::require(tol > 0.0, "solver: tol must be positive");
        detail::require(step_c > 0.0, "solver: step c must be positive");
        detail::require(step_exponent > 0.5 && step_exponent <= 1.0, "solver: step exponent must lie in (0.5, 1]");
        detail::require(suffix_fraction > 0.0 && suffix_fraction <= 1.0, "solver: suffix fraction must lie in (0, 1]");
        detail::require(step_rule != StepRule::polyak || f_min.has_value(), "solver: polyak steps need f_min_estimate");
        detail::require(epoch_length >= 0 && n_probes >= 0, "solver: negative epoch length or probe count");
    }
};

struct SolveResult {
    Vector theta_hat;
    double risk = 0.0;
    double certificate = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Unit probe directions in the support cone at theta: projections of +-e_i,
// of the negated active normals, and of seeded random directions.
inline std::vector<Vector> probe_directions(const ConvexSet& set, const Vector& theta, const SpdMetric& m,
                                            int n_probes) {
    const Eigen::Index d = theta.size();
    SupportConeRep cone = FullSpace{d};
    if (!std::holds_alternative<FullSpace>(set) && contains(set, theta, 1e-7)) cone = support_cone(set, theta);
    std::vector<Vector> raw;
    for (Eigen::Index i = 0; i < d; ++i) {
        raw.push_back(Vector::Unit(d, i));
        raw.push_back(-Vector::Unit(d, i));
    }
    if (const auto* pc = std::get_if<PolyhedralCone>(&cone))
        for (Eigen::Index i = 0; i < pc->a.rows(); ++i) raw.push_back(-m.solve(pc->a.row(i).transpose()));
    if (const auto* hs = std::get_if<Halfspace>(&cone)) raw.push_back(-m.solve(hs->normal));
    CounterRng rng(kProbeSeed);
    const int n_random = n_probes > 0 ? n_probes : static_cast<int>(2 * d + 8);
    for (int i = 0; i < n_random; ++i) raw.push_back(rng.normal_vector(d));

    std::vector<Vector> out;
    for (const Vector& r : raw) {
        Vector t = project_cone(cone, r, m);
        const double len = t.norm();
        if (len <= 1e-12 * r.norm()) continue;
        t /= len;
        const bool dup = std::any_of(out.begin(), out.end(), [&](const Vector& o) { return (o - t).norm() < 1e-9; });
        if (!dup) out.push_back(t);
    }
    return out;
}

}  // namespace detail

/// max over probe directions t of -(Phi(theta + h t) - Phi(theta)) / h.
/// The forward difference is >= d+Phi(theta; t), so a small value certifies
/// that no probed feasible direction decreases the risk faster than that.
template <RiskOracle O>
double certify(const O& oracle, const ConvexSet& set, const SpdMetric& m, const Vector& theta, int n_probes = 0,
               std::optional<double> h_fd = std::nullopt) {
    const double h = h_fd.value_or(1e-6 * (oracle.scale() + theta.norm()));
    detail::require(h > 0.0, "certify: h_fd must be positive");
    const double base = oracle.risk(theta);
    double worst = -std::numeric_limits<double>::infinity();
    for (const Vector& t : detail::probe_directions(set, theta, m, n_probes))
        worst = std::max(worst, -(oracle.risk(theta + h * t) - base) / h);
    return std::isfinite(worst) ? worst : 0.0;
}

template <RiskOracle O>
SolveResult minimize(const O& oracle, const ConvexSet& set, const SpdMetric& m, const SolverConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index d = oracle.dim();
    detail::require_dim(dim(set), d, "minimize: set");
    detail::require_dim(m.dim(), d, "minimize: metric");

    const double r = oracle.scale();
    const int epoch_len = cfg.epoch_length > 0 ? cfg.epoch_length : std::max(100, cfg.max_iter / 20);

    Vector theta = project(set, oracle.start(), m);
    double theta_risk = oracle.risk(theta);
    SolveResult res;

    auto try_candidates = [&]() {
        if constexpr (requires { oracle.candidates(theta); }) {
            for (const Vector& c : oracle.candidates(theta)) {
                if (!contains(set, c, 1e-12)) continue;
                const double rc = oracle.risk(c);
                // Ties within rounding go to the candidate.
                if (rc <= theta_risk + 1e-14 * (1.0 + std::abs(theta_risk))) {
                    theta = c;
                    theta_risk = rc;
                }
            }
        }
    };
    auto certified = [&]() {
        res.certificate = certify(oracle, set, m, theta, cfg.n_probes);
        return res.certificate <= cfg.tol * (1.0 + std::abs(theta_risk));
    };

    try_candidates();
    res.converged = certified();
    double c = cfg.step_c;
    int it = 0;
    while (!res.converged && it < cfg.max_iter) {
        const int len = std::min(epoch_len, cfg.max_iter - it);
        const int suffix_start = len - std::max(1, static_cast<int>(std::ceil(cfg.suffix_fraction * len)));
        Vector x = theta;
        Vector suffix_sum = Vector::Zero(d);
        int suffix_count = 0;
        Vector best = theta;
        double best_risk = theta_risk;
        int used = 0;
        for (int j = 1; j <= len; ++j) {
            ++used;
            const Vector g = oracle.subgrad(x);
            const Vector dir = m.solve(g);
            const double gnorm = std::sqrt(std::max(0.0, g.dot(dir)));
            if (gnorm == 0.0) {
                // Stationary point of the unconstrained risk.
                suffix_sum = x;
                suffix_count = 1;
                break;
            }
            double eta;
            if (cfg.step_rule == SolverConfig::StepRule::polyak)
                eta = std::max(0.0, oracle.risk(x) - *cfg.f_min) / (gnorm * gnorm);
            else
                eta = c / std::pow(static_cast<double>(j), cfg.step_exponent) * std::min(1.0, r / gnorm);
            const Vector next = project(set, x - eta * dir, m);
            if (next == x) {
                suffix_sum = x;
                suffix_count = 1;
                break;
            }
            x = next;
            const double rx = oracle.risk(x);
            if (rx < best_risk) {
                best = x;
                best_risk = rx;
            }
            if (j > suffix_start) {
                suffix_sum += x;
                ++suffix_count;
            }
        }
        it += used;
        const Vector avg = project(set, suffix_sum / static_cast<double>(std::max(1, suffix_count)), m);
        const double avg_risk = oracle.risk(avg);
        if (avg_risk <= best_risk) {
            best = avg;
            best_risk = avg_risk;
        }
        if (best_risk <= theta_risk) {
            theta = best;
            theta_risk = best_risk;
        }
        try_candidates();
        res.converged = certified();
        c *= 0.5;
    }
    res.theta_hat = theta;
    res.risk = theta_risk;
    res.iterations = it;
    return res;
}

inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
    SolverConfig cfg;
    if (j.is_null()) return cfg;
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.suffix_fraction = j.value("averaging", cfg.suffix_fraction);
    cfg.epoch_length = j.value("epoch_length", cfg.epoch_length);
    cfg.n_probes = j.value("n_probes", cfg.n_probes);
    if (j.contains("step_rule")) {
        const auto& s = j.at("step_rule");
        const std::string kind = s.is_string() ? s.get<std::string>() : s.at("type").get<std::string>();
        if (kind == "decaying") {
            cfg.step_rule = SolverConfig::StepRule::decaying;
            if (s.is_object()) {
                cfg.step_c = s.value("c", cfg.step_c);
                cfg.step_exponent = s.value("exponent", cfg.step_exponent);
            }
        } else if (kind == "polyak") {
            cfg.step_rule = SolverConfig::StepRule::polyak;
            if (s.is_object() && s.contains("f_min_estimate")) cfg.f_min = s.at("f_min_estimate").get<double>();
        } else {
            throw InvalidArgument("solver: unknown step_rule \"" + kind + "\"");
        }
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json solver_config_to_json(const SolverConfig& cfg) {
    nlohmann::json step;
    if (cfg.step_rule == SolverConfig::StepRule::polyak) {
        step = {{"type", "polyak"}};
        if (cfg.f_min) step["f_min_estimate"] = *cfg.f_min;
    } else {
        step = {{"type", "decaying"}, {"c", cfg.step_c}, {"exponent", cfg.step_exponent}};
    }
    return {{"max_iter", cfg.max_iter}, {"tol", cfg.tol},           {"step_rule", step},
            {"averaging", cfg.suffix_fraction}, {"epoch_length", cfg.epoch_length}, {"n_probes", cfg.n_probes}};
}

}  // namespace cmest
