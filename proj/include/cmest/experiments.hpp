#pragma once

// Seeded Monte Carlo experiments: consistency, exact recovery, limit laws
// and scaled risk increments. Replicate r at grid index i of meta-replicate
// j draws its data from derive_seed(master_seed, {j, i, r}); nothing shares
// a sequential stream, so every row is reproducible on its own.

#include "cmest/asymptotics.hpp"
#include "cmest/core.hpp"
#include "cmest/distributions.hpp"
#include "cmest/energy.hpp"
#include "cmest/geometry.hpp"
#include "cmest/losses.hpp"
#include "cmest/metric.hpp"
#include "cmest/random.hpp"
#include "cmest/solver.hpp"
#include "cmest/ustat.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace cmest {

using ModelKind = std::variant<LossModel, UKernel>;

struct ExperimentConfig {
    std::string experiment;
    Distribution distribution;
    ModelKind model = LossModel{SquaredLoss{}};
    std::optional<std::uint64_t> budget;  // U-statistics: sampled subsets
    ConvexSet constraint = FullSpace{1};
    SpdMetric metric = SpdMetric::identity(1);
    std::vector<Eigen::Index> n_grid;
    int replicates = 100;
    std::uint64_t master_seed = 0;
    SolverConfig solver;
    int permutations = 500;
    double alpha = 0.05;
    int meta_replicates = 1;
    std::string estimator = "solver";  // or "order_statistic" (1-D)
    std::optional<Vector> theta;       // prop_nonsmooth
    std::optional<Vector> t;
    nlohmann::json raw;

    Eigen::Index dim() const {
        if (const auto* l = std::get_if<LossModel>(&model)) return param_dim(*l, datum_dim(distribution));
        return param_dim(std::get<UKernel>(model));
    }
    int order() const {
        if (const auto* k = std::get_if<UKernel>(&model)) return cmest::order(*k);
        return 1;
    }
};

// Tags for the non-replicate streams.
inline constexpr std::uint64_t kTagLimit = 0x4c494d4954ULL;
inline constexpr std::uint64_t kTagTest = 0x54455354ULL;
inline constexpr std::uint64_t kTagB = 0x42ULL;
inline constexpr std::uint64_t kTagPlan = 0x504c414eULL;

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    detail::require(j.is_object(), "config: expected a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.experiment = j.at("experiment").get<std::string>();
    static const std::vector<std::string> known{"consistency", "clt", "exact_recovery", "prop_nonsmooth"};
    if (std::find(known.begin(), known.end(), cfg.experiment) == known.end())
        throw InvalidArgument("config: unknown experiment \"" + cfg.experiment + "\"");
    cfg.distribution = distribution_from_json(j.at("distribution"));
    const auto& model = j.at("model");
    const Eigen::Index dd = datum_dim(cfg.distribution);
    if (model.contains("ukernel")) {
        cfg.model = kernel_from_json(model, dd);
        cfg.budget = budget_from_json(model);
    } else {
        const Eigen::Index pd = model.at("loss") == "regression" ? dd - 1 : dd;
        detail::require(pd >= 1, "config: loss does not fit the data");
        const LossModel loss = loss_from_json(model, pd);
        if (const auto* g = std::get_if<GeoQuantileLoss>(&loss)) detail::require_dim(g->u.size(), pd, "config: geoquantile u");
        cfg.model = loss;
    }
    const Eigen::Index d = cfg.dim();
    cfg.constraint = j.contains("constraint") ? set_from_json(j.at("constraint")) : ConvexSet{FullSpace{d}};
    detail::require_dim(cmest::dim(cfg.constraint), d, "config: constraint");
    cfg.metric = metric_from_json(j.contains("metric") ? j.at("metric") : nlohmann::json(), d);
    cfg.n_grid = j.at("n_grid").get<std::vector<Eigen::Index>>();
    detail::require(!cfg.n_grid.empty(), "config: n_grid is empty");
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        detail::require(cfg.n_grid[i] >= cfg.order() + 1, "config: n_grid entries too small");
        detail::require(i == 0 || cfg.n_grid[i] > cfg.n_grid[i - 1], "config: n_grid must be increasing");
    }
    cfg.replicates = j.value("replicates", cfg.replicates);
    detail::require(cfg.replicates >= 1, "config: replicates must be >= 1");
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    cfg.solver = solver_config_from_json(j.contains("solver") ? j.at("solver") : nlohmann::json());
    if (j.contains("test")) {
        cfg.permutations = j.at("test").value("permutations", cfg.permutations);
        cfg.alpha = j.at("test").value("alpha", cfg.alpha);
    }
    detail::require(cfg.permutations >= 1, "config: permutations must be >= 1");
    detail::require(cfg.alpha > 0.0 && cfg.alpha < 1.0, "config: alpha must lie in (0, 1)");
    cfg.meta_replicates = j.value("meta_replicates", 1);
    detail::require(cfg.meta_replicates >= 1, "config: meta_replicates must be >= 1");
    cfg.estimator = j.value("estimator", cfg.estimator);
    detail::require(cfg.estimator == "solver" || cfg.estimator == "order_statistic",
                    "config: estimator must be \"solver\" or \"order_statistic\"");
    if (cfg.estimator == "order_statistic") {
        const auto* l = std::get_if<LossModel>(&cfg.model);
        detail::require(d == 1 && l && (std::holds_alternative<NormLoss>(*l) || std::holds_alternative<GeoQuantileLoss>(*l)),
                        "config: order_statistic needs a 1-D norm or geoquantile loss");
    }
    if (j.contains("theta")) cfg.theta = detail::vector_from_json(j.at("theta"), "theta");
    if (j.contains("t")) cfg.t = detail::vector_from_json(j.at("t"), "t");
    if (cfg.experiment == "clt")
        detail::require(cfg.replicates >= 50, "config: distributional tests need replicates >= 50");
    if (cfg.experiment == "prop_nonsmooth") {
        detail::require(cfg.theta.has_value() && cfg.t.has_value(), "config: prop_nonsmooth needs theta and t");
        detail::require_dim(cfg.theta->size(), d, "config: theta");
        detail::require_dim(cfg.t->size(), d, "config: t");
    }
    return cfg;
}

// --- reports ----------------------------------------------------------------

using Cell = std::variant<std::int64_t, double, std::string>;

struct Report {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
    nlohmann::json results;
};

/// Shortest round-trip decimal.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string to_csv(const Report& report) {
    std::string out;
    for (std::size_t i = 0; i < report.header.size(); ++i) out += (i ? "," : "") + report.header[i];
    out += '\n';
    for (const auto& row : report.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            std::visit(overloaded{[&](std::int64_t v) { out += std::to_string(v); },
                                  [&](double v) { out += format_double(v); },
                                  [&](const std::string& v) { out += v; }},
                       row[i]);
        }
        out += '\n';
    }
    return out;
}

/// FNV-1a over the canonical (key-sorted, compact) JSON text.
inline std::string config_hash(const nlohmann::json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// --- estimation -------------------------------------------------------------

/// Calls f(oracle) with the empirical risk of `data` under the model.
template <class F>
decltype(auto) with_empirical(const ExperimentConfig& cfg, const Matrix& data, std::uint64_t plan_seed, F&& f) {
    if (const auto* l = std::get_if<LossModel>(&cfg.model)) return f(EmpiricalRisk(*l, data, cfg.dim()));
    const UKernel& k = std::get<UKernel>(cfg.model);
    return f(UObjective(k, data, SubsetPlan::make(data.cols(), cmest::order(k), cfg.budget, plan_seed)));
}

/// 1-D sample quantile x_(ceil(a n)), a = alpha (or 1 - alpha for u = -1).
inline double order_statistic(const LossModel& loss, const Matrix& data) {
    double a = 0.5;
    if (const auto* g = std::get_if<GeoQuantileLoss>(&loss)) a = g->u[0] > 0.0 ? g->alpha : 1.0 - g->alpha;
    std::vector<double> v(data.row(0).data(), data.row(0).data() + data.cols());
    const auto n = static_cast<double>(v.size());
    auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(a * n - 1e-12)));
    rank = std::min(rank, v.size());
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
    return v[rank - 1];
}

inline SolveResult estimate(const ExperimentConfig& cfg, const Matrix& data, std::uint64_t plan_seed) {
    if (cfg.estimator == "order_statistic") {
        SolveResult res;
        const auto& loss = std::get<LossModel>(cfg.model);
        res.theta_hat = project(cfg.constraint, Vector::Constant(1, order_statistic(loss, data)), cfg.metric);
        res.risk = empirical_risk(loss, data, res.theta_hat);
        res.converged = true;
        return res;
    }
    return with_empirical(cfg, data, plan_seed,
                          [&](const auto& oracle) { return minimize(oracle, cfg.constraint, cfg.metric, cfg.solver); });
}

inline Matrix replicate_data(const ExperimentConfig& cfg, std::uint64_t meta, std::uint64_t n_index,
                             std::uint64_t rep) {
    CounterRng rng(derive_seed(cfg.master_seed, {meta, n_index, rep}));
    return sample(cfg.distribution, cfg.n_grid[n_index], rng);
}

inline std::uint64_t plan_seed(const ExperimentConfig& cfg, std::uint64_t meta, std::uint64_t n_index,
                               std::uint64_t rep) {
    return derive_seed(cfg.master_seed, {meta, n_index, rep, kTagPlan});
}

// --- population quantities ---------------------------------------------------

class Population {
public:
    explicit Population(const ExperimentConfig& cfg) {
        if (const auto* l = std::get_if<LossModel>(&cfg.model))
            m_.emplace(cfg.distribution, *l);
        else
            u_.emplace(cfg.distribution, std::get<UKernel>(cfg.model));
    }

    template <class F>
    decltype(auto) visit(F&& f) const {
        return m_ ? f(*m_) : f(*u_);
    }

    double risk(const Vector& theta) const {
        return visit([&](const auto& o) { return o.risk(theta); });
    }
    Vector subgrad(const Vector& theta) const {
        return visit([&](const auto& o) -> Vector { return o.subgrad(theta); });
    }
    std::string method() const {
        return visit([](const auto& o) { return std::string(o.method()); });
    }
    ScalarField field() const {
        return [this](const Vector& t) { return risk(t); };
    }

private:
    std::optional<PopulationRisk> m_;
    std::optional<UPopulationRisk> u_;
};

struct ThetaStar {
    Vector value;
    std::string provenance;
};

/// Closed form where one is available, otherwise a reference solve on the
/// population oracle.
inline ThetaStar theta_star(const ExperimentConfig& cfg, const Population& pop) {
    const Distribution& dist = cfg.distribution;
    const Eigen::Index d = cfg.dim();
    const auto center = center_of_symmetry(dist);
    if (const auto* l = std::get_if<LossModel>(&cfg.model)) {
        if (std::holds_alternative<SquaredLoss>(*l))
            return {project(cfg.constraint, mean_of(dist), SpdMetric::identity(d)), "closed_form: projection of the mean"};
        if (const auto* r = std::get_if<RegressionLoss>(l);
            r && r->inner.kind == ScalarLoss::Kind::half_square && std::holds_alternative<RegressionLaw>(dist)) {
            const auto& law = std::get<RegressionLaw>(dist);
            return {project(cfg.constraint, law.theta0, SpdMetric(law.x_cov)),
                    "closed_form: x_cov projection of theta0"};
        }
        if (std::holds_alternative<LinearLoss>(*l)) {
            const Vector mu = mean_of(dist);
            if (const auto* box = std::get_if<Box>(&cfg.constraint)) {
                Vector v(d);
                for (Eigen::Index i = 0; i < d; ++i) v[i] = mu[i] > 0.0 ? box->lo[i] : box->hi[i];
                if ((mu.array() != 0.0).all()) return {v, "closed_form: box vertex"};
            }
            if (const auto* ball = std::get_if<Ball>(&cfg.constraint); ball && mu.norm() > 0.0)
                return {ball->center - ball->radius * mu.normalized(), "closed_form: ball boundary point"};
        }
        const bool symmetric_loss =
            std::holds_alternative<NormLoss>(*l) || std::holds_alternative<HuberLocLoss>(*l) ||
            (std::holds_alternative<GeoQuantileLoss>(*l) && std::get<GeoQuantileLoss>(*l).alpha == 0.5);
        if (symmetric_loss && center && contains(cfg.constraint, *center, 0.0))
            return {*center, "closed_form: center of symmetry"};
    } else {
        const UKernel& k = std::get<UKernel>(cfg.model);
        if (!std::holds_alternative<GiniKernel>(k) && center && contains(cfg.constraint, *center, 0.0))
            return {*center, "closed_form: center of symmetry"};
        if (const auto* g = std::get_if<GiniKernel>(&k);
            g && g->inner.kind != ScalarLoss::Kind::abs && g->inner.kind != ScalarLoss::Kind::huber) {
            // Square inner: theta* = E ||X_1 - X_2||^p.
            std::optional<double> v;
            if (g->p == 2.0) v = 2.0 * cov_of(dist).trace();
            if (g->p == 1.0 && datum_dim(dist) == 1) {
                if (const auto* gl = std::get_if<GaussianLaw>(&dist))
                    v = 2.0 * std::sqrt(gl->cov(0, 0)) / std::sqrt(std::numbers::pi);
                if (const auto* ul = std::get_if<UniformLaw>(&dist)) v = (ul->hi[0] - ul->lo[0]) / 3.0;
            }
            if (v && contains(cfg.constraint, Vector::Constant(1, *v), 0.0))
                return {Vector::Constant(1, *v), "closed_form: mean pairwise distance"};
        }
    }
    SolverConfig ref;
    ref.max_iter = 4000;
    ref.tol = 1e-9;
    const SolveResult res =
        pop.visit([&](const auto& o) { return minimize(o, cfg.constraint, cfg.metric, ref); });
    return {res.theta_hat, "reference_solve: " + pop.method() + (res.converged ? "" : " (uncertified)")};
}

/// S, grad Phi(theta*), B and k for the limit law. grad Phi(theta*) is set
/// to zero when theta* is interior (first-order condition), which keeps
/// Monte Carlo noise out of the interior case.
inline LimitLawSpec build_limit_law(const ExperimentConfig& cfg, const Population& pop, const Vector& ts) {
    const Eigen::Index d = ts.size();
    LimitLawSpec spec;
    spec.theta_star = ts;
    spec.set = cfg.constraint;
    spec.k = cfg.order();
    bool interior = std::holds_alternative<FullSpace>(cfg.constraint);
    if (!interior) interior = std::holds_alternative<FullSpace>(support_cone(cfg.constraint, ts));
    spec.grad_phi = interior ? Vector::Zero(d) : pop.subgrad(ts);
    spec.s = estimate_hessian(pop.field(), ts, 1e-3);
    if (const auto* l = std::get_if<LossModel>(&cfg.model); l && std::holds_alternative<SquaredLoss>(*l)) {
        spec.b = cov_of(cfg.distribution);
    } else {
        CounterRng rng(derive_seed(cfg.master_seed, {kTagB}));
        if (const auto* loss = std::get_if<LossModel>(&cfg.model)) {
            spec.b = estimate_b(*loss, sample(cfg.distribution, 20000, rng), ts);
        } else {
            spec.b = estimate_b(std::get<UKernel>(cfg.model), sample(cfg.distribution, 2000, rng), ts,
                                derive_seed(cfg.master_seed, {kTagB, 1}));
        }
    }
    spec.validate(1e-4);
    return spec;
}

// --- experiments --------------------------------------------------------------

namespace detail {

inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void add_theta_columns(std::vector<std::string>& header, const char* prefix, Eigen::Index d) {
    for (Eigen::Index i = 0; i < d; ++i) header.push_back(std::string(prefix) + std::to_string(i + 1));
}

}  // namespace detail

/// dist(theta_hat_n, theta*) per (n, replicate).
inline Report run_consistency(const ExperimentConfig& cfg) {
    const Population pop(cfg);
    const ThetaStar ts = theta_star(cfg, pop);
    const Eigen::Index d = cfg.dim();
    Report rep;
    rep.header = {"n", "replicate", "dist", "converged", "iterations"};
    detail::add_theta_columns(rep.header, "theta_hat_", d);
    nlohmann::json per_n = nlohmann::json::array();
    bool degraded = false;
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        std::vector<double> dists;
        int failures = 0;
        for (int r = 0; r < cfg.replicates; ++r) {
            const Matrix data = replicate_data(cfg, 0, i, static_cast<std::uint64_t>(r));
            const SolveResult res = estimate(cfg, data, plan_seed(cfg, 0, i, static_cast<std::uint64_t>(r)));
            const double dist = (res.theta_hat - ts.value).norm();
            dists.push_back(dist);
            failures += res.converged ? 0 : 1;
            std::vector<Cell> row{static_cast<std::int64_t>(cfg.n_grid[i]), std::int64_t{r}, dist,
                                  std::int64_t{res.converged ? 1 : 0}, std::int64_t{res.iterations}};
            for (Eigen::Index k = 0; k < d; ++k) row.emplace_back(res.theta_hat[k]);
            rep.rows.push_back(std::move(row));
        }
        std::sort(dists.begin(), dists.end());
        const double fail_rate = static_cast<double>(failures) / cfg.replicates;
        degraded = degraded || fail_rate > 0.05;
        per_n.push_back({{"n", cfg.n_grid[i]},
                         {"median_dist", detail::quantile_sorted(dists, 0.5)},
                         {"q90_dist", detail::quantile_sorted(dists, 0.9)},
                         {"nonconverged_rate", fail_rate}});
    }
    rep.results = {{"theta_star", detail::to_json_array(ts.value)},
                   {"theta_star_provenance", ts.provenance},
                   {"per_n", per_n},
                   {"degraded", degraded}};
    return rep;
}

/// Frequency of theta_hat_n = theta* (within 10 tol) per n.
inline Report run_exact_recovery(const ExperimentConfig& cfg) {
    const Population pop(cfg);
    const ThetaStar ts = theta_star(cfg, pop);
    const RecoveryCondition cond = check_exact_recovery_condition(pop.field(), ts.value, cfg.constraint);
    const Eigen::Index d = cfg.dim();
    const double radius = 10.0 * cfg.solver.tol;
    Report rep;
    rep.header = {"n", "replicate", "recovered", "dist"};
    detail::add_theta_columns(rep.header, "theta_hat_", d);
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        int hits = 0;
        for (int r = 0; r < cfg.replicates; ++r) {
            const Matrix data = replicate_data(cfg, 0, i, static_cast<std::uint64_t>(r));
            const SolveResult res = estimate(cfg, data, plan_seed(cfg, 0, i, static_cast<std::uint64_t>(r)));
            const double dist = (res.theta_hat - ts.value).norm();
            const bool ok = dist <= radius;
            hits += ok ? 1 : 0;
            std::vector<Cell> row{static_cast<std::int64_t>(cfg.n_grid[i]), std::int64_t{r}, std::int64_t{ok ? 1 : 0},
                                  dist};
            for (Eigen::Index k = 0; k < d; ++k) row.emplace_back(res.theta_hat[k]);
            rep.rows.push_back(std::move(row));
        }
        per_n.push_back({{"n", cfg.n_grid[i]}, {"recovery_frequency", static_cast<double>(hits) / cfg.replicates}});
    }
    const bool met = cond.interior_condition || cond.cone_condition;
    rep.results = {{"theta_star", detail::to_json_array(ts.value)},
                   {"theta_star_provenance", ts.provenance},
                   {"condition",
                    {{"interior_condition", cond.interior_condition},
                     {"cone_condition", cond.cone_condition},
                     {"interior_min", cond.interior_min},
                     {"cone_min", cond.cone_min},
                     {"margin", cond.margin}}},
                   {"label", met ? "condition met" : "condition not met"},
                   {"per_n", per_n}};
    return rep;
}

/// sqrt(n)(theta_hat - theta*) at the largest n against draws from the limit
/// law, with an energy test per meta-replicate.
inline Report run_clt(const ExperimentConfig& cfg) {
    const Population pop(cfg);
    const ThetaStar ts = theta_star(cfg, pop);
    const LimitLawSpec spec = build_limit_law(cfg, pop, ts.value);
    const Eigen::Index d = cfg.dim();
    const std::size_t ni = cfg.n_grid.size() - 1;
    const auto n = static_cast<double>(cfg.n_grid[ni]);
    const int m = cfg.replicates;

    Report rep;
    rep.header = {"meta", "sample", "index", "converged"};
    detail::add_theta_columns(rep.header, "z_", d);
    nlohmann::json tests = nlohmann::json::array();
    Matrix all_emp(d, static_cast<Eigen::Index>(m) * cfg.meta_replicates);
    Matrix all_lim(d, static_cast<Eigen::Index>(m) * cfg.meta_replicates);
    int accepted = 0, failures = 0;
    bool fd_fallback = false;
    for (int j = 0; j < cfg.meta_replicates; ++j) {
        const auto mj = static_cast<std::uint64_t>(j);
        Matrix emp(d, m);
        for (int r = 0; r < m; ++r) {
            const Matrix data = replicate_data(cfg, mj, ni, static_cast<std::uint64_t>(r));
            const SolveResult res = estimate(cfg, data, plan_seed(cfg, mj, ni, static_cast<std::uint64_t>(r)));
            failures += res.converged ? 0 : 1;
            emp.col(r) = std::sqrt(n) * (res.theta_hat - ts.value);
            std::vector<Cell> row{std::int64_t{j}, std::string("empirical"), std::int64_t{r},
                                  std::int64_t{res.converged ? 1 : 0}};
            for (Eigen::Index k = 0; k < d; ++k) row.emplace_back(emp(k, r));
            rep.rows.push_back(std::move(row));
        }
        const LimitSamples lim = sample_limit(spec, m, derive_seed(cfg.master_seed, {mj, kTagLimit}));
        fd_fallback = fd_fallback || lim.fd_fallback;
        for (int r = 0; r < m; ++r) {
            std::vector<Cell> row{std::int64_t{j}, std::string("limit"), std::int64_t{r}, std::int64_t{1}};
            for (Eigen::Index k = 0; k < d; ++k) row.emplace_back(lim.draws(k, r));
            rep.rows.push_back(std::move(row));
        }
        const TwoSampleTestResult t =
            energy_test(emp, lim.draws, cfg.permutations, derive_seed(cfg.master_seed, {mj, kTagTest}));
        const bool reject = t.p_value < cfg.alpha;
        accepted += reject ? 0 : 1;
        tests.push_back({{"meta", j},
                         {"energy_statistic", t.energy_statistic},
                         {"p_value", t.p_value},
                         {"permutations", t.permutations},
                         {"reject", reject}});
        all_emp.middleCols(static_cast<Eigen::Index>(j) * m, m) = emp;
        all_lim.middleCols(static_cast<Eigen::Index>(j) * m, m) = lim.draws;
    }
    const double k = spec.k;
    rep.results = {{"theta_star", detail::to_json_array(ts.value)},
                   {"theta_star_provenance", ts.provenance},
                   {"population_method", pop.method()},
                   {"n", cfg.n_grid[ni]},
                   {"limit_law", limit_law_to_json(spec)},
                   {"tests", tests},
                   {"non_rejection_rate", static_cast<double>(accepted) / cfg.meta_replicates},
                   {"empirical_cov", detail::to_json_array(sample_covariance(all_emp))},
                   {"limit_cov", detail::to_json_array(sample_covariance(all_lim))},
                   {"scaled_z_cov", detail::to_json_array(Matrix(k * k * spec.z_cov()))},
                   {"nonconverged_rate", static_cast<double>(failures) / (m * cfg.meta_replicates)},
                   {"dproj_fd_fallback", fd_fallback}};
    if (spec.grad_phi.norm() > 0.0) {
        const Vector u = spec.grad_phi.normalized();
        auto var_along = [&](const Matrix& s) {
            const Vector p = s.transpose() * u;
            return (p.array() - p.mean()).square().sum() / static_cast<double>(p.size() - 1);
        };
        rep.results["normal_variance_empirical"] = var_along(all_emp);
        rep.results["normal_variance_limit"] = var_along(all_lim);
    }
    // Exploratory only: n E||theta_hat - theta*||_S^2 over its limit counterpart.
    auto mean_sq = [&](const Matrix& s) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < s.cols(); ++i) acc += spec.s.inner(s.col(i), s.col(i));
        return acc / static_cast<double>(s.cols());
    };
    const double lim_sq = mean_sq(all_lim);
    rep.results["mse_ratio"] = lim_sq > 0.0 ? nlohmann::json(mean_sq(all_emp) / lim_sq) : nlohmann::json(nullptr);
    return rep;
}

/// rho_n (Phi_n(theta + t / rho_n) - Phi_n(theta)) with rho_n = sqrt(n),
/// against the support function of dPhi(theta) at t.
inline Report run_prop_nonsmooth(const ExperimentConfig& cfg) {
    const Population pop(cfg);
    const Vector& theta = *cfg.theta;
    const Vector& t = *cfg.t;
    const double target = t.isZero(0.0) ? 0.0 : support_fn_subdiff(pop.field(), theta, t, 1e-3);
    Report rep;
    rep.header = {"n", "replicate", "rho", "scaled_increment"};
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        const double rho = std::sqrt(static_cast<double>(cfg.n_grid[i]));
        double sum = 0.0, sq = 0.0;
        for (int r = 0; r < cfg.replicates; ++r) {
            const Matrix data = replicate_data(cfg, 0, i, static_cast<std::uint64_t>(r));
            const double inc = with_empirical(cfg, data, plan_seed(cfg, 0, i, static_cast<std::uint64_t>(r)),
                                              [&](const auto& o) { return rho * (o.risk(theta + t / rho) - o.risk(theta)); });
            sum += inc;
            sq += (inc - target) * (inc - target);
            rep.rows.push_back({static_cast<std::int64_t>(cfg.n_grid[i]), std::int64_t{r}, rho, inc});
        }
        per_n.push_back({{"n", cfg.n_grid[i]},
                         {"rho", rho},
                         {"mean_scaled_increment", sum / cfg.replicates},
                         {"rmse", std::sqrt(sq / cfg.replicates)},
                         {"target", target}});
    }
    rep.results = {{"theta", detail::to_json_array(theta)},
                   {"t", detail::to_json_array(t)},
                   {"target", target},
                   {"per_n", per_n}};
    return rep;
}

inline Report run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "consistency") return run_consistency(cfg);
    if (cfg.experiment == "exact_recovery") return run_exact_recovery(cfg);
    if (cfg.experiment == "clt") return run_clt(cfg);
    return run_prop_nonsmooth(cfg);
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const Report& rep) {
    return {{"config_hash", config_hash(cfg.raw)},
            {"version", kVersion},
            {"experiment", cfg.experiment},
            {"seeds",
             {{"master_seed", cfg.master_seed},
              {"replicate_scheme", "derive_seed(master_seed, [meta, n_index, replicate])"},
              {"limit_scheme", "derive_seed(master_seed, [meta, limit_tag])"},
              {"test_scheme", "derive_seed(master_seed, [meta, test_tag])"}}},
            {"results", rep.results}};
}

/// Writes rows.csv and summary.json under out_dir (created if absent).
inline void write_outputs(const std::filesystem::path& out_dir, const ExperimentConfig& cfg, const Report& rep) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / "rows.csv", std::ios::binary);
        if (!csv) throw InvalidArgument("cannot write " + (out_dir / "rows.csv").string());
        csv << to_csv(rep);
    }
    std::ofstream js(out_dir / "summary.json", std::ios::binary);
    if (!js) throw InvalidArgument("cannot write " + (out_dir / "summary.json").string());
    js << summary_json(cfg, rep).dump(2) << '\n';
}

}  // namespace cmest
