// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--only N]

#include "cmest/cmest.hpp"
#include "support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace cmest;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

json load(const std::string& name) {
    std::ifstream in(std::string(CMEST_CONFIGS) + "/" + name);
    if (!in) throw InvalidArgument("missing config " + name);
    return json::parse(in);
}

Report run_config(const std::string& name) { return run_experiment(experiment_config_from_json(load(name))); }

// Worst values seen per property.
struct GeometryTally {
    double characterization = -1e300;
    double nonexpansive = -1e300;
    double fd_rel = 0.0;
    double orth = 0.0;
    double cone = 0.0;
    double homogeneity = 0.0;
    double firm = -1e300;
    double ray = -1e300;
    bool zero_ok = true;
    int instances = 0;
};

Verdict geometry_suite() {
    using testing::SetKind;
    GeometryTally t;
    CounterRng rng(derive_seed(20261018, {1}));
    for (SetKind kind : {SetKind::ball, SetKind::box, SetKind::polyhedron, SetKind::cone}) {
        for (int rep = 0; rep < 200; ++rep, ++t.instances) {
            const Eigen::Index d = 2 + rep % 3;
            const ConvexSet set = testing::random_set(rng, kind, d);
            const SpdMetric m = testing::random_metric(rng, d);
            const Vector x = testing::random_point(rng, set, m, rep);
            const Vector x2 = testing::random_point(rng, set, m, rep + 1);
            const Vector z = rng.normal_vector(d);
            const Vector z2 = rng.normal_vector(d);
            const Vector y = project(set, x, m);

            t.characterization = std::max(t.characterization, characterization_gap(set, x, y, m));
            t.nonexpansive = std::max(t.nonexpansive, m.norm(y - project(set, x2, m)) - m.norm(x - x2));

            const Vector dp = dproj(set, x, z, m);
            t.fd_rel = std::max(t.fd_rel, (dp - dproj_fd(set, x, z, m)).norm() / std::max(1.0, z.norm()));

            const Vector r = x - y;
            t.orth = std::max(t.orth, std::abs(m.inner(dp, r)) / (1.0 + m.norm(r) * m.norm(dp)));
            const SupportConeRep cone = support_cone(set, y);
            if (!cone_contains(cone, dp, 1e-6 * (1.0 + dp.norm()))) t.cone = std::max(t.cone, 1.0);
            t.cone = std::max(t.cone, (project_cone(cone, dp, m) - dp).norm() / (1.0 + dp.norm()));

            for (double lam : {0.5, 2.0, 7.0})
                t.homogeneity = std::max(t.homogeneity, (dproj(set, x, lam * z, m) - lam * dp).norm() /
                                                            std::max(1.0, lam * dp.norm()));
            t.zero_ok = t.zero_ok && dproj(set, x, Vector::Zero(d), m).isZero(0.0);

            const Vector dp2 = dproj(set, x, z2, m);
            const Vector dd = dp2 - dp;
            t.firm = std::max(t.firm, m.inner(dd, dd) - m.inner(dd, z2 - z));

            // Along the ray from the projection through an exterior point.
            if (m.norm(r) > 1e-9 && kind != SetKind::box) {
                const std::vector<double> ts{0.0, 0.25, 0.5, 1.0, 2.0, 5.0};
                double prev = m.norm(dproj(set, y, z, m));
                for (std::size_t i = 1; i < ts.size(); ++i) {
                    const double cur = m.norm(dproj(set, y + ts[i] * r, z, m));
                    t.ray = std::max(t.ray, cur - prev);
                    prev = cur;
                }
            }
        }
    }
    const bool pass = t.characterization <= 1e-6 && t.nonexpansive <= 1e-8 && t.fd_rel <= 1e-4 && t.orth <= 1e-6 &&
                      t.cone <= 1e-6 && t.homogeneity <= 1e-10 && t.firm <= 1e-6 && t.ray <= 1e-6 && t.zero_ok;
    return {pass, std::to_string(t.instances) + " instances; char " + fmt(t.characterization) + ", nonexp " +
                      fmt(t.nonexpansive) + ", fd " + fmt(t.fd_rel) + ", orth " + fmt(t.orth) + ", cone " +
                      fmt(t.cone) + ", homog " + fmt(t.homogeneity) + ", firm " + fmt(t.firm) + ", ray " +
                      fmt(t.ray)};
}

Verdict closed_forms() {
    using testing::SetKind;
    CounterRng rng(derive_seed(20261018, {2}));
    double worst_mean = 0.0;
    int instances = 0;
    bool feasible = true;
    const SetKind kinds[] = {SetKind::ball, SetKind::box, SetKind::polyhedron};
    for (int rep = 0; rep < 50; ++rep, ++instances) {
        const Eigen::Index d = 2 + rep % 3;
        const ConvexSet set = testing::random_set(rng, kinds[rep % 3], d);
        const SpdMetric m = testing::random_metric(rng, d);
        const Eigen::Index n = 30 + 10 * (rep % 5);
        const Matrix data = Matrix::NullaryExpr(d, n, [&] { return 2.0 * rng.normal(); });
        const Vector want = project(set, data.rowwise().mean(), SpdMetric::identity(d));
        const auto res = minimize(EmpiricalRisk(SquaredLoss{}, data, d), set, m);
        worst_mean = std::max(worst_mean, m.norm(res.theta_hat - want));
        feasible = feasible && contains(set, res.theta_hat, 1e-9);
    }
    int mismatches = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 21 + 2 * rep;
        Matrix data = Matrix::NullaryExpr(1, n, [&] { return rng.normal(); });
        std::vector<double> sorted(data.data(), data.data() + n);
        std::sort(sorted.begin(), sorted.end());
        const auto med = minimize(EmpiricalRisk(NormLoss{}, data, 1), FullSpace{1}, SpdMetric::identity(1));
        mismatches += med.theta_hat[0] != sorted[static_cast<std::size_t>(n / 2)];
        for (double alpha : {0.1, 0.3, 0.75}) {
            const auto q = minimize(EmpiricalRisk(GeoQuantileLoss(alpha, testing::vec({1})), data, 1), FullSpace{1},
                                    SpdMetric::identity(1));
            const auto idx = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n))) - 1;
            mismatches += q.theta_hat[0] != sorted[idx];
        }
    }
    return {worst_mean <= 1e-5 && feasible && mismatches == 0,
            std::to_string(instances) + " constrained means, worst S-norm error " + fmt(worst_mean) +
                "; order-statistic mismatches " + std::to_string(mismatches) + "/80"};
}

Verdict consistency() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"consistency_ball_mean.json", "consistency_geomedian.json"}) {
        const Report r = run_config(name);
        const auto& per_n = r.results.at("per_n");
        std::vector<double> med;
        for (const auto& p : per_n) med.push_back(p.at("median_dist").get<double>());
        bool decreasing = true;
        for (std::size_t i = 1; i < med.size(); ++i) decreasing = decreasing && med[i] < med[i - 1];
        pass = pass && decreasing && med.back() <= 0.05 && per_n.back().at("n").get<int>() == 4000;
        detail += std::string(detail.empty() ? "" : "; ") + name + " median dist";
        for (double v : med) detail += " " + fmt(v);
    }
    return {pass, detail};
}

double frequency_at(const Report& r, int n) {
    for (const auto& p : r.results.at("per_n"))
        if (p.at("n").get<int>() == n) return p.at("recovery_frequency").get<double>();
    throw InvalidArgument("no n=" + std::to_string(n) + " in recovery output");
}

Verdict exact_recovery() {
    const Report atom = run_config("recovery_atom_median.json");
    const Report cont = run_config("recovery_continuous_median.json");
    const double fa = frequency_at(atom, 500);
    const double fc = frequency_at(cont, 500);
    return {fa >= 0.95 && fc <= 0.05 && atom.rows.size() >= 400,
            "atom median " + fmt(fa) + " (" + atom.results.at("label").get<std::string>() + "), continuous " +
                fmt(fc) + " (" + cont.results.at("label").get<std::string>() + ") at n=500"};
}

Verdict limit_distribution() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"clt_unconstrained_mean.json", "clt_constrained_mean.json", "clt_halfspace_mean.json"}) {
        const auto cfg = experiment_config_from_json(load(name));
        const Report r = run_experiment(cfg);
        const double rate = r.results.at("non_rejection_rate").get<double>();
        pass = pass && rate >= 0.9 && cfg.meta_replicates == 20 && cfg.n_grid.back() == 2000 && cfg.replicates == 300;
        detail += std::string(detail.empty() ? "" : "; ") + name + " non-rejection " + fmt(rate);
        if (std::string(name) == "clt_constrained_mean.json") {
            const double v = r.results.at("normal_variance_empirical").get<double>();
            pass = pass && v <= 0.01;
            detail += ", normal variance " + fmt(v);
        }
    }
    return {pass, detail};
}

// 4 Var(E|X - X'| given X) for X ~ N(0, 1), by quadrature.
constexpr double kGiniScaledVariance = 0.6510063177670258;

Verdict u_statistics() {
    const Report lln = run_config("gini_lln.json");
    double worst_lln = 0.0;
    for (const auto& row : lln.rows) worst_lln = std::max(worst_lln, std::get<double>(row[2]) * 3.0);

    const Report clt = run_config("gini_clt.json");
    const double emp = clt.results.at("empirical_cov")[0][0].get<double>();
    const double rel = std::abs(emp - kGiniScaledVariance) / kGiniScaledVariance;

    const Report oja = run_config("oja_consistency.json");
    double oja_med = 1e300;
    for (const auto& p : oja.results.at("per_n"))
        if (p.at("n").get<int>() == 800) oja_med = p.at("median_dist").get<double>();

    return {worst_lln <= 0.02 && rel <= 0.15 && oja_med <= 0.08,
            "Gini LLN worst relative error " + fmt(worst_lln) + "; Gini scaled variance " + fmt(emp) + " vs " +
                fmt(kGiniScaledVariance) + " (" + fmt(100.0 * rel) + "%); Oja median dist at n=800 " + fmt(oja_med)};
}

Verdict prop_trace() {
    const Report r = run_config("prop_atom_median.json");
    const auto& per_n = r.results.at("per_n");
    std::vector<double> rmse, mean;
    for (const auto& p : per_n) {
        rmse.push_back(p.at("rmse").get<double>());
        mean.push_back(p.at("mean_scaled_increment").get<double>());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < rmse.size(); ++i) monotone = monotone && rmse[i] < rmse[i - 1];
    const bool at_1e5 = per_n.back().at("n").get<int>() == 100000;
    std::string detail = "rmse";
    for (double v : rmse) detail += " " + fmt(v);
    detail += "; mean at n=1e5 " + fmt(mean.back());
    return {monotone && at_1e5 && std::abs(mean.back() - 0.5) <= 0.05, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism() {
    const fs::path dir = fs::temp_directory_path() / "cmest_acceptance_determinism";
    fs::remove_all(dir);
    for (const char* sub : {"a", "b"}) {
        const std::string cmd = std::string(CMEST_CLI) + " run --config " + CMEST_CONFIGS +
                                "/clt_constrained_mean.json --out " + (dir / sub).string() + " > /dev/null";
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "cmest run failed"};
    }
    const std::string a = slurp(dir / "a" / "rows.csv");
    const std::string b = slurp(dir / "b" / "rows.csv");
    fs::remove_all(dir);
    return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc == 3 && std::string(argv[1]) == "--only") only = std::atoi(argv[2]);

    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"geometry properties", geometry_suite},  {"closed-form solver equivalence", closed_forms},
        {"consistency", consistency},             {"exact recovery", exact_recovery},
        {"limit distribution", limit_distribution}, {"U-statistics", u_statistics},
        {"non-smooth increments", prop_trace},    {"determinism", determinism}};

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<int>(i + 1) != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << v.detail
                  << " [" << fmt(secs) << " s]" << std::endl;
    }
    return failures ? 1 : 0;
}
