// cmest command-line front end.
//
//   cmest run --config cfg.json --out dir [--seed N]
//   cmest project --set set.json --x "2,0" [--metric m.json]
//   cmest dproj --set set.json --x "2,0" --z "0,1" [--metric m.json] [--fd]
//   cmest estimate --config model.json --data data.csv
//   cmest selftest [--suite geometry|losses|ustat|all]
//
// Exit codes: 0 ok, 1 invalid input, 2 numeric failure.

#include "cmest/cmest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using cmest::Matrix;
using cmest::Vector;
using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cmest::InvalidArgument("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw cmest::InvalidArgument(path + ": " + e.what());
    }
}

Vector parse_vector(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw cmest::InvalidArgument("bad number \"" + item + "\"");
        }
        if (item.find_first_not_of(" \t", used) != std::string::npos)
            throw cmest::InvalidArgument("bad number \"" + item + "\"");
        vals.push_back(v);
    }
    if (vals.empty()) throw cmest::InvalidArgument("empty vector");
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// Data points as rows; a non-numeric first line is taken as a header.
Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cmest::InvalidArgument("cannot read " + path);
    std::vector<Vector> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            rows.push_back(parse_vector(line));
        } catch (const cmest::InvalidArgument&) {
            if (!first) throw;
        }
        first = false;
    }
    if (rows.empty()) throw cmest::InvalidArgument(path + ": no data rows");
    Matrix out(rows[0].size(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != out.rows()) throw cmest::InvalidArgument(path + ": ragged rows");
        out.col(static_cast<Eigen::Index>(i)) = rows[i];
    }
    return out;
}

std::string vector_text(const Vector& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += json(v[i] + 0.0).dump();
    }
    return out + "]";
}

cmest::SpdMetric metric_arg(const std::string& path, Eigen::Index d) {
    if (path.empty()) return cmest::SpdMetric::identity(d);
    return cmest::metric_from_json(read_json(path), d);
}

int cmd_run(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
    json j = read_json(config);
    if (seed) j["master_seed"] = *seed;
    const cmest::ExperimentConfig cfg = cmest::experiment_config_from_json(j);
    const cmest::Report rep = cmest::run_experiment(cfg);
    cmest::write_outputs(out, cfg, rep);
    std::cout << json{{"out", out}, {"config_hash", cmest::config_hash(cfg.raw)}, {"rows", rep.rows.size()}}.dump()
              << '\n';
    return 0;
}

int cmd_project(const std::string& set_path, const std::string& x_text, const std::string& metric_path) {
    const cmest::ConvexSet set = cmest::set_from_json(read_json(set_path));
    const Vector x = parse_vector(x_text);
    cmest::detail::require_dim(x.size(), cmest::dim(set), "project: x");
    std::cout << vector_text(cmest::project(set, x, metric_arg(metric_path, x.size()))) << '\n';
    return 0;
}

int cmd_dproj(const std::string& set_path, const std::string& x_text, const std::string& z_text,
              const std::string& metric_path, bool fd) {
    const cmest::ConvexSet set = cmest::set_from_json(read_json(set_path));
    const Vector x = parse_vector(x_text);
    const Vector z = parse_vector(z_text);
    cmest::detail::require_dim(x.size(), cmest::dim(set), "dproj: x");
    const cmest::SpdMetric m = metric_arg(metric_path, x.size());
    std::cout << vector_text(fd ? cmest::dproj_fd(set, x, z, m) : cmest::dproj(set, x, z, m)) << '\n';
    return 0;
}

int cmd_estimate(const std::string& config, const std::string& data_path) {
    const json j = read_json(config);
    const Matrix data = read_csv(data_path);
    const json& model = j.at("model");
    const cmest::SolverConfig scfg = cmest::solver_config_from_json(j.contains("solver") ? j.at("solver") : json());
    cmest::SolveResult res;
    Eigen::Index d = 0;
    auto setup = [&](Eigen::Index dim) {
        d = dim;
        const cmest::ConvexSet set =
            j.contains("constraint") ? cmest::set_from_json(j.at("constraint")) : cmest::ConvexSet{cmest::FullSpace{d}};
        cmest::detail::require_dim(cmest::dim(set), d, "estimate: constraint");
        return std::pair{set, cmest::metric_from_json(j.contains("metric") ? j.at("metric") : json(), d)};
    };
    if (model.contains("ukernel")) {
        const cmest::UKernel k = cmest::kernel_from_json(model, data.rows());
        const auto [set, m] = setup(cmest::param_dim(k));
        const auto plan = cmest::SubsetPlan::make(data.cols(), cmest::order(k), cmest::budget_from_json(model),
                                                  j.value("seed", std::uint64_t{0}));
        res = cmest::minimize(cmest::UObjective(k, data, plan), set, m, scfg);
    } else {
        const Eigen::Index pd = model.at("loss") == "regression" ? data.rows() - 1 : data.rows();
        const cmest::LossModel loss = cmest::loss_from_json(model, pd);
        const auto [set, m] = setup(pd);
        res = cmest::minimize(cmest::EmpiricalRisk(loss, data, pd), set, m, scfg);
    }
    std::cout << json{{"theta_hat", cmest::detail::to_json_array(res.theta_hat)},
                      {"risk", res.risk},
                      {"certificate", res.certificate},
                      {"iterations", res.iterations},
                      {"converged", res.converged}}
                     .dump()
              << '\n';
    return 0;
}

// Quick checks against closed forms.
bool check_geometry() {
    const cmest::SpdMetric id = cmest::SpdMetric::identity(2);
    const cmest::ConvexSet ball = cmest::Ball(Vector::Zero(2), 1.0);
    const Vector x = (Vector(2) << 2.0, 0.0).finished();
    const Vector z = (Vector(2) << 0.0, 1.0).finished();
    bool ok = (cmest::project(ball, x, id) - (Vector(2) << 1.0, 0.0).finished()).norm() < 1e-12;
    ok = ok && (cmest::dproj(ball, x, z, id) - (Vector(2) << 0.0, 0.5).finished()).norm() < 1e-12;
    const cmest::ConvexSet box = cmest::Box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const Vector y = (Vector(2) << 3.0, 0.5).finished();
    ok = ok && (cmest::project(box, y, id) - (Vector(2) << 1.0, 0.5).finished()).norm() < 1e-12;
    ok = ok && cmest::characterization_gap(box, y, cmest::project(box, y, id), id) <= 1e-10;
    return ok;
}

bool check_losses() {
    Matrix data(1, 3);
    data << 1.0, 2.0, 3.0;
    const cmest::EmpiricalRisk median(cmest::NormLoss{}, data, 1);
    const auto res = cmest::minimize(median, cmest::FullSpace{1}, cmest::SpdMetric::identity(1));
    Matrix two(2, 2);
    two << 2.0, 2.0, 0.0, 0.0;
    const cmest::EmpiricalRisk mean(cmest::SquaredLoss{}, two, 2);
    const auto cm = cmest::minimize(mean, cmest::Ball(Vector::Zero(2), 1.0), cmest::SpdMetric::identity(2));
    return std::abs(res.theta_hat[0] - 2.0) <= 1e-6 && (cm.theta_hat - (Vector(2) << 1.0, 0.0).finished()).norm() <= 1e-6;
}

bool check_ustat() {
    Matrix data(1, 4);
    data << 0.0, 1.0, 3.0, 6.0;
    // Pairwise distances 1 3 6 2 5 3: mean 10/3.
    const cmest::UKernel gini = cmest::GiniKernel{};
    const double r = cmest::u_risk(gini, data, Vector::Constant(1, 10.0 / 3.0));
    const cmest::UObjective obj(gini, data, cmest::SubsetPlan::complete(4, 2));
    return std::abs(obj.subgrad(Vector::Constant(1, 10.0 / 3.0))[0]) <= 1e-12 &&
           std::abs(obj.risk(Vector::Constant(1, 10.0 / 3.0)) - r) <= 1e-12;
}

int cmd_selftest(const std::string& suite) {
    json out;
    bool ok = true;
    auto run = [&](const char* name, bool (*fn)()) {
        if (suite != "all" && suite != name) return;
        const bool pass = fn();
        out[name] = pass ? "pass" : "fail";
        ok = ok && pass;
    };
    run("geometry", check_geometry);
    run("losses", check_losses);
    run("ustat", check_ustat);
    std::cout << out.dump() << '\n';
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained M- and U-estimation toolkit"};
    app.set_version_flag("--version", std::string(cmest::kVersion));
    app.require_subcommand(1);

    std::string config, out, set_path, metric_path, x_text, z_text, data_path, suite = "all";
    std::optional<std::uint64_t> seed;
    bool fd = false;

    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--seed", seed, "Override master_seed");

    auto* proj = app.add_subcommand("project", "Metric projection of a point");
    proj->add_option("--set", set_path, "Set JSON")->required()->check(CLI::ExistingFile);
    proj->add_option("--x", x_text, "Point, comma separated")->required();
    proj->add_option("--metric", metric_path, "Metric JSON")->check(CLI::ExistingFile);

    auto* dp = app.add_subcommand("dproj", "Directional derivative of the projection");
    dp->add_option("--set", set_path, "Set JSON")->required()->check(CLI::ExistingFile);
    dp->add_option("--x", x_text, "Base point")->required();
    dp->add_option("--z", z_text, "Direction")->required();
    dp->add_option("--metric", metric_path, "Metric JSON")->check(CLI::ExistingFile);
    dp->add_flag("--fd", fd, "Finite difference instead of the closed form");

    auto* est = app.add_subcommand("estimate", "Fit one dataset");
    est->add_option("--config", config, "Model JSON")->required()->check(CLI::ExistingFile);
    est->add_option("--data", data_path, "CSV, one point per row")->required()->check(CLI::ExistingFile);

    auto* st = app.add_subcommand("selftest", "Built-in closed-form checks");
    st->add_option("--suite", suite, "geometry|losses|ustat|all")
        ->check(CLI::IsMember({"geometry", "losses", "ustat", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*run) return cmd_run(config, out, seed);
        if (*proj) return cmd_project(set_path, x_text, metric_path);
        if (*dp) return cmd_dproj(set_path, x_text, z_text, metric_path, fd);
        if (*est) return cmd_estimate(config, data_path);
        return cmd_selftest(suite);
    } catch (const cmest::NumericFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const cmest::DegenerateHessian& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const cmest::UnsupportedCase& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const cmest::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
