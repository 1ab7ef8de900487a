// ssrmap command-line front end.
//
// Exit codes: 0 success, 2 invalid input, 3 convergence or diagnostic
// failure, 4 any other runtime error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ssrmap/errors.hpp"
#include "ssrmap/io.hpp"
#include "ssrmap/posterior.hpp"
#include "ssrmap/reference_configs.hpp"
#include "ssrmap/reproduce.hpp"
#include "ssrmap/samplesize.hpp"

#ifndef SSRMAP_VERSION
#define SSRMAP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssrmap;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitRuntime = 4;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<long> reps;
    bool json = false;
    std::string out;
    bool force = false;
};

int resolved_workers(const Globals& g) {
    if (g.workers) return *g.workers;
    if (const char* env = std::getenv("SSRMAP_WORKERS")) {
        try {
            return std::stoi(env);
        } catch (const std::exception&) {
            throw io::ValidationError({"SSRMAP_WORKERS: expected an integer, got '" + std::string(env) + "'"});
        }
    }
    return 0;
}

class Run {
public:
    Run(std::string subcommand, const Globals& g) : subcommand_(std::move(subcommand)), g_(g) {}

    /// Writes `content` under --out and a `<name>.manifest.json` sidecar.
    std::string write(const std::string& name, const std::string& content, const json& config,
                      std::optional<std::uint64_t> seed) {
        fs::create_directories(g_.out);
        const fs::path path = fs::path(g_.out) / name;
        std::ofstream file(path, std::ios::binary);
        file << content;
        if (!file) throw std::runtime_error("cannot write " + path.string());

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json manifest = {{"tool", "ssrmap"},
                         {"version", SSRMAP_VERSION},
                         {"reference_config_version", reference::kReferenceConfigVersion},
                         {"subcommand", subcommand_},
                         {"config", config},
                         {"seed", seed ? json(*seed) : json(nullptr)},
                         {"outputs", json::array({path.string()})},
                         {"wall_clock_seconds", seconds}};
        std::ofstream(path.string() + ".manifest.json") << manifest.dump(2) << '\n';
        return path.string();
    }

private:
    std::string subcommand_;
    const Globals& g_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

GammaMixture builtin_prior(const std::string& name) {
    if (name == "stjohns") return reference::st_johns_prior();
    if (name == "blood_pressure") return reference::blood_pressure_prior();
    throw io::ValidationError({"builtin prior must be 'stjohns' or 'blood_pressure', got '" + name + "'"});
}

GammaMixture load_prior(const std::string& path, const std::string& builtin) {
    if (!path.empty() && !builtin.empty()) throw io::ValidationError({"give either --prior or --builtin, not both"});
    if (!builtin.empty()) return builtin_prior(builtin);
    if (path.empty()) throw io::ValidationError({"prior: missing --prior FILE or --builtin NAME"});
    return io::mixture_from_json(io::read_json_file(path));
}

PlanningRule parse_planning_rule(const std::string& s) {
    if (s == "mean") return PlanningRule::mean();
    if (s == "median") return PlanningRule::median();
    if (s == "expected") return PlanningRule::expected();
    if (s.rfind("quantile:", 0) == 0) {
        try {
            std::size_t used = 0;
            const double p = std::stod(s.substr(9), &used);
            if (used == s.size() - 9 && p > 0.0 && p < 1.0) return PlanningRule::quantile(p);
        } catch (const std::exception&) {
        }
    }
    throw io::ValidationError({"rule: expected mean, median, expected or quantile:<p>, got '" + s + "'"});
}

json summary_json(const GammaMixture& m) {
    json rows = json::object();
    for (const auto& r : reproduce::mixture_summary(m))
        rows[r.parameter] = {{"mean", r.mean}, {"sd", r.sd}, {"median", r.median}, {"q2.5", r.q025}, {"q97.5", r.q975}};
    return rows;
}

void print_summary(std::ostream& os, const GammaMixture& m) {
    os << fmt::format("{:<8}{:>12}{:>12}{:>12}{:>12}{:>12}\n", "param", "mean", "sd", "median", "2.5%", "97.5%");
    for (const auto& r : reproduce::mixture_summary(m))
        os << fmt::format("{:<8}{:>12.4g}{:>12.4g}{:>12.4g}{:>12.4g}{:>12.4g}\n", r.parameter, r.mean, r.sd, r.median,
                          r.q025, r.q975);
}

// samplesize ---------------------------------------------------------------

struct SampleSizeArgs {
    std::string config;
    std::optional<double> sigma2, delta, alpha, power, k;
    std::string allocation, prior, builtin;
    std::optional<std::string> rule;
};

int cmd_samplesize(const SampleSizeArgs& a, const Globals& g) {
    json cfg = json::object();
    if (!a.config.empty()) cfg = io::read_json_file(a.config);
    if (!cfg.is_object()) throw io::ValidationError({"config: expected a JSON object"});
    json design = cfg.value("design", json::object());
    if (a.delta) design["delta_star"] = *a.delta;
    if (a.alpha) design["alpha"] = *a.alpha;
    if (a.power) design["target_power"] = *a.power;
    if (a.k) design["k"] = *a.k;
    if (!a.allocation.empty()) design["allocation"] = a.allocation;
    const DesignParams d = io::design_from_json(design);

    std::optional<double> sigma2 = a.sigma2;
    if (!sigma2 && cfg.contains("sigma2")) sigma2 = cfg.at("sigma2").get<double>();
    const std::string rule_name = a.rule ? *a.rule : cfg.value("rule", std::string("mean"));

    json resolved = {{"design", io::design_to_json(d)}};
    json result;
    if (sigma2) {
        if (!(*sigma2 > 0.0)) throw io::ValidationError({"sigma2: must be positive"});
        const long n = required_n(*sigma2, d);
        resolved["sigma2"] = *sigma2;
        result = {{"n", n}, {"power", power(n, *sigma2, d.delta_star, d)}, {"rule", "fixed sigma2"},
                  {"planning_variance", *sigma2}};
    } else {
        GammaMixture prior = GammaMixture::single(1.0, 1.0);
        if (!a.prior.empty() || !a.builtin.empty()) {
            prior = load_prior(a.prior, a.builtin);
        } else if (cfg.contains("prior")) {
            prior = io::mixture_from_json(cfg.at("prior"));
        } else {
            throw io::ValidationError({"sigma2: missing; supply sigma2 or a prior with a rule"});
        }
        const PlanningRule rule = parse_planning_rule(rule_name);
        const long n = plan_from_prior(d, prior, rule);
        const auto var = planning_variance(prior, rule);
        resolved["prior"] = io::mixture_to_json(prior);
        resolved["rule"] = rule_name;
        result = {{"n", n},
                  {"power", var ? power(n, *var, d.delta_star, d) : expected_power(n, d, prior)},
                  {"rule", rule_name},
                  {"planning_variance", var ? json(*var) : json(nullptr)}};
    }
    result["design"] = resolved["design"];

    const std::string text = g.json ? result.dump(2) + "\n"
                                    : fmt::format("n: {}\npower: {:.4f}\nrule: {}\n", result["n"].get<long>(),
                                                  result["power"].get<double>(), result["rule"].get<std::string>());
    std::cout << text;
    if (!g.out.empty()) Run("samplesize", g).write("samplesize.json", result.dump(2) + "\n", resolved, std::nullopt);
    return 0;
}

// map-fit ------------------------------------------------------------------

struct MapFitArgs {
    std::string trials, config;
};

int cmd_map_fit(const MapFitArgs& a, const Globals& g) {
    Run run("map-fit", g);
    std::ifstream in(a.trials);
    if (!in) throw io::ValidationError({"trials: cannot open '" + a.trials + "'"});
    const auto trials = io::read_trials_csv(in);
    HierarchicalModelConfig cfg;
    if (!a.config.empty()) cfg = io::model_config_from_json(io::read_json_file(a.config));
    if (g.seed) cfg.seed = *g.seed;
    cfg.workers = resolved_workers(g);
    cfg.validate();

    const MapFitResult fit = fit_map(trials, cfg);
    json out = io::map_fit_to_json(fit);
    out["summary"] = summary_json(fit.mixture);

    if (!fit.converged() && !g.force) {
        std::cerr << "sampler did not converge (max R-hat " << fit.diagnostics.max_rhat() << ", fixed-effect "
                  << fit.fixed_effect_diagnostics.max_rhat() << ", threshold " << cfg.rhat_threshold
                  << "); rerun with --force to keep the fit\n"
                  << out["diagnostics"].dump(2) << '\n';
        return kExitConvergence;
    }
    if (g.json) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::cout << fmt::format("trials: {}  total df: {}  ESS: {:.1f}  components: {}\n", trials.size(),
                                 fit.total_df, fit.ess, fit.mixture.size());
        for (const auto& c : fit.mixture.components())
            std::cout << fmt::format("  {:.4f} Gamma({:.4f}, {:.4f})\n", c.weight, c.shape, c.rate);
        print_summary(std::cout, fit.mixture);
    }
    if (!g.out.empty()) run.write("map_fit.json", out.dump(2) + "\n", io::model_config_to_json(cfg), cfg.seed);
    return 0;
}

// update -------------------------------------------------------------------

struct UpdateArgs {
    std::string prior, builtin;
    std::optional<double> var, df;
    std::optional<long> n1;
};

int cmd_update(const UpdateArgs& a, const Globals& g) {
    const GammaMixture prior = load_prior(a.prior, a.builtin);
    std::vector<std::string> problems;
    if (!a.var) problems.push_back("var: missing required value");
    if (a.df && a.n1) problems.push_back("df: give either --df or --n1, not both");
    if (!a.df && !a.n1) problems.push_back("df: missing; give --df or --n1");
    if (!problems.empty()) throw io::ValidationError(problems);
    const double df = a.df ? *a.df : pooled_df(*a.n1);
    if (!(*a.var >= 0.0)) problems.push_back("var: must be >= 0");
    if (!(df > 0.0)) problems.push_back("df: must be > 0");
    if (!problems.empty()) throw io::ValidationError(problems);

    const GammaMixture post = update_with_variance(prior, *a.var, df);
    json out = {{"posterior", io::mixture_to_json(post)},
                {"posterior_mean_sigma2", posterior_mean_sigma2(post)},
                {"posterior_median_sigma2", posterior_median_sigma2(post)},
                {"variance", *a.var},
                {"df", df}};
    if (g.json) {
        std::cout << out.dump(2) << '\n';
    } else {
        for (const auto& c : post.components())
            std::cout << fmt::format("  {:.6f} Gamma({:.6g}, {:.6g})\n", c.weight, c.shape, c.rate);
        std::cout << fmt::format("posterior mean sigma2: {:.6g}\nposterior median sigma2: {:.6g}\n",
                                 out["posterior_mean_sigma2"].get<double>(),
                                 out["posterior_median_sigma2"].get<double>());
    }
    if (!g.out.empty()) {
        json cfg = {{"prior", io::mixture_to_json(prior)}, {"variance", *a.var}, {"df", df}};
        Run("update", g).write("posterior.json", out.dump(2) + "\n", cfg, std::nullopt);
    }
    return 0;
}

// simulate -----------------------------------------------------------------

int cmd_simulate(const std::string& scenario_path, const Globals& g) {
    Run run("simulate", g);
    io::ScenarioFile f = io::scenario_from_json(io::read_json_file(scenario_path));
    if (g.reps) f.base.replications = *g.reps;
    if (g.seed) f.base.master_seed = *g.seed;
    for (const auto& cell : expand_grid(f.base, f.sweeps)) cell.validate();

    const auto results = run_grid(f.base, f.sweeps, resolved_workers(g));
    std::ostringstream csv;
    write_results_csv(csv, results);
    if (g.out.empty()) {
        std::cout << csv.str();
    } else {
        const auto path = run.write(f.base.id + ".csv", csv.str(), io::scenario_to_json(f), f.base.master_seed);
        std::cout << path << '\n';
    }
    return 0;
}

// reproduce ----------------------------------------------------------------

int cmd_reproduce(const std::string& id, const Globals& g) {
    reproduce::Options opt;
    if (g.reps) opt.replications = *g.reps;
    if (g.seed) opt.seed = *g.seed;
    opt.workers = resolved_workers(g);
    Globals out_globals = g;
    if (out_globals.out.empty()) out_globals.out = "results";

    std::vector<std::string_view> ids;
    if (id == "all") {
        for (auto e : reproduce::exhibit_ids()) ids.push_back(e);
    } else {
        ids.push_back(id);
    }
    for (auto one : ids) {
        Run run("reproduce", out_globals);
        const auto outputs = reproduce::run(one, opt);
        const json cfg = {{"exhibit", one}, {"replications", opt.replications}};
        for (const auto& o : outputs) std::cout << run.write(o.file_name, o.csv, cfg, opt.seed) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sample size re-estimation with meta-analytic-predictive variance priors"};
    app.set_version_flag("--version", SSRMAP_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    int workers = 0;
    long reps = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed");
    auto* workers_opt = app.add_option("--workers", workers, "Worker threads (default: SSRMAP_WORKERS or all cores)");
    auto* reps_opt = app.add_option("--reps", reps, "Monte Carlo replications per scenario")->check(CLI::PositiveNumber);
    app.add_flag("--json", g.json, "Print JSON instead of text");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--force", g.force, "Keep results that fail convergence diagnostics");

    SampleSizeArgs ss;
    auto* c_ss = app.add_subcommand("samplesize", "Total sample size from a variance or a prior");
    c_ss->add_option("--config", ss.config, "JSON with design, sigma2 | prior, rule");
    c_ss->add_option("--sigma2", ss.sigma2, "Planning variance");
    c_ss->add_option("--delta", ss.delta, "Clinically relevant difference delta*");
    c_ss->add_option("--alpha", ss.alpha, "One-sided significance level");
    c_ss->add_option("--power", ss.power, "Target power");
    c_ss->add_option("--k", ss.k, "Allocation ratio n_C/n_T");
    c_ss->add_option("--allocation", ss.allocation, "Allocation as control:treatment");
    c_ss->add_option("--prior", ss.prior, "Prior mixture JSON");
    c_ss->add_option("--builtin", ss.builtin, "Built-in prior: stjohns | blood_pressure");
    c_ss->add_option("--rule", ss.rule, "mean | median | quantile:<p> | expected");

    MapFitArgs mf;
    auto* c_mf = app.add_subcommand("map-fit", "Fit a MAP prior from historical trial variances");
    c_mf->add_option("trials", mf.trials, "CSV with trial_id,sample_variance,df")->required();
    c_mf->add_option("--config", mf.config, "Model configuration JSON");

    UpdateArgs up;
    auto* c_up = app.add_subcommand("update", "Conjugate update of a prior with a pilot variance");
    c_up->add_option("--prior", up.prior, "Prior mixture JSON");
    c_up->add_option("--builtin", up.builtin, "Built-in prior: stjohns | blood_pressure");
    c_up->add_option("--var", up.var, "Observed variance estimate");
    c_up->add_option("--df", up.df, "Degrees of freedom of the estimate");
    c_up->add_option("--n1", up.n1, "Pilot size; df = n1 - 2");

    std::string scenario;
    auto* c_sim = app.add_subcommand("simulate", "Monte Carlo operating characteristics of a scenario grid");
    c_sim->add_option("scenario", scenario, "Scenario JSON")->required();

    std::string exhibit;
    auto* c_rep = app.add_subcommand("reproduce", "Write the data behind a figure or table");
    c_rep->add_option("exhibit", exhibit, "fig1..fig6, table1, table2 or all")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (*seed_opt) g.seed = seed;
    if (*workers_opt) g.workers = workers;
    if (*reps_opt) g.reps = reps;

    try {
        if (*c_ss) return cmd_samplesize(ss, g);
        if (*c_mf) return cmd_map_fit(mf, g);
        if (*c_up) return cmd_update(up, g);
        if (*c_sim) return cmd_simulate(scenario, g);
        if (*c_rep) return cmd_reproduce(exhibit, g);
    } catch (const io::ValidationError& e) {
        for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
        return kExitValidation;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DegenerateFit& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
