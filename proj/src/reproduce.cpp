#include "ssrmap/reproduce.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "ssrmap/errors.hpp"
#include "ssrmap/posterior.hpp"
#include "ssrmap/reference_configs.hpp"
#include "ssrmap/rng.hpp"

namespace ssrmap::reproduce {

namespace ref = ssrmap::reference;

namespace {

constexpr std::array<std::string_view, 8> kExhibits = {"fig1", "fig2", "fig3", "fig4",
                                                        "fig5", "fig6", "table1", "table2"};

DesignParams example_design(double delta) {
    DesignParams d;
    d.alpha = ref::kSimAlpha;
    d.target_power = ref::kSimPower;
    d.delta_star = delta;
    return d;
}

std::vector<SweepValue> numbers(auto&& values) {
    std::vector<SweepValue> out;
    for (auto v : values) out.emplace_back(static_cast<double>(v));
    return out;
}

std::vector<SweepValue> study_rules() {
    return {std::string("pooled"), std::string("bayes_mean"), std::string("bayes_median")};
}

std::string results_csv(const Grid& g, int workers) {
    const auto results = run_grid(g.base, g.sweeps, workers);
    std::ostringstream os;
    write_results_csv(os, results);
    return os.str();
}

std::string curve_csv(const GammaMixture& prior, double delta, std::span<const double> vars) {
    const auto rows = reestimation_curve(prior, delta, ref::kExamplePilots, vars);
    std::string out = "n1,pooled_var,n_pooled,n_bayes_mean,n_bayes_median,posterior_mean,posterior_median\n";
    for (const auto& r : rows)
        out += fmt::format("{},{},{},{},{},{},{}\n", r.n1, r.pooled_var, r.n_pooled, r.n_bayes_mean,
                           r.n_bayes_median, r.posterior_mean, r.posterior_median);
    return out;
}

std::vector<double> linear_grid(double from, double to, double step) {
    std::vector<double> out;
    const long count = std::lround((to - from) / step);
    for (long i = 0; i <= count; ++i) out.push_back(from + step * static_cast<double>(i));
    return out;
}

std::string summary_csv(const GammaMixture& prior) {
    std::string out = "parameter,mean,sd,median,q2.5,q97.5\n";
    for (const auto& r : mixture_summary(prior))
        out += fmt::format("{},{},{},{},{},{}\n", r.parameter, r.mean, r.sd, r.median, r.q025, r.q975);
    return out;
}

}  // namespace

std::span<const std::string_view> exhibit_ids() { return kExhibits; }

Scenario study_scenario(std::string id, double prior_mean, double ess, long n1, const ReestimationRule& rule,
                        long replications, std::uint64_t seed) {
    Scenario sc;
    sc.id = std::move(id);
    sc.design = example_design(ref::kSimDelta);
    sc.design.n1 = n1;
    sc.true_sigma2 = ref::kSimSigma2;
    sc.true_delta = ref::kSimDelta;
    sc.rule = rule;
    sc.prior.mean = prior_mean;
    sc.prior.ess = ess;
    sc.replications = replications;
    sc.master_seed = seed;
    return sc;
}

Grid no_conflict_grid(const Options& opt) {
    Grid g{study_scenario("fig3", ref::kNoConflictMean, 50, 60, ReestimationRule::pooled(), opt.replications,
                          derive_seed(opt.seed, 3)),
           {}};
    g.sweeps = {{"n1", numbers(ref::kPilotSizes)}, {"rule", study_rules()}, {"ess", numbers(ref::kStudyEss)}};
    return g;
}

Grid conflict_grid(const Options& opt) {
    Grid g{study_scenario("fig4", ref::kConflictMean, 50, 60, ReestimationRule::pooled(), opt.replications,
                          derive_seed(opt.seed, 4)),
           {}};
    g.sweeps = {{"n1", numbers(ref::kPilotSizes)}, {"rule", study_rules()}, {"ess", numbers(ref::kConflictEss)}};
    return g;
}

Grid robust_grid(const Options& opt) {
    Grid g{study_scenario("fig5", ref::kConflictMean, 50, ref::kRobustPilot,
                          ReestimationRule::bayes(Estimator::bayes_mean), opt.replications, derive_seed(opt.seed, 5)),
           {}};
    g.sweeps = {{"ess", numbers(ref::kRobustEss)},
                {"rule", {std::string("bayes_mean"), std::string("bayes_median")}},
                {"w_R", numbers(ref::robust_weights())}};
    return g;
}

std::vector<ReestimationCurveRow> reestimation_curve(const GammaMixture& prior, double delta,
                                                     std::span<const long> n1_list,
                                                     std::span<const double> pooled_vars) {
    const DesignParams d = example_design(delta);
    std::vector<ReestimationCurveRow> rows;
    for (long n1 : n1_list) {
        if (n1 < 3) throw InvalidArgument("pilot size must be at least 3");
        for (double v : pooled_vars) {
            const GammaMixture post = update_with_variance(prior, v, pooled_df(n1));
            ReestimationCurveRow r{};
            r.n1 = n1;
            r.pooled_var = v;
            r.n_pooled = v > 0.0 ? required_n(v, d) : d.min_n();
            r.posterior_mean = posterior_mean_sigma2(post);
            r.posterior_median = posterior_median_sigma2(post);
            r.n_bayes_mean = required_n(r.posterior_mean, d);
            r.n_bayes_median = required_n(r.posterior_median, d);
            rows.push_back(r);
        }
    }
    return rows;
}

std::vector<SummaryRow> mixture_summary(const GammaMixture& prior) {
    std::vector<SummaryRow> rows;
    for (auto [name, scale] : {std::pair{"sigma2", Scale::variance}, std::pair{"sigma", Scale::sd},
                               std::pair{"omega", Scale::precision}}) {
        const Moments mo = mixture_moments(prior, scale);
        rows.push_back({name, mo.mean, mo.sd, mixture_quantile(prior, 0.5, scale),
                        mixture_quantile(prior, 0.025, scale), mixture_quantile(prior, 0.975, scale)});
    }
    return rows;
}

std::vector<Output> run(std::string_view id, const Options& opt) {
    if (id == "fig1")
        return {{"fig1.csv", curve_csv(ref::st_johns_prior(), ref::kStJohnsDelta, linear_grid(10, 100, 1))}};
    if (id == "fig2")
        return {{"fig2.csv",
                 curve_csv(ref::blood_pressure_prior(), ref::kBloodPressureDelta, linear_grid(60, 600, 5))}};
    if (id == "fig3") return {{"fig3.csv", results_csv(no_conflict_grid(opt), opt.workers)}};
    if (id == "fig4") return {{"fig4.csv", results_csv(conflict_grid(opt), opt.workers)}};
    if (id == "fig5") return {{"fig5.csv", results_csv(robust_grid(opt), opt.workers)}};
    if (id == "fig6") {
        const auto w = linear_grid(0, 1, 0.05);
        const auto rows = posterior_mean_curve(ref::kConflictMean, ref::kRobustEss, ref::kDiscountPilots, w);
        std::string out = "ess,n1,w_R,posterior_mean\n";
        for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.ess, r.n1, r.w_R, r.posterior_mean);
        return {{"fig6.csv", out}};
    }
    if (id == "table1") return {{"table1.csv", summary_csv(ref::st_johns_prior())}};
    if (id == "table2") return {{"table2.csv", summary_csv(ref::blood_pressure_prior())}};

    std::string valid;
    for (auto e : kExhibits) valid += (valid.empty() ? "" : ", ") + std::string(e);
    throw InvalidArgument("unknown exhibit '" + std::string(id) + "'; valid ids: " + valid);
}

}  // namespace ssrmap::reproduce
