#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ssrmap/errors.hpp"
#include "ssrmap/mapprior.hpp"
#include "ssrmap/reference_configs.hpp"

using namespace ssrmap;

namespace {

HierarchicalModelConfig quick_config() {
    HierarchicalModelConfig cfg;
    cfg.iterations = 8000;
    cfg.burn_in = 2000;
    cfg.thinning = 2;
    return cfg;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

std::vector<double> gamma_draws(const GammaMixture& m, int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = 1.0 / oracle::draw_sigma2(m, gen);
    return out;
}

}  // namespace

TEST_CASE("ESS of Gamma components") {
    CHECK(ess_gamma(GammaMixture::single(12.5, 5.635)) == 25.0);
    CHECK(ess_gamma(GammaMixture::single(3.0, 1.0)) == 6.0);
    CHECK(ess_gamma(GammaMixture({{0.25, 2.0, 1.0}, {0.75, 10.0, 3.0}})) == doctest::Approx(16.0));
}

TEST_CASE("scenario prior has the requested mean and ESS") {
    const auto p = scenario_prior(0.49, 25.0);
    CHECK(p[0].shape == 12.5);
    CHECK(p[0].rate == doctest::Approx(5.635).epsilon(1e-14));
    CHECK(mixture_mean(p, Scale::variance) == doctest::Approx(0.49).epsilon(1e-14));
    CHECK(ess_gamma(p) == 25.0);
    CHECK_THROWS_AS(scenario_prior(1.0, 2.0), InvalidArgument);
}

TEST_CASE("robustification") {
    const auto inf = scenario_prior(0.49, 50.0);
    CHECK(robustify(inf, 0.0, vague_prior()) == inf);
    CHECK(robustify(inf, 1.0, vague_prior()) == vague_prior());
    const auto r = robustify(inf, 0.3, vague_prior());
    REQUIRE(r.size() == 2);
    CHECK(r[0].weight == doctest::Approx(0.3));
    CHECK(r[0].shape == 2.0);
    CHECK(r[1].shape == 25.0);
    CHECK_THROWS_AS(robustify(inf, 1.2, vague_prior()), InvalidArgument);
}

TEST_CASE("EM recovers a two-component Gamma mixture") {
    const auto truth = reference::st_johns_prior();
    const auto xs = gamma_draws(truth, 100000, 31);
    const auto fit = fit_gamma_mixture_components(xs, 2, 7);
    double sup = 0.0;
    for (double p = 0.001; p < 1.0; p += 0.001) {
        const double x = mixture_quantile(truth, p, Scale::precision);
        sup = std::max(sup, std::fabs(mixture_cdf(fit.mixture, x, Scale::precision) - p));
    }
    CHECK(sup < 0.01);
}

TEST_CASE("single Gamma samples are fitted well with one component") {
    const auto xs = gamma_draws(GammaMixture::single(9.0, 3.0), 20000, 5);
    const auto fit = fit_gamma_mixture_components(xs, 1);
    CHECK(fit.mixture[0].shape == doctest::Approx(9.0).epsilon(0.03));
    CHECK(fit.mixture[0].rate == doctest::Approx(3.0).epsilon(0.03));
    const auto best = fit_gamma_mixture(xs, 3);
    // A larger model can only improve the likelihood slightly; BIC keeps it small.
    CHECK(best.size() == 1);
}

TEST_CASE("mixture fitting rejects bad samples") {
    std::vector<double> bad{1.0, -2.0, 3.0};
    CHECK_THROWS_AS(fit_gamma_mixture(bad, 2), InvalidArgument);
    std::vector<double> constant(50, 2.0);
    CHECK_THROWS(fit_gamma_mixture(constant, 2));
}

TEST_CASE("fixed-effect sampler matches a grid posterior for the common log-variance") {
    const auto trials = reference::st_johns_trials();
    auto cfg = quick_config();
    const auto run = run_hierarchical_sampler(trials, cfg, true);

    // Oracle: normal prior on theta times chi-square likelihoods, on a fine grid.
    std::vector<double> grid, dens;
    double best = -1e300;
    for (int i = 0; i <= 200000; ++i) {
        const double th = 2.5 + 2.0 * i / 200000.0;
        double lp = -0.5 * th * th / (cfg.mu_prior_sd * cfg.mu_prior_sd);
        for (const auto& t : trials) lp += -0.5 * t.df * th - 0.5 * t.df * t.sample_variance * std::exp(-th);
        grid.push_back(th);
        dens.push_back(lp);
        best = std::max(best, lp);
    }
    double z = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = std::exp(dens[i] - best);
        z += w;
        m1 += w * grid[i];
        m2 += w * grid[i] * grid[i];
    }
    const double mean = m1 / z;
    const double var = m2 / z - mean * mean;

    CHECK(mean_of(run.theta_new) == doctest::Approx(mean).epsilon(2e-3));
    CHECK(var_of(run.theta_new) == doctest::Approx(var).epsilon(0.1));
    CHECK(run.diagnostics.converged());
}

TEST_CASE("heterogeneous sampler converges and its predictive spread exceeds the fixed-effect one") {
    const auto trials = reference::st_johns_trials();
    const auto fit = fit_map(trials, quick_config());
    CHECK(fit.diagnostics.converged());
    CHECK(fit.fixed_effect_diagnostics.converged());
    CHECK(fit.heterogeneity_theta_variance > fit.fixed_effect_theta_variance);
    CHECK(fit.total_df == 1090.0);
    CHECK(fit.ess == doctest::Approx(fit.total_df * fit.fixed_effect_theta_variance /
                                     fit.heterogeneity_theta_variance));
    CHECK(effective_sample_size(fit, trials) == doctest::Approx(fit.ess));
}

TEST_CASE("more heterogeneous trials carry less information") {
    auto trials = reference::st_johns_trials();
    auto spread = trials;
    const double centre = std::log(35.0);
    for (auto& t : spread) t.sample_variance = std::exp(centre + 1.6 * (std::log(t.sample_variance) - centre));
    const auto cfg = quick_config();
    CHECK(fit_map(spread, cfg).ess < fit_map(trials, cfg).ess);
}

TEST_CASE("sampler output is independent of the worker count") {
    auto cfg = quick_config();
    cfg.iterations = 3000;
    cfg.burn_in = 1000;
    const auto trials = reference::blood_pressure_trials();
    cfg.workers = 1;
    const auto a = run_hierarchical_sampler(trials, cfg);
    cfg.workers = 4;
    const auto b = run_hierarchical_sampler(trials, cfg);
    CHECK(a.theta_new == b.theta_new);
    CHECK(a.tau == b.tau);
    cfg.seed += 1;
    CHECK(run_hierarchical_sampler(trials, cfg).theta_new != a.theta_new);
}

TEST_CASE("St John's reconstruction lands near the published prior summaries") {
    const auto trials = reference::st_johns_trials();
    const auto fit = fit_map(trials, HierarchicalModelConfig{});
    const auto mo = mixture_mean_variance(fit.mixture);
    CHECK(mo.mean == doctest::Approx(39.56).epsilon(0.10));
    CHECK(mo.sd == doctest::Approx(12.56).epsilon(0.10));
    CHECK(mixture_quantile(fit.mixture, 0.5, Scale::variance) == doctest::Approx(37.93).epsilon(0.10));
    CHECK(fit.ess == doctest::Approx(24.0).epsilon(0.20));
}

TEST_CASE("invalid historical inputs") {
    std::vector<HistoricalTrialSummary> one{{"A", 3.0, 20}};
    CHECK_THROWS_AS(fit_map(one, quick_config()), InvalidArgument);
    std::vector<HistoricalTrialSummary> bad{{"A", 3.0, 20}, {"B", -1.0, 20}};
    CHECK_THROWS_AS(fit_map(bad, quick_config()), InvalidArgument);
    auto cfg = quick_config();
    cfg.burn_in = cfg.iterations;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
