// Meta-analytic-predictive priors for a variance: a normal random-effects
// model on historical log-variances fitted by MCMC, a Gamma-mixture
// approximation of the predictive precision, effective sample size, and
// robustification with a vague component.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssrmap/distmath.hpp"

namespace ssrmap {

struct HistoricalTrialSummary {
    std::string trial_id;
    double sample_variance = 0.0;
    double df = 0.0;

    void validate() const;
};

struct HierarchicalModelConfig {
    double mu_prior_mean = 0.0;
    double mu_prior_sd = 10.0;     // normal prior on mu (log-variance scale)
    double tau_prior_scale = 1.0;  // half-normal prior on tau
    int chains = 4;
    long iterations = 25000;
    long burn_in = 5000;
    long thinning = 4;
    std::uint64_t seed = 20240917;
    double rhat_threshold = 1.05;
    int max_components = 3;  // L_max for the mixture approximation
    int workers = 0;         // 0: OpenMP default

    void validate() const;
};

struct ParameterDiagnostic {
    std::string name;
    double rhat = 1.0;
    double acceptance = 1.0;  // 1 for Gibbs updates
};

struct SamplerDiagnostics {
    std::vector<ParameterDiagnostic> parameters;
    double rhat_threshold = 1.05;

    double max_rhat() const;
    bool converged() const { return max_rhat() <= rhat_threshold; }
};

/// Retained draws of one sampler run, concatenated in chain order.
struct SamplerRun {
    std::vector<double> mu;
    std::vector<double> tau;
    std::vector<double> theta_new;
    SamplerDiagnostics diagnostics;
    long draws_per_chain = 0;
};

struct MapFitResult {
    std::vector<double> theta_new;  // predictive log-variance draws
    std::vector<double> omega_new;  // exp(-theta_new)
    GammaMixture mixture = GammaMixture::single(1.0, 1.0);
    double ess = 0.0;
    double heterogeneity_theta_variance = 0.0;
    double fixed_effect_theta_variance = 0.0;
    double total_df = 0.0;
    SamplerDiagnostics diagnostics;
    SamplerDiagnostics fixed_effect_diagnostics;

    bool converged() const { return diagnostics.converged() && fixed_effect_diagnostics.converged(); }
};

/// Runs the hierarchical sampler; with `pin_tau_zero` the trials share one
/// log-variance (fixed-effect model) and theta_new equals mu.
SamplerRun run_hierarchical_sampler(std::span<const HistoricalTrialSummary> trials,
                                    const HierarchicalModelConfig& cfg, bool pin_tau_zero = false);

MapFitResult fit_map(std::span<const HistoricalTrialSummary> trials, const HierarchicalModelConfig& cfg);

struct MixtureFit {
    GammaMixture mixture = GammaMixture::single(1.0, 1.0);
    int components = 1;
    double log_likelihood = 0.0;
    double bic = 0.0;
};

/// Maximum-likelihood Gamma mixture with exactly L components (EM, 10 restarts).
MixtureFit fit_gamma_mixture_components(std::span<const double> samples, int L, std::uint64_t seed = 7);

/// Best mixture by BIC over L = 1..L_max.
GammaMixture fit_gamma_mixture(std::span<const double> samples, int L_max, std::uint64_t seed = 7);

/// Ratio-method ESS: total historical df times Var_fixed / Var_heterogeneous
/// of the predictive log-variance.
double effective_sample_size(const MapFitResult& fit, std::span<const HistoricalTrialSummary> trials);

/// 2a for one component; weighted sum of 2 a_l for mixtures.
double ess_gamma(const GammaMixture& m);

GammaMixture robustify(const GammaMixture& informative, double w_R, const GammaMixture& vague);

/// Single Gamma(ess/2, sigma2_mean * (ess/2 - 1)) with sigma^2-scale mean sigma2_mean.
GammaMixture scenario_prior(double sigma2_mean, double ess);

/// Gamma(2, 1), the vague component used for robustification.
inline GammaMixture vague_prior() { return GammaMixture::single(2.0, 1.0); }

}  // namespace ssrmap
