// Data behind each figure and table of the simulation study and the two
// clinical examples, built from the reference configurations.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssrmap/simengine.hpp"

namespace ssrmap::reproduce {

struct Options {
    long replications = 50000;
    std::uint64_t seed = 20240917;
    int workers = 0;
};

struct Output {
    std::string file_name;  // e.g. "fig3.csv"
    std::string csv;
};

std::span<const std::string_view> exhibit_ids();

/// Throws InvalidArgument listing the valid ids for an unknown exhibit.
std::vector<Output> run(std::string_view id, const Options& opt);

/// Simulation-study scenario: sigma^2 = 1, delta* = 0.5, alpha 0.025, power 0.8, k = 1.
Scenario study_scenario(std::string id, double prior_mean, double ess, long n1, const ReestimationRule& rule,
                        long replications, std::uint64_t seed);

/// Grids of the power studies (no-conflict, conflict, robustified).
struct Grid {
    Scenario base;
    std::vector<SweepAxis> sweeps;
};
Grid no_conflict_grid(const Options& opt);
Grid conflict_grid(const Options& opt);
Grid robust_grid(const Options& opt);

/// Re-estimated sizes over a sweep of observed pooled variances for the
/// pooled, posterior-mean and posterior-median rules.
struct ReestimationCurveRow {
    long n1;
    double pooled_var;
    long n_pooled;
    long n_bayes_mean;
    long n_bayes_median;
    double posterior_mean;
    double posterior_median;
};
std::vector<ReestimationCurveRow> reestimation_curve(const GammaMixture& prior, double delta,
                                                     std::span<const long> n1_list,
                                                     std::span<const double> pooled_vars);

struct SummaryRow {
    std::string parameter;
    double mean, sd, median, q025, q975;
};
/// Mean, sd, median, 2.5% and 97.5% quantiles on the sigma^2, sigma and omega scales.
std::vector<SummaryRow> mixture_summary(const GammaMixture& prior);

}  // namespace ssrmap::reproduce
