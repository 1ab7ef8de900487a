// Monte Carlo operating characteristics of internal-pilot designs:
// simulate pilot -> re-estimate -> complete the trial -> final t-test.
//
// Replicates are independent; each draws from its own stream keyed by
// (scenario seed, replicate index). The OpenMP kernel and the serial
// reference produce bit-identical results for any worker count.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ssrmap/mapprior.hpp"
#include "ssrmap/samplesize.hpp"
#include "ssrmap/ssr.hpp"

namespace ssrmap {

/// How a scenario's prior is built: either (mean, ESS, w_R) through
/// scenario_prior/robustify, or an explicit mixture.
struct PriorSpec {
    std::optional<double> mean;
    double ess = 0.0;
    double w_R = 0.0;
    std::optional<GammaMixture> mixture;
    GammaMixture vague = vague_prior();

    std::optional<GammaMixture> build() const;
};

struct Scenario {
    std::string id = "scenario";
    DesignParams design;
    double true_sigma2 = 1.0;
    double true_delta = 0.5;
    ReestimationRule rule;
    PriorSpec prior;
    long replications = 50000;
    std::uint64_t master_seed = 20240917;
    long block_m = 4;

    void validate() const;
};

struct ReplicateOutcome {
    bool reject = false;
    long n_final = 0;
    long n_reest = 0;

    bool operator==(const ReplicateOutcome&) const = default;
};

struct ScenarioResult {
    Scenario scenario;
    double rejection_rate = 0.0;
    double mc_standard_error = 0.0;
    double n_mean = 0.0;
    long n_median = 0;
    long n_p10 = 0;
    long n_p90 = 0;
    long n_min = 0;
    long n_max = 0;
    double n_reest_mean = 0.0;
    long replications = 0;
    std::uint64_t seed = 0;
};

/// Read-only state shared by all replicates of one scenario.
class ScenarioContext {
public:
    explicit ScenarioContext(const Scenario& sc);

    ReplicateOutcome replicate(long index) const;
    const Scenario& scenario() const noexcept { return scenario_; }
    const SampleSizeTable& table() const noexcept { return table_; }

private:
    Scenario scenario_;
    std::optional<GammaMixture> prior_;
    SampleSizeTable table_;
};

ReplicateOutcome simulate_replicate(const Scenario& sc, long replicate_index);

/// Nearest-rank (type 1) quantile of sorted values.
long nearest_rank(std::span<const long> sorted, double p);

ScenarioResult summarize(const Scenario& sc, std::span<const ReplicateOutcome> outcomes);

/// Serial reference implementation.
ScenarioResult run_scenario_serial(const Scenario& sc);
/// OpenMP kernel over replicates; workers <= 0 uses the default thread count.
ScenarioResult run_scenario(const Scenario& sc, int workers = 0);

using SweepValue = std::variant<double, std::string>;

struct SweepAxis {
    std::string name;
    std::vector<SweepValue> values;
};

/// Cartesian product of the sweeps (first axis outermost). Each cell gets a
/// seed derived from (base seed, cell index); no sweeps gives the base itself.
std::vector<Scenario> expand_grid(const Scenario& base, std::span<const SweepAxis> sweeps);

std::vector<ScenarioResult> run_grid(const Scenario& base, std::span<const SweepAxis> sweeps, int workers = 0);

/// Field names accepted by sweeps.
std::span<const std::string_view> sweepable_fields();

struct PosteriorMeanRow {
    double ess;
    long n1;
    double w_R;
    double posterior_mean;
};

/// Posterior mean of sigma^2 under w_R Gamma(2,1) + (1 - w_R) scenario_prior(mean, ESS)
/// after observing `pooled_var` with n1 - 2 degrees of freedom.
std::vector<PosteriorMeanRow> posterior_mean_curve(double informative_mean, std::span<const double> ess_list,
                                                   std::span<const long> n1_list, std::span<const double> w_R_list,
                                                   double pooled_var = 1.0);

inline constexpr std::string_view kResultsCsvHeader =
    "scenario_id,rule,data_source,n1,ess,w_R,prior_mean,true_sigma2,true_delta,reps,seed,reject_rate,mc_se,"
    "n_mean,n_p10,n_median,n_p90";

void write_results_csv(std::ostream& os, std::span<const ScenarioResult> results);

}  // namespace ssrmap
