// Sample size re-estimation after the internal pilot: plug-in rules, Bayes
// posterior rules, and the final-size policy.

#pragma once

#include <optional>
#include <string>
#include <variant>

#include "ssrmap/distmath.hpp"
#include "ssrmap/posterior.hpp"
#include "ssrmap/samplesize.hpp"

namespace ssrmap {

enum class Estimator {
    pooled_plugin,
    one_sample_plugin,
    bayes_mean,
    bayes_median,
    bayes_quantile,
    bayes_expected_power,
};

enum class DataSource {
    unblinded_pooled,
    blinded_one_sample,
    blinded_block_sums,
};

struct ReestimationRule {
    Estimator estimator = Estimator::pooled_plugin;
    DataSource source = DataSource::unblinded_pooled;
    double quantile_p = 0.5;
    /// Degrees of freedom attached to the one-sample estimate; n1 - 1 when unset.
    std::optional<double> one_sample_df;

    static ReestimationRule pooled() { return {}; }
    static ReestimationRule one_sample() {
        return {Estimator::one_sample_plugin, DataSource::blinded_one_sample, 0.5, std::nullopt};
    }
    static ReestimationRule bayes(Estimator e, DataSource s = DataSource::unblinded_pooled, double p = 0.5) {
        return {e, s, p, std::nullopt};
    }

    bool needs_prior() const noexcept;
    void validate() const;

    /// "pooled", "one_sample", "bayes_mean", "bayes_median", "bayes_quantile:<p>", "bayes_expected_power".
    std::string estimator_name() const;
    /// "unblinded", "blinded_one_sample", "blinded_block_sums".
    std::string source_name() const;
    static ReestimationRule parse(const std::string& estimator, const std::string& source = "unblinded");

    bool operator==(const ReestimationRule&) const = default;
};

Estimator parse_estimator(const std::string& name, double* quantile_p);
DataSource parse_data_source(const std::string& name);

struct ReestimationOutcome {
    long n_reest = 0;
    long n_final = 0;
    std::optional<double> variance_used;  // empty for the expected-power rule
    std::optional<GammaMixture> posterior;
    bool capped = false;
};

using PilotData = std::variant<PilotSummary, BlockSummary>;

/// Variance estimate and its degrees of freedom for a rule's data source.
struct VarianceEvidence {
    double variance;
    double df;
};
VarianceEvidence variance_evidence(const ReestimationRule& rule, const PilotData& pilot);

/// Applies max(n_reest, n1) (or max(n_planned, n_reest)) and the optional cap.
long final_sample_size(long n_reest, const DesignParams& d);

/// `table`, when given, must have been built for `d` and replaces direct searches.
ReestimationOutcome reestimate(const ReestimationRule& rule, const DesignParams& d, const PilotData& pilot,
                               const std::optional<GammaMixture>& prior,
                               const SampleSizeTable* table = nullptr);

}  // namespace ssrmap
