// Conjugate updating of Gamma-mixture precision priors with internal pilot
// data, Bayes point estimators of sigma^2, and the blinded variance
// estimators that can feed the update.

#pragma once

#include <span>
#include <vector>

#include "ssrmap/distmath.hpp"

namespace ssrmap {

/// Unblinded sufficient statistics of the internal pilot.
struct PilotSummary {
    long n1T = 0;
    long n1C = 0;
    double mean_T = 0.0;
    double mean_C = 0.0;
    double pooled_var = 0.0;

    long n1() const noexcept { return n1T + n1C; }
    void validate() const;

    /// Summary of raw per-arm observations.
    static PilotSummary from_data(std::span<const double> treatment, std::span<const double> control);
};

/// Randomized-block sums T_i of a blinded pilot, m observations per block.
struct BlockSummary {
    std::vector<double> block_sums;
    long m = 4;

    long blocks() const noexcept { return static_cast<long>(block_sums.size()); }
    void validate() const;
};

/// Gamma-mixture posterior for the precision after observing a variance
/// estimate with `df` degrees of freedom.
GammaMixture update_with_variance(const GammaMixture& prior, double var_estimate, double df);

double posterior_mean_sigma2(const GammaMixture& post);
double posterior_median_sigma2(const GammaMixture& post);

/// Blinded one-sample variance written through the unblinded summary.
double one_sample_variance(const PilotSummary& p);

/// Xing-Ganju estimator: sample variance of S_i = T_i / sqrt(m); df = b - 1.
double xing_ganju_variance(const BlockSummary& blk);

/// Degrees of freedom conventionally attached to each estimator.
inline double pooled_df(long n1) { return static_cast<double>(n1 - 2); }
inline double one_sample_df(long n1) { return static_cast<double>(n1 - 1); }
inline double xing_ganju_df(long blocks) { return static_cast<double>(blocks - 1); }

}  // namespace ssrmap
