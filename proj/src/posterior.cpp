#include "ssrmap/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ssrmap/errors.hpp"

namespace ssrmap {

namespace {

constexpr double kWeightFloor = 1e-300;

double sample_variance(std::span<const double> x, double& mean) {
    const double n = static_cast<double>(x.size());
    mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss;
}

}  // namespace

void PilotSummary::validate() const {
    if (n1T < 1 || n1C < 1) throw InvalidArgument("pilot groups must be non-empty");
    if (!(pooled_var >= 0.0) || !std::isfinite(pooled_var))
        throw InvalidArgument("pooled variance must be finite and non-negative");
    if (!std::isfinite(mean_T) || !std::isfinite(mean_C)) throw InvalidArgument("group means must be finite");
}

PilotSummary PilotSummary::from_data(std::span<const double> treatment, std::span<const double> control) {
    if (treatment.size() < 2 || control.size() < 2)
        throw InvalidArgument("pooled variance needs at least two observations per arm");
    PilotSummary s;
    s.n1T = static_cast<long>(treatment.size());
    s.n1C = static_cast<long>(control.size());
    const double ss = sample_variance(treatment, s.mean_T) + sample_variance(control, s.mean_C);
    s.pooled_var = ss / static_cast<double>(s.n1() - 2);
    return s;
}

void BlockSummary::validate() const {
    if (blocks() < 2) throw InvalidArgument("Xing-Ganju estimator needs at least two blocks");
    if (m < 2 || m % 2 != 0) throw InvalidArgument("block size m must be even and at least 2");
}

GammaMixture update_with_variance(const GammaMixture& prior, double var_estimate, double df) {
    if (!(var_estimate >= 0.0) || !std::isfinite(var_estimate))
        throw InvalidArgument("update_with_variance: variance estimate must be finite and non-negative");
    if (!(df > 0.0) || !std::isfinite(df)) throw InvalidArgument("update_with_variance: df must be positive");

    const double half_df = 0.5 * df;
    const std::size_t L = prior.size();
    std::vector<GammaComponent> post(L);
    std::vector<double> log_r(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& c = prior[l];
        const double a = c.shape + half_df;
        const double b = c.rate + half_df * var_estimate;
        post[l] = {0.0, a, b};
        log_r[l] = std::log(c.weight) + std::lgamma(a) - a * std::log(b) + c.shape * std::log(c.rate) -
                   std::lgamma(c.shape);
    }
    const double top = *std::max_element(log_r.begin(), log_r.end());
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        post[l].weight = std::exp(log_r[l] - top);
        total += post[l].weight;
    }
    std::vector<GammaComponent> kept;
    kept.reserve(L);
    for (auto& c : post) {
        c.weight /= total;
        if (c.weight >= kWeightFloor) kept.push_back(c);
    }
    return GammaMixture::normalized(std::move(kept));
}

double posterior_mean_sigma2(const GammaMixture& post) { return mixture_mean(post, Scale::variance); }

double posterior_median_sigma2(const GammaMixture& post) {
    return mixture_quantile(post, 0.5, Scale::variance);
}

double one_sample_variance(const PilotSummary& p) {
    p.validate();
    const double n1 = static_cast<double>(p.n1());
    if (p.n1() < 3) throw InvalidArgument("one_sample_variance: n1 must be at least 3");
    const double diff = p.mean_T - p.mean_C;
    return (n1 - 2.0) / (n1 - 1.0) * p.pooled_var +
           static_cast<double>(p.n1T) * static_cast<double>(p.n1C) / (n1 * (n1 - 1.0)) * diff * diff;
}

double xing_ganju_variance(const BlockSummary& blk) {
    blk.validate();
    const double root_m = std::sqrt(static_cast<double>(blk.m));
    double mean = 0.0;
    for (double t : blk.block_sums) mean += t / root_m;
    mean /= static_cast<double>(blk.blocks());
    double ss = 0.0;
    for (double t : blk.block_sums) {
        const double d = t / root_m - mean;
        ss += d * d;
    }
    return ss / static_cast<double>(blk.blocks() - 1);
}

}  // namespace ssrmap
