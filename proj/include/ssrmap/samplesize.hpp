// Power of the one-sided two-sample t-test and the minimal total sample
// size rules built on it (plug-in variance, prior quantiles, expected power).

#pragma once

#include <optional>
#include <vector>

#include "ssrmap/distmath.hpp"

namespace ssrmap {

/// Allocation ratio k = n_C / n_T stored as reduced integers control:treatment.
struct Allocation {
    long control = 1;
    long treatment = 1;

    /// Rational approximation of k with denominator at most 1000.
    static Allocation from_ratio(double k);
    static Allocation from_parts(long control, long treatment);

    double ratio() const noexcept { return static_cast<double>(control) / static_cast<double>(treatment); }
    long block() const noexcept { return control + treatment; }
    long n_treatment(long n) const noexcept { return n / block() * treatment; }
    long n_control(long n) const noexcept { return n / block() * control; }

    bool operator==(const Allocation&) const = default;
};

enum class FinalSizePolicy {
    max_reestimate_pilot,    // n_final = max(n_reest, n1)
    max_planned_reestimate,  // n_final = max(n_planned, n_reest)
};

struct DesignParams {
    double alpha = 0.025;  // one-sided
    double target_power = 0.8;
    double delta_star = 0.0;
    Allocation allocation{};
    long n1 = 0;  // internal pilot total size, 0 when only planning
    std::optional<long> n_max;
    FinalSizePolicy final_policy = FinalSizePolicy::max_reestimate_pilot;
    std::optional<long> n_planned;

    double k() const noexcept { return allocation.ratio(); }
    double beta() const noexcept { return 1.0 - target_power; }
    long block() const noexcept { return allocation.block(); }
    /// Smallest allocatable total with n >= 4.
    long min_n() const noexcept;
    bool allocatable(long n) const noexcept { return n >= min_n() && n % block() == 0; }
    long round_up(long n) const noexcept;

    /// Checks the planning invariants (alpha, power, delta, cap).
    void validate() const;
    /// Additionally checks the internal pilot size.
    void validate_with_pilot() const;
};

/// B(n, sigma^2, delta): power of the final t-test with total size n.
double power(long n, double sigma2, double delta, const DesignParams& d);

/// Smallest allocatable n with power(n, sigma2, delta_star) >= 1 - beta.
/// Throws CapExceeded when d.n_max is set and smaller than the answer.
long required_n(double sigma2, const DesignParams& d);

/// Closed-form normal approximation, for diagnostics and as a search start.
double required_n_normal_approx(double sigma2, const DesignParams& d);

/// Power averaged over a prior on sigma^2 (adaptive Simpson per component).
double expected_power(long n, const DesignParams& d, const GammaMixture& prior);

long required_n_expected_power(const DesignParams& d, const GammaMixture& prior);

struct PlanningRule {
    enum class Kind { mean, median, quantile, expected_power };
    Kind kind = Kind::mean;
    double p = 0.5;                  // quantile level for Kind::quantile
    Scale scale = Scale::variance;  // scale the point estimate is taken on

    static PlanningRule mean() { return {Kind::mean, 0.5, Scale::variance}; }
    static PlanningRule median() { return {Kind::median, 0.5, Scale::variance}; }
    static PlanningRule quantile(double p) { return {Kind::quantile, p, Scale::variance}; }
    static PlanningRule expected() { return {Kind::expected_power, 0.5, Scale::variance}; }
};

/// Point estimate of sigma^2 implied by a rule; empty for expected power.
std::optional<double> planning_variance(const GammaMixture& prior, const PlanningRule& rule);

long plan_from_prior(const DesignParams& d, const GammaMixture& prior, const PlanningRule& rule);

/// Precomputed variance thresholds: entry i is the largest sigma^2 for which
/// the i-th allocatable total still reaches the target power. Immutable after
/// construction and shared read-only by simulation workers.
class SampleSizeTable {
public:
    SampleSizeTable(const DesignParams& d, long n_upper);

    /// Same answer as required_n(sigma2, design), answered by lookup.
    long required_n(double sigma2) const;
    /// t_{n-2, 1-alpha}.
    double critical_value(long n) const;

    long n_lower() const noexcept { return n_lower_; }
    long n_upper() const noexcept { return n_lower_ + (static_cast<long>(thresholds_.size()) - 1) * block_; }
    const DesignParams& design() const noexcept { return design_; }

private:
    DesignParams design_;
    long n_lower_;
    long block_;
    std::vector<double> thresholds_;
    std::vector<double> critical_;
};

}  // namespace ssrmap
