// Probability kernel: normal, central and noncentral t, Gamma and
// Gamma-mixture utilities.
//
// A GammaMixture is a prior or posterior on the precision omega = 1/sigma^2.
// The same parameters describe an inverse-Gamma mixture on sigma^2, so every
// mixture query takes the scale it should be answered on.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssrmap/rng.hpp"

namespace ssrmap {

enum class Scale { variance, sd, precision };

struct GammaComponent {
    double weight;
    double shape;  // a
    double rate;   // b

    bool operator==(const GammaComponent&) const = default;
};

class GammaMixture {
public:
    /// Weights must be positive and sum to one within 1e-12.
    explicit GammaMixture(std::vector<GammaComponent> components);

    /// Rescales arbitrary positive weights to sum to one.
    static GammaMixture normalized(std::vector<GammaComponent> components);
    static GammaMixture single(double shape, double rate);

    std::span<const GammaComponent> components() const noexcept { return components_; }
    std::size_t size() const noexcept { return components_.size(); }
    const GammaComponent& operator[](std::size_t i) const { return components_[i]; }

    bool operator==(const GammaMixture&) const = default;

private:
    std::vector<GammaComponent> components_;
};

struct Moments {
    double mean;
    double sd;
};

double normal_cdf(double x);
double normal_quantile(double p);

double t_cdf(double x, double df);
double t_quantile(double p, double df);

/// P(T <= x) for T noncentral t with `df` degrees of freedom and noncentrality `ncp`.
double noncentral_t_cdf(double x, double df, double ncp);

double gamma_cdf(double x, double shape, double rate);

double mixture_cdf(const GammaMixture& m, double x, Scale scale);
double mixture_pdf(const GammaMixture& m, double x, Scale scale);
double mixture_quantile(const GammaMixture& m, double p, Scale scale);
double component_quantile(const GammaComponent& c, double p, Scale scale);

/// Mean on the given scale; throws UndefinedMoment when it does not exist.
double mixture_mean(const GammaMixture& m, Scale scale);
/// Mean and standard deviation on the given scale.
Moments mixture_moments(const GammaMixture& m, Scale scale);
/// Mean and sd of sigma^2 (inverse-Gamma mixture moments).
inline Moments mixture_mean_variance(const GammaMixture& m) {
    return mixture_moments(m, Scale::variance);
}

double sample_mixture(const GammaMixture& m, Rng& rng, Scale scale);

}  // namespace ssrmap
