#include "ssrmap/distmath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ssrmap/errors.hpp"

namespace ssrmap {

namespace {

constexpr double kWeightTolerance = 1e-12;
constexpr int kNctTermBudget = 100000;
constexpr double kNctNormalDf = 1e5;

void validate_components(const std::vector<GammaComponent>& comps) {
    if (comps.empty()) throw InvalidArgument("GammaMixture: at least one component required");
    for (const auto& c : comps) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw InvalidArgument("GammaMixture: weights must be positive");
        if (!(c.shape > 0.0) || !std::isfinite(c.shape))
            throw InvalidArgument("GammaMixture: shapes must be positive");
        if (!(c.rate > 0.0) || !std::isfinite(c.rate))
            throw InvalidArgument("GammaMixture: rates must be positive");
    }
}

double weight_sum(const std::vector<GammaComponent>& comps) {
    double s = 0.0;
    for (const auto& c : comps) s += c.weight;
    return s;
}

void require_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument(std::string(what) + ": probability must lie in (0, 1)");
}

// Normal approximation used for very large df (and for huge |ncp| where the
// Poisson weights underflow).
double nct_normal_approx(double t, double df, double ncp) {
    const double s = 1.0 / (4.0 * df);
    return normal_cdf((t * (1.0 - s) - ncp) / std::sqrt(1.0 + t * t * 2.0 * s));
}

// Lower tail for t >= 0 using the AS 243 series in the half-integer steps of
// the incomplete beta ratio.
double nct_series(double t, double df, double del) {
    const double x = t * t / (t * t + df);
    double tnc = 0.0;
    if (x > 0.0) {
        const double lambda = del * del;
        double p = 0.5 * std::exp(-0.5 * lambda);
        double q = std::sqrt(2.0 / std::numbers::pi) * p * del;
        double s = 0.5 - p;
        if (s < 1e-7) s = -0.5 * std::expm1(-0.5 * lambda);
        double a = 0.5;
        const double b = 0.5 * df;
        const double log1mx = std::log1p(-x);
        const double rxb = std::exp(b * log1mx);
        const double albeta = 0.5 * std::log(std::numbers::pi) + std::lgamma(b) - std::lgamma(0.5 + b);
        double xodd = boost::math::ibeta(a, b, x);
        double godd = 2.0 * rxb * std::exp(a * std::log(x) - albeta);
        double xeven = -std::expm1(b * log1mx);
        double geven = b * x * rxb;
        tnc = p * xodd + q * xeven;
        for (int it = 1; it <= kNctTermBudget; ++it) {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * it);
            q *= lambda / (2.0 * it + 1.0);
            const double increment = p * xodd + q * xeven;
            tnc += increment;
            s -= p;
            if (s <= 0.0 && it > 1) break;
            const double errbd = 2.0 * s * (xodd - godd);
            if (std::fabs(errbd) < 1e-16 && std::fabs(increment) < 1e-16) break;
        }
    }
    return tnc + normal_cdf(-del);
}

}  // namespace

GammaMixture::GammaMixture(std::vector<GammaComponent> components)
    : components_(std::move(components)) {
    validate_components(components_);
    const double total = weight_sum(components_);
    if (std::fabs(total - 1.0) > kWeightTolerance)
        throw InvalidArgument("GammaMixture: weights must sum to one");
    for (auto& c : components_) c.weight /= total;
}

GammaMixture GammaMixture::normalized(std::vector<GammaComponent> components) {
    validate_components(components);
    const double total = weight_sum(components);
    for (auto& c : components) c.weight /= total;
    // Rounding can leave the sum a few ulps from one.
    const double again = weight_sum(components);
    for (auto& c : components) c.weight /= again;
    return GammaMixture(std::move(components));
}

GammaMixture GammaMixture::single(double shape, double rate) {
    return GammaMixture({{1.0, shape, rate}});
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    require_probability(p, "normal_quantile");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double t_cdf(double x, double df) {
    if (!(df > 0.0) || std::isnan(x)) throw InvalidArgument("t_cdf: df must be positive");
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    const double z = df / (df + x * x);
    // Tail mass from the incomplete beta; the complement is taken on the short side.
    const double tail = 0.5 * boost::math::ibeta(0.5 * df, 0.5, z);
    return x > 0.0 ? 1.0 - tail : tail;
}

double t_quantile(double p, double df) {
    require_probability(p, "t_quantile");
    if (!(df > 0.0) || !std::isfinite(df)) throw InvalidArgument("t_quantile: df must be positive");
    if (p == 0.5) return 0.0;
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double noncentral_t_cdf(double x, double df, double ncp) {
    if (!std::isfinite(x) || !std::isfinite(df) || !std::isfinite(ncp))
        throw InvalidArgument("noncentral_t_cdf: arguments must be finite");
    if (!(df > 0.0)) throw InvalidArgument("noncentral_t_cdf: df must be positive");

    bool negate = false;
    double t = x;
    double del = ncp;
    if (x < 0.0) {
        if (ncp > 40.0) return 0.0;
        negate = true;
        t = -x;
        del = -ncp;
    }
    double lower;
    if (df > kNctNormalDf || del * del > 2.0 * std::numbers::ln2 * 1021.0) {
        lower = nct_normal_approx(t, df, del);
    } else {
        lower = nct_series(t, df, del);
    }
    lower = std::clamp(lower, 0.0, 1.0);
    return negate ? 1.0 - lower : lower;
}

double gamma_cdf(double x, double shape, double rate) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::gamma_p(shape, rate * x);
}

double mixture_cdf(const GammaMixture& m, double x, Scale scale) {
    if (std::isnan(x)) throw InvalidArgument("mixture_cdf: NaN argument");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    double total = 0.0;
    switch (scale) {
        case Scale::precision:
            for (const auto& c : m.components()) total += c.weight * boost::math::gamma_p(c.shape, c.rate * x);
            break;
        case Scale::sd:
            x *= x;
            [[fallthrough]];
        case Scale::variance:
            for (const auto& c : m.components()) total += c.weight * boost::math::gamma_q(c.shape, c.rate / x);
            break;
    }
    return std::clamp(total, 0.0, 1.0);
}

double mixture_pdf(const GammaMixture& m, double x, Scale scale) {
    if (!(x > 0.0) || std::isinf(x)) return 0.0;
    double total = 0.0;
    for (const auto& c : m.components()) {
        const double log_norm = c.shape * std::log(c.rate) - std::lgamma(c.shape);
        switch (scale) {
            case Scale::precision:
                total += c.weight * std::exp(log_norm + (c.shape - 1.0) * std::log(x) - c.rate * x);
                break;
            case Scale::variance:
                total += c.weight * std::exp(log_norm - (c.shape + 1.0) * std::log(x) - c.rate / x);
                break;
            case Scale::sd: {
                const double v = x * x;
                total += c.weight * 2.0 * x *
                         std::exp(log_norm - (c.shape + 1.0) * std::log(v) - c.rate / v);
                break;
            }
        }
    }
    return total;
}

double component_quantile(const GammaComponent& c, double p, Scale scale) {
    require_probability(p, "component_quantile");
    switch (scale) {
        case Scale::precision:
            return boost::math::gamma_p_inv(c.shape, p) / c.rate;
        case Scale::variance:
            return c.rate / boost::math::gamma_q_inv(c.shape, p);
        case Scale::sd:
            return std::sqrt(c.rate / boost::math::gamma_q_inv(c.shape, p));
    }
    return 0.0;
}

double mixture_quantile(const GammaMixture& m, double p, Scale scale) {
    require_probability(p, "mixture_quantile");
    if (m.size() == 1) return component_quantile(m[0], p, scale);

    const double p_lo = p * 1e-3;
    const double p_hi = 1.0 - (1.0 - p) * 1e-3;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& c : m.components()) {
        lo = std::min(lo, component_quantile(c, p_lo, scale));
        hi = std::max(hi, component_quantile(c, p_hi, scale));
    }
    while (mixture_cdf(m, lo, scale) > p) lo *= 0.5;
    while (mixture_cdf(m, hi, scale) < p) hi *= 2.0;

    // Bisection on the log scale until the bracket is relatively tight.
    for (int it = 0; it < 200 && hi - lo > 1e-10 * lo; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mixture_cdf(m, mid, scale) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double mixture_mean(const GammaMixture& m, Scale scale) {
    double mean = 0.0;
    for (const auto& c : m.components()) {
        switch (scale) {
            case Scale::precision:
                mean += c.weight * c.shape / c.rate;
                break;
            case Scale::variance:
                if (c.shape <= 1.0) throw UndefinedMoment("variance-scale mean requires all shapes > 1");
                mean += c.weight * c.rate / (c.shape - 1.0);
                break;
            case Scale::sd:
                if (c.shape <= 0.5) throw UndefinedMoment("sd-scale mean requires all shapes > 1/2");
                mean += c.weight * std::sqrt(c.rate) *
                        std::exp(std::lgamma(c.shape - 0.5) - std::lgamma(c.shape));
                break;
        }
    }
    return mean;
}

Moments mixture_moments(const GammaMixture& m, Scale scale) {
    const double mean = mixture_mean(m, scale);
    double second = 0.0;
    for (const auto& c : m.components()) {
        switch (scale) {
            case Scale::precision:
                second += c.weight * c.shape * (c.shape + 1.0) / (c.rate * c.rate);
                break;
            case Scale::variance:
                if (c.shape <= 2.0) throw UndefinedMoment("variance-scale sd requires all shapes > 2");
                second += c.weight * c.rate * c.rate / ((c.shape - 1.0) * (c.shape - 2.0));
                break;
            case Scale::sd:
                if (c.shape <= 1.0) throw UndefinedMoment("sd-scale sd requires all shapes > 1");
                second += c.weight * c.rate / (c.shape - 1.0);
                break;
        }
    }
    return {mean, std::sqrt(std::max(0.0, second - mean * mean))};
}

double sample_mixture(const GammaMixture& m, Rng& rng, Scale scale) {
    std::size_t l = 0;
    if (m.size() > 1) {
        const double u = rng.uniform();
        double cum = 0.0;
        l = m.size() - 1;
        for (std::size_t i = 0; i < m.size(); ++i) {
            cum += m[i].weight;
            if (u < cum) {
                l = i;
                break;
            }
        }
    }
    std::gamma_distribution<double> gamma(m[l].shape, 1.0 / m[l].rate);
    const double omega = gamma(rng);
    switch (scale) {
        case Scale::precision:
            return omega;
        case Scale::variance:
            return 1.0 / omega;
        case Scale::sd:
            return 1.0 / std::sqrt(omega);
    }
    return omega;
}

}  // namespace ssrmap
