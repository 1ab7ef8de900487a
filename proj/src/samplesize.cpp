#include "ssrmap/samplesize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "ssrmap/errors.hpp"

namespace ssrmap {

namespace {

constexpr long kSearchLimit = 1L << 40;
constexpr int kMaxSubintervals = 1 << 15;

double noncentrality(long n, double sigma2, double delta, const Allocation& a) {
    const double c = static_cast<double>(a.control);
    const double t = static_cast<double>(a.treatment);
    return std::sqrt(static_cast<double>(n) * c * t) / (c + t) * delta / std::sqrt(sigma2);
}

// Smallest allocatable n for which `reaches(n)` holds, assuming monotonicity
// in n. The search starts at `start`, doubles to bracket, then bisects over
// allocation blocks.
template <class Reaches>
long minimal_n(const DesignParams& d, long start, Reaches&& reaches) {
    const long block = d.block();
    long hi = std::max(d.min_n(), d.round_up(start));
    long lo;  // largest block index known to fail, or below the minimum
    if (reaches(hi)) {
        if (hi == d.min_n() || reaches(d.min_n())) return d.min_n();
        lo = d.min_n();
    } else {
        lo = hi;
        for (;;) {
            long next = d.round_up(2 * lo);
            if (d.n_max && next > *d.n_max) {
                // Only allocatable totals within the cap are admissible.
                next = *d.n_max / block * block;
                if (next <= lo || !reaches(next))
                    throw CapExceeded("required sample size exceeds n_max=" + std::to_string(*d.n_max),
                                      *d.n_max);
                hi = next;
                break;
            }
            if (next > kSearchLimit) throw CapExceeded("target power is not attainable", kSearchLimit);
            if (reaches(next)) {
                hi = next;
                break;
            }
            lo = next;
        }
    }
    // Invariant: lo fails, hi reaches.
    while (hi - lo > block) {
        const long mid = lo + ((hi - lo) / block / 2) * block;
        if (reaches(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if (d.n_max && hi > *d.n_max)
        throw CapExceeded("required sample size exceeds n_max=" + std::to_string(*d.n_max), *d.n_max);
    return hi;
}

struct SimpsonSegment {
    double a, b, fa, fm, fb, whole;
    int depth;
};

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol) {
    // A coarse initial partition keeps narrow peaks from being stepped over.
    constexpr int kPanels = 32;
    std::vector<SimpsonSegment> stack;
    stack.reserve(64);
    const double width = (b - a) / kPanels;
    for (int i = kPanels; i-- > 0;) {
        const double lo = a + width * i;
        const double hi = i + 1 == kPanels ? b : lo + width;
        const double fa = f(lo), fm = f(0.5 * (lo + hi)), fb = f(hi);
        stack.push_back({lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), 0});
    }
    double total = 0.0;
    int intervals = kPanels;
    while (!stack.empty()) {
        const SimpsonSegment s = stack.back();
        stack.pop_back();
        const double mid = 0.5 * (s.a + s.b);
        const double lm = 0.5 * (s.a + mid);
        const double rm = 0.5 * (mid + s.b);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
        const double right = (s.b - mid) / 6.0 * (s.fm + 4.0 * frm + s.fb);
        const double diff = left + right - s.whole;
        const double local_tol = tol * (s.b - s.a) / (b - a);
        if (std::fabs(diff) <= 15.0 * local_tol || intervals >= kMaxSubintervals) {
            total += left + right + diff / 15.0;
        } else {
            ++intervals;
            stack.push_back({mid, s.b, s.fm, frm, s.fb, right, s.depth + 1});
            stack.push_back({s.a, mid, s.fa, flm, s.fm, left, s.depth + 1});
        }
    }
    return total;
}

}  // namespace

Allocation Allocation::from_parts(long control, long treatment) {
    if (control <= 0 || treatment <= 0) throw InvalidArgument("allocation parts must be positive");
    const long g = std::gcd(control, treatment);
    return {control / g, treatment / g};
}

Allocation Allocation::from_ratio(double k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("allocation ratio k must be positive");
    // Best rational approximation by continued fractions.
    long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double x = k;
    for (int i = 0; i < 32; ++i) {
        const double ai = std::floor(x);
        const long a = static_cast<long>(ai);
        const long h2 = a * h1 + h0;
        const long k2 = a * k1 + k0;
        if (k2 > 1000) break;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (std::fabs(static_cast<double>(h1) / static_cast<double>(k1) - k) < 1e-12 * k) break;
        x = 1.0 / (x - ai);
        if (!std::isfinite(x)) break;
    }
    return from_parts(h1, k1);
}

long DesignParams::min_n() const noexcept {
    const long b = block();
    return (4 + b - 1) / b * b;
}

long DesignParams::round_up(long n) const noexcept {
    const long b = block();
    const long r = (n + b - 1) / b * b;
    return std::max(r, min_n());
}

void DesignParams::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5)");
    if (!(target_power > alpha && target_power < 1.0))
        throw InvalidArgument("target power must lie in (alpha, 1)");
    if (!(delta_star > 0.0) || !std::isfinite(delta_star)) throw InvalidArgument("delta_star must be positive");
    if (allocation.control <= 0 || allocation.treatment <= 0)
        throw InvalidArgument("allocation parts must be positive");
    if (n_max && !allocatable(*n_max)) throw InvalidArgument("n_max must be an allocatable total >= 4");
    if (final_policy == FinalSizePolicy::max_planned_reestimate && !n_planned)
        throw InvalidArgument("final policy max(n_planned, n_reest) needs n_planned");
    if (n_planned && !allocatable(*n_planned)) throw InvalidArgument("n_planned must be allocatable");
}

void DesignParams::validate_with_pilot() const {
    validate();
    if (n1 < 4) throw InvalidArgument("pilot size n1 must be at least 4");
    if (n1 % block() != 0)
        throw InvalidArgument("pilot size n1 must be a multiple of the allocation block " + std::to_string(block()));
    if (allocation.n_treatment(n1) < 2 || allocation.n_control(n1) < 2)
        throw InvalidArgument("pilot size n1 must give at least two patients per arm");
    if (n_max && *n_max < n1) throw InvalidArgument("n_max must not be below n1");
}

double power(long n, double sigma2, double delta, const DesignParams& d) {
    if (n < 4 || n % d.block() != 0)
        throw InvalidArgument("power: n=" + std::to_string(n) + " is not an allocatable total");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("power: sigma2 must be positive");
    const double df = static_cast<double>(n - 2);
    const double crit = t_quantile(1.0 - d.alpha, df);
    const double lambda = noncentrality(n, sigma2, delta, d.allocation);
    return 1.0 - noncentral_t_cdf(crit, df, lambda);
}

double required_n_normal_approx(double sigma2, const DesignParams& d) {
    const double k = d.k();
    const double z = normal_quantile(1.0 - d.alpha) + normal_quantile(d.target_power);
    return (k + 1.0) * (k + 1.0) / k * sigma2 * z * z / (d.delta_star * d.delta_star);
}

long required_n(double sigma2, const DesignParams& d) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("required_n: sigma2 must be positive");
    d.validate();
    const double approx = std::min(required_n_normal_approx(sigma2, d), 1e12);
    const double target = d.target_power;
    return minimal_n(d, static_cast<long>(std::ceil(approx)),
                     [&](long n) { return power(n, sigma2, d.delta_star, d) >= target; });
}

double expected_power(long n, const DesignParams& d, const GammaMixture& prior) {
    if (n < 4 || n % d.block() != 0)
        throw InvalidArgument("expected_power: n=" + std::to_string(n) + " is not an allocatable total");
    const double df = static_cast<double>(n - 2);
    const double crit = t_quantile(1.0 - d.alpha, df);
    double total = 0.0;
    for (const auto& c : prior.components()) {
        const GammaMixture one = GammaMixture::single(c.shape, c.rate);
        const double lo = component_quantile(c, 1e-8, Scale::variance);
        const double hi = component_quantile(c, 1.0 - 1e-8, Scale::variance);
        auto integrand = [&](double x) {
            const double lambda = noncentrality(n, x, d.delta_star, d.allocation);
            return (1.0 - noncentral_t_cdf(crit, df, lambda)) * mixture_pdf(one, x, Scale::variance);
        };
        total += c.weight * adaptive_simpson(integrand, lo, hi, 1e-6);
    }
    return total;
}

long required_n_expected_power(const DesignParams& d, const GammaMixture& prior) {
    d.validate();
    const double start_var = mixture_quantile(prior, 0.5, Scale::variance);
    const long start = static_cast<long>(std::ceil(std::min(required_n_normal_approx(start_var, d), 1e12)));
    const double target = d.target_power;
    return minimal_n(d, start, [&](long n) { return expected_power(n, d, prior) >= target; });
}

std::optional<double> planning_variance(const GammaMixture& prior, const PlanningRule& rule) {
    double estimate = 0.0;
    switch (rule.kind) {
        case PlanningRule::Kind::expected_power:
            return std::nullopt;
        case PlanningRule::Kind::mean:
            estimate = mixture_mean(prior, rule.scale);
            break;
        case PlanningRule::Kind::median:
            estimate = mixture_quantile(prior, 0.5, rule.scale);
            break;
        case PlanningRule::Kind::quantile:
            estimate = mixture_quantile(prior, rule.p, rule.scale);
            break;
    }
    switch (rule.scale) {
        case Scale::variance:
            return estimate;
        case Scale::sd:
            return estimate * estimate;
        case Scale::precision:
            return 1.0 / estimate;
    }
    return estimate;
}

long plan_from_prior(const DesignParams& d, const GammaMixture& prior, const PlanningRule& rule) {
    if (const auto v = planning_variance(prior, rule)) return required_n(*v, d);
    return required_n_expected_power(d, prior);
}

SampleSizeTable::SampleSizeTable(const DesignParams& d, long n_upper)
    : design_(d), n_lower_(d.min_n()), block_(d.block()) {
    d.validate();
    const long top = std::max(n_lower_, d.round_up(n_upper));
    const auto count = static_cast<std::size_t>((top - n_lower_) / block_ + 1);
    thresholds_.reserve(count);
    critical_.reserve(count);
    const double beta = d.beta();
    for (long n = n_lower_; n <= top; n += block_) {
        const double df = static_cast<double>(n - 2);
        const double crit = t_quantile(1.0 - d.alpha, df);
        critical_.push_back(crit);
        // Solve F_nct(crit; lambda, df) = beta for lambda; F decreases in lambda.
        auto f = [&](double lambda) { return noncentral_t_cdf(crit, df, lambda) - beta; };
        double lo = 0.0, hi = crit + 2.0 * normal_quantile(d.target_power) + 1.0;
        while (f(hi) > 0.0) hi *= 2.0;
        boost::uintmax_t iters = 200;
        const auto [a, b] =
            boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
        const double lambda = 0.5 * (a + b);
        const double scale = noncentrality(n, 1.0, d.delta_star, d.allocation);
        thresholds_.push_back(scale * scale / (lambda * lambda));
    }
}

long SampleSizeTable::required_n(double sigma2) const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("required_n: sigma2 must be positive");
    const auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), sigma2);
    if (it == thresholds_.end()) return ssrmap::required_n(sigma2, design_);
    // The threshold is a root; confirm the neighbourhood exactly where it is close.
    const long n = n_lower_ + static_cast<long>(it - thresholds_.begin()) * block_;
    if (std::fabs(*it - sigma2) <= 1e-9 * sigma2 ||
        (it != thresholds_.begin() && std::fabs(*(it - 1) - sigma2) <= 1e-9 * sigma2)) {
        return ssrmap::required_n(sigma2, design_);
    }
    if (design_.n_max && n > *design_.n_max)
        throw CapExceeded("required sample size exceeds n_max=" + std::to_string(*design_.n_max), *design_.n_max);
    return n;
}

double SampleSizeTable::critical_value(long n) const {
    if (n >= n_lower_ && n % block_ == 0) {
        const auto i = static_cast<std::size_t>((n - n_lower_) / block_);
        if (i < critical_.size()) return critical_[i];
    }
    return t_quantile(1.0 - design_.alpha, static_cast<double>(n - 2));
}

}  // namespace ssrmap
