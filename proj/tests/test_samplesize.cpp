#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ssrmap/errors.hpp"
#include "ssrmap/reference_configs.hpp"
#include "ssrmap/samplesize.hpp"

using namespace ssrmap;

namespace {

DesignParams design(double delta, double alpha = 0.025, double target = 0.8, double k = 1.0) {
    DesignParams d;
    d.alpha = alpha;
    d.target_power = target;
    d.delta_star = delta;
    d.allocation = Allocation::from_ratio(k);
    return d;
}

struct MonteCarloPower {
    double mean;
    double se;
};

MonteCarloPower mc_expected_power(long n, const DesignParams& d, const GammaMixture& prior, int draws,
                                  std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double b = oracle::power_boost(n, oracle::draw_sigma2(prior, gen), d.delta_star, d.alpha);
        s += b;
        s2 += b * b;
    }
    const double m = s / draws;
    return {m, std::sqrt((s2 / draws - m * m) / draws)};
}

}  // namespace

TEST_CASE("standardized effect 0.5 needs 128 patients") {
    const auto d = design(0.5);
    CHECK(required_n(1.0, d) == 128);
    CHECK(power(128, 1.0, 0.5, d) >= 0.8);
    CHECK(power(126, 1.0, 0.5, d) < 0.8);
}

TEST_CASE("power matches Boost's noncentral t") {
    for (long n : {4L, 10L, 64L, 200L, 1000L})
        for (double s2 : {0.5, 1.0, 40.0})
            CHECK(power(n, s2, 0.5, design(0.5)) == doctest::Approx(oracle::power_boost(n, s2, 0.5, 0.025)).epsilon(1e-9));
    const auto d2 = design(1.0, 0.05, 0.9, 2.0);
    CHECK(power(99, 2.0, 1.0, d2) == doctest::Approx(oracle::power_boost(99, 2.0, 1.0, 0.05, 2, 1)).epsilon(1e-9));
}

TEST_CASE("required_n equals a linear scan with an independent power oracle") {
    struct Case {
        double sigma2, delta, alpha, target, k;
        long control, treatment;
    };
    const Case cases[] = {
        {1.0, 0.5, 0.025, 0.8, 1.0, 1, 1},          {39.56, 2.515, 0.025, 0.8, 1.0, 1, 1},
        {251.47, 6.343, 0.025, 0.8, 1.0, 1, 1},     {2.0, 0.3, 0.05, 0.9, 1.0, 1, 1},
        {1.0, 0.8, 0.025, 0.8, 2.0, 2, 1},          {1.0, 0.8, 0.025, 0.8, 0.5, 1, 2},
        {0.05, 1.0, 0.025, 0.8, 1.0, 1, 1},         {3.0, 0.25, 0.01, 0.95, 1.0, 1, 1},
    };
    for (const auto& c : cases) {
        CAPTURE(c.sigma2);
        CAPTURE(c.delta);
        const auto d = design(c.delta, c.alpha, c.target, c.k);
        CHECK(required_n(c.sigma2, d) == oracle::required_n_scan(c.sigma2, c.delta, c.alpha, c.target, c.control, c.treatment));
    }
}

TEST_CASE("the two clinical examples") {
    // Exact search, confirmed independently by the linear-scan oracle above.
    CHECK(required_n(39.56, design(reference::kStJohnsDelta)) == 200);
    CHECK(required_n(251.47, design(reference::kBloodPressureDelta)) == 200);
}

TEST_CASE("allocation from a ratio") {
    CHECK(Allocation::from_ratio(1.0) == Allocation{1, 1});
    CHECK(Allocation::from_ratio(2.0) == Allocation{2, 1});
    CHECK(Allocation::from_ratio(0.5) == Allocation{1, 2});
    CHECK(Allocation::from_ratio(1.5) == Allocation{3, 2});
    CHECK(Allocation::from_parts(4, 2) == Allocation{2, 1});
    CHECK_THROWS_AS(Allocation::from_ratio(0.0), InvalidArgument);
    const auto d = design(0.5, 0.025, 0.8, 2.0);
    CHECK(required_n(1.0, d) % 3 == 0);
    CHECK(d.min_n() == 6);
    CHECK(design(0.5).min_n() == 4);
}

TEST_CASE("required_n is minimal and monotone in the variance") {
    const auto d = design(0.5);
    long prev = 0;
    for (double s2 = 0.05; s2 < 4.0; s2 *= 1.17) {
        const long n = required_n(s2, d);
        CHECK(n >= prev);
        CHECK(power(n, s2, 0.5, d) >= 0.8);
        if (n > d.min_n()) {
            CHECK(power(n - 2, s2, 0.5, d) < 0.8);
        }
        prev = n;
    }
}

TEST_CASE("tiny variances give the minimum size") {
    CHECK(required_n(1e-8, design(0.5)) == 4);
}

TEST_CASE("normal approximation is close for moderate sizes") {
    const auto d = design(0.5);
    CHECK(required_n_normal_approx(1.0, d) == doctest::Approx(125.58).epsilon(1e-3));
    CHECK(std::fabs(required_n_normal_approx(3.0, d) - static_cast<double>(required_n(3.0, d))) < 5.0);
}

TEST_CASE("cap and invalid designs") {
    auto d = design(0.5);
    d.n_max = 100;
    CHECK_THROWS_AS(required_n(1.0, d), CapExceeded);
    CHECK(required_n(0.5, d) == oracle::required_n_scan(0.5, 0.5, 0.025, 0.8));
    CHECK_THROWS_AS(required_n(0.0, design(0.5)), InvalidArgument);
    CHECK_THROWS_AS(required_n(1.0, design(0.0)), InvalidArgument);
    CHECK_THROWS_AS(required_n(1.0, design(0.5, 0.6)), InvalidArgument);
    CHECK_THROWS_AS(power(127, 1.0, 0.5, design(0.5)), InvalidArgument);
}

TEST_CASE("expected power agrees with a Monte Carlo average over the prior") {
    const auto d = design(reference::kStJohnsDelta);
    const auto prior = reference::st_johns_prior();
    const double ep = expected_power(198, d, prior);
    const auto mc = mc_expected_power(198, d, prior, 1000000, 5);
    CHECK(std::fabs(ep - mc.mean) < 2.0 * mc.se);
}

TEST_CASE("expected power of a point-like prior is the plug-in power") {
    const auto d = design(0.5);
    const auto prior = GammaMixture::single(1e6, 1e6);
    CHECK(expected_power(128, d, prior) == doctest::Approx(power(128, 1.0, 0.5, d)).epsilon(1e-4));
}

TEST_CASE("expected-power sample size brackets the Monte Carlo target") {
    const auto d = design(reference::kStJohnsDelta);
    const auto prior = reference::st_johns_prior();
    const long n = required_n_expected_power(d, prior);
    CHECK(expected_power(n, d, prior) >= 0.8);
    CHECK(expected_power(n - 2, d, prior) < 0.8);
    const auto at = mc_expected_power(n, d, prior, 400000, 6);
    const auto below = mc_expected_power(n - 2, d, prior, 400000, 7);
    CHECK(at.mean > 0.8 - 3.0 * at.se);
    CHECK(below.mean < 0.8 + 3.0 * below.se);
    CHECK(n >= required_n(mixture_quantile(prior, 0.5, Scale::variance), d) - 40);
}

TEST_CASE("planning rules on the St John's prior") {
    const auto d = design(reference::kStJohnsDelta);
    const auto prior = reference::st_johns_prior();
    const double mean = mixture_mean(prior, Scale::variance);
    CHECK(*planning_variance(prior, PlanningRule::mean()) == doctest::Approx(mean).epsilon(1e-14));
    CHECK(plan_from_prior(d, prior, PlanningRule::mean()) == required_n(mean, d));
    CHECK(plan_from_prior(d, prior, PlanningRule::median()) <= plan_from_prior(d, prior, PlanningRule::mean()));
    CHECK(plan_from_prior(d, prior, PlanningRule::quantile(0.8)) >
          plan_from_prior(d, prior, PlanningRule::median()));
    CHECK_FALSE(planning_variance(prior, PlanningRule::expected()).has_value());
    CHECK(plan_from_prior(d, prior, PlanningRule::expected()) == required_n_expected_power(d, prior));
}

TEST_CASE("lookup table reproduces the direct search") {
    const auto d = design(0.5);
    const SampleSizeTable table(d, 2000);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-5.0, 3.0);
    for (int i = 0; i < 400; ++i) {
        const double s2 = std::exp(u(gen));
        CHECK(table.required_n(s2) == required_n(s2, d));
    }
    // Around each tabulated threshold.
    for (long n = 4; n < 600; n += 50) {
        double lo = 1e-3, hi = 30.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = std::sqrt(lo * hi);
            (required_n(mid, d) <= n ? lo : hi) = mid;
        }
        for (double s2 : {lo, hi, lo * (1 - 1e-9), hi * (1 + 1e-9)}) CHECK(table.required_n(s2) == required_n(s2, d));
    }
    CHECK(table.required_n(100.0) == required_n(100.0, d));
    CHECK(table.critical_value(128) == doctest::Approx(t_quantile(0.975, 126)).epsilon(1e-14));
}
