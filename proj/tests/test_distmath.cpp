#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oracles.hpp"
#include "ssrmap/distmath.hpp"
#include "ssrmap/errors.hpp"
#include "ssrmap/reference_configs.hpp"

using namespace ssrmap;

namespace {

const GammaMixture& st_johns() {
    static const GammaMixture m = reference::st_johns_prior();
    return m;
}

}  // namespace

TEST_CASE("normal cdf and quantile are inverse") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    for (double p : {1e-10, 0.001, 0.2, 0.5, 0.8, 0.999, 1 - 1e-10})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("t quantile at table values") {
    CHECK(t_quantile(0.975, 10) == doctest::Approx(2.228138851986).epsilon(1e-10));
    CHECK(t_quantile(0.95, 1) == doctest::Approx(6.313751514675).epsilon(1e-10));
    CHECK(t_cdf(t_quantile(0.9, 7.5), 7.5) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("noncentral t cdf agrees with chi-square mixture quadrature") {
    for (double df : {1.0, 4.0, 18.0, 126.0, 1000.0}) {
        for (double ncp : {0.0, 0.7, 2.8, 6.0, -1.5}) {
            for (double x : {-3.0, -0.4, 0.0, 1.0, 1.97, 4.5}) {
                CAPTURE(df);
                CAPTURE(ncp);
                CAPTURE(x);
                CHECK(std::fabs(noncentral_t_cdf(x, df, ncp) - oracle::nct_cdf_quadrature(x, df, ncp)) < 1e-9);
            }
        }
    }
}

TEST_CASE("noncentral t cdf agrees with Boost's implementation") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double df = 2.0 + 400.0 * u(gen);
        const double ncp = -2.0 + 12.0 * u(gen);
        const double x = -4.0 + 14.0 * u(gen);
        CHECK(std::fabs(noncentral_t_cdf(x, df, ncp) - oracle::nct_cdf_boost(x, df, ncp)) < 1e-9);
    }
}

TEST_CASE("noncentral t with zero noncentrality is the central t") {
    for (double x : {-2.0, 0.3, 1.8})
        CHECK(noncentral_t_cdf(x, 12.0, 0.0) == doctest::Approx(t_cdf(x, 12.0)).epsilon(1e-12));
}

TEST_CASE("noncentral t cdf at extreme noncentrality stays in [0, 1] and monotone in x") {
    double prev = 0.0;
    for (double x = 20.0; x < 60.0; x += 0.5) {
        const double f = noncentral_t_cdf(x, 50.0, 40.0);
        CHECK(f >= prev - 1e-12);
        CHECK(f <= 1.0);
        prev = f;
    }
}

TEST_CASE("mixture construction validates its components") {
    CHECK_THROWS_AS(GammaMixture({{0.5, 2.0, 1.0}, {0.4, 3.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(GammaMixture({{1.0, -2.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(GammaMixture({{1.0, 2.0, 0.0}}), InvalidArgument);
    CHECK_THROWS_AS(GammaMixture({}), InvalidArgument);
    const auto m = GammaMixture::normalized({{2.0, 2.0, 1.0}, {6.0, 3.0, 1.0}});
    CHECK(m[0].weight == doctest::Approx(0.25));
}

TEST_CASE("variance-scale cdf mirrors the precision-scale cdf") {
    for (double x : {10.0, 25.0, 40.0, 80.0})
        CHECK(mixture_cdf(st_johns(), x, Scale::variance) ==
              doctest::Approx(1.0 - mixture_cdf(st_johns(), 1.0 / x, Scale::precision)).epsilon(1e-13));
    CHECK(mixture_cdf(st_johns(), 36.0, Scale::variance) ==
          doctest::Approx(mixture_cdf(st_johns(), 6.0, Scale::sd)).epsilon(1e-13));
}

TEST_CASE("gamma cdf matches Boost") {
    for (double x : {0.01, 0.5, 2.0, 9.0})
        CHECK(gamma_cdf(x, 3.7, 1.3) ==
              doctest::Approx(boost::math::cdf(boost::math::gamma_distribution<>(3.7, 1.0 / 1.3), x)).epsilon(1e-13));
}

TEST_CASE("pdf integrates to one and to the cdf on every scale") {
    using boost::math::quadrature::gauss_kronrod;
    for (Scale s : {Scale::variance, Scale::sd, Scale::precision}) {
        const double lo = mixture_quantile(st_johns(), 1e-9, s);
        const double hi = mixture_quantile(st_johns(), 1 - 1e-9, s);
        const double mid = mixture_quantile(st_johns(), 0.3, s);
        auto f = [&](double x) { return mixture_pdf(st_johns(), x, s); };
        CHECK(gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-12) == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(gauss_kronrod<double, 61>::integrate(f, lo, mid, 15, 1e-12) == doctest::Approx(0.3).epsilon(1e-7));
    }
}

TEST_CASE("quantile inverts the cdf on every scale") {
    for (Scale s : {Scale::variance, Scale::sd, Scale::precision}) {
        double prev = -1.0;
        for (double p : {1e-6, 0.025, 0.25, 0.5, 0.75, 0.975, 1 - 1e-6}) {
            const double q = mixture_quantile(st_johns(), p, s);
            CHECK(mixture_cdf(st_johns(), q, s) == doctest::Approx(p).epsilon(1e-10));
            CHECK(q > prev);
            prev = q;
        }
    }
    CHECK_THROWS_AS(mixture_quantile(st_johns(), 0.0, Scale::variance), InvalidArgument);
    CHECK_THROWS_AS(mixture_quantile(st_johns(), 1.0, Scale::variance), InvalidArgument);
}

TEST_CASE("single-component moments have closed forms") {
    const double a = 7.5, b = 3.0;
    const auto m = GammaMixture::single(a, b);
    const auto v = mixture_moments(m, Scale::variance);
    CHECK(v.mean == doctest::Approx(b / (a - 1)).epsilon(1e-14));
    CHECK(v.sd == doctest::Approx(b / ((a - 1) * std::sqrt(a - 2))).epsilon(1e-12));
    const auto p = mixture_moments(m, Scale::precision);
    CHECK(p.mean == doctest::Approx(a / b).epsilon(1e-14));
    CHECK(p.sd == doctest::Approx(std::sqrt(a) / b).epsilon(1e-12));
    const auto s = mixture_moments(m, Scale::sd);
    const double es = std::sqrt(b) * std::exp(std::lgamma(a - 0.5) - std::lgamma(a));
    CHECK(s.mean == doctest::Approx(es).epsilon(1e-12));
    CHECK(s.sd == doctest::Approx(std::sqrt(b / (a - 1) - es * es)).epsilon(1e-10));
}

TEST_CASE("undefined moments are reported") {
    CHECK_THROWS_AS(mixture_mean(GammaMixture::single(1.0, 2.0), Scale::variance), UndefinedMoment);
    CHECK_THROWS_AS(mixture_moments(GammaMixture::single(1.8, 2.0), Scale::variance), UndefinedMoment);
    CHECK_NOTHROW(mixture_mean(GammaMixture::single(0.8, 2.0), Scale::precision));
    CHECK_THROWS_AS(mixture_mean(GammaMixture::single(0.4, 2.0), Scale::sd), UndefinedMoment);
}

TEST_CASE("St John's prior moments agree with a Monte Carlo estimate") {
    std::mt19937_64 gen(2024);
    const int N = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = oracle::draw_sigma2(st_johns(), gen);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / N;
    const double sd = std::sqrt(sum2 / N - mean * mean);
    const auto mo = mixture_mean_variance(st_johns());
    CHECK(std::fabs(mo.mean - mean) < 3.0 * sd / std::sqrt(N));
    CHECK(mo.sd == doctest::Approx(sd).epsilon(0.01));
    // Close to the published location; the spread is checked by the acceptance suite.
    CHECK(mo.mean == doctest::Approx(39.56).epsilon(0.05));
    CHECK(mixture_quantile(st_johns(), 0.5, Scale::variance) == doctest::Approx(37.93).epsilon(0.05));
    CHECK(mixture_quantile(st_johns(), 0.025, Scale::variance) == doctest::Approx(21.11).epsilon(0.05));
    CHECK(mixture_quantile(st_johns(), 0.975, Scale::variance) == doctest::Approx(68.52).epsilon(0.05));
    CHECK(mixture_mean_variance(reference::blood_pressure_prior()).mean == doctest::Approx(251.47).epsilon(0.05));
}

TEST_CASE("sample_mixture draws follow the mixture cdf") {
    Rng rng(99);
    const int N = 100000;
    std::vector<double> xs(N);
    for (auto& x : xs) x = sample_mixture(st_johns(), rng, Scale::variance);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (int i = 0; i < N; ++i) {
        const double f = mixture_cdf(st_johns(), xs[i], Scale::variance);
        ks = std::max({ks, std::fabs(f - static_cast<double>(i) / N), std::fabs(f - static_cast<double>(i + 1) / N)});
    }
    CHECK(ks < 0.01);
}
