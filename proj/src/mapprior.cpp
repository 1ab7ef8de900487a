#include "ssrmap/mapprior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "ssrmap/errors.hpp"
#include "ssrmap/parallel.hpp"
#include "ssrmap/rng.hpp"

namespace ssrmap {

namespace {

constexpr double kTargetAcceptance = 0.44;
constexpr long kAdaptBatch = 50;
constexpr int kRestarts = 10;
constexpr int kMaxEmIterations = 2000;
constexpr double kEmTolerance = 1e-8;
constexpr double kMinComponentWeight = 1e-4;

// Random-walk proposal scale tuned in batches during burn-in only.
struct Proposal {
    double log_step = std::log(0.2);
    long accepted = 0;
    long proposed = 0;
    long batch_accepted = 0;
    long batch_proposed = 0;

    double step() const { return std::exp(log_step); }

    void record(bool accept, bool counting) {
        ++batch_proposed;
        batch_accepted += accept ? 1 : 0;
        if (counting) {
            ++proposed;
            accepted += accept ? 1 : 0;
        }
    }

    void adapt(long batch_index) {
        if (batch_proposed == 0) return;
        const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_proposed);
        const double delta = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(batch_index)));
        log_step += rate > kTargetAcceptance ? delta : -delta;
        batch_accepted = 0;
        batch_proposed = 0;
    }

    double acceptance() const {
        return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    }
};

// Log-likelihood of one trial's sample variance given theta = log sigma^2.
double trial_loglik(const HistoricalTrialSummary& t, double theta) {
    const double h = 0.5 * t.df;
    return -h * theta - h * t.sample_variance * std::exp(-theta);
}

struct ChainOutput {
    std::vector<double> mu, tau, theta_new;
    std::vector<Proposal> proposals;  // tau, shift, theta_1..theta_J  (or mu when pinned)
};

ChainOutput run_chain(std::span<const HistoricalTrialSummary> trials, const HierarchicalModelConfig& cfg,
                      bool pinned, int chain) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain), pinned ? 1 : 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t J = trials.size();
    const double mu_prec0 = 1.0 / (cfg.mu_prior_sd * cfg.mu_prior_sd);
    const double tau_scale2 = cfg.tau_prior_scale * cfg.tau_prior_scale;

    std::vector<double> theta(J);
    for (std::size_t j = 0; j < J; ++j) theta[j] = std::log(trials[j].sample_variance) + 0.1 * normal(rng);
    double mu = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(J) + 0.1 * normal(rng);
    double tau = std::min(cfg.tau_prior_scale, 0.3) * std::exp(0.3 * normal(rng));

    auto mu_logprior = [&](double m) {
        const double z = m - cfg.mu_prior_mean;
        return -0.5 * z * z * mu_prec0;
    };
    auto pooled_loglik = [&](double m) {
        double ll = 0.0;
        for (const auto& t : trials) ll += trial_loglik(t, m);
        return ll;
    };

    ChainOutput out;
    out.proposals.resize(pinned ? 1 : 2 + J);
    const long kept = (cfg.iterations - cfg.burn_in) / cfg.thinning;
    out.mu.reserve(static_cast<std::size_t>(kept));
    out.tau.reserve(static_cast<std::size_t>(kept));
    out.theta_new.reserve(static_cast<std::size_t>(kept));

    double pooled_ll = pinned ? pooled_loglik(mu) : 0.0;
    for (long it = 0; it < cfg.iterations; ++it) {
        const bool counting = it >= cfg.burn_in;
        if (pinned) {
            Proposal& prop = out.proposals[0];
            const double cand = mu + prop.step() * normal(rng);
            const double cand_ll = pooled_loglik(cand);
            const double log_ratio = cand_ll + mu_logprior(cand) - pooled_ll - mu_logprior(mu);
            const bool accept = std::log(rng.uniform()) < log_ratio;
            if (accept) {
                mu = cand;
                pooled_ll = cand_ll;
            }
            prop.record(accept, counting);
        } else {
            // mu | theta, tau: conjugate normal.
            const double tau2 = tau * tau;
            const double prec = mu_prec0 + static_cast<double>(J) / tau2;
            const double sum_theta = std::accumulate(theta.begin(), theta.end(), 0.0);
            const double mean = (cfg.mu_prior_mean * mu_prec0 + sum_theta / tau2) / prec;
            mu = mean + normal(rng) / std::sqrt(prec);

            // tau: random walk on log tau (half-normal prior, Jacobian included).
            double ss = 0.0;
            for (double th : theta) ss += (th - mu) * (th - mu);
            auto log_tau_target = [&](double t) {
                return -0.5 * t * t / tau_scale2 - static_cast<double>(J) * std::log(t) - 0.5 * ss / (t * t) +
                       std::log(t);
            };
            {
                Proposal& prop = out.proposals[0];
                const double cand = tau * std::exp(prop.step() * normal(rng));
                const bool accept = std::log(rng.uniform()) < log_tau_target(cand) - log_tau_target(tau);
                if (accept) tau = cand;
                prop.record(accept, counting);
            }

            // theta_j: random walk.
            const double inv_tau2 = 1.0 / (tau * tau);
            for (std::size_t j = 0; j < J; ++j) {
                Proposal& prop = out.proposals[2 + j];
                const double cand = theta[j] + prop.step() * normal(rng);
                const double zc = cand - mu, zo = theta[j] - mu;
                const double log_ratio = trial_loglik(trials[j], cand) - trial_loglik(trials[j], theta[j]) -
                                         0.5 * (zc * zc - zo * zo) * inv_tau2;
                const bool accept = std::log(rng.uniform()) < log_ratio;
                if (accept) theta[j] = cand;
                prop.record(accept, counting);
            }

            // Joint location shift of (mu, theta); leaves theta - mu unchanged.
            {
                Proposal& prop = out.proposals[1];
                const double shift = prop.step() * normal(rng);
                double log_ratio = mu_logprior(mu + shift) - mu_logprior(mu);
                for (std::size_t j = 0; j < J; ++j)
                    log_ratio += trial_loglik(trials[j], theta[j] + shift) - trial_loglik(trials[j], theta[j]);
                const bool accept = std::log(rng.uniform()) < log_ratio;
                if (accept) {
                    mu += shift;
                    for (auto& th : theta) th += shift;
                }
                prop.record(accept, counting);
            }
        }

        if (!counting && (it + 1) % kAdaptBatch == 0) {
            const long batch = (it + 1) / kAdaptBatch;
            for (auto& p : out.proposals) p.adapt(batch);
        }
        if (counting && (it - cfg.burn_in + 1) % cfg.thinning == 0) {
            out.mu.push_back(mu);
            out.tau.push_back(pinned ? 0.0 : tau);
            out.theta_new.push_back(pinned ? mu : mu + tau * normal(rng));
        }
    }
    return out;
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

// Split R-hat over chains stored back to back with `per_chain` draws each.
double split_rhat(std::span<const double> draws, long per_chain, int chains) {
    const long half = per_chain / 2;
    if (half < 2) return std::numeric_limits<double>::infinity();
    std::vector<double> means, vars;
    for (int c = 0; c < chains; ++c) {
        for (int h = 0; h < 2; ++h) {
            const auto part = draws.subspan(static_cast<std::size_t>(c * per_chain + h * half),
                                            static_cast<std::size_t>(half));
            means.push_back(mean_of(part));
            vars.push_back(variance_of(part));
        }
    }
    const double n = static_cast<double>(half);
    const double W = mean_of(vars);
    const double B = n * variance_of(means);
    if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

// Solves log(a) - digamma(a) = s for the Gamma shape MLE.
double gamma_shape_mle(double s) {
    if (!(s > 1e-14) || !std::isfinite(s)) throw DegenerateFit("Gamma shape MLE: samples have no spread");
    double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    for (int i = 0; i < 100; ++i) {
        const double g = std::log(a) - boost::math::digamma(a) - s;
        const double dg = 1.0 / a - boost::math::trigamma(a);
        // Newton in log(a): d/dlog(a) = a * dg.
        const double step = g / (a * dg);
        const double next = a * std::exp(-std::clamp(step, -2.0, 2.0));
        if (std::fabs(next - a) <= 1e-13 * a) {
            a = next;
            break;
        }
        a = next;
    }
    return a;
}

struct EmState {
    std::vector<double> w, a, b;
};

// Moment-matched initial components from a partition of sorted samples.
EmState init_from_partition(std::span<const double> sorted, const std::vector<std::size_t>& cuts) {
    EmState s;
    std::size_t begin = 0;
    const double n = static_cast<double>(sorted.size());
    for (std::size_t k = 0; k <= cuts.size(); ++k) {
        const std::size_t end = k < cuts.size() ? cuts[k] : sorted.size();
        const auto part = sorted.subspan(begin, end - begin);
        if (part.size() < 2) throw DegenerateFit("EM initialization: empty partition");
        const double m = mean_of(part);
        const double v = variance_of(part);
        if (!(v > 0.0)) throw DegenerateFit("EM initialization: constant partition");
        s.w.push_back(static_cast<double>(part.size()) / n);
        s.a.push_back(m * m / v);
        s.b.push_back(m / v);
        begin = end;
    }
    return s;
}

struct EmResult {
    EmState state;
    double loglik;
};

EmResult run_em(std::span<const double> x, std::span<const double> logx, EmState s) {
    const std::size_t N = x.size();
    const std::size_t L = s.w.size();
    std::vector<double> resp(N * L);
    double prev = -std::numeric_limits<double>::infinity();
    double ll = prev;
    for (int iter = 0; iter < kMaxEmIterations; ++iter) {
        std::vector<double> cst(L);
        for (std::size_t l = 0; l < L; ++l)
            cst[l] = std::log(s.w[l]) + s.a[l] * std::log(s.b[l]) - std::lgamma(s.a[l]);
        ll = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < L; ++l) {
                const double v = cst[l] + (s.a[l] - 1.0) * logx[i] - s.b[l] * x[i];
                resp[i * L + l] = v;
                top = std::max(top, v);
            }
            double sum = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                resp[i * L + l] = std::exp(resp[i * L + l] - top);
                sum += resp[i * L + l];
            }
            for (std::size_t l = 0; l < L; ++l) resp[i * L + l] /= sum;
            ll += top + std::log(sum);
        }
        // Converged when the mean per-sample log-likelihood stops moving.
        if (std::fabs(ll - prev) < kEmTolerance * static_cast<double>(N))
            break;
        prev = ll;
        for (std::size_t l = 0; l < L; ++l) {
            double nl = 0.0, sx = 0.0, slx = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double r = resp[i * L + l];
                nl += r;
                sx += r * x[i];
                slx += r * logx[i];
            }
            if (!(nl > 0.0)) throw DegenerateFit("EM: component lost all responsibility");
            const double xbar = sx / nl;
            s.w[l] = nl / static_cast<double>(N);
            s.a[l] = gamma_shape_mle(std::log(xbar) - slx / nl);
            s.b[l] = s.a[l] / xbar;
        }
    }
    return {std::move(s), ll};
}

}  // namespace

void HistoricalTrialSummary::validate() const {
    if (!(sample_variance > 0.0) || !std::isfinite(sample_variance))
        throw InvalidArgument("trial '" + trial_id + "': sample variance must be positive");
    if (!(df >= 1.0) || !std::isfinite(df)) throw InvalidArgument("trial '" + trial_id + "': df must be >= 1");
}

void HierarchicalModelConfig::validate() const {
    if (!(mu_prior_sd > 0.0)) throw InvalidArgument("mu_prior_sd must be positive");
    if (!(tau_prior_scale > 0.0)) throw InvalidArgument("tau_prior_scale must be positive");
    if (chains < 2) throw InvalidArgument("at least two chains are required");
    if (burn_in < 0 || iterations <= burn_in) throw InvalidArgument("iterations must exceed burn_in");
    if (thinning < 1) throw InvalidArgument("thinning must be >= 1");
    if ((iterations - burn_in) / thinning < 8) throw InvalidArgument("too few retained draws per chain");
    if (!(rhat_threshold > 1.0)) throw InvalidArgument("rhat_threshold must exceed 1");
    if (max_components < 1 || max_components > 5) throw InvalidArgument("max_components must lie in 1..5");
}

double SamplerDiagnostics::max_rhat() const {
    double m = 1.0;
    for (const auto& p : parameters) m = std::max(m, p.rhat);
    return m;
}

SamplerRun run_hierarchical_sampler(std::span<const HistoricalTrialSummary> trials,
                                    const HierarchicalModelConfig& cfg, bool pin_tau_zero) {
    cfg.validate();
    if (trials.size() < 2) throw InvalidArgument("the meta-analysis needs at least two historical trials");
    for (const auto& t : trials) t.validate();

    std::vector<ChainOutput> chains(static_cast<std::size_t>(cfg.chains));
    const int threads = resolve_workers(cfg.workers);
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1)
    for (int c = 0; c < cfg.chains; ++c) chains[static_cast<std::size_t>(c)] = run_chain(trials, cfg, pin_tau_zero, c);

    SamplerRun run;
    run.draws_per_chain = static_cast<long>(chains.front().mu.size());
    for (const auto& ch : chains) {
        run.mu.insert(run.mu.end(), ch.mu.begin(), ch.mu.end());
        run.tau.insert(run.tau.end(), ch.tau.begin(), ch.tau.end());
        run.theta_new.insert(run.theta_new.end(), ch.theta_new.begin(), ch.theta_new.end());
    }

    auto mean_acceptance = [&](std::size_t idx) {
        double acc = 0.0;
        for (const auto& ch : chains) acc += ch.proposals[idx].acceptance();
        return acc / static_cast<double>(chains.size());
    };
    auto& diag = run.diagnostics;
    diag.rhat_threshold = cfg.rhat_threshold;
    if (pin_tau_zero) {
        diag.parameters.push_back({"mu", split_rhat(run.mu, run.draws_per_chain, cfg.chains), mean_acceptance(0)});
    } else {
        diag.parameters.push_back({"mu", split_rhat(run.mu, run.draws_per_chain, cfg.chains), 1.0});
        diag.parameters.push_back({"tau", split_rhat(run.tau, run.draws_per_chain, cfg.chains), mean_acceptance(0)});
        diag.parameters.push_back({"shift", 1.0, mean_acceptance(1)});
        for (std::size_t j = 0; j < trials.size(); ++j)
            diag.parameters.push_back({"theta[" + trials[j].trial_id + "]", 1.0, mean_acceptance(2 + j)});
    }
    diag.parameters.push_back(
        {"theta_new", split_rhat(run.theta_new, run.draws_per_chain, cfg.chains), 1.0});
    return run;
}

MapFitResult fit_map(std::span<const HistoricalTrialSummary> trials, const HierarchicalModelConfig& cfg) {
    const SamplerRun het = run_hierarchical_sampler(trials, cfg, false);
    const SamplerRun fixed = run_hierarchical_sampler(trials, cfg, true);

    MapFitResult fit;
    fit.theta_new = het.theta_new;
    fit.omega_new.resize(het.theta_new.size());
    std::transform(het.theta_new.begin(), het.theta_new.end(), fit.omega_new.begin(),
                   [](double th) { return std::exp(-th); });
    fit.heterogeneity_theta_variance = variance_of(het.theta_new);
    fit.fixed_effect_theta_variance = variance_of(fixed.theta_new);
    fit.diagnostics = het.diagnostics;
    fit.fixed_effect_diagnostics = fixed.diagnostics;
    fit.total_df = 0.0;
    for (const auto& t : trials) fit.total_df += t.df;
    fit.mixture = fit_gamma_mixture(fit.omega_new, cfg.max_components, derive_seed(cfg.seed, 0xe3));
    fit.ess = effective_sample_size(fit, trials);
    return fit;
}

MixtureFit fit_gamma_mixture_components(std::span<const double> samples, int L, std::uint64_t seed) {
    if (samples.size() < 1000) throw InvalidArgument("fit_gamma_mixture needs at least 1000 samples");
    if (L < 1 || L > 5) throw InvalidArgument("number of mixture components must lie in 1..5");
    for (double x : samples)
        if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("fit_gamma_mixture: samples must be positive");

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> logx(sorted.size());
    std::transform(sorted.begin(), sorted.end(), logx.begin(), [](double v) { return std::log(v); });
    const std::size_t N = sorted.size();

    bool have = false;
    EmResult best{{}, -std::numeric_limits<double>::infinity()};
    std::string last_error = "no restart succeeded";
    for (int r = 0; r < (L == 1 ? 1 : kRestarts); ++r) {
        std::vector<std::size_t> cuts;
        if (r == 0) {
            for (int k = 1; k < L; ++k) cuts.push_back(N * static_cast<std::size_t>(k) / static_cast<std::size_t>(L));
        } else {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(L), static_cast<std::uint64_t>(r)));
            std::vector<double> u(static_cast<std::size_t>(L - 1));
            for (auto& v : u) v = 0.05 + 0.9 * rng.uniform();
            std::sort(u.begin(), u.end());
            for (double v : u) cuts.push_back(static_cast<std::size_t>(v * static_cast<double>(N)));
            cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
            if (static_cast<int>(cuts.size()) != L - 1) continue;
        }
        try {
            EmResult res = run_em(sorted, logx, init_from_partition(sorted, cuts));
            if (std::isfinite(res.loglik) && (!have || res.loglik > best.loglik)) {
                best = std::move(res);
                have = true;
            }
        } catch (const DegenerateFit& e) {
            last_error = e.what();
        }
    }
    if (!have) throw DegenerateFit("Gamma mixture with L=" + std::to_string(L) + ": " + last_error);
    for (double w : best.state.w)
        if (w < kMinComponentWeight)
            throw DegenerateFit("Gamma mixture with L=" + std::to_string(L) + ": component weight below 1e-4");

    std::vector<GammaComponent> comps;
    for (std::size_t l = 0; l < best.state.w.size(); ++l)
        comps.push_back({best.state.w[l], best.state.a[l], best.state.b[l]});
    std::stable_sort(comps.begin(), comps.end(),
                     [](const GammaComponent& x, const GammaComponent& y) { return x.weight > y.weight; });

    MixtureFit fit;
    fit.mixture = GammaMixture::normalized(std::move(comps));
    fit.components = L;
    fit.log_likelihood = best.loglik;
    fit.bic = -2.0 * best.loglik + (3.0 * L - 1.0) * std::log(static_cast<double>(N));
    return fit;
}

GammaMixture fit_gamma_mixture(std::span<const double> samples, int L_max, std::uint64_t seed) {
    if (L_max < 1 || L_max > 5) throw InvalidArgument("L_max must lie in 1..5");
    bool have = false;
    MixtureFit best;
    std::string last_error;
    for (int L = 1; L <= L_max; ++L) {
        try {
            MixtureFit f = fit_gamma_mixture_components(samples, L, seed);
            if (!have || f.bic < best.bic) {
                best = std::move(f);
                have = true;
            }
        } catch (const DegenerateFit& e) {
            last_error = e.what();
            if (L == 1) throw;
            break;  // larger L only adds more redundant components
        }
    }
    if (!have) throw DegenerateFit(last_error);
    return best.mixture;
}

double effective_sample_size(const MapFitResult& fit, std::span<const HistoricalTrialSummary> trials) {
    if (!(fit.heterogeneity_theta_variance > 0.0))
        throw InvalidArgument("effective_sample_size: predictive variance under heterogeneity is zero");
    double total_df = 0.0;
    for (const auto& t : trials) total_df += t.df;
    return total_df * fit.fixed_effect_theta_variance / fit.heterogeneity_theta_variance;
}

double ess_gamma(const GammaMixture& m) {
    double ess = 0.0;
    for (const auto& c : m.components()) ess += c.weight * 2.0 * c.shape;
    return ess;
}

GammaMixture robustify(const GammaMixture& informative, double w_R, const GammaMixture& vague) {
    if (!(w_R >= 0.0 && w_R <= 1.0)) throw InvalidArgument("robustify: w_R must lie in [0, 1]");
    if (w_R == 0.0) return informative;
    if (w_R == 1.0) return vague;
    std::vector<GammaComponent> comps;
    for (const auto& c : vague.components()) comps.push_back({w_R * c.weight, c.shape, c.rate});
    for (const auto& c : informative.components()) comps.push_back({(1.0 - w_R) * c.weight, c.shape, c.rate});
    return GammaMixture::normalized(std::move(comps));
}

GammaMixture scenario_prior(double sigma2_mean, double ess) {
    if (!(sigma2_mean > 0.0) || !std::isfinite(sigma2_mean))
        throw InvalidArgument("scenario_prior: prior mean must be positive");
    if (!(ess > 2.0) || !std::isfinite(ess)) throw InvalidArgument("scenario_prior: ESS must exceed 2");
    const double a = 0.5 * ess;
    return GammaMixture::single(a, sigma2_mean * (a - 1.0));
}

}  // namespace ssrmap
