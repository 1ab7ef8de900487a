#include "ssrmap/simengine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <string>

#include <fmt/format.h>

#include "ssrmap/errors.hpp"
#include "ssrmap/parallel.hpp"
#include "ssrmap/rng.hpp"

namespace ssrmap {

namespace {

constexpr long kTableCeiling = 20000;

struct RunningMoments {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
};

long table_upper_bound(const Scenario& sc, const std::optional<GammaMixture>& prior) {
    double cover = sc.true_sigma2;
    if (prior) {
        try {
            cover = std::max(cover, mixture_mean(*prior, Scale::variance));
        } catch (const UndefinedMoment&) {
            cover = std::max(cover, mixture_quantile(*prior, 0.5, Scale::variance));
        }
    }
    const double approx = required_n_normal_approx(3.0 * cover, sc.design);
    return static_cast<long>(std::min(approx, static_cast<double>(kTableCeiling))) + 16;
}

constexpr std::array<std::string_view, 14> kSweepable = {
    "n1",    "rule",        "data_source", "ess",          "w_R", "prior_mean", "true_sigma2",
    "true_delta", "delta_star", "alpha", "target_power", "k",   "block_m",    "replications"};

double as_number(const std::string& field, const SweepValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw InvalidArgument("sweep '" + field + "' expects numeric values");
}

const std::string& as_string(const std::string& field, const SweepValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw InvalidArgument("sweep '" + field + "' expects string values");
}

long as_integer(const std::string& field, const SweepValue& v) {
    const double d = as_number(field, v);
    if (d != std::floor(d)) throw InvalidArgument("sweep '" + field + "' expects integer values");
    return static_cast<long>(d);
}

void apply_sweep(Scenario& sc, const std::string& name, const SweepValue& v) {
    if (name == "n1") {
        sc.design.n1 = as_integer(name, v);
    } else if (name == "rule") {
        sc.rule.estimator = parse_estimator(as_string(name, v), &sc.rule.quantile_p);
    } else if (name == "data_source") {
        sc.rule.source = parse_data_source(as_string(name, v));
    } else if (name == "ess") {
        sc.prior.ess = as_number(name, v);
    } else if (name == "w_R") {
        sc.prior.w_R = as_number(name, v);
    } else if (name == "prior_mean") {
        sc.prior.mean = as_number(name, v);
    } else if (name == "true_sigma2") {
        sc.true_sigma2 = as_number(name, v);
    } else if (name == "true_delta") {
        sc.true_delta = as_number(name, v);
    } else if (name == "delta_star") {
        sc.design.delta_star = as_number(name, v);
    } else if (name == "alpha") {
        sc.design.alpha = as_number(name, v);
    } else if (name == "target_power") {
        sc.design.target_power = as_number(name, v);
    } else if (name == "k") {
        sc.design.allocation = Allocation::from_ratio(as_number(name, v));
    } else if (name == "block_m") {
        sc.block_m = as_integer(name, v);
    } else if (name == "replications") {
        sc.replications = as_integer(name, v);
    } else {
        throw InvalidArgument("unknown sweep field '" + name + "'");
    }
}

std::string format_optional(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

std::optional<GammaMixture> PriorSpec::build() const {
    if (mixture) return w_R > 0.0 ? robustify(*mixture, w_R, vague) : *mixture;
    if (mean) return robustify(scenario_prior(*mean, ess), w_R, vague);
    return std::nullopt;
}

void Scenario::validate() const {
    design.validate_with_pilot();
    if (!(true_sigma2 > 0.0) || !std::isfinite(true_sigma2)) throw InvalidArgument("true_sigma2 must be positive");
    if (!std::isfinite(true_delta)) throw InvalidArgument("true_delta must be finite");
    if (replications < 1) throw InvalidArgument("replications must be >= 1");
    rule.validate();
    if (prior.mixture && prior.mean) throw InvalidArgument("prior: give either a mixture or (mean, ess), not both");
    if (!(prior.w_R >= 0.0 && prior.w_R <= 1.0)) throw InvalidArgument("prior w_R must lie in [0, 1]");
    if (rule.needs_prior() && !prior.build()) throw InvalidArgument("rule '" + rule.estimator_name() + "' needs a prior");
    if (rule.source == DataSource::blinded_block_sums) {
        if (design.allocation != Allocation{1, 1}) throw InvalidArgument("block sums require equal allocation");
        if (block_m < 2 || block_m % 2 != 0) throw InvalidArgument("block_m must be even and >= 2");
        if (design.n1 % block_m != 0) throw InvalidArgument("n1 must be divisible by block_m");
        if (design.n1 / block_m < 2) throw InvalidArgument("the pilot must contain at least two blocks");
    }
}

ScenarioContext::ScenarioContext(const Scenario& sc)
    : scenario_((sc.validate(), sc)),
      prior_(sc.rule.needs_prior() ? sc.prior.build() : std::nullopt),
      table_(sc.design, table_upper_bound(sc, prior_)) {}

ReplicateOutcome ScenarioContext::replicate(long index) const {
    const Scenario& sc = scenario_;
    const DesignParams& d = sc.design;
    Rng rng(derive_seed(sc.master_seed, static_cast<std::uint64_t>(index)));
    std::normal_distribution<double> noise(0.0, std::sqrt(sc.true_sigma2));

    const long n1T = d.allocation.n_treatment(d.n1);
    const long n1C = d.allocation.n_control(d.n1);
    RunningMoments treat, ctrl;
    PilotData pilot;

    if (sc.rule.source == DataSource::blinded_block_sums) {
        const long half = sc.block_m / 2;
        BlockSummary blk;
        blk.m = sc.block_m;
        blk.block_sums.reserve(static_cast<std::size_t>(d.n1 / sc.block_m));
        for (long b = 0; b < d.n1 / sc.block_m; ++b) {
            double sum = 0.0;
            for (long i = 0; i < half; ++i) {
                const double x = sc.true_delta + noise(rng);
                treat.add(x);
                sum += x;
            }
            for (long i = 0; i < half; ++i) {
                const double x = noise(rng);
                ctrl.add(x);
                sum += x;
            }
            blk.block_sums.push_back(sum);
        }
        pilot = std::move(blk);
    } else {
        for (long i = 0; i < n1T; ++i) treat.add(sc.true_delta + noise(rng));
        for (long i = 0; i < n1C; ++i) ctrl.add(noise(rng));
        PilotSummary ps;
        ps.n1T = n1T;
        ps.n1C = n1C;
        ps.mean_T = treat.mean;
        ps.mean_C = ctrl.mean;
        ps.pooled_var = (treat.m2 + ctrl.m2) / static_cast<double>(d.n1 - 2);
        pilot = ps;
    }

    const ReestimationOutcome re = reestimate(sc.rule, d, pilot, prior_, &table_);

    const long nT = d.allocation.n_treatment(re.n_final);
    const long nC = d.allocation.n_control(re.n_final);
    for (long i = treat.n; i < nT; ++i) treat.add(sc.true_delta + noise(rng));
    for (long i = ctrl.n; i < nC; ++i) ctrl.add(noise(rng));

    const double s2 = (treat.m2 + ctrl.m2) / static_cast<double>(re.n_final - 2);
    const double se = std::sqrt(s2 * (1.0 / static_cast<double>(nT) + 1.0 / static_cast<double>(nC)));
    const double stat = (treat.mean - ctrl.mean) / se;
    return {stat > table_.critical_value(re.n_final), re.n_final, re.n_reest};
}

ReplicateOutcome simulate_replicate(const Scenario& sc, long replicate_index) {
    return ScenarioContext(sc).replicate(replicate_index);
}

long nearest_rank(std::span<const long> sorted, double p) {
    if (sorted.empty()) throw InvalidArgument("nearest_rank: empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<long>(std::ceil(p * n));
    rank = std::clamp(rank, 1L, static_cast<long>(sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
}

ScenarioResult summarize(const Scenario& sc, std::span<const ReplicateOutcome> outcomes) {
    ScenarioResult r;
    r.scenario = sc;
    r.replications = static_cast<long>(outcomes.size());
    r.seed = sc.master_seed;
    long rejections = 0;
    double n_sum = 0.0, reest_sum = 0.0;
    std::vector<long> sizes;
    sizes.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        rejections += o.reject ? 1 : 0;
        n_sum += static_cast<double>(o.n_final);
        reest_sum += static_cast<double>(o.n_reest);
        sizes.push_back(o.n_final);
    }
    const double reps = static_cast<double>(outcomes.size());
    r.rejection_rate = static_cast<double>(rejections) / reps;
    r.mc_standard_error = std::sqrt(r.rejection_rate * (1.0 - r.rejection_rate) / reps);
    r.n_mean = n_sum / reps;
    r.n_reest_mean = reest_sum / reps;
    std::sort(sizes.begin(), sizes.end());
    r.n_p10 = nearest_rank(sizes, 0.1);
    r.n_median = nearest_rank(sizes, 0.5);
    r.n_p90 = nearest_rank(sizes, 0.9);
    r.n_min = sizes.front();
    r.n_max = sizes.back();
    return r;
}

ScenarioResult run_scenario_serial(const Scenario& sc) {
    const ScenarioContext ctx(sc);
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(sc.replications));
    for (long i = 0; i < sc.replications; ++i) outcomes[static_cast<std::size_t>(i)] = ctx.replicate(i);
    return summarize(sc, outcomes);
}

ScenarioResult run_scenario(const Scenario& sc, int workers) {
    const ScenarioContext ctx(sc);
    const long reps = sc.replications;
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(reps));

    std::mutex error_mutex;
    long error_index = reps;
    std::exception_ptr error;
    const int threads = resolve_workers(workers);

#pragma omp parallel for schedule(dynamic, 256) num_threads(threads) if (threads > 1)
    for (long i = 0; i < reps; ++i) {
        try {
            outcomes[static_cast<std::size_t>(i)] = ctx.replicate(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (i < error_index) {
                error_index = i;
                error = std::current_exception();
            }
        }
    }
    if (error) std::rethrow_exception(error);
    return summarize(sc, outcomes);
}

std::span<const std::string_view> sweepable_fields() { return kSweepable; }

std::vector<Scenario> expand_grid(const Scenario& base, std::span<const SweepAxis> sweeps) {
    for (std::size_t i = 0; i < sweeps.size(); ++i) {
        if (std::find(kSweepable.begin(), kSweepable.end(), sweeps[i].name) == kSweepable.end())
            throw InvalidArgument("unknown sweep field '" + sweeps[i].name + "'");
        if (sweeps[i].values.empty()) throw InvalidArgument("sweep '" + sweeps[i].name + "' has no values");
        for (std::size_t j = 0; j < i; ++j)
            if (sweeps[j].name == sweeps[i].name)
                throw InvalidArgument("duplicate sweep field '" + sweeps[i].name + "'");
    }
    if (sweeps.empty()) return {base};

    std::size_t cells = 1;
    for (const auto& ax : sweeps) cells *= ax.values.size();
    std::vector<Scenario> out;
    out.reserve(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        Scenario sc = base;
        std::size_t rem = cell;
        for (std::size_t a = sweeps.size(); a-- > 0;) {
            const auto& ax = sweeps[a];
            apply_sweep(sc, ax.name, ax.values[rem % ax.values.size()]);
            rem /= ax.values.size();
        }
        sc.id = fmt::format("{}-{:03d}", base.id, cell);
        sc.master_seed = derive_seed(base.master_seed, cell);
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<ScenarioResult> run_grid(const Scenario& base, std::span<const SweepAxis> sweeps, int workers) {
    const auto cells = expand_grid(base, sweeps);
    for (const auto& sc : cells) sc.validate();
    std::vector<ScenarioResult> results;
    results.reserve(cells.size());
    for (const auto& sc : cells) results.push_back(run_scenario(sc, workers));
    return results;
}

std::vector<PosteriorMeanRow> posterior_mean_curve(double informative_mean, std::span<const double> ess_list,
                                                   std::span<const long> n1_list, std::span<const double> w_R_list,
                                                   double pooled_var) {
    std::vector<PosteriorMeanRow> rows;
    for (double ess : ess_list) {
        const GammaMixture informative = scenario_prior(informative_mean, ess);
        for (long n1 : n1_list) {
            if (n1 < 3) throw InvalidArgument("posterior_mean_curve: n1 must be at least 3");
            for (double w : w_R_list) {
                const GammaMixture prior = robustify(informative, w, vague_prior());
                const GammaMixture post = update_with_variance(prior, pooled_var, pooled_df(n1));
                rows.push_back({ess, n1, w, posterior_mean_sigma2(post)});
            }
        }
    }
    return rows;
}

void write_results_csv(std::ostream& os, std::span<const ScenarioResult> results) {
    os << kResultsCsvHeader << '\n';
    for (const auto& r : results) {
        const Scenario& sc = r.scenario;
        std::optional<double> ess, w_R, prior_mean;
        if (sc.prior.mean) {
            ess = sc.prior.ess;
            w_R = sc.prior.w_R;
            prior_mean = sc.prior.mean;
        } else if (sc.prior.mixture) {
            ess = ess_gamma(*sc.prior.mixture);
            w_R = sc.prior.w_R;
            try {
                prior_mean = mixture_mean(*sc.prior.mixture, Scale::variance);
            } catch (const UndefinedMoment&) {
            }
        }
        os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", sc.id, sc.rule.estimator_name(),
                          sc.rule.source_name(), sc.design.n1, format_optional(ess), format_optional(w_R),
                          format_optional(prior_mean), sc.true_sigma2, sc.true_delta, r.replications, r.seed,
                          r.rejection_rate, r.mc_standard_error, r.n_mean, r.n_p10, r.n_median, r.n_p90);
    }
}

}  // namespace ssrmap
