#include "ssrmap/ssr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "ssrmap/errors.hpp"

namespace ssrmap {

namespace {

std::string format_probability(double p) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, p);
    return std::string(buf, res.ptr);
}

}  // namespace

bool ReestimationRule::needs_prior() const noexcept {
    return estimator != Estimator::pooled_plugin && estimator != Estimator::one_sample_plugin;
}

void ReestimationRule::validate() const {
    if (estimator == Estimator::pooled_plugin && source != DataSource::unblinded_pooled)
        throw InvalidArgument("the pooled plug-in rule uses unblinded data");
    if (estimator == Estimator::one_sample_plugin && source != DataSource::blinded_one_sample)
        throw InvalidArgument("the one-sample plug-in rule uses the blinded one-sample estimate");
    if (estimator == Estimator::bayes_quantile && !(quantile_p > 0.0 && quantile_p < 1.0))
        throw InvalidArgument("posterior quantile level must lie in (0, 1)");
    if (one_sample_df && !(*one_sample_df > 0.0)) throw InvalidArgument("one-sample df must be positive");
}

std::string ReestimationRule::estimator_name() const {
    switch (estimator) {
        case Estimator::pooled_plugin: return "pooled";
        case Estimator::one_sample_plugin: return "one_sample";
        case Estimator::bayes_mean: return "bayes_mean";
        case Estimator::bayes_median: return "bayes_median";
        case Estimator::bayes_quantile: return "bayes_quantile:" + format_probability(quantile_p);
        case Estimator::bayes_expected_power: return "bayes_expected_power";
    }
    return "?";
}

std::string ReestimationRule::source_name() const {
    switch (source) {
        case DataSource::unblinded_pooled: return "unblinded";
        case DataSource::blinded_one_sample: return "blinded_one_sample";
        case DataSource::blinded_block_sums: return "blinded_block_sums";
    }
    return "?";
}

Estimator parse_estimator(const std::string& name, double* quantile_p) {
    if (name == "pooled") return Estimator::pooled_plugin;
    if (name == "one_sample") return Estimator::one_sample_plugin;
    if (name == "bayes_mean" || name == "mean") return Estimator::bayes_mean;
    if (name == "bayes_median" || name == "median") return Estimator::bayes_median;
    if (name == "bayes_expected_power" || name == "expected_power") return Estimator::bayes_expected_power;
    for (const std::string prefix : {"bayes_quantile:", "quantile:"}) {
        if (name.rfind(prefix, 0) == 0) {
            const std::string level = name.substr(prefix.size());
            double p = 0.0;
            const auto res = std::from_chars(level.data(), level.data() + level.size(), p);
            if (res.ec != std::errc() || res.ptr != level.data() + level.size())
                throw InvalidArgument("bad quantile level in rule '" + name + "'");
            if (quantile_p) *quantile_p = p;
            return Estimator::bayes_quantile;
        }
    }
    throw InvalidArgument("unknown re-estimation rule '" + name +
                          "' (expected pooled, one_sample, bayes_mean, bayes_median, bayes_quantile:<p>, "
                          "bayes_expected_power)");
}

DataSource parse_data_source(const std::string& name) {
    if (name == "unblinded" || name == "unblinded_pooled") return DataSource::unblinded_pooled;
    if (name == "blinded_one_sample") return DataSource::blinded_one_sample;
    if (name == "blinded_block_sums") return DataSource::blinded_block_sums;
    throw InvalidArgument("unknown data source '" + name +
                          "' (expected unblinded, blinded_one_sample, blinded_block_sums)");
}

ReestimationRule ReestimationRule::parse(const std::string& estimator, const std::string& source) {
    ReestimationRule r;
    r.estimator = parse_estimator(estimator, &r.quantile_p);
    r.source = parse_data_source(source);
    r.validate();
    return r;
}

VarianceEvidence variance_evidence(const ReestimationRule& rule, const PilotData& pilot) {
    switch (rule.source) {
        case DataSource::unblinded_pooled: {
            const auto* p = std::get_if<PilotSummary>(&pilot);
            if (!p) throw InvalidArgument("unblinded rules need a PilotSummary");
            p->validate();
            if (p->n1T < 2 || p->n1C < 2 || p->n1() < 4)
                throw InvalidArgument("pooled variance needs at least two observations per arm");
            return {p->pooled_var, pooled_df(p->n1())};
        }
        case DataSource::blinded_one_sample: {
            const auto* p = std::get_if<PilotSummary>(&pilot);
            if (!p) throw InvalidArgument("the one-sample estimate needs a PilotSummary");
            return {one_sample_variance(*p), rule.one_sample_df.value_or(one_sample_df(p->n1()))};
        }
        case DataSource::blinded_block_sums: {
            const auto* b = std::get_if<BlockSummary>(&pilot);
            if (!b) throw InvalidArgument("block-sum rules need a BlockSummary");
            return {xing_ganju_variance(*b), xing_ganju_df(b->blocks())};
        }
    }
    throw InvalidArgument("unknown data source");
}

long final_sample_size(long n_reest, const DesignParams& d) {
    long n = std::max(n_reest, d.n1);
    if (d.final_policy == FinalSizePolicy::max_planned_reestimate && d.n_planned) n = std::max(n, *d.n_planned);
    if (d.n_max) n = std::min(n, *d.n_max);
    return n;
}

ReestimationOutcome reestimate(const ReestimationRule& rule, const DesignParams& d, const PilotData& pilot,
                               const std::optional<GammaMixture>& prior, const SampleSizeTable* table) {
    rule.validate();
    if (rule.needs_prior() && !prior) throw InvalidArgument("rule '" + rule.estimator_name() + "' needs a prior");
    if (d.n1 > 0) {
        const long seen = std::holds_alternative<PilotSummary>(pilot)
                              ? std::get<PilotSummary>(pilot).n1()
                              : std::get<BlockSummary>(pilot).blocks() * std::get<BlockSummary>(pilot).m;
        if (seen != d.n1)
            throw InvalidArgument("pilot holds " + std::to_string(seen) + " patients but the design has n1=" +
                                  std::to_string(d.n1));
    }

    const VarianceEvidence ev = variance_evidence(rule, pilot);
    ReestimationOutcome out;

    auto size_for = [&](double sigma2) {
        // Degenerate data can give a zero estimate; the smallest design is then enough.
        if (!(sigma2 > 0.0)) return d.min_n();
        return table ? table->required_n(sigma2) : required_n(sigma2, d);
    };

    try {
        switch (rule.estimator) {
            case Estimator::pooled_plugin:
            case Estimator::one_sample_plugin:
                out.variance_used = ev.variance;
                out.n_reest = size_for(ev.variance);
                break;
            case Estimator::bayes_mean:
            case Estimator::bayes_median:
            case Estimator::bayes_quantile:
            case Estimator::bayes_expected_power: {
                out.posterior = update_with_variance(*prior, ev.variance, ev.df);
                if (rule.estimator == Estimator::bayes_expected_power) {
                    out.n_reest = required_n_expected_power(d, *out.posterior);
                } else {
                    const double v = rule.estimator == Estimator::bayes_mean ? posterior_mean_sigma2(*out.posterior)
                                     : rule.estimator == Estimator::bayes_median
                                         ? posterior_median_sigma2(*out.posterior)
                                         : mixture_quantile(*out.posterior, rule.quantile_p, Scale::variance);
                    out.variance_used = v;
                    out.n_reest = size_for(v);
                }
                break;
            }
        }
    } catch (const CapExceeded&) {
        if (!d.n_max) throw;
        out.n_reest = *d.n_max;
        out.capped = true;
    }
    out.n_final = final_sample_size(out.n_reest, d);
    return out;
}

}  // namespace ssrmap
