#include "ssrmap/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace ssrmap::io {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

// Collects problems while reading a JSON object with a closed set of keys.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path, std::vector<std::string>& problems)
        : j_(j), path_(std::move(path)), problems_(problems) {
        if (!j_.is_object()) problems_.push_back(path_ + ": expected an object");
    }

    bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

    template <class T>
    void optional(const char* key, T& out) {
        seen_.insert(key);
        if (!has(key)) return;
        read(key, out);
    }

    template <class T>
    void required(const char* key, T& out) {
        seen_.insert(key);
        if (!has(key)) {
            problems_.push_back(field(key) + ": missing required field");
            return;
        }
        read(key, out);
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return has(key) ? &j_.at(key) : nullptr;
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) problems_.push_back(field(k.c_str()) + ": unknown field");
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <class T>
    void read(const char* key, T& out) {
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(field(key) + ": wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

void throw_if(const std::vector<std::string>& problems) {
    if (!problems.empty()) throw ValidationError(problems);
}

std::string policy_name(FinalSizePolicy p) {
    return p == FinalSizePolicy::max_reestimate_pilot ? "max_reest_pilot" : "max_planned_reest";
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : InvalidArgument("validation failed: " + join(problems)), problems_(std::move(problems)) {}

json mixture_to_json(const GammaMixture& m) {
    json comps = json::array();
    for (const auto& c : m.components()) comps.push_back({{"weight", c.weight}, {"shape", c.shape}, {"rate", c.rate}});
    return {{"components", comps}};
}

GammaMixture mixture_from_json(const json& j) {
    if (j.is_object() && j.contains("mixture") && !j.contains("components")) return mixture_from_json(j.at("mixture"));
    std::vector<std::string> problems;
    if (!j.is_object() || !j.contains("components") || !j.at("components").is_array() ||
        j.at("components").empty()) {
        throw ValidationError({"mixture: expected a non-empty 'components' array"});
    }
    std::vector<GammaComponent> comps;
    std::size_t i = 0;
    for (const auto& c : j.at("components")) {
        GammaComponent gc{};
        ObjectReader r(c, fmt::format("mixture.components[{}]", i++), problems);
        r.required("weight", gc.weight);
        r.required("shape", gc.shape);
        r.required("rate", gc.rate);
        r.finish();
        comps.push_back(gc);
    }
    throw_if(problems);
    double total = 0.0;
    for (const auto& c : comps) total += c.weight;
    // Printed mixtures carry rounded weights; accept small slack and renormalize.
    if (std::fabs(total - 1.0) > 1e-6) throw ValidationError({"mixture: weights must sum to one"});
    try {
        return GammaMixture::normalized(std::move(comps));
    } catch (const InvalidArgument& e) {
        throw ValidationError({std::string("mixture: ") + e.what()});
    }
}

std::vector<HistoricalTrialSummary> read_trials_csv(std::istream& in) {
    std::string line;
    std::vector<std::string> problems;
    if (!std::getline(in, line)) throw ValidationError({"trials CSV: empty input"});
    const auto header = split_csv_line(trim(line));
    if (header != std::vector<std::string>{"trial_id", "sample_variance", "df"})
        throw ValidationError({"trials CSV: header must be 'trial_id,sample_variance,df'"});
    std::vector<HistoricalTrialSummary> trials;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) {
            problems.push_back(fmt::format("trials CSV line {}: expected 3 columns", line_no));
            continue;
        }
        HistoricalTrialSummary t;
        t.trial_id = cells[0];
        if (!parse_double(cells[1], t.sample_variance) || !(t.sample_variance > 0.0))
            problems.push_back(fmt::format("trials CSV line {}: sample_variance must be a positive number", line_no));
        if (!parse_double(cells[2], t.df) || !(t.df >= 1.0))
            problems.push_back(fmt::format("trials CSV line {}: df must be a number >= 1", line_no));
        trials.push_back(std::move(t));
    }
    if (trials.size() < 2) problems.push_back("trials CSV: at least two trials are required");
    throw_if(problems);
    return trials;
}

void write_trials_csv(std::ostream& out, const std::vector<HistoricalTrialSummary>& trials) {
    out << "trial_id,sample_variance,df\n";
    for (const auto& t : trials) out << fmt::format("{},{},{}\n", t.trial_id, t.sample_variance, t.df);
}

json model_config_to_json(const HierarchicalModelConfig& c) {
    return {{"mu_prior_mean", c.mu_prior_mean}, {"mu_prior_sd", c.mu_prior_sd},
            {"tau_prior_scale", c.tau_prior_scale}, {"chains", c.chains},
            {"iterations", c.iterations}, {"burn_in", c.burn_in},
            {"thinning", c.thinning}, {"seed", c.seed},
            {"rhat_threshold", c.rhat_threshold}, {"max_components", c.max_components}};
}

HierarchicalModelConfig model_config_from_json(const json& j, HierarchicalModelConfig c) {
    std::vector<std::string> problems;
    ObjectReader r(j, "model", problems);
    r.optional("mu_prior_mean", c.mu_prior_mean);
    r.optional("mu_prior_sd", c.mu_prior_sd);
    r.optional("tau_prior_scale", c.tau_prior_scale);
    r.optional("chains", c.chains);
    r.optional("iterations", c.iterations);
    r.optional("burn_in", c.burn_in);
    r.optional("thinning", c.thinning);
    r.optional("seed", c.seed);
    r.optional("rhat_threshold", c.rhat_threshold);
    r.optional("max_components", c.max_components);
    r.finish();
    throw_if(problems);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError({std::string("model: ") + e.what()});
    }
    return c;
}

json map_fit_to_json(const MapFitResult& fit) {
    json diag = json::array();
    for (const auto& p : fit.diagnostics.parameters)
        diag.push_back({{"parameter", p.name}, {"rhat", p.rhat}, {"acceptance", p.acceptance}});
    json fixed = json::array();
    for (const auto& p : fit.fixed_effect_diagnostics.parameters)
        fixed.push_back({{"parameter", p.name}, {"rhat", p.rhat}, {"acceptance", p.acceptance}});
    return {{"mixture", mixture_to_json(fit.mixture)},
            {"ess", fit.ess},
            {"ess_gamma", ess_gamma(fit.mixture)},
            {"predictive_theta_variance", fit.heterogeneity_theta_variance},
            {"fixed_effect_theta_variance", fit.fixed_effect_theta_variance},
            {"total_df", fit.total_df},
            {"predictive_draws", fit.theta_new.size()},
            {"diagnostics",
             {{"converged", fit.converged()},
              {"rhat_threshold", fit.diagnostics.rhat_threshold},
              {"heterogeneity", diag},
              {"fixed_effect", fixed}}}};
}

json design_to_json(const DesignParams& d) {
    json j = {{"alpha", d.alpha},
              {"target_power", d.target_power},
              {"delta_star", d.delta_star},
              {"allocation", fmt::format("{}:{}", d.allocation.control, d.allocation.treatment)},
              {"n1", d.n1},
              {"final_policy", policy_name(d.final_policy)}};
    j["n_max"] = d.n_max ? json(*d.n_max) : json(nullptr);
    j["n_planned"] = d.n_planned ? json(*d.n_planned) : json(nullptr);
    return j;
}

DesignParams design_from_json(const json& j) {
    std::vector<std::string> problems;
    DesignParams d;
    ObjectReader r(j, "design", problems);
    r.optional("alpha", d.alpha);
    r.optional("target_power", d.target_power);
    r.required("delta_star", d.delta_star);
    r.optional("n1", d.n1);
    double k = 1.0;
    std::string allocation;
    r.optional("k", k);
    r.optional("allocation", allocation);
    long n_max = 0, n_planned = 0;
    r.optional("n_max", n_max);
    r.optional("n_planned", n_planned);
    std::string policy = "max_reest_pilot";
    r.optional("final_policy", policy);
    r.finish();
    throw_if(problems);
    try {
        if (!allocation.empty()) {
            const auto colon = allocation.find(':');
            if (colon == std::string::npos) throw InvalidArgument("allocation must look like 'control:treatment'");
            d.allocation = Allocation::from_parts(std::stol(allocation.substr(0, colon)),
                                                  std::stol(allocation.substr(colon + 1)));
        } else {
            d.allocation = Allocation::from_ratio(k);
        }
        if (r.has("n_max")) d.n_max = n_max;
        if (r.has("n_planned")) d.n_planned = n_planned;
        if (policy == "max_reest_pilot") {
            d.final_policy = FinalSizePolicy::max_reestimate_pilot;
        } else if (policy == "max_planned_reest") {
            d.final_policy = FinalSizePolicy::max_planned_reestimate;
        } else {
            throw InvalidArgument("final_policy must be max_reest_pilot or max_planned_reest");
        }
        d.validate();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError({std::string("design: ") + e.what()});
    }
    return d;
}

json scenario_to_json(const ScenarioFile& f) {
    const Scenario& s = f.base;
    json prior = json::object();
    if (s.prior.mean) {
        prior = {{"mean", *s.prior.mean}, {"ess", s.prior.ess}, {"w_R", s.prior.w_R}};
    } else if (s.prior.mixture) {
        prior = {{"mixture", mixture_to_json(*s.prior.mixture)}, {"w_R", s.prior.w_R}};
    }
    json sweeps = json::array();
    for (const auto& ax : f.sweeps) {
        json values = json::array();
        for (const auto& v : ax.values)
            std::visit([&](const auto& x) { values.push_back(x); }, v);
        sweeps.push_back({{"name", ax.name}, {"values", values}});
    }
    json j = {{"id", s.id},
              {"design", design_to_json(s.design)},
              {"true_sigma2", s.true_sigma2},
              {"true_delta", s.true_delta},
              {"rule", s.rule.estimator_name()},
              {"data_source", s.rule.source_name()},
              {"prior", prior},
              {"replications", s.replications},
              {"seed", s.master_seed},
              {"block_m", s.block_m},
              {"sweeps", sweeps}};
    if (s.rule.one_sample_df) j["one_sample_df"] = *s.rule.one_sample_df;
    return j;
}

ScenarioFile scenario_from_json(const json& j) {
    std::vector<std::string> problems;
    ScenarioFile f;
    Scenario& s = f.base;
    ObjectReader r(j, "", problems);
    r.optional("id", s.id);
    const json* design = r.child("design");
    if (!design) problems.push_back("design: missing required field");
    r.optional("true_sigma2", s.true_sigma2);
    r.optional("true_delta", s.true_delta);
    std::string rule = "pooled", source = "unblinded";
    r.optional("rule", rule);
    r.optional("data_source", source);
    double os_df = 0.0;
    r.optional("one_sample_df", os_df);
    r.optional("replications", s.replications);
    r.optional("seed", s.master_seed);
    r.optional("block_m", s.block_m);

    if (const json* prior = r.child("prior")) {
        ObjectReader pr(*prior, "prior", problems);
        double mean = 0.0;
        pr.optional("mean", mean);
        pr.optional("ess", s.prior.ess);
        pr.optional("w_R", s.prior.w_R);
        if (pr.has("mean")) s.prior.mean = mean;
        if (const json* mix = pr.child("mixture")) {
            try {
                s.prior.mixture = mixture_from_json(*mix);
            } catch (const ValidationError& e) {
                problems.insert(problems.end(), e.problems().begin(), e.problems().end());
            }
        }
        if (const json* vague = pr.child("vague")) {
            try {
                s.prior.vague = mixture_from_json(*vague);
            } catch (const ValidationError& e) {
                problems.insert(problems.end(), e.problems().begin(), e.problems().end());
            }
        }
        pr.finish();
    }

    if (const json* sweeps = r.child("sweeps")) {
        if (!sweeps->is_array()) {
            problems.push_back("sweeps: expected an array of {name, values}");
        } else {
            std::size_t i = 0;
            for (const auto& ax : *sweeps) {
                SweepAxis axis;
                ObjectReader sr(ax, fmt::format("sweeps[{}]", i++), problems);
                sr.required("name", axis.name);
                if (const json* values = sr.child("values"); values && values->is_array()) {
                    for (const auto& v : *values) {
                        if (v.is_number()) {
                            axis.values.emplace_back(v.get<double>());
                        } else if (v.is_string()) {
                            axis.values.emplace_back(v.get<std::string>());
                        } else {
                            problems.push_back(sr.field("values") + ": values must be numbers or strings");
                        }
                    }
                } else {
                    problems.push_back(sr.field("values") + ": missing required array");
                }
                sr.finish();
                for (const auto& prev : f.sweeps)
                    if (prev.name == axis.name) problems.push_back("sweeps: duplicate sweep name '" + axis.name + "'");
                f.sweeps.push_back(std::move(axis));
            }
        }
    }
    r.finish();
    throw_if(problems);

    try {
        s.design = design_from_json(*design);
        s.rule = ReestimationRule::parse(rule, source);
        if (r.has("one_sample_df")) s.rule.one_sample_df = os_df;
        for (const auto& cell : expand_grid(s, f.sweeps)) cell.validate();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError({e.what()});
    }
    return f;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"cannot open '" + path + "'"});
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({"'" + path + "': " + e.what()});
    }
}

}  // namespace ssrmap::io
