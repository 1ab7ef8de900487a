// File formats: mixtures and fit results as JSON, historical trials as CSV,
// scenario files as JSON.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssrmap/errors.hpp"
#include "ssrmap/mapprior.hpp"
#include "ssrmap/simengine.hpp"

namespace ssrmap::io {

using nlohmann::json;

/// Schema or parse failure; `problems()` lists every offending field.
class ValidationError : public InvalidArgument {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

json mixture_to_json(const GammaMixture& m);
/// Accepts {"components": [...]}, or any object holding such a value under "mixture".
GammaMixture mixture_from_json(const json& j);

std::vector<HistoricalTrialSummary> read_trials_csv(std::istream& in);
void write_trials_csv(std::ostream& out, const std::vector<HistoricalTrialSummary>& trials);

json model_config_to_json(const HierarchicalModelConfig& cfg);
HierarchicalModelConfig model_config_from_json(const json& j, HierarchicalModelConfig defaults = {});

json map_fit_to_json(const MapFitResult& fit);

json design_to_json(const DesignParams& d);
DesignParams design_from_json(const json& j);

struct ScenarioFile {
    Scenario base;
    std::vector<SweepAxis> sweeps;
};

json scenario_to_json(const ScenarioFile& f);
ScenarioFile scenario_from_json(const json& j);

json read_json_file(const std::string& path);

}  // namespace ssrmap::io
