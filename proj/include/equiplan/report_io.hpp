#pragma once

#include "json.hpp"
#include <string>
#include <vector>

#include "equiplan/error.hpp"
#include "equiplan/evaluation.hpp"

namespace equiplan {

using Json = nlohmann::ordered_json;

Json to_json(const Plan& plan);
Json to_json(const MetricsReport& r);
Json to_json(const PlannerWeights& w);
Json to_json(const WeightTuning& t);
Json to_json(const ScenarioRequest& r);
Json to_json(const Hospital& h);

MetricsReport metrics_from_json(const Json& j);

struct FieldError {
  std::string field;
  std::string message;
};

/// Malformed request body; carries one entry per offending field.
class RequestError : public ValidationError {
 public:
  explicit RequestError(std::vector<FieldError> fields);
  const std::vector<FieldError>& fields() const noexcept { return fields_; }

 private:
  std::vector<FieldError> fields_;
};

/// Accepts {model, K, horizon, weights?, constraints?, seed?}. Missing model
/// defaults to main, missing K to 0, missing horizon to `default_horizon`.
ScenarioRequest parse_request(const Json& body, int default_horizon);

/// Weights from either a bare weights object or a tune.json document.
PlannerWeights parse_weights(const Json& j, const PlannerWeights& base = {});

/// Districts as a FeatureCollection; polygons when boundaries exist, centroid
/// points otherwise. Index columns are attached when `ctx` is given.
Json districts_geojson(const DataBundle& bundle, const PipelineContext* ctx = nullptr);

/// Existing hospitals with role "existing" and opened sites with role "proposed".
Json plan_geojson(const DataBundle& bundle, const Plan& plan);

/// `district_id,access,vulnerability,unmet_norm,equity_index,hfdr`
std::string indices_csv(const PipelineContext& ctx);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace equiplan
