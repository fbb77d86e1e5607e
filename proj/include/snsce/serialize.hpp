#pragma once

#include <string>

#include <json.hpp>

#include "snsce/channel.hpp"
#include "snsce/dhbf.hpp"
#include "snsce/harness.hpp"
#include "snsce/segmentation.hpp"

namespace snsce {

using Json = nlohmann::json;

/// Parses an experiment spec; missing fields take the experiment's defaults.
/// Throws ConfigError on unknown keys, wrong types or an invalid result.
ExperimentSpec spec_from_json(const Json& j);
Json spec_to_json(const ExperimentSpec& spec);

/// FNV-1a 64 of the canonical spec JSON, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

std::string segmenter_name(Segmenter s);
std::string architecture_name(Architecture a);
std::string estimator_name(EstimatorKind e);

/// Canonical CSV; runtime_ms stays empty unless timing is requested so that
/// reruns are byte-identical.
std::string results_csv(const ResultTable& t, bool timing = false);
Json results_json(const ResultTable& t, bool timing = false);
Json meta_json(const ResultTable& t, const ExperimentSpec& spec);

Json config_to_json(const SystemConfig& cfg);
SystemConfig config_from_json(const Json& j);

/// Channel realization with complex values stored as [re, im] pairs.
Json realization_to_json(const SystemConfig& cfg, const ChannelRealization& r);
ChannelRealization realization_from_json(const Json& j, SystemConfig* cfg = nullptr);

Json segmentation_to_json(const SegmentationResult& r);
/// Per-element n, p_n, D_mal, d_n, os_n.
std::string segmentation_csv(const RVector& power, const SegmentationResult& r);

Json plan_to_json(const MeasurementPlan& plan);

}  // namespace snsce
