#pragma once

#include "fedsim/engine.hpp"

#include <json.hpp>

#include <string>
#include <variant>
#include <vector>

namespace fedsim {

struct SweepAxis {
  std::string field;
  std::vector<nlohmann::json> values;
};

/// A grid of experiments: the base config with one or two swept fields.
struct SweepSpec {
  nlohmann::json base;  // config object without the sweep section
  std::vector<SweepAxis> axes;

  std::size_t num_cells() const;
};

using ParsedConfig = std::variant<ExperimentConfig, SweepSpec>;

/// Strict parse: unknown keys, type mismatches and invariant violations fail
/// with the offending key path. A config with a "sweep" section parses to a
/// SweepSpec.
ParsedConfig parse_config(const std::string& path);

ExperimentConfig experiment_from_json(const nlohmann::json& j);

/// Full resolved echo of a config, suitable for the report header; parsing it
/// back yields the identical experiment.
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);

/// Config for one sweep cell: the base with axis values applied (axis index
/// per axis), re-validated from scratch.
ExperimentConfig sweep_cell(const SweepSpec& spec, const std::vector<std::size_t>& axis_idx);

/// The swept fields accepted by sweep configs, mapped to config paths.
const std::vector<std::string>& sweepable_fields();

}  // namespace fedsim
