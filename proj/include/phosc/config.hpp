#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phosc/model.hpp"
#include "phosc/synthdata.hpp"

namespace phosc::config {

// Validates doc against a JSON-Schema subset: type, enum, properties,
// additionalProperties (false), required, minimum/maximum and their exclusive
// forms, items, minItems, and local "$ref" into "#/$defs". Returns one
// "<json pointer>: <message>" line per problem.
std::vector<std::string> validate(const nlohmann::json& doc, const nlohmann::json& schema);

// The published experiment schema (config/experiment.schema.json).
const nlohmann::json& experiment_schema();

struct Paths {
  std::filesystem::path corpus = "corpus";
  std::filesystem::path models = "models";
  std::filesystem::path reports = "reports";
  std::filesystem::path word_list;    // empty: built-in list
  std::filesystem::path shape_table;  // empty: built-in table
};

// Everything an experiment needs; every field has a default, so "{}" is a
// valid config.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  Paths paths;
  synth::CorpusConfig corpus;
  PhosConfig phos;
  PhocConfig phoc;
  model::ArchConfig arch = model::default_arch();
  model::TrainConfig train_phoscnet;
  model::TrainConfig train_ctc;
  model::TrainConfig train_ctc_p;
  model::Decoder decoder;

  const model::TrainConfig& train_for(const std::string& variant) const;
};

// Schema-checks j, then builds the config. Relative paths are resolved
// against workdir; the shape table is loaded here. Throws ConfigError with
// every schema diagnostic.
ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& workdir);

// "train.ctc.batch_size=4": sets the dotted key, creating objects as needed.
// The value is parsed as JSON when possible, otherwise kept as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace phosc::config
