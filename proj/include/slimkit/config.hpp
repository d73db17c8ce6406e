#pragma once

// Experiment configuration (JSON). Key names are documented in README.md;
// unknown keys are rejected with ConfigError.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slimkit/dataset.hpp"
#include "slimkit/network.hpp"
#include "slimkit/regularizers.hpp"
#include "slimkit/trainer.hpp"

namespace slim {

inline constexpr int kConfigVersion = 1;

/// A regularizer slot in a sweep; empty means no scaling-factor penalty.
struct RegularizerChoice {
  std::optional<RegularizerSpec> spec;

  std::string label() const { return spec ? spec->label() : "none"; }
  bool operator==(const RegularizerChoice&) const = default;
};

/// "none" or any form accepted by parse_regularizer.
RegularizerChoice parse_regularizer_choice(const std::string& text);
RegularizerChoice regularizer_from_json(const nlohmann::json& j);
nlohmann::json regularizer_to_json(const RegularizerChoice& choice);

struct DatasetConfig {
  int classes = 0;
  /// Synthetic sets: training uses `synthetic.seed`, test uses seed + 1.
  std::optional<SyntheticSpec> synthetic;
  int n_test = 0;
  std::filesystem::path train_file;
  std::filesystem::path test_file;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  NetworkSpec network;
  TrainConfig train;
  std::vector<RegularizerChoice> regularizers;
  std::vector<double> prune_ratios;
  /// Absent: pruned networks are not retrained.
  std::optional<TrainConfig> retrain;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::vector<double> bucket_edges;
};

/// Relative file paths are resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Generates or loads the train/test sets and checks them against the network.
DatasetPair load_datasets(const ExperimentConfig& config);

nlohmann::json network_spec_to_json(const NetworkSpec& spec);
nlohmann::json train_config_to_json(const TrainConfig& config);

}  // namespace slim
