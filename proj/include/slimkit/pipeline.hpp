#pragma once

// End-to-end experiment: train per (regularizer, seed) cell, sweep prune
// ratios, retrain, summarize and aggregate.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slimkit/analysis.hpp"
#include "slimkit/config.hpp"
#include "slimkit/pruner.hpp"
#include "slimkit/trainer.hpp"

namespace slim {

inline constexpr int kReportFormatVersion = 1;

struct RatioResult {
  double ratio = 0.0;
  PrunePlan plan;
  /// Absent for over-pruned plans and failed runs.
  std::optional<CompressionReport> report;
  History retrain_history;
  std::string error;

  bool is_na() const { return plan.over_pruned || !report.has_value(); }
};

struct CellResult {
  std::size_t regularizer_index = 0;
  std::string regularizer;
  std::uint64_t seed = 0;
  History history;
  double accuracy = 0.0;
  std::optional<ScalingFactorSummary> summary;
  std::vector<RatioResult> ratios;
  /// Set when training itself failed; the cell then has no ratios.
  std::string error;
};

/// Seed-averaged view of one (regularizer, ratio) pair. NA when any seed is
/// over-pruned or failed; NA rows carry no numbers.
struct AggregateRow {
  std::string regularizer;
  double ratio = 0.0;
  bool na = false;
  std::size_t seeds = 0;
  double params_before = 0.0;
  double params_after = 0.0;
  double flops_before = 0.0;
  double flops_after = 0.0;
  double percent_params_pruned = 0.0;
  double percent_flops_pruned = 0.0;
  std::optional<double> accuracy_before_prune;
  std::optional<double> accuracy_after_prune;
  std::optional<double> accuracy_after_retrain;
};

struct RegularizerSummary {
  std::string regularizer;
  std::optional<ScalingFactorSummary> summary;  // mean over successful seeds
  double mean_accuracy = 0.0;
};

struct PipelineResult {
  std::vector<CellResult> cells;  // regularizer-major, then seed order
  std::vector<AggregateRow> aggregate;
  std::vector<RegularizerSummary> summaries;
};

/// Network initialization seed for a cell.
std::uint64_t init_seed(std::uint64_t seed);

/// Runs a single cell. Module errors are recorded in the result, not thrown.
CellResult run_cell(const ExperimentConfig& config, const DatasetPair& data, std::size_t regularizer_index,
                    std::uint64_t seed);

/// Cells run on up to `threads` worker threads; results are assembled in a
/// fixed order, so the outcome does not depend on the thread count.
PipelineResult run_pipeline(const ExperimentConfig& config, const DatasetPair& data, int threads = 1);

/// SLIMKIT_THREADS if set to a positive integer, else the hardware concurrency.
int thread_cap_from_env();

std::vector<AggregateRow> aggregate_cells(const ExperimentConfig& config, const std::vector<CellResult>& cells);

/// Writes history.jsonl, plans.jsonl, reports.jsonl, summaries.jsonl,
/// aggregate.csv and scaling.csv. Every file starts with a format header.
void write_pipeline_outputs(const PipelineResult& result, const ExperimentConfig& config,
                            const std::filesystem::path& dir);

nlohmann::json history_record_json(const EpochRecord& r);
nlohmann::json plan_json(const PrunePlan& plan);
nlohmann::json report_json(const CompressionReport& report);
nlohmann::json summary_json(const ScalingFactorSummary& summary);

/// "# <kind> format_version=N" for CSV files; JSONL files use a JSON header object.
std::string csv_header_line(const std::string& kind);
nlohmann::json jsonl_header(const std::string& kind);

}  // namespace slim
