#include "slimkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"

namespace slim {

using nlohmann::json;

std::uint64_t init_seed(std::uint64_t seed) { return mix_seed(seed, 0x1417); }

CellResult run_cell(const ExperimentConfig& config, const DatasetPair& data, std::size_t regularizer_index,
                    std::uint64_t seed) {
  CellResult cell;
  cell.regularizer_index = regularizer_index;
  cell.regularizer = config.regularizers.at(regularizer_index).label();
  cell.seed = seed;

  Network net(config.network);
  try {
    net = Network::initialized(config.network, init_seed(seed));
    TrainConfig tc = config.train;
    tc.regularizer = config.regularizers[regularizer_index].spec;
    if (!tc.regularizer) tc.lambda = 0.0;
    tc.seed = seed;
    cell.history = train(net, data.train, tc, &data.test);
    cell.accuracy = evaluate(net, data.test);
    cell.summary = summarize_gammas(net, config.bucket_edges);
  } catch (const Error& e) {
    cell.error = e.what();
    return cell;
  }

  for (std::size_t r = 0; r < config.prune_ratios.size(); ++r) {
    RatioResult rr;
    rr.ratio = config.prune_ratios[r];
    try {
      rr.plan = plan_prune(net, rr.ratio);
      if (!rr.plan.over_pruned) {
        ReportAccuracies acc;
        acc.before_prune = cell.accuracy;
        Network pruned = apply_prune(net, rr.plan);
        acc.after_prune = evaluate(pruned, data.test);
        if (config.retrain) {
          TrainConfig rc = *config.retrain;
          rc.regularizer.reset();
          rc.lambda = 0.0;
          rc.seed = mix_seed(seed, 0x5E7 + r);
          rr.retrain_history = train(pruned, data.train, rc, &data.test);
          acc.after_retrain = evaluate(pruned, data.test);
        }
        rr.report = compression_report(net, pruned, acc);
      }
    } catch (const Error& e) {
      rr.error = e.what();
      rr.report.reset();
    }
    cell.ratios.push_back(std::move(rr));
  }
  return cell;
}

int thread_cap_from_env() {
  if (const char* env = std::getenv("SLIMKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::optional<double> mean_optional(const std::vector<std::optional<double>>& v) {
  std::vector<double> vals;
  for (const auto& x : v) {
    if (!x) return std::nullopt;
    vals.push_back(*x);
  }
  if (vals.empty()) return std::nullopt;
  return mean_of(vals);
}

}  // namespace

std::vector<AggregateRow> aggregate_cells(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
  std::vector<AggregateRow> rows;
  for (std::size_t g = 0; g < config.regularizers.size(); ++g) {
    for (std::size_t r = 0; r < config.prune_ratios.size(); ++r) {
      AggregateRow row;
      row.regularizer = config.regularizers[g].label();
      row.ratio = config.prune_ratios[r];
      std::vector<const CompressionReport*> reports;
      for (const auto& c : cells) {
        if (c.regularizer_index != g) continue;
        ++row.seeds;
        if (r >= c.ratios.size() || c.ratios[r].is_na()) {
          row.na = true;
        } else {
          reports.push_back(&*c.ratios[r].report);
        }
      }
      if (row.seeds == 0) row.na = true;
      if (!row.na) {
        std::vector<double> pb, pa, fb, fa, pp, fp;
        std::vector<std::optional<double>> a0, a1, a2;
        for (const auto* rep : reports) {
          pb.push_back(static_cast<double>(rep->params_before));
          pa.push_back(static_cast<double>(rep->params_after));
          fb.push_back(static_cast<double>(rep->flops_before));
          fa.push_back(static_cast<double>(rep->flops_after));
          pp.push_back(rep->percent_params_pruned);
          fp.push_back(rep->percent_flops_pruned);
          a0.push_back(rep->accuracy_before_prune);
          a1.push_back(rep->accuracy_after_prune);
          a2.push_back(rep->accuracy_after_retrain);
        }
        row.params_before = mean_of(pb);
        row.params_after = mean_of(pa);
        row.flops_before = mean_of(fb);
        row.flops_after = mean_of(fa);
        row.percent_params_pruned = mean_of(pp);
        row.percent_flops_pruned = mean_of(fp);
        row.accuracy_before_prune = mean_optional(a0);
        row.accuracy_after_prune = mean_optional(a1);
        row.accuracy_after_retrain = mean_optional(a2);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

PipelineResult run_pipeline(const ExperimentConfig& config, const DatasetPair& data, int threads) {
  struct Job {
    std::size_t reg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < config.regularizers.size(); ++g) {
    for (auto s : config.seeds) jobs.push_back({g, s});
  }

  PipelineResult result;
  result.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      result.cells[i] = run_cell(config, data, jobs[i].reg, jobs[i].seed);
    }
  };
  const auto n = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(jobs.size(), 1))));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  result.aggregate = aggregate_cells(config, result.cells);
  for (std::size_t g = 0; g < config.regularizers.size(); ++g) {
    RegularizerSummary rs;
    rs.regularizer = config.regularizers[g].label();
    std::vector<ScalingFactorSummary> runs;
    std::vector<double> accs;
    for (const auto& c : result.cells) {
      if (c.regularizer_index != g || !c.summary) continue;
      runs.push_back(*c.summary);
      accs.push_back(c.accuracy);
    }
    if (!runs.empty()) rs.summary = aggregate_runs(runs);
    rs.mean_accuracy = mean_of(accs);
    result.summaries.push_back(std::move(rs));
  }
  return result;
}

json history_record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"penalty_value", r.penalty_value},
          {"test_accuracy", r.test_accuracy}};
}

json plan_json(const PrunePlan& plan) {
  json kept = json::array();
  for (const auto& m : plan.keep_masks) {
    kept.push_back({{"layer", m.layer},
                    {"channels", m.keep.size()},
                    {"kept", std::count(m.keep.begin(), m.keep.end(), true)}});
  }
  return {{"ratio", plan.ratio},
          {"threshold", plan.threshold},
          {"total_channels", plan.total_channels},
          {"pruned_channels", plan.pruned_channel_count},
          {"over_pruned", plan.over_pruned},
          {"over_pruned_layers", plan.over_pruned_layers},
          {"layers", kept}};
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

void write_lines(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw StateError("failed writing '" + path.string() + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json report_json(const CompressionReport& r) {
  return {{"params_before", r.params_before},
          {"params_after", r.params_after},
          {"flops_before", r.flops_before},
          {"flops_after", r.flops_after},
          {"percent_params_pruned", r.percent_params_pruned},
          {"percent_flops_pruned", r.percent_flops_pruned},
          {"accuracy_before_prune", optional_json(r.accuracy_before_prune)},
          {"accuracy_after_prune", optional_json(r.accuracy_after_prune)},
          {"accuracy_after_retrain", optional_json(r.accuracy_after_retrain)}};
}

json summary_json(const ScalingFactorSummary& s) {
  return {{"bucket_edges", s.bucket_edges}, {"counts", s.counts}, {"n_below", s.n_below},
          {"n_above", s.n_above},           {"runs", s.runs}};
}

std::string csv_header_line(const std::string& kind) {
  return "# slimkit " + kind + " format_version=" + std::to_string(kReportFormatVersion) + "\n";
}

json jsonl_header(const std::string& kind) {
  return {{"format", "slimkit-" + kind}, {"format_version", kReportFormatVersion}};
}

void write_pipeline_outputs(const PipelineResult& result, const ExperimentConfig& config,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string history = jsonl_header("history").dump() + "\n";
  std::string plans = jsonl_header("plans").dump() + "\n";
  std::string reports = jsonl_header("reports").dump() + "\n";
  std::string summaries = jsonl_header("summaries").dump() + "\n";

  for (const auto& c : result.cells) {
    const json key = {{"regularizer", c.regularizer}, {"seed", c.seed}};
    if (!c.error.empty()) {
      json row = key;
      row["status"] = "error";
      row["error"] = c.error;
      reports += row.dump() + "\n";
      continue;
    }
    for (const auto& r : c.history) {
      json row = key;
      row["phase"] = "train";
      row.update(history_record_json(r));
      history += row.dump() + "\n";
    }
    if (c.summary) {
      json row = key;
      row["accuracy"] = c.accuracy;
      row.update(summary_json(*c.summary));
      summaries += row.dump() + "\n";
    }
    for (const auto& rr : c.ratios) {
      for (const auto& r : rr.retrain_history) {
        json row = key;
        row["phase"] = "retrain";
        row["ratio"] = rr.ratio;
        row.update(history_record_json(r));
        history += row.dump() + "\n";
      }
      json p = key;
      p.update(plan_json(rr.plan));
      plans += p.dump() + "\n";

      json row = key;
      row["ratio"] = rr.ratio;
      if (!rr.error.empty()) {
        row["status"] = "error";
        row["error"] = rr.error;
      } else if (rr.is_na()) {
        row["status"] = "NA";
      } else {
        row["status"] = "ok";
        row.update(report_json(*rr.report));
      }
      reports += row.dump() + "\n";
    }
  }
  for (const auto& s : result.summaries) {
    if (!s.summary) continue;
    json row = {{"regularizer", s.regularizer}, {"seed", "mean"}, {"accuracy", s.mean_accuracy}};
    row.update(summary_json(*s.summary));
    summaries += row.dump() + "\n";
  }

  std::string aggregate = csv_header_line("aggregate");
  aggregate +=
      "regularizer,ratio,status,seeds,params_before,params_after,percent_params_pruned,"
      "flops_before,flops_after,percent_flops_pruned,accuracy_before_prune,accuracy_after_prune,"
      "accuracy_after_retrain\n";
  for (const auto& row : result.aggregate) {
    aggregate += csv_field(row.regularizer) + "," + fmt(row.ratio, "%.4f") + "," + (row.na ? "NA" : "ok") + "," +
                 std::to_string(row.seeds);
    if (row.na) {
      aggregate += ",NA,NA,NA,NA,NA,NA,NA,NA,NA\n";
      continue;
    }
    aggregate += "," + fmt(row.params_before, "%.1f") + "," + fmt(row.params_after, "%.1f") + "," +
                 fmt(row.percent_params_pruned, "%.4f") + "," + fmt(row.flops_before, "%.1f") + "," +
                 fmt(row.flops_after, "%.1f") + "," + fmt(row.percent_flops_pruned, "%.4f") + "," +
                 fmt_optional(row.accuracy_before_prune) + "," + fmt_optional(row.accuracy_after_prune) + "," +
                 fmt_optional(row.accuracy_after_retrain) + "\n";
  }

  std::string scaling = csv_header_line("scaling");
  scaling += "regularizer,runs,n_below,n_above,fraction_below,mean_accuracy\n";
  for (const auto& s : result.summaries) {
    if (!s.summary) {
      scaling += csv_field(s.regularizer) + ",0,NA,NA,NA,NA\n";
      continue;
    }
    const double total = s.summary->total();
    scaling += csv_field(s.regularizer) + "," + std::to_string(s.summary->runs) + "," + fmt(s.summary->n_below, "%.2f") +
               "," + fmt(s.summary->n_above, "%.2f") + "," + fmt(total > 0 ? s.summary->n_below / total : 0.0) + "," +
               fmt(s.mean_accuracy) + "\n";
  }

  write_lines(dir / "history.jsonl", history);
  write_lines(dir / "plans.jsonl", plans);
  write_lines(dir / "reports.jsonl", reports);
  write_lines(dir / "summaries.jsonl", summaries);
  write_lines(dir / "aggregate.csv", aggregate);
  write_lines(dir / "scaling.csv", scaling);

  json echo = jsonl_header("config");
  echo["network"] = network_spec_to_json(config.network);
  echo["train"] = train_config_to_json(config.train);
  echo["retrain"] = config.retrain ? train_config_to_json(*config.retrain) : json(nullptr);
  json regs = json::array();
  for (const auto& r : config.regularizers) regs.push_back(regularizer_to_json(r));
  echo["regularizers"] = regs;
  echo["prune_ratios"] = config.prune_ratios;
  echo["seeds"] = config.seeds;
  write_lines(dir / "config.json", echo.dump(2) + "\n");
}

}  // namespace slim
