#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slimkit/analysis.hpp"
#include "slimkit/checkpoint.hpp"
#include "slimkit/config.hpp"
#include "slimkit/dataset.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/pipeline.hpp"
#include "slimkit/pruner.hpp"
#include "slimkit/rng.hpp"
#include "slimkit/trainer.hpp"

namespace slim {

using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<double> ratio;
  std::string regularizer;

  // gen-data
  std::string kind = "blobs";
  int n = 0;
  int classes = 2;
  int channels = 3;
  int height = 8;
  int width = 8;
  double noise = 0.5;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw StateError("cannot write '" + path.string() + "'");
  f << text;
}

std::string history_jsonl(const History& history) {
  std::string s = jsonl_header("history").dump() + "\n";
  for (const auto& r : history) s += history_record_json(r).dump() + "\n";
  return s;
}

json with_header(const std::string& kind, const json& body) {
  json j = jsonl_header(kind);
  j.update(body);
  return j;
}

std::filesystem::path out_dir(const Options& o, const ExperimentConfig* config) {
  if (!o.out.empty()) return o.out;
  if (config) return config->output_dir;
  return ".";
}

double checked_ratio(const Options& o) {
  if (!o.ratio) throw ConfigError("--ratio is required");
  const double r = *o.ratio;
  if (!(r >= 0.0 && r < 1.0)) {
    throw ConfigError("--ratio " + std::to_string(r) + " is out of range; expected 0 <= ratio < 1");
  }
  return r;
}

int run_gen_data(const Options& o, std::ostream& out) {
  SyntheticSpec spec;
  try {
    spec.kind = parse_synthetic_kind(o.kind);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  spec.n = o.n;
  spec.classes = o.classes;
  spec.channels = o.channels;
  spec.height = o.height;
  spec.width = o.width;
  spec.seed = o.seed.value_or(0);
  spec.noise = o.noise;
  Dataset d;
  try {
    d = generate_synthetic(spec);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  save_dataset(d, o.out);
  out << "wrote " << d.size() << " samples to " << o.out << "\n";
  return 0;
}

int run_train(const Options& o, std::ostream& out) {
  const ExperimentConfig config = load_config(o.config);
  TrainConfig tc = config.train;
  if (!o.regularizer.empty()) tc.regularizer = parse_regularizer_choice(o.regularizer).spec;
  if (!tc.regularizer) tc.lambda = 0.0;
  tc.seed = o.seed.value_or(config.seeds.front());
  const auto data = load_datasets(config);
  const auto dir = out_dir(o, &config);

  Network net = Network::initialized(config.network, init_seed(tc.seed));
  const History history = train(net, data.train, tc, &data.test);
  const double acc = evaluate(net, data.test);
  const auto summary = summarize_gammas(net, config.bucket_edges);

  std::filesystem::create_directories(dir);
  save_checkpoint(net, dir / "model.slim");
  write_text(dir / "history.jsonl", history_jsonl(history));
  json s = summary_json(summary);
  s["accuracy"] = acc;
  s["regularizer"] = RegularizerChoice{tc.regularizer}.label();
  s["seed"] = tc.seed;
  write_text(dir / "summary.json", with_header("summary", s).dump(2) + "\n");
  out << "test accuracy " << acc << ", |gamma| <= 1e-6: " << summary.n_below << " of " << summary.total()
      << "\n";
  return 0;
}

int run_prune(const Options& o, std::ostream& out) {
  const double ratio = checked_ratio(o);
  std::optional<ExperimentConfig> config;
  if (!o.config.empty()) config = load_config(o.config);
  const Network net = load_checkpoint(o.model);
  const auto dir = out_dir(o, config ? &*config : nullptr);

  const PrunePlan plan = plan_prune(net, ratio);
  std::filesystem::create_directories(dir);
  write_text(dir / "plan.json", with_header("plan", plan_json(plan)).dump(2) + "\n");
  json report = {{"ratio", ratio}};
  if (plan.over_pruned) {
    report["status"] = "NA";
    out << "ratio " << ratio << ": NA (over-pruned)\n";
  } else {
    const Network pruned = apply_prune(net, plan);
    ReportAccuracies acc;
    if (config) {
      const auto data = load_datasets(*config);
      acc.before_prune = evaluate(net, data.test);
      acc.after_prune = evaluate(pruned, data.test);
    }
    save_checkpoint(pruned, dir / "pruned.slim");
    const auto r = compression_report(net, pruned, acc);
    report["status"] = "ok";
    report.update(report_json(r));
    out << "ratio " << ratio << ": params pruned " << r.percent_params_pruned << "%, FLOPs pruned "
        << r.percent_flops_pruned << "%\n";
  }
  write_text(dir / "report.json", with_header("report", report).dump(2) + "\n");
  return 0;
}

int run_retrain(const Options& o, std::ostream& out) {
  const ExperimentConfig config = load_config(o.config);
  TrainConfig rc = config.retrain.value_or(config.train);
  rc.regularizer.reset();
  rc.lambda = 0.0;
  rc.seed = o.seed.value_or(config.seeds.front());
  Network net = load_checkpoint(o.model);
  const auto data = load_datasets(config);
  const auto dir = out_dir(o, &config);
  const History history = train(net, data.train, rc, &data.test);
  std::filesystem::create_directories(dir);
  save_checkpoint(net, dir / "retrained.slim");
  write_text(dir / "history.jsonl", history_jsonl(history));
  out << "test accuracy after retraining " << evaluate(net, data.test) << "\n";
  return 0;
}

int run_analyze(const Options& o, std::ostream& out) {
  std::vector<double> edges = default_bucket_edges();
  if (!o.config.empty()) edges = load_config(o.config).bucket_edges;
  const Network net = load_checkpoint(o.model);
  const json s = with_header("summary", summary_json(summarize_gammas(net, edges)));
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    write_text(std::filesystem::path(o.out) / "summary.json", s.dump(2) + "\n");
  }
  out << s.dump() << "\n";
  return 0;
}

int run_pipeline_cmd(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = load_config(o.config);
  if (o.seed) config.seeds = {*o.seed};
  if (o.ratio) config.prune_ratios = {checked_ratio(o)};
  if (!o.regularizer.empty()) config.regularizers = {parse_regularizer_choice(o.regularizer)};
  const auto dir = out_dir(o, &config);
  const auto data = load_datasets(config);
  const PipelineResult result = run_pipeline(config, data, thread_cap_from_env());
  write_pipeline_outputs(result, config, dir);

  int failures = 0;
  for (const auto& c : result.cells) {
    if (!c.error.empty()) {
      err << "cell " << c.regularizer << " seed " << c.seed << ": " << c.error << "\n";
      ++failures;
    }
    for (const auto& r : c.ratios) {
      if (!r.error.empty()) {
        err << "cell " << c.regularizer << " seed " << c.seed << " ratio " << r.ratio << ": " << r.error << "\n";
        ++failures;
      }
    }
  }
  out << "wrote " << result.cells.size() << " cells to " << dir.string() << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"slimkit: scaling-factor regularization, channel pruning and retraining"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "Seed");
  };
  auto add_ratio = [&](CLI::App* sub) {
    sub->add_option_function<double>("--ratio", [&](const double& v) { o.ratio = v; }, "Channel pruning ratio in [0, 1)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
  gen->add_option("--kind", o.kind, "blobs or rings")->capture_default_str();
  gen->add_option("--n", o.n, "Number of samples")->required();
  gen->add_option("--classes", o.classes, "Number of classes")->capture_default_str();
  gen->add_option("--channels", o.channels)->capture_default_str();
  gen->add_option("--height", o.height)->capture_default_str();
  gen->add_option("--width", o.width)->capture_default_str();
  gen->add_option("--noise", o.noise)->capture_default_str();
  gen->add_option("--out", o.out, "Output dataset file")->required();
  add_seed(gen);

  auto* tr = app.add_subcommand("train", "Train one network with a scaling-factor regularizer");
  tr->add_option("--config", o.config, "Experiment config (JSON)")->required();
  tr->add_option("--out", o.out, "Output directory");
  tr->add_option("--regularizer", o.regularizer, "none, l1, lp:P, tl1:A, mcp:A or scad:A");
  add_seed(tr);

  auto* pr = app.add_subcommand("prune", "Prune a checkpoint at a global channel ratio");
  pr->add_option("--model", o.model, "Checkpoint to prune")->required();
  pr->add_option("--config", o.config, "Config whose test set is used for accuracies");
  pr->add_option("--out", o.out, "Output directory");
  add_ratio(pr);

  auto* re = app.add_subcommand("retrain", "Retrain a checkpoint without the scaling-factor penalty");
  re->add_option("--config", o.config, "Experiment config (JSON)")->required();
  re->add_option("--model", o.model, "Checkpoint to retrain")->required();
  re->add_option("--out", o.out, "Output directory");
  add_seed(re);

  auto* an = app.add_subcommand("analyze", "Summarize the scaling factors of a checkpoint");
  an->add_option("--model", o.model, "Checkpoint")->required();
  an->add_option("--config", o.config, "Config supplying bucket_edges");
  an->add_option("--out", o.out, "Output directory");

  auto* pl = app.add_subcommand("pipeline", "Run the full train, prune, retrain and report sweep");
  pl->add_option("--config", o.config, "Experiment config (JSON)")->required();
  pl->add_option("--out", o.out, "Output directory (overrides output_dir)");
  pl->add_option("--regularizer", o.regularizer, "Restrict the sweep to one regularizer");
  add_seed(pl);
  add_ratio(pl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(o, out);
    if (tr->parsed()) return run_train(o, out);
    if (pr->parsed()) return run_prune(o, out);
    if (re->parsed()) return run_retrain(o, out);
    if (an->parsed()) return run_analyze(o, out);
    if (pl->parsed()) return run_pipeline_cmd(o, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace slim
