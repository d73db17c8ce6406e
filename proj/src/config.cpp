#include "slimkit/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

#include "slimkit/analysis.hpp"
#include "slimkit/errors.hpp"

namespace slim {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  expect_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

template <typename T>
T get_as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_as<T>(j.at(key), where + "." + key);
}

int positive_int(const json& j, const std::string& where, const char* key) {
  const json& v = require(j, where, key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw ConfigError(where + "." + key + ": expected a positive integer");
  }
  return v.get<int>();
}

LayerSpec parse_layer(const json& j, const Shape3& in, const std::string& where) {
  const std::string type = get_as<std::string>(require(j, where, "type"), where + ".type");
  if (type == "conv") {
    check_keys(j, where, {"type", "out", "kernel", "stride", "pad", "bias"});
    return LayerSpec::conv2d(in.c, positive_int(j, where, "out"), positive_int(j, where, "kernel"),
                             get_or<int>(j, where, "stride", 1), get_or<int>(j, where, "pad", 0),
                             get_or<bool>(j, where, "bias", false));
  }
  if (type == "batchnorm") {
    check_keys(j, where, {"type", "eps", "momentum"});
    return LayerSpec::batch_norm(in.c, get_or<double>(j, where, "eps", 1e-5),
                                 get_or<double>(j, where, "momentum", 0.1));
  }
  if (type == "relu") {
    check_keys(j, where, {"type"});
    return LayerSpec::relu();
  }
  if (type == "maxpool" || type == "avgpool") {
    check_keys(j, where, {"type", "window", "stride"});
    const int window = positive_int(j, where, "window");
    const int stride = get_or<int>(j, where, "stride", window);
    return type == "maxpool" ? LayerSpec::max_pool(window, stride) : LayerSpec::avg_pool(window, stride);
  }
  if (type == "flatten") {
    check_keys(j, where, {"type"});
    return LayerSpec::flatten();
  }
  if (type == "dense") {
    check_keys(j, where, {"type", "out", "bias"});
    return LayerSpec::dense(static_cast<int>(in.size()), positive_int(j, where, "out"),
                            get_or<bool>(j, where, "bias", true));
  }
  throw ConfigError(where + ": unknown layer type '" + type + "'");
}

NetworkSpec parse_network(const json& j, int classes) {
  const std::string where = "network";
  check_keys(j, where, {"input", "layers"});
  const auto input = get_as<std::vector<int>>(require(j, where, "input"), where + ".input");
  if (input.size() != 3) throw ConfigError("network.input: expected [channels, height, width]");
  NetworkSpec spec;
  spec.input = {input[0], input[1], input[2]};
  spec.classes = classes;
  const json& layers = require(j, where, "layers");
  if (!layers.is_array()) throw ConfigError("network.layers: expected an array");
  try {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto shapes = spec.infer_shapes();
      spec.layers.push_back(parse_layer(layers[i], shapes.back(), "network.layers[" + std::to_string(i) + "]"));
    }
    spec.validate_prunable();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  return spec;
}

TrainConfig parse_train(const json& j, const std::string& where, bool allow_regularizer) {
  if (allow_regularizer) {
    check_keys(j, where, {"epochs", "batch_size", "lr0", "momentum", "weight_decay", "lambda",
                          "regularizer", "lr_drop_points", "lr_drop_factor", "per_epoch_gamma_step",
                          "decay_batchnorm"});
  } else {
    check_keys(j, where, {"epochs", "batch_size", "lr0", "momentum", "weight_decay",
                          "lr_drop_points", "lr_drop_factor", "decay_batchnorm"});
  }
  TrainConfig c;
  c.epochs = positive_int(j, where, "epochs");
  c.batch_size = get_or<int>(j, where, "batch_size", 64);
  c.lr0 = get_or<double>(j, where, "lr0", 0.1);
  c.momentum = get_or<double>(j, where, "momentum", 0.9);
  c.weight_decay = get_or<double>(j, where, "weight_decay", 1e-4);
  c.lambda = get_or<double>(j, where, "lambda", 0.0);
  c.lr_drop_points = get_or<std::vector<double>>(j, where, "lr_drop_points", {0.5, 0.75});
  c.lr_drop_factor = get_or<double>(j, where, "lr_drop_factor", 10.0);
  c.per_epoch_gamma_step = get_or<bool>(j, where, "per_epoch_gamma_step", false);
  c.decay_batchnorm = get_or<bool>(j, where, "decay_batchnorm", true);
  if (j.contains("regularizer")) c.regularizer = regularizer_from_json(j.at("regularizer")).spec;
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DatasetConfig parse_dataset(const json& j, const std::filesystem::path& base) {
  const std::string where = "dataset";
  DatasetConfig d;
  if (j.contains("synthetic")) {
    check_keys(j, where, {"synthetic"});
    const json& s = j.at("synthetic");
    const std::string sw = "dataset.synthetic";
    check_keys(s, sw, {"kind", "n_train", "n_test", "classes", "channels", "height", "width", "seed", "noise"});
    SyntheticSpec spec;
    try {
      spec.kind = parse_synthetic_kind(get_or<std::string>(s, sw, "kind", "blobs"));
    } catch (const InvalidInput& e) {
      throw ConfigError(sw + ": " + e.what());
    }
    spec.n = positive_int(s, sw, "n_train");
    d.n_test = positive_int(s, sw, "n_test");
    spec.classes = positive_int(s, sw, "classes");
    spec.channels = positive_int(s, sw, "channels");
    spec.height = positive_int(s, sw, "height");
    spec.width = positive_int(s, sw, "width");
    spec.seed = get_or<std::uint64_t>(s, sw, "seed", 0);
    spec.noise = get_or<double>(s, sw, "noise", 0.5);
    d.classes = spec.classes;
    if (spec.n < spec.classes || d.n_test < spec.classes) {
      throw ConfigError(sw + ": n_train and n_test must be at least the class count");
    }
    d.synthetic = spec;
  } else {
    check_keys(j, where, {"train_file", "test_file", "classes"});
    d.train_file = resolve(base, get_as<std::string>(require(j, where, "train_file"), "dataset.train_file"));
    d.test_file = resolve(base, get_as<std::string>(require(j, where, "test_file"), "dataset.test_file"));
    d.classes = positive_int(j, where, "classes");
    for (const auto& f : {d.train_file, d.test_file}) {
      if (!std::filesystem::exists(f)) throw ConfigError("dataset: file '" + f.string() + "' does not exist");
    }
  }
  return d;
}

}  // namespace

RegularizerChoice parse_regularizer_choice(const std::string& text) {
  if (text == "none") return {};
  try {
    return {parse_regularizer(text)};
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

RegularizerChoice regularizer_from_json(const json& j) {
  if (j.is_null()) return {};
  if (j.is_string()) return parse_regularizer_choice(j.get<std::string>());
  const std::string where = "regularizer";
  check_keys(j, where, {"kind", "p", "a"});
  const auto kind = get_as<std::string>(require(j, where, "kind"), "regularizer.kind");
  try {
    if (kind == "none") return {};
    if (kind == "l1") return {RegularizerSpec::l1()};
    if (kind == "lp") return {RegularizerSpec::lp(get_as<double>(require(j, where, "p"), "regularizer.p"))};
    const double a = get_as<double>(require(j, where, "a"), "regularizer.a");
    if (kind == "tl1") return {RegularizerSpec::tl1(a)};
    if (kind == "mcp") return {RegularizerSpec::mcp(a)};
    if (kind == "scad") return {RegularizerSpec::scad(a)};
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("regularizer: ") + e.what());
  }
  throw ConfigError("regularizer: unknown kind '" + kind + "'");
}

json regularizer_to_json(const RegularizerChoice& choice) {
  if (!choice.spec) return json{{"kind", "none"}};
  const auto& s = *choice.spec;
  switch (s.kind()) {
    case PenaltyKind::L1: return json{{"kind", "l1"}};
    case PenaltyKind::Lp: return json{{"kind", "lp"}, {"p", s.p()}};
    case PenaltyKind::TL1: return json{{"kind", "tl1"}, {"a", s.a()}};
    case PenaltyKind::MCP: return json{{"kind", "mcp"}, {"a", s.a()}};
    case PenaltyKind::SCAD: return json{{"kind", "scad"}, {"a", s.a()}};
  }
  return json{};
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config", {"format_version", "dataset", "network", "train", "regularizers",
                           "prune_ratios", "retrain", "seeds", "output_dir", "bucket_edges"});
  const int version = get_as<int>(require(j, "config", "format_version"), "format_version");
  if (version != kConfigVersion) {
    throw ConfigError("config: unsupported format_version " + std::to_string(version));
  }
  ExperimentConfig c;
  c.dataset = parse_dataset(require(j, "config", "dataset"), base_dir);
  c.network = parse_network(require(j, "config", "network"), c.dataset.classes);
  c.train = parse_train(require(j, "config", "train"), "train", true);

  if (j.contains("regularizers")) {
    const json& regs = j.at("regularizers");
    if (!regs.is_array() || regs.empty()) throw ConfigError("regularizers: expected a non-empty array");
    for (const auto& r : regs) c.regularizers.push_back(regularizer_from_json(r));
  } else {
    c.regularizers.push_back({c.train.regularizer});
  }

  c.prune_ratios = get_or<std::vector<double>>(j, "config", "prune_ratios", {});
  for (std::size_t i = 0; i < c.prune_ratios.size(); ++i) {
    const double r = c.prune_ratios[i];
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("prune_ratios: every ratio must lie in [0, 1)");
    if (i > 0 && !(r > c.prune_ratios[i - 1])) {
      throw ConfigError("prune_ratios: ratios must be strictly increasing");
    }
  }

  if (j.contains("retrain") && !j.at("retrain").is_null()) {
    c.retrain = parse_train(j.at("retrain"), "retrain", false);
  }

  c.seeds = get_or<std::vector<std::uint64_t>>(j, "config", "seeds", {0});
  if (c.seeds.empty()) throw ConfigError("seeds: at least one seed is required");

  c.output_dir = resolve(base_dir, get_or<std::string>(j, "config", "output_dir", "slimkit-out"));
  c.bucket_edges = get_or<std::vector<double>>(j, "config", "bucket_edges", default_bucket_edges());
  if (c.bucket_edges.size() < 2 ||
      !std::is_sorted(c.bucket_edges.begin(), c.bucket_edges.end(), std::less_equal<>())) {
    throw ConfigError("bucket_edges: need at least two strictly increasing edges");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path());
}

DatasetPair load_datasets(const ExperimentConfig& config) {
  DatasetPair pair;
  const auto& d = config.dataset;
  if (d.synthetic) {
    pair.train = generate_synthetic(*d.synthetic);
    SyntheticSpec test = *d.synthetic;
    test.n = d.n_test;
    test.seed = d.synthetic->seed + 1;
    pair.test = generate_synthetic(test);
  } else {
    pair.train = load_dataset(d.train_file);
    pair.test = load_dataset(d.test_file);
  }
  const Shape3& in = config.network.input;
  for (const Dataset* ds : {&pair.train, &pair.test}) {
    if (ds->images.c != in.c || ds->images.h != in.h || ds->images.w != in.w) {
      throw ConfigError("dataset image shape does not match network.input");
    }
    try {
      ds->check_labels(d.classes);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("dataset: ") + e.what());
    }
  }
  return pair;
}

json network_spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv2d:
        layers.push_back({{"type", "conv"}, {"in", l.in_ch}, {"out", l.out_ch}, {"kernel", l.kernel},
                          {"stride", l.stride}, {"pad", l.pad}, {"bias", l.has_bias}});
        break;
      case LayerKind::BatchNorm:
        layers.push_back({{"type", "batchnorm"}, {"channels", l.channels}, {"eps", l.eps}, {"momentum", l.momentum}});
        break;
      case LayerKind::ReLU: layers.push_back({{"type", "relu"}}); break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        layers.push_back({{"type", l.kind == LayerKind::MaxPool ? "maxpool" : "avgpool"},
                          {"window", l.window}, {"stride", l.stride}});
        break;
      case LayerKind::Flatten: layers.push_back({{"type", "flatten"}}); break;
      case LayerKind::Dense:
        layers.push_back({{"type", "dense"}, {"in", l.in_dim}, {"out", l.out_dim}, {"bias", l.has_bias}});
        break;
    }
  }
  return {{"input", {spec.input.c, spec.input.h, spec.input.w}}, {"classes", spec.classes}, {"layers", layers}};
}

json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr0", c.lr0},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"lambda", c.lambda},
          {"regularizer", regularizer_to_json({c.regularizer})},
          {"seed", c.seed},
          {"lr_drop_points", c.lr_drop_points},
          {"lr_drop_factor", c.lr_drop_factor},
          {"per_epoch_gamma_step", c.per_epoch_gamma_step},
          {"decay_batchnorm", c.decay_batchnorm}};
}

}  // namespace slim
