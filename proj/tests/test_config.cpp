#include <gtest/gtest.h>

#include <fstream>

#include "slimkit/analysis.hpp"
#include "slimkit/config.hpp"
#include "slimkit/errors.hpp"
#include "test_util.hpp"

using namespace slim;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "format_version": 1,
    "dataset": {"synthetic": {"kind": "blobs", "n_train": 20, "n_test": 10, "classes": 2,
                              "channels": 1, "height": 4, "width": 4, "seed": 1}},
    "network": {"input": [1, 4, 4], "layers": [
      {"type": "conv", "out": 2, "kernel": 3, "pad": 1}, {"type": "batchnorm"}, {"type": "relu"},
      {"type": "flatten"}, {"type": "dense", "out": 2}]},
    "train": {"epochs": 2, "regularizer": {"kind": "tl1", "a": 0.5}, "lambda": 0.01}
  })");
}

}  // namespace

TEST(Config, BundledConfigsParse) {
  for (const char* name : {"reference.json", "smoke.json"}) {
    const auto c = load_config(std::string(SLIMKIT_SOURCE_DIR "/configs/") + name);
    EXPECT_GE(c.seeds.size(), 2u);
    EXPECT_FALSE(c.regularizers.empty());
    EXPECT_TRUE(c.retrain.has_value());
    EXPECT_NO_THROW(c.network.validate_prunable());
  }
  const auto ref = load_config(SLIMKIT_SOURCE_DIR "/configs/reference.json");
  EXPECT_EQ(ref.regularizers.front().label(), "none");
  EXPECT_EQ(ref.seeds.size(), 3u);
  EXPECT_EQ(ref.network.prunable_layers().size(), 4u);
}

TEST(Config, MinimalDefaults) {
  const auto c = parse_config(minimal(), "/base");
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.train.regularizer, RegularizerSpec::tl1(0.5));
  ASSERT_EQ(c.regularizers.size(), 1u);
  EXPECT_EQ(c.regularizers[0].spec, RegularizerSpec::tl1(0.5));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(c.bucket_edges, default_bucket_edges());
  EXPECT_FALSE(c.retrain.has_value());
  EXPECT_EQ(c.output_dir, std::filesystem::path("/base/slimkit-out"));
  EXPECT_EQ(c.network.layers[4].in_dim, 32);
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
  auto top = minimal();
  top["extra"] = 1;
  EXPECT_THROW(parse_config(top), ConfigError);
  auto train = minimal();
  train["train"]["learning_rate"] = 0.1;
  EXPECT_THROW(parse_config(train), ConfigError);
  auto layer = minimal();
  layer["network"]["layers"][0]["dilation"] = 2;
  EXPECT_THROW(parse_config(layer), ConfigError);
  auto synth = minimal();
  synth["dataset"]["synthetic"]["colour"] = true;
  EXPECT_THROW(parse_config(synth), ConfigError);
}

TEST(Config, RatiosMustBeStrictlyIncreasingInUnitInterval) {
  auto c = minimal();
  c["prune_ratios"] = {0.1, 0.1};
  EXPECT_THROW(parse_config(c), ConfigError);
  c["prune_ratios"] = {0.5, 0.2};
  EXPECT_THROW(parse_config(c), ConfigError);
  c["prune_ratios"] = {0.2, 1.0};
  EXPECT_THROW(parse_config(c), ConfigError);
  c["prune_ratios"] = {0.0, 0.2, 0.9};
  EXPECT_NO_THROW(parse_config(c));
}

TEST(Config, StructuralErrors) {
  auto version = minimal();
  version["format_version"] = 2;
  EXPECT_THROW(parse_config(version), ConfigError);
  auto shape = minimal();
  shape["network"]["layers"][4]["out"] = 3;
  EXPECT_THROW(parse_config(shape), ConfigError);
  auto no_bn = minimal();
  no_bn["network"]["layers"].erase(1);
  EXPECT_THROW(parse_config(no_bn), ConfigError);
  auto bad_reg = minimal();
  bad_reg["regularizers"] = {"mcp:1"};
  EXPECT_THROW(parse_config(bad_reg), ConfigError);
  auto bad_train = minimal();
  bad_train["train"]["epochs"] = 0;
  EXPECT_THROW(parse_config(bad_train), ConfigError);
  auto wrong_type = minimal();
  wrong_type["train"]["lr0"] = "fast";
  EXPECT_THROW(parse_config(wrong_type), ConfigError);
  auto edges = minimal();
  edges["bucket_edges"] = {0, -1};
  EXPECT_THROW(parse_config(edges), ConfigError);
}

TEST(Config, MissingReferencedFilesRejected) {
  auto c = minimal();
  c["dataset"] = {{"train_file", "nope.slds"}, {"test_file", "nope2.slds"}, {"classes", 2}};
  EXPECT_THROW(parse_config(c, testutil::scratch_dir("config_missing")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, MalformedJsonIsAConfigError) {
  const auto dir = testutil::scratch_dir("config_bad");
  std::ofstream(dir / "c.json") << "{\"format_version\": 1,";
  EXPECT_THROW(load_config(dir / "c.json"), ConfigError);
}

TEST(Config, FileDatasetsResolveRelativeToConfig) {
  const auto dir = testutil::scratch_dir("config_files");
  SyntheticSpec s;
  s.n = 12;
  s.classes = 2;
  s.channels = 1;
  s.height = 4;
  s.width = 4;
  save_dataset(generate_synthetic(s), dir / "train.slds");
  s.seed = 9;
  save_dataset(generate_synthetic(s), dir / "test.slds");
  auto c = minimal();
  c["dataset"] = {{"train_file", "train.slds"}, {"test_file", "test.slds"}, {"classes", 2}};
  std::ofstream(dir / "c.json") << c.dump();
  const auto cfg = load_config(dir / "c.json");
  const auto data = load_datasets(cfg);
  EXPECT_EQ(data.train.size(), 12u);
  EXPECT_EQ(data.test.images.data, generate_synthetic(s).images.data);
}

TEST(Config, SyntheticTestSetUsesNextSeed) {
  const auto cfg = parse_config(minimal());
  const auto data = load_datasets(cfg);
  SyntheticSpec s = *cfg.dataset.synthetic;
  s.n = 10;
  s.seed = 2;
  EXPECT_EQ(data.test.images.data, generate_synthetic(s).images.data);
  EXPECT_EQ(data.train.size(), 20u);
}

TEST(Config, RegularizerForms) {
  EXPECT_FALSE(regularizer_from_json(nullptr).spec.has_value());
  EXPECT_FALSE(regularizer_from_json("none").spec.has_value());
  EXPECT_EQ(regularizer_from_json("scad:5").spec, RegularizerSpec::scad(5));
  EXPECT_EQ(regularizer_from_json(json{{"kind", "lp"}, {"p", 0.5}}).spec, RegularizerSpec::lp(0.5));
  EXPECT_THROW(regularizer_from_json(json{{"kind", "tl1"}}), ConfigError);
  EXPECT_THROW(regularizer_from_json(json{{"kind", "l2"}}), ConfigError);
  for (const auto& r : {RegularizerChoice{}, RegularizerChoice{RegularizerSpec::mcp(2)},
                        RegularizerChoice{RegularizerSpec::lp(0.75)}}) {
    EXPECT_EQ(regularizer_from_json(regularizer_to_json(r)), r);
  }
}
