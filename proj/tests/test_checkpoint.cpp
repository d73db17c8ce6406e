#include <gtest/gtest.h>

#include "slimkit/checkpoint.hpp"
#include "slimkit/errors.hpp"
#include "test_util.hpp"

using namespace slim;

namespace {

Network sample_net() {
  NetworkSpec s = testutil::two_conv_spec(2, 6, 3, 4, 3);
  s.layers.insert(s.layers.begin() + 4, LayerSpec::avg_pool(1, 1));
  s.layers[0].has_bias = true;
  s.layers[1].eps = 1e-3;
  s.layers[1].momentum = 0.25;
  Network net = Network::initialized(s, 8);
  Rng rng(1);
  testutil::randomize_batchnorm(net, rng);
  return net;
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesSpecAndF32Values) {
  const Network net = sample_net();
  const Network back = decode_checkpoint(encode_checkpoint(net));
  EXPECT_EQ(back.spec(), net.spec());
  ASSERT_EQ(back.layer_count(), net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& a = net.layer(l);
    const auto& b = back.layer(l);
    ASSERT_EQ(a.params.size(), b.params.size());
    for (std::size_t j = 0; j < a.params.size(); ++j) {
      EXPECT_EQ(a.params[j].role, b.params[j].role);
      ASSERT_EQ(a.params[j].value.size(), b.params[j].value.size());
      for (std::size_t i = 0; i < a.params[j].value.size(); ++i) {
        EXPECT_EQ(static_cast<double>(static_cast<float>(a.params[j].value[i])), b.params[j].value[i]);
      }
    }
    ASSERT_EQ(a.running_mean.size(), b.running_mean.size());
    for (std::size_t i = 0; i < a.running_var.size(); ++i) {
      EXPECT_EQ(static_cast<double>(static_cast<float>(a.running_var[i])), b.running_var[i]);
    }
  }
}

TEST(Checkpoint, SecondRoundTripIsByteIdentical) {
  const auto bytes = encode_checkpoint(sample_net());
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = testutil::scratch_dir("checkpoint");
  const Network net = sample_net();
  save_checkpoint(net, dir / "a.slim");
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "a.slim")), encode_checkpoint(net));
  EXPECT_EQ(testutil::file_bytes(dir / "a.slim").size(), encode_checkpoint(net).size());
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(encode_checkpoint(net).data()), 4), "SLIM");
}

TEST(Checkpoint, CorruptInputRejected) {
  auto bytes = encode_checkpoint(sample_net());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), StateError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), StateError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), StateError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), StateError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.slim"), StateError);
}
