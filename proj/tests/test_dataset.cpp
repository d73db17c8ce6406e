#include <gtest/gtest.h>

#include "slimkit/dataset.hpp"
#include "slimkit/errors.hpp"
#include "test_util.hpp"

using namespace slim;

TEST(Synthetic, BalancedLabels) {
  SyntheticSpec s;
  s.n = 10;
  s.classes = 2;
  const auto d = generate_synthetic(s);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 0), 5);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1), 5);

  s.n = 23;
  s.classes = 4;
  s.kind = SyntheticKind::Rings;
  const auto r = generate_synthetic(s);
  for (int k = 0; k < 4; ++k) {
    const auto c = std::count(r.labels.begin(), r.labels.end(), k);
    EXPECT_TRUE(c == 5 || c == 6);
  }
}

TEST(Synthetic, SameSeedSameBytesDifferentSeedDifferent) {
  SyntheticSpec s;
  s.n = 50;
  s.classes = 3;
  s.seed = 7;
  EXPECT_EQ(encode_dataset(generate_synthetic(s)), encode_dataset(generate_synthetic(s)));
  auto t = s;
  t.seed = 8;
  EXPECT_NE(encode_dataset(generate_synthetic(s)), encode_dataset(generate_synthetic(t)));
}

TEST(Synthetic, ShapeAndF32Rounding) {
  SyntheticSpec s;
  s.n = 6;
  s.classes = 3;
  s.channels = 2;
  s.height = 5;
  s.width = 7;
  const auto d = generate_synthetic(s);
  EXPECT_EQ(d.images.n, 6);
  EXPECT_EQ(d.images.c, 2);
  EXPECT_EQ(d.images.h, 5);
  EXPECT_EQ(d.images.w, 7);
  for (double v : d.images.data) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(Synthetic, InvalidSpecRejected) {
  SyntheticSpec s;
  s.n = 1;
  s.classes = 2;
  EXPECT_THROW(generate_synthetic(s), InvalidInput);
  s.n = 4;
  s.height = 0;
  EXPECT_THROW(generate_synthetic(s), InvalidInput);
  EXPECT_THROW(parse_synthetic_kind("spirals"), InvalidInput);
  EXPECT_EQ(parse_synthetic_kind("rings"), SyntheticKind::Rings);
}

TEST(DatasetFile, RoundTripIsBitIdentical) {
  const auto dir = testutil::scratch_dir("dataset");
  SyntheticSpec s;
  s.n = 40;
  s.classes = 4;
  s.seed = 3;
  const auto d = generate_synthetic(s);
  save_dataset(d, dir / "d.slds");
  const auto back = load_dataset(dir / "d.slds");
  EXPECT_EQ(back.images.data, d.images.data);
  EXPECT_EQ(back.labels, d.labels);
  const auto bytes = testutil::file_bytes(dir / "d.slds");
  EXPECT_EQ(bytes.size(), 4 + 4 + 16 + 40 * 3 * 8 * 8 * 4 + 40 * 2);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SLDS");
}

TEST(DatasetFile, InconsistentHeaderRejected) {
  SyntheticSpec s;
  s.n = 4;
  auto bytes = encode_dataset(generate_synthetic(s));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_dataset(truncated), StateError);
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_THROW(decode_dataset(magic), StateError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(decode_dataset(version), StateError);
}

TEST(Dataset, LabelCheckAndGather) {
  SyntheticSpec s;
  s.n = 8;
  s.classes = 4;
  const auto d = generate_synthetic(s);
  EXPECT_NO_THROW(d.check_labels(4));
  EXPECT_THROW(d.check_labels(3), InvalidInput);
  const std::vector<std::size_t> idx{5, 2};
  const auto x = d.gather_images(idx);
  EXPECT_EQ(x.n, 2);
  EXPECT_TRUE(std::equal(x.sample(0).begin(), x.sample(0).end(), d.images.sample(5).begin()));
  EXPECT_EQ(d.gather_labels(idx), (std::vector<int>{d.labels[5], d.labels[2]}));
}
