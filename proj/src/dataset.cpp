#include "slimkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "slimkit/binary_io.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"

namespace slim {

Tensor4 Dataset::gather_images(std::span<const std::size_t> indices) const {
  Tensor4 batch(static_cast<int>(indices.size()), images.c, images.h, images.w);
  const std::size_t stride = images.sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = images.sample(static_cast<int>(indices[i]));
    std::copy(src.begin(), src.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return batch;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

void Dataset::check_labels(int classes) const {
  for (int l : labels) {
    if (l < 0 || l >= classes) {
      throw InvalidInput("dataset label " + std::to_string(l) + " outside [0, " +
                         std::to_string(classes) + ")");
    }
  }
}

SyntheticKind parse_synthetic_kind(const std::string& text) {
  if (text == "blobs") return SyntheticKind::Blobs;
  if (text == "rings") return SyntheticKind::Rings;
  throw InvalidInput("unknown synthetic dataset kind '" + text + "' (expected blobs or rings)");
}

std::string to_string(SyntheticKind kind) {
  return kind == SyntheticKind::Blobs ? "blobs" : "rings";
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1 || spec.n < spec.classes) {
    throw InvalidInput("synthetic data needs classes >= 1 and n >= classes");
  }
  if (spec.channels < 1 || spec.height < 1 || spec.width < 1) {
    throw InvalidInput("synthetic data dimensions must be positive");
  }
  if (!(spec.noise >= 0.0)) throw InvalidInput("noise level must be nonnegative");

  const int k = spec.classes;
  const double side = std::min(spec.height, spec.width);
  const double cy0 = (spec.height - 1) / 2.0;
  const double cx0 = (spec.width - 1) / 2.0;

  // Class prototypes depend only on the geometry, so sets drawn with
  // different seeds share the same classes.
  Rng proto(mix_seed(0x51D5ull, static_cast<std::uint64_t>(k) * 131 + spec.channels));
  std::vector<std::vector<double>> mix(k, std::vector<double>(spec.channels));
  for (auto& m : mix) {
    for (double& v : m) v = proto.uniform(0.3, 1.0);
  }

  Dataset data;
  data.images = Tensor4(spec.n, spec.channels, spec.height, spec.width);
  data.labels.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) data.labels[i] = i % k;

  Rng rng(spec.seed);
  rng.shuffle(std::span<int>(data.labels));

  const double blob_radius = 0.28 * side;
  const double blob_sigma = 0.18 * side;
  const double ring_width = std::max(0.5, 0.08 * side);
  for (int i = 0; i < spec.n; ++i) {
    const int label = data.labels[i];
    const double jy = rng.uniform(-1.0, 1.0);
    const double jx = rng.uniform(-1.0, 1.0);
    const double amp = rng.uniform(0.7, 1.3);
    double cy = cy0 + jy;
    double cx = cx0 + jx;
    double radius = 0.0;
    if (spec.kind == SyntheticKind::Blobs) {
      const double theta = 2.0 * std::numbers::pi * label / k;
      cy += blob_radius * std::sin(theta);
      cx += blob_radius * std::cos(theta);
    } else {
      radius = (0.12 + 0.32 * (label + 0.5) / k) * side;
    }
    for (int c = 0; c < spec.channels; ++c) {
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double d = std::hypot(y - cy, x - cx);
          double signal;
          if (spec.kind == SyntheticKind::Blobs) {
            signal = std::exp(-d * d / (2.0 * blob_sigma * blob_sigma));
          } else {
            const double off = d - radius;
            signal = std::exp(-off * off / (2.0 * ring_width * ring_width));
          }
          const double v = amp * mix[label][c] * signal + spec.noise * rng.normal();
          data.images.at(i, c, y, x) = static_cast<double>(static_cast<float>(v));
        }
      }
    }
  }
  return data;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  if (data.labels.size() != static_cast<std::size_t>(data.images.n)) {
    throw InvalidInput("dataset label count does not match image count");
  }
  io::Writer w;
  w.bytes("SLDS", 4);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(data.images.n));
  w.u32(static_cast<std::uint32_t>(data.images.c));
  w.u32(static_cast<std::uint32_t>(data.images.h));
  w.u32(static_cast<std::uint32_t>(data.images.w));
  for (double v : data.images.data) w.f32(static_cast<float>(v));
  for (int l : data.labels) {
    if (l < 0 || l > 0xFFFF) throw InvalidInput("label does not fit in 16 bits");
    w.u16(static_cast<std::uint16_t>(l));
  }
  return std::move(w.buffer());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "dataset");
  r.expect_magic("SLDS");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw StateError("dataset: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t n = r.u32(), c = r.u32(), h = r.u32(), w = r.u32();
  const std::uint64_t values = n * c * h * w;
  if (values * 4 + n * 2 != r.remaining()) {
    throw StateError("dataset: header sizes do not match the file length");
  }
  Dataset data;
  data.images = Tensor4(static_cast<int>(n), static_cast<int>(c), static_cast<int>(h),
                        static_cast<int>(w));
  for (double& v : data.images.data) v = r.f32();
  data.labels.resize(n);
  for (int& l : data.labels) l = r.u16();
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace slim
