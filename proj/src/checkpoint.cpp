#include "slimkit/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "slimkit/binary_io.hpp"
#include "slimkit/errors.hpp"

namespace slim {

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw StateError("failed writing '" + path.string() + "'");
}

}  // namespace io

namespace {

void write_values(io::Writer& w, const std::vector<double>& values) {
  for (double v : values) w.f32(static_cast<float>(v));
}

void read_values(io::Reader& r, std::vector<double>& values) {
  for (double& v : values) v = r.f32();
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  io::Writer w;
  w.bytes("SLIM", 4);
  w.u32(kCheckpointVersion);
  const NetworkSpec& spec = net.spec();
  w.u32(static_cast<std::uint32_t>(spec.input.c));
  w.u32(static_cast<std::uint32_t>(spec.input.h));
  w.u32(static_cast<std::uint32_t>(spec.input.w));
  w.u32(static_cast<std::uint32_t>(spec.classes));
  w.u32(static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    switch (l.kind) {
      case LayerKind::Conv2d:
        w.u32(l.in_ch);
        w.u32(l.out_ch);
        w.u32(l.kernel);
        w.u32(l.stride);
        w.u32(l.pad);
        w.u32(l.has_bias ? 1 : 0);
        break;
      case LayerKind::BatchNorm:
        w.u32(l.channels);
        w.f64(l.eps);
        w.f64(l.momentum);
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        w.u32(l.window);
        w.u32(l.stride);
        break;
      case LayerKind::Dense:
        w.u32(l.in_dim);
        w.u32(l.out_dim);
        w.u32(l.has_bias ? 1 : 0);
        break;
      case LayerKind::ReLU:
      case LayerKind::Flatten:
        break;
    }
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const Layer& layer = net.layer(i);
    for (const Param& p : layer.params) write_values(w, p.value);
    write_values(w, layer.running_mean);
    write_values(w, layer.running_var);
  }
  return std::move(w.buffer());
}

Network decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "checkpoint");
  r.expect_magic("SLIM");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw StateError("checkpoint: unsupported format version " + std::to_string(version));
  }
  NetworkSpec spec;
  spec.input.c = static_cast<int>(r.u32());
  spec.input.h = static_cast<int>(r.u32());
  spec.input.w = static_cast<int>(r.u32());
  spec.classes = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  if (count > r.remaining()) throw StateError("checkpoint: truncated file");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::Dense)) {
      throw StateError("checkpoint: unknown layer kind " + std::to_string(kind));
    }
    LayerSpec l;
    l.kind = static_cast<LayerKind>(kind);
    switch (l.kind) {
      case LayerKind::Conv2d:
        l.in_ch = static_cast<int>(r.u32());
        l.out_ch = static_cast<int>(r.u32());
        l.kernel = static_cast<int>(r.u32());
        l.stride = static_cast<int>(r.u32());
        l.pad = static_cast<int>(r.u32());
        l.has_bias = r.u32() != 0;
        break;
      case LayerKind::BatchNorm:
        l.channels = static_cast<int>(r.u32());
        l.eps = r.f64();
        l.momentum = r.f64();
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        l.window = static_cast<int>(r.u32());
        l.stride = static_cast<int>(r.u32());
        break;
      case LayerKind::Dense:
        l.in_dim = static_cast<int>(r.u32());
        l.out_dim = static_cast<int>(r.u32());
        l.has_bias = r.u32() != 0;
        break;
      case LayerKind::ReLU:
      case LayerKind::Flatten:
        break;
    }
    spec.layers.push_back(l);
  }
  Network net;
  try {
    net = Network(std::move(spec));
  } catch (const ShapeError& e) {
    throw StateError(std::string("checkpoint: invalid network: ") + e.what());
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Layer& layer = net.layer(i);
    for (Param& p : layer.params) read_values(r, p.value);
    read_values(r, layer.running_mean);
    read_values(r, layer.running_var);
  }
  if (!r.at_end()) throw StateError("checkpoint: trailing bytes after parameters");
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace slim
