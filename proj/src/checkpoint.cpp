#include "cleartrade/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace cleartrade {

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "checkpoints store IEEE-754 doubles");

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { little_endian(v, 2); }
  void u32(std::uint32_t v) { little_endian(v, 4); }
  void f64(double v) { little_endian(std::bit_cast<std::uint64_t>(v), 8); }
  void count(Index v) { u32(static_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void little_endian(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(little_endian(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(little_endian(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(4)); }
  double f64() { return std::bit_cast<double>(little_endian(8)); }
  Index count(const char* what) {
    const std::uint32_t v = u32();
    if (v == 0 || v > (1u << 20)) throw DataError(std::string("checkpoint: implausible ") + what + " " + std::to_string(v));
    return static_cast<Index>(v);
  }
  bool done() const { return pos_ == size_; }

 private:
  std::uint64_t little_endian(int width) {
    if (pos_ + static_cast<std::size_t>(width) > size_) throw DataError("checkpoint: truncated payload");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kHeaderSize = 6;   // magic + version
constexpr std::size_t kTrailerSize = 4;  // crc32

}  // namespace

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, data, static_cast<uInt>(size));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  Writer w;
  for (char c : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kCheckpointVersion);

  w.count(net.input_channels());
  w.count(static_cast<Index>(net.layers().size()));
  for (const Layer& layer : net.layers()) {
    w.u8(static_cast<std::uint8_t>(layer.spec.kind));
    switch (layer.spec.kind) {
      case LayerKind::conv: {
        const KernelBankd& k = layer.kernels;
        w.count(k.out_channels);
        w.count(k.in_channels);
        w.count(k.kernel_rows);
        w.count(k.kernel_cols);
        for (Index r = 0; r < k.weights.rows(); ++r)
          for (Index c = 0; c < k.weights.cols(); ++c) w.f64(k.weights(r, c));
        for (Index r = 0; r < k.biases.size(); ++r) w.f64(k.biases(r));
        break;
      }
      case LayerKind::leaky_relu:
        w.f64(layer.spec.leaky_slope);
        break;
      case LayerKind::max_pool:
      case LayerKind::gap:
      case LayerKind::softmax:
        break;
    }
  }

  auto& bytes = w.bytes();
  const std::uint32_t crc = crc32_of(bytes.data() + kHeaderSize, bytes.size() - kHeaderSize);
  w.u32(crc);
  return std::move(bytes);
}

Network decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize + kTrailerSize || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint: not a CTCK file");
  }
  Reader header(bytes.data() + 4, 2);
  const std::uint16_t version = header.u16();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version) + " (this build reads version " +
                    std::to_string(kCheckpointVersion) + ")");
  }

  const std::size_t payload_size = bytes.size() - kHeaderSize - kTrailerSize;
  const std::uint8_t* payload = bytes.data() + kHeaderSize;
  Reader trailer(payload + payload_size, kTrailerSize);
  const std::uint32_t stored = trailer.u32();
  if (stored != crc32_of(payload, payload_size)) throw DataError("checkpoint: checksum mismatch (file is corrupted)");

  Reader r(payload, payload_size);
  const Index input_channels = r.count("input channel count");
  const Index layer_count = r.count("layer count");
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(layer_count));
  for (Index i = 0; i < layer_count; ++i) {
    const std::uint8_t tag = r.u8();
    Layer layer;
    switch (tag) {
      case static_cast<std::uint8_t>(LayerKind::conv): {
        const Index out = r.count("out channels");
        const Index in = r.count("in channels");
        const Index kr = r.count("kernel rows");
        const Index kc = r.count("kernel cols");
        layer.spec = LayerSpec::conv(out, kr, kc);
        try {
          layer.kernels = KernelBankd(out, in, kr, kc);
        } catch (const ConfigError& e) {
          throw DataError(std::string("checkpoint: ") + e.what());
        }
        for (Index a = 0; a < layer.kernels.weights.rows(); ++a)
          for (Index b = 0; b < layer.kernels.weights.cols(); ++b) layer.kernels.weights(a, b) = r.f64();
        for (Index a = 0; a < out; ++a) layer.kernels.biases(a) = r.f64();
        break;
      }
      case static_cast<std::uint8_t>(LayerKind::leaky_relu):
        layer.spec = LayerSpec::leaky_relu(r.f64());
        break;
      case static_cast<std::uint8_t>(LayerKind::max_pool):
        layer.spec = LayerSpec::max_pool();
        break;
      case static_cast<std::uint8_t>(LayerKind::gap):
        layer.spec = LayerSpec::gap();
        break;
      case static_cast<std::uint8_t>(LayerKind::softmax):
        layer.spec = LayerSpec::softmax();
        break;
      default:
        throw DataError("checkpoint: unknown layer kind tag " + std::to_string(tag) + " at layer " + std::to_string(i));
    }
    layers.push_back(std::move(layer));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes after layer list");
  try {
    return Network::from_layers(std::move(layers), input_channels);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: invalid network: ") + e.what());
  }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace cleartrade
