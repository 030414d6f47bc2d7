#include "nrvc/codec.hpp"

#include <lzma.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace nrvc {

namespace {

constexpr char kMagic[4] = {'N', 'R', 'V', 'C'};
constexpr uint8_t kVersion = 1;

std::size_t header_size() {
  return 4 + 5 * 1 + 4 + 2 * 1 + 2 + 4 + 4 * 4 + 3 * 4 + 2 * 8 + 8 + 4 + 4 + 8;
}

std::size_t bytes_per_param(QuantCode q) {
  return q == QuantCode::F16 ? 2 : 4;
}

struct Writer {
  std::vector<uint8_t>& out;
  template <typename T>
  void put(T v) {
    const std::size_t at = out.size();
    out.resize(at + sizeof(T));
    std::memcpy(out.data() + at, &v, sizeof(T));
  }
};

struct Reader {
  const std::vector<uint8_t>& in;
  std::size_t pos = 0;
  template <typename T>
  T get() {
    if (pos + sizeof(T) > in.size())
      throw CorruptionError("truncated container header");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

std::vector<uint8_t> lzma_compress(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out(lzma_stream_buffer_bound(raw.size()));
  std::size_t out_pos = 0;
  lzma_ret ret = lzma_easy_buffer_encode(6, LZMA_CHECK_CRC32, nullptr,
                                         raw.data(), raw.size(), out.data(),
                                         &out_pos, out.size());
  if (ret != LZMA_OK) throw IoError("LZMA compression failed");
  out.resize(out_pos);
  return out;
}

std::vector<uint8_t> lzma_decompress(const std::vector<uint8_t>& compressed,
                                     std::size_t expected_size) {
  std::vector<uint8_t> out(expected_size);
  uint64_t memlimit = UINT64_MAX;
  std::size_t in_pos = 0, out_pos = 0;
  lzma_ret ret = lzma_stream_buffer_decode(
      &memlimit, 0, nullptr, compressed.data(), &in_pos, compressed.size(),
      out.data(), &out_pos, out.size());
  if (ret != LZMA_OK || out_pos != expected_size)
    throw CorruptionError("LZMA payload does not decode to the expected size");
  return out;
}

}  // namespace

uint32_t crc32_bytes(const uint8_t* data, std::size_t n) {
  return lzma_crc32(data, n, 0);
}

QuantCode quant_from_name(const std::string& name) {
  if (name == "f16") return QuantCode::F16;
  if (name == "f32") return QuantCode::F32;
  throw DomainError("unknown quantization code: " + name);
}

std::string quant_name(QuantCode q) {
  return q == QuantCode::F16 ? "f16" : "f32";
}

uint16_t float_to_half(float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  const uint32_t sign = (bits >> 16) & 0x8000u;
  const int32_t exp = static_cast<int32_t>((bits >> 23) & 0xFF) - 127 + 15;
  uint32_t mant = bits & 0x7FFFFFu;

  if (((bits >> 23) & 0xFF) == 0xFF)  // inf/nan
    return static_cast<uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0));
  if (exp >= 0x1F) return static_cast<uint16_t>(sign | 0x7C00u);  // overflow
  if (exp <= 0) {
    if (exp < -10) return static_cast<uint16_t>(sign);  // underflow to zero
    // Subnormal half: shift mantissa (with implicit bit) right, round to even.
    mant |= 0x800000u;
    const int shift = 14 - exp;
    uint32_t half_mant = mant >> shift;
    const uint32_t rem = mant & ((1u << shift) - 1);
    const uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half_mant & 1))) ++half_mant;
    return static_cast<uint16_t>(sign | half_mant);
  }
  uint32_t half_mant = mant >> 13;
  const uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (half_mant & 1))) {
    ++half_mant;
    if (half_mant == 0x400u) {  // mantissa carry bumps exponent
      half_mant = 0;
      if (exp + 1 >= 0x1F) return static_cast<uint16_t>(sign | 0x7C00u);
      return static_cast<uint16_t>(sign | ((exp + 1) << 10));
    }
  }
  return static_cast<uint16_t>(sign | (exp << 10) | half_mant);
}

float half_to_float(uint16_t h) {
  const uint32_t sign = (h & 0x8000u) << 16;
  const uint32_t exp = (h >> 10) & 0x1F;
  const uint32_t mant = h & 0x3FFu;
  uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      // Normalize the subnormal.
      int e = -1;
      uint32_t m = mant;
      while (!(m & 0x400u)) {
        m <<= 1;
        ++e;
      }
      bits = sign | ((127 - 15 - e) << 23) | ((m & 0x3FFu) << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::vector<uint8_t> quantize(const NetworkParams& params, QuantCode code) {
  std::vector<uint8_t> out;
  Writer w{out};
  auto emit = [&](double value) {
    if (!std::isfinite(value))
      throw DomainError("quantize: non-finite parameter");
    if (code == QuantCode::F16) {
      if (std::abs(value) > 65504.0)
        throw QuantOverflowError("parameter exceeds half-precision range: " +
                                 std::to_string(value));
      w.put(float_to_half(static_cast<float>(value)));
    } else {
      w.put(static_cast<float>(value));
    }
  };
  for (const auto& layer : params.layers) {
    for (long r = 0; r < layer.W.rows(); ++r)
      for (long c = 0; c < layer.W.cols(); ++c) emit(layer.W(r, c));
    for (long i = 0; i < layer.b.size(); ++i) emit(layer.b(i));
  }
  return out;
}

NetworkParams dequantize(const std::vector<uint8_t>& bytes,
                         const NetworkSpec& spec, QuantCode code) {
  if (bytes.size() != param_count(spec) * bytes_per_param(code))
    throw CorruptionError("quantized block size mismatch");
  Reader r{bytes};
  auto next = [&]() -> double {
    if (code == QuantCode::F16) return half_to_float(r.get<uint16_t>());
    return r.get<float>();
  };
  NetworkParams params;
  params.layers.resize(spec.layer_count());
  for (int i = 0; i < spec.layer_count(); ++i) {
    auto& layer = params.layers[i];
    layer.W.resize(spec.fan_out(i), spec.fan_in(i));
    for (long row = 0; row < layer.W.rows(); ++row)
      for (long col = 0; col < layer.W.cols(); ++col) layer.W(row, col) = next();
    layer.b.resize(spec.fan_out(i));
    for (long j = 0; j < layer.b.size(); ++j) layer.b(j) = next();
  }
  return params;
}

std::size_t CompressedArtifact::byte_size() const {
  return header_size() + payload.size();
}

CompressedArtifact pack(const std::vector<NetworkParams>& networks,
                        const ContainerMeta& meta) {
  if (networks.empty()) throw DomainError("pack: no networks");
  meta.spec.validate();
  const std::size_t block = param_count(meta.spec) * bytes_per_param(meta.quant);
  std::vector<uint8_t> raw;
  raw.reserve(block * networks.size());
  for (const auto& net : networks) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      if (static_cast<int>(i) >= meta.spec.layer_count() ||
          net.layers[i].W.rows() != meta.spec.fan_out(static_cast<int>(i)) ||
          net.layers[i].W.cols() != meta.spec.fan_in(static_cast<int>(i)))
        throw DomainError("pack: network shape does not match the shared spec");
    }
    if (net.layers.size() != static_cast<std::size_t>(meta.spec.layer_count()))
      throw DomainError("pack: network layer count does not match the spec");
    auto q = quantize(net, meta.quant);
    raw.insert(raw.end(), q.begin(), q.end());
  }

  CompressedArtifact artifact;
  artifact.meta = meta;
  artifact.n_networks = static_cast<uint32_t>(networks.size());
  artifact.payload = (meta.backend == LosslessBackend::Lzma)
                         ? lzma_compress(raw)
                         : raw;
  artifact.payload_checksum =
      crc32_bytes(artifact.payload.data(), artifact.payload.size());
  return artifact;
}

UnpackResult unpack(const CompressedArtifact& artifact) {
  const ContainerMeta& meta = artifact.meta;
  meta.spec.validate();
  if (crc32_bytes(artifact.payload.data(), artifact.payload.size()) !=
      artifact.payload_checksum)
    throw CorruptionError("payload checksum mismatch");

  const std::size_t block = param_count(meta.spec) * bytes_per_param(meta.quant);
  const std::size_t raw_size = block * artifact.n_networks;
  std::vector<uint8_t> raw = (meta.backend == LosslessBackend::Lzma)
                                 ? lzma_decompress(artifact.payload, raw_size)
                                 : artifact.payload;
  if (raw.size() != raw_size)
    throw CorruptionError("payload size does not match header");

  UnpackResult result;
  result.meta = meta;
  result.networks.reserve(artifact.n_networks);
  for (uint32_t n = 0; n < artifact.n_networks; ++n) {
    std::vector<uint8_t> bytes(raw.begin() + block * n,
                               raw.begin() + block * (n + 1));
    result.networks.push_back(dequantize(bytes, meta.spec, meta.quant));
  }
  return result;
}

Volume4D decode(const CompressedArtifact& artifact) {
  UnpackResult u = unpack(artifact);
  const ContainerMeta& meta = u.meta;
  Volume4D v;
  v.nx = static_cast<int>(meta.dims[0]);
  v.ny = static_cast<int>(meta.dims[1]);
  v.nz = static_cast<int>(meta.dims[2]);
  v.m = static_cast<int>(meta.dims[3]);
  v.voxel_size = meta.voxel_size;
  v.norm_min = meta.norm_min;
  v.norm_max = meta.norm_max;
  v.normalized = true;
  v.data.resize(v.sample_count());

  if (meta.mode == GridMode::Slice2D) {
    if (u.networks.size() != static_cast<std::size_t>(v.nz))
      throw CorruptionError("network count does not match slice count");
    const CoordinateGrid grid = make_grid(v.nx, v.ny, 1, GridMode::Slice2D);
    for (int z = 0; z < v.nz; ++z) {
      Eigen::MatrixXd y = forward(meta.spec, u.networks[z], grid.coords);
      for (int meas = 0; meas < v.m; ++meas) {
        long row = 0;
        for (int yy = 0; yy < v.ny; ++yy)
          for (int x = 0; x < v.nx; ++x, ++row)
            v.at(x, yy, z, meas) = static_cast<float>(y(row, meas));
      }
    }
  } else {
    if (u.networks.size() != 1)
      throw CorruptionError("3D container must hold exactly one network");
    const CoordinateGrid grid = make_grid(v.nx, v.ny, v.nz, GridMode::Volume3D);
    Eigen::MatrixXd y = forward(meta.spec, u.networks[0], grid.coords);
    for (int meas = 0; meas < v.m; ++meas) {
      long row = 0;
      for (int z = 0; z < v.nz; ++z)
        for (int yy = 0; yy < v.ny; ++yy)
          for (int x = 0; x < v.nx; ++x, ++row)
            v.at(x, yy, z, meas) = static_cast<float>(y(row, meas));
    }
  }
  return denormalize(v);
}

double compression_ratio(std::size_t original_bytes,
                         std::size_t artifact_bytes) {
  if (original_bytes == 0 || artifact_bytes == 0)
    throw DomainError("compression_ratio: zero size");
  return static_cast<double>(original_bytes) /
         static_cast<double>(artifact_bytes);
}

void write_artifact(const CompressedArtifact& artifact,
                    const std::string& path) {
  std::vector<uint8_t> buf;
  Writer w{buf};
  buf.insert(buf.end(), kMagic, kMagic + 4);
  const ContainerMeta& m = artifact.meta;
  w.put(kVersion);
  w.put(static_cast<uint8_t>(m.mode));
  w.put(static_cast<uint8_t>(m.spec.variant));
  w.put(static_cast<uint8_t>(m.quant));
  w.put(static_cast<uint8_t>(m.backend));
  w.put(static_cast<float>(m.spec.omega0));
  w.put(static_cast<uint8_t>(m.spec.in_dim));
  w.put(static_cast<uint8_t>(m.spec.hidden_layers));
  w.put(static_cast<uint16_t>(m.spec.hidden_units));
  w.put(static_cast<uint32_t>(m.spec.out_dim));
  for (uint32_t d : m.dims) w.put(d);
  for (float s : m.voxel_size) w.put(s);
  w.put(m.norm_min);
  w.put(m.norm_max);
  w.put(m.seed);
  w.put(artifact.n_networks);
  w.put(artifact.payload_checksum);
  w.put(static_cast<uint64_t>(artifact.payload.size()));
  buf.insert(buf.end(), artifact.payload.begin(), artifact.payload.end());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

CompressedArtifact read_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < header_size()) throw FormatError("file too small: " + path);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("bad magic in " + path);

  Reader r{buf};
  r.pos = 4;
  const uint8_t version = r.get<uint8_t>();
  if (version != kVersion)
    throw FormatError("unsupported container version " + std::to_string(version));

  CompressedArtifact artifact;
  ContainerMeta& m = artifact.meta;
  const uint8_t mode = r.get<uint8_t>();
  if (mode > 1) throw FormatError("bad mode byte");
  m.mode = static_cast<GridMode>(mode);
  const uint8_t variant = r.get<uint8_t>();
  if (variant > 4) throw FormatError("bad variant byte");
  m.spec.variant = static_cast<Variant>(variant);
  const uint8_t quant = r.get<uint8_t>();
  if (quant > 1) throw FormatError("bad quantization byte");
  m.quant = static_cast<QuantCode>(quant);
  const uint8_t backend = r.get<uint8_t>();
  if (backend > 1) throw FormatError("bad lossless-backend byte");
  m.backend = static_cast<LosslessBackend>(backend);
  m.spec.omega0 = r.get<float>();
  m.spec.in_dim = r.get<uint8_t>();
  m.spec.hidden_layers = r.get<uint8_t>();
  m.spec.hidden_units = r.get<uint16_t>();
  m.spec.out_dim = static_cast<int>(r.get<uint32_t>());
  for (auto& d : m.dims) d = r.get<uint32_t>();
  for (auto& s : m.voxel_size) s = r.get<float>();
  m.norm_min = r.get<double>();
  m.norm_max = r.get<double>();
  m.seed = r.get<uint64_t>();
  artifact.n_networks = r.get<uint32_t>();
  artifact.payload_checksum = r.get<uint32_t>();
  const uint64_t payload_len = r.get<uint64_t>();
  if (buf.size() - r.pos != payload_len)
    throw CorruptionError("payload length does not match file size");
  artifact.payload.assign(buf.begin() + static_cast<long>(r.pos), buf.end());
  return artifact;
}

}  // namespace nrvc
