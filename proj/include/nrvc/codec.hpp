#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrvc/network.hpp"
#include "nrvc/sampling.hpp"
#include "nrvc/volume.hpp"

namespace nrvc {

enum class QuantCode : uint8_t { F16 = 0, F32 = 1 };
enum class LosslessBackend : uint8_t { Lzma = 0, Store = 1 };

QuantCode quant_from_name(const std::string& name);
std::string quant_name(QuantCode q);

/// IEEE-754 binary16 conversion, round-to-nearest-even.
uint16_t float_to_half(float f);
float half_to_float(uint16_t h);

/// Self-describing container: fixed little-endian header followed by the
/// lossless-compressed stream of quantized parameter blocks (one block per
/// network, slice order; per layer W row-major then b).
struct ContainerMeta {
  GridMode mode = GridMode::Slice2D;
  NetworkSpec spec;
  std::array<uint32_t, 4> dims{};       // nx, ny, nz, m
  std::array<float, 3> voxel_size{};
  double norm_min = 0.0;
  double norm_max = 0.0;
  QuantCode quant = QuantCode::F16;
  LosslessBackend backend = LosslessBackend::Lzma;
  uint64_t seed = 0;
};

struct CompressedArtifact {
  ContainerMeta meta;
  uint32_t n_networks = 0;
  std::vector<uint8_t> payload;  // lossless-compressed quantized blocks
  uint32_t payload_checksum = 0;

  std::size_t byte_size() const;
};

/// Quantized bytes for one network's parameters.
std::vector<uint8_t> quantize(const NetworkParams& params, QuantCode code);
NetworkParams dequantize(const std::vector<uint8_t>& bytes,
                         const NetworkSpec& spec, QuantCode code);

CompressedArtifact pack(const std::vector<NetworkParams>& networks,
                        const ContainerMeta& meta);

struct UnpackResult {
  ContainerMeta meta;
  std::vector<NetworkParams> networks;
};
UnpackResult unpack(const CompressedArtifact& artifact);

/// Reconstructs the volume in native units from the artifact alone.
Volume4D decode(const CompressedArtifact& artifact);

double compression_ratio(std::size_t original_bytes, std::size_t artifact_bytes);

void write_artifact(const CompressedArtifact& artifact, const std::string& path);
CompressedArtifact read_artifact(const std::string& path);

uint32_t crc32_bytes(const uint8_t* data, std::size_t n);

}  // namespace nrvc
