#include "nrvc/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace nrvc {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;  // header + 4-byte extension flag
constexpr short kDtInt16 = 4;
constexpr short kDtFloat32 = 16;

template <typename T>
T read_field(const std::vector<uint8_t>& h, std::size_t offset) {
  T v;
  std::memcpy(&v, h.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void write_field(std::vector<uint8_t>& h, std::size_t offset, T v) {
  std::memcpy(h.data() + offset, &v, sizeof(T));
}

struct GzReader {
  gzFile f;
  explicit GzReader(const std::string& path) : f(gzopen(path.c_str(), "rb")) {
    if (!f) throw IoError("cannot open " + path);
  }
  ~GzReader() { gzclose(f); }
  void read_exact(void* dst, std::size_t n, const std::string& what) {
    int got = gzread(f, dst, static_cast<unsigned>(n));
    if (got < 0 || static_cast<std::size_t>(got) != n)
      throw FormatError("truncated NIfTI file while reading " + what);
  }
};

}  // namespace

Volume4D read_nifti(const std::string& path) {
  GzReader in(path);
  std::vector<uint8_t> hdr(kHeaderSize);
  in.read_exact(hdr.data(), kHeaderSize, "header");

  if (read_field<int32_t>(hdr, 0) != kHeaderSize)
    throw FormatError("bad sizeof_hdr (not little-endian NIfTI-1?): " + path);
  if (std::memcmp(hdr.data() + 344, "n+1", 4) != 0)
    throw FormatError("bad NIfTI magic in " + path);

  const short ndim = read_field<int16_t>(hdr, 40);
  if (ndim != 3 && ndim != 4)
    throw UnsupportedError("only 3D/4D images supported, got dim[0]=" +
                           std::to_string(ndim));
  Volume4D v;
  v.nx = read_field<int16_t>(hdr, 42);
  v.ny = read_field<int16_t>(hdr, 44);
  v.nz = read_field<int16_t>(hdr, 46);
  v.m = (ndim == 4) ? read_field<int16_t>(hdr, 48) : 1;
  if (v.nx <= 0 || v.ny <= 0 || v.nz <= 0 || v.m <= 0)
    throw FormatError("non-positive dimension in " + path);
  v.voxel_size = {read_field<float>(hdr, 80), read_field<float>(hdr, 84),
                  read_field<float>(hdr, 88)};

  const short datatype = read_field<int16_t>(hdr, 70);
  if (datatype != kDtInt16 && datatype != kDtFloat32)
    throw UnsupportedError("unsupported NIfTI datatype " + std::to_string(datatype));

  const float vox_offset = read_field<float>(hdr, 108);
  std::size_t skip = static_cast<std::size_t>(vox_offset);
  if (skip < kHeaderSize) skip = kVoxOffset;
  if (skip > kHeaderSize) {
    std::vector<uint8_t> pad(skip - kHeaderSize);
    in.read_exact(pad.data(), pad.size(), "extension bytes");
  }

  const std::size_t n = v.sample_count();
  v.data.resize(n);
  if (datatype == kDtFloat32) {
    in.read_exact(v.data.data(), n * sizeof(float), "float32 samples");
  } else {
    std::vector<int16_t> raw(n);
    in.read_exact(raw.data(), n * sizeof(int16_t), "int16 samples");
    for (std::size_t i = 0; i < n; ++i) v.data[i] = raw[i];
  }

  float slope = read_field<float>(hdr, 112);
  float inter = read_field<float>(hdr, 116);
  if (slope != 0.0f && !(slope == 1.0f && inter == 0.0f))
    for (float& s : v.data) s = s * slope + inter;

  v.raw_header = std::move(hdr);
  return v;
}

void write_nifti(const Volume4D& v, const std::string& path) {
  if (v.sample_count() != v.data.size())
    throw ShapeError("write_nifti: dims do not match sample count");

  std::vector<uint8_t> hdr = v.raw_header;
  if (hdr.size() != kHeaderSize) {
    hdr.assign(kHeaderSize, 0);
    write_field<int32_t>(hdr, 0, kHeaderSize);
    hdr[38] = 'r';  // regular
    write_field<float>(hdr, 76, 1.0f);  // pixdim[0]
    std::memcpy(hdr.data() + 344, "n+1", 4);
  }
  const short ndim = (v.m > 1) ? 4 : 3;
  write_field<int16_t>(hdr, 40, ndim);
  write_field<int16_t>(hdr, 42, static_cast<int16_t>(v.nx));
  write_field<int16_t>(hdr, 44, static_cast<int16_t>(v.ny));
  write_field<int16_t>(hdr, 46, static_cast<int16_t>(v.nz));
  write_field<int16_t>(hdr, 48, static_cast<int16_t>(v.m > 1 ? v.m : 1));
  for (int d = 5; d < 8; ++d) write_field<int16_t>(hdr, 40 + 2 * d, 1);
  write_field<int16_t>(hdr, 70, kDtFloat32);
  write_field<int16_t>(hdr, 72, 32);  // bitpix
  write_field<float>(hdr, 80, v.voxel_size[0]);
  write_field<float>(hdr, 84, v.voxel_size[1]);
  write_field<float>(hdr, 88, v.voxel_size[2]);
  write_field<float>(hdr, 108, static_cast<float>(kVoxOffset));
  write_field<float>(hdr, 112, 1.0f);  // scl_slope
  write_field<float>(hdr, 116, 0.0f);  // scl_inter

  const uint8_t ext_flag[4] = {0, 0, 0, 0};
  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    bool ok = gzwrite(f, hdr.data(), kHeaderSize) == kHeaderSize &&
              gzwrite(f, ext_flag, 4) == 4 &&
              gzwrite(f, v.data.data(),
                      static_cast<unsigned>(v.data.size() * sizeof(float))) ==
                  static_cast<int>(v.data.size() * sizeof(float));
    gzclose(f);
    if (!ok) throw IoError("write failed: " + path);
  } else {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    bool ok = std::fwrite(hdr.data(), 1, kHeaderSize, f) == kHeaderSize &&
              std::fwrite(ext_flag, 1, 4, f) == 4 &&
              std::fwrite(v.data.data(), sizeof(float), v.data.size(), f) ==
                  v.data.size();
    if (std::fclose(f) != 0) ok = false;
    if (!ok) throw IoError("write failed: " + path);
  }
}

TissueMask read_mask(const std::string& path) {
  Volume4D v = read_nifti(path);
  if (v.m != 1) throw UnsupportedError("mask must be 3D: " + path);
  TissueMask mask;
  mask.nx = v.nx;
  mask.ny = v.ny;
  mask.nz = v.nz;
  mask.labels.resize(v.data.size());
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    int label = static_cast<int>(std::lround(v.data[i]));
    if (label < 0 || label > 3)
      throw FormatError("mask label out of range [0,3] in " + path);
    mask.labels[i] = static_cast<TissueLabel>(label);
  }
  return mask;
}

std::size_t nifti_uncompressed_size(const Volume4D& v) {
  std::size_t bytes_per_sample = sizeof(float);
  if (v.raw_header.size() == kHeaderSize) {
    const short bitpix = read_field<int16_t>(v.raw_header, 72);
    if (bitpix > 0) bytes_per_sample = static_cast<std::size_t>(bitpix) / 8;
  }
  return kVoxOffset + v.sample_count() * bytes_per_sample;
}

}  // namespace nrvc
