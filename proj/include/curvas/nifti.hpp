// Copyright 2026 The curvas-eval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal NIfTI-1 reader/writer (.nii and .nii.gz) built on zlib.
//
// Volumes are canonicalized on load: array axes are permuted and flipped so
// that axis k follows world axis k (x, y, z) with a positive direction
// cosine. Axial slices are then constant-z, coronal constant-y, sagittal
// constant-x.

#ifndef CURVAS_NIFTI_HPP
#define CURVAS_NIFTI_HPP

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "curvas/grid.hpp"

namespace curvas {

class NiftiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace nifti_detail {

enum DataType : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUInt16 = 512,
  kUInt32 = 768,
  kInt64 = 1024,
  kUInt64 = 1280,
};

#pragma pack(push, 1)
struct Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348);

template <typename T>
void swap_bytes(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  std::reverse(p, p + sizeof(T));
}

inline void swap_header(Header& h) {
  swap_bytes(h.sizeof_hdr);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
  swap_bytes(h.quatern_b);
  swap_bytes(h.quatern_c);
  swap_bytes(h.quatern_d);
  swap_bytes(h.qoffset_x);
  swap_bytes(h.qoffset_y);
  swap_bytes(h.qoffset_z);
  for (int i = 0; i < 4; ++i) {
    swap_bytes(h.srow_x[i]);
    swap_bytes(h.srow_y[i]);
    swap_bytes(h.srow_z[i]);
  }
}

struct GzCloser {
  void operator()(gzFile f) const {
    if (f) gzclose(f);
  }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

inline void read_exact(gzFile f, void* dst, std::size_t n, const std::string& path) {
  auto* out = static_cast<char*>(dst);
  while (n > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = gzread(f, out, chunk);
    if (got <= 0) throw NiftiError("truncated NIfTI payload: " + path);
    out += got;
    n -= static_cast<std::size_t>(got);
  }
}

template <typename S>
void convert_payload(const std::vector<char>& raw, bool swap, double slope,
                     double inter, std::vector<float>& out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    S v;
    std::memcpy(&v, raw.data() + i * sizeof(S), sizeof(S));
    if (swap) swap_bytes(v);
    out[i] = static_cast<float>(static_cast<double>(v) * slope + inter);
  }
}

inline std::size_t type_size(std::int16_t dt) {
  switch (dt) {
    case kUInt8:
    case kInt8: return 1;
    case kInt16:
    case kUInt16: return 2;
    case kInt32:
    case kUInt32:
    case kFloat32: return 4;
    case kFloat64:
    case kInt64:
    case kUInt64: return 8;
    default: return 0;
  }
}

// Voxel-to-world affine (3x4) from the header, following the NIfTI-1 rules
// for sform/qform precedence.
inline std::array<std::array<double, 4>, 3> header_affine(const Header& h) {
  std::array<std::array<double, 4>, 3> a{};
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      a[0][c] = h.srow_x[c];
      a[1][c] = h.srow_y[c];
      a[2][c] = h.srow_z[c];
    }
    return a;
  }
  const double dx = h.pixdim[1], dy = h.pixdim[2];
  double dz = h.pixdim[3];
  if (h.qform_code > 0) {
    double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    double aq = 1.0 - (b * b + c * c + d * d);
    if (aq < 1e-7) {
      const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
      b *= s;
      c *= s;
      d *= s;
      aq = 0.0;
    } else {
      aq = std::sqrt(aq);
    }
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    const double r[3][3] = {
        {aq * aq + b * b - c * c - d * d, 2 * (b * c - aq * d), 2 * (b * d + aq * c)},
        {2 * (b * c + aq * d), aq * aq + c * c - b * b - d * d, 2 * (c * d - aq * b)},
        {2 * (b * d - aq * c), 2 * (c * d + aq * b), aq * aq + d * d - c * c - b * b}};
    dz *= qfac;
    const double sp[3] = {dx, dy, dz};
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) a[row][col] = r[row][col] * sp[col];
    a[0][3] = h.qoffset_x;
    a[1][3] = h.qoffset_y;
    a[2][3] = h.qoffset_z;
    return a;
  }
  a[0][0] = dx;
  a[1][1] = dy;
  a[2][2] = dz;
  return a;
}

}  // namespace nifti_detail

/// Reorders a grid so that array axis k aligns with world axis k and points
/// in the positive direction.
template <typename T>
VoxelGrid<T> canonicalize(const VoxelGrid<T>& in) {
  const Geometry& g = in.geometry();
  std::array<int, 3> perm{-1, -1, -1};  // perm[world axis] = source axis
  std::array<bool, 3> used{false, false, false};
  // Greedy assignment on the largest absolute direction cosine.
  for (int step = 0; step < 3; ++step) {
    double best = -1.0;
    int bw = -1, ba = -1;
    for (int w = 0; w < 3; ++w) {
      if (perm[w] >= 0) continue;
      for (int a = 0; a < 3; ++a) {
        if (used[a]) continue;
        const double v = std::abs(g.direction[a][w]);
        if (v > best) {
          best = v;
          bw = w;
          ba = a;
        }
      }
    }
    perm[bw] = ba;
    used[ba] = true;
  }
  std::array<bool, 3> flip{};
  for (int w = 0; w < 3; ++w) flip[w] = g.direction[perm[w]][w] < 0.0;

  bool identity = true;
  for (int w = 0; w < 3; ++w) identity = identity && perm[w] == w && !flip[w];
  if (identity) return in;

  Geometry out;
  Dims src_corner{0, 0, 0};
  for (int w = 0; w < 3; ++w) {
    const int a = perm[w];
    out.dims[w] = g.dims[a];
    out.spacing[w] = g.spacing[a];
    out.direction[w] = g.direction[a];
    if (flip[w]) {
      for (auto& c : out.direction[w]) c = -c;
      src_corner[a] = g.dims[a] - 1;
    }
  }
  out.origin = g.origin;
  for (int a = 0; a < 3; ++a)
    for (int r = 0; r < 3; ++r)
      out.origin[r] += g.direction[a][r] * g.spacing[a] * double(src_corner[a]);

  std::vector<T> data(in.size());
  const auto src = in.values();
  std::size_t o = 0;
  Dims s{};
  for (std::size_t k = 0; k < out.dims[2]; ++k)
    for (std::size_t j = 0; j < out.dims[1]; ++j)
      for (std::size_t i = 0; i < out.dims[0]; ++i) {
        const std::size_t idx[3] = {i, j, k};
        for (int w = 0; w < 3; ++w) {
          const int a = perm[w];
          s[a] = flip[w] ? g.dims[a] - 1 - idx[w] : idx[w];
        }
        data[o++] = src[in.index(s[0], s[1], s[2])];
      }
  return VoxelGrid<T>(out, std::move(data));
}

/// Loads a 3-D NIfTI-1 volume (gzipped or plain), promoting the payload to
/// float after applying scl_slope/scl_inter.
inline VoxelGrid<float> load_grid(const std::filesystem::path& path,
                                  bool canonical = true) {
  using namespace nifti_detail;
  const std::string p = path.string();
  if (!std::filesystem::exists(path)) throw NiftiError("missing file: " + p);
  GzHandle f(gzopen(p.c_str(), "rb"));
  if (!f) throw NiftiError("cannot open: " + p);

  Header h{};
  if (gzread(f.get(), &h, sizeof(h)) != static_cast<int>(sizeof(h)))
    throw NiftiError("corrupt header (short read): " + p);
  bool swap = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swap = true;
    if (h.sizeof_hdr != 348) throw NiftiError("corrupt header (sizeof_hdr): " + p);
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0 && std::memcmp(h.magic, "ni1", 4) != 0)
    throw NiftiError("corrupt header (magic): " + p);
  if (std::memcmp(h.magic, "ni1", 4) == 0)
    throw NiftiError("detached .hdr/.img pairs are not supported: " + p);

  const int ndim = h.dim[0];
  if (ndim < 1 || ndim > 7) throw NiftiError("corrupt header (dim[0]): " + p);
  int effective = ndim;
  while (effective > 3 && h.dim[effective] == 1) --effective;
  if (effective != 3) throw NiftiError("unsupported dimensionality (" +
                                       std::to_string(effective) + "): " + p);

  Geometry g;
  for (int k = 0; k < 3; ++k) {
    if (h.dim[k + 1] <= 0) throw NiftiError("corrupt header (dim): " + p);
    g.dims[k] = static_cast<std::size_t>(h.dim[k + 1]);
  }
  const auto aff = header_affine(h);
  for (int a = 0; a < 3; ++a) {
    const double n = std::sqrt(aff[0][a] * aff[0][a] + aff[1][a] * aff[1][a] +
                               aff[2][a] * aff[2][a]);
    if (!(n > 0.0)) throw NiftiError("corrupt header (zero voxel size): " + p);
    g.spacing[a] = n;
    for (int r = 0; r < 3; ++r) g.direction[a][r] = aff[r][a] / n;
  }
  g.origin = {aff[0][3], aff[1][3], aff[2][3]};

  const std::size_t esize = type_size(h.datatype);
  if (esize == 0)
    throw NiftiError("unsupported datatype " + std::to_string(h.datatype) + ": " + p);
  const std::size_t skip = h.vox_offset > 348.0f ? std::size_t(h.vox_offset) - 348 : 0;
  if (skip > 0) {
    std::vector<char> ext(skip);
    read_exact(f.get(), ext.data(), skip, p);
  }
  std::vector<char> raw(g.voxel_count() * esize);
  read_exact(f.get(), raw.data(), raw.size(), p);

  double slope = h.scl_slope, inter = h.scl_inter;
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  std::vector<float> data(g.voxel_count());
  switch (h.datatype) {
    case kUInt8: convert_payload<std::uint8_t>(raw, swap, slope, inter, data); break;
    case kInt8: convert_payload<std::int8_t>(raw, swap, slope, inter, data); break;
    case kInt16: convert_payload<std::int16_t>(raw, swap, slope, inter, data); break;
    case kUInt16: convert_payload<std::uint16_t>(raw, swap, slope, inter, data); break;
    case kInt32: convert_payload<std::int32_t>(raw, swap, slope, inter, data); break;
    case kUInt32: convert_payload<std::uint32_t>(raw, swap, slope, inter, data); break;
    case kInt64: convert_payload<std::int64_t>(raw, swap, slope, inter, data); break;
    case kUInt64: convert_payload<std::uint64_t>(raw, swap, slope, inter, data); break;
    case kFloat32: convert_payload<float>(raw, swap, slope, inter, data); break;
    case kFloat64: convert_payload<double>(raw, swap, slope, inter, data); break;
  }
  VoxelGrid<float> grid(g, std::move(data));
  return canonical ? canonicalize(grid) : grid;
}

namespace nifti_detail {
template <typename T>
constexpr std::int16_t datatype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return kUInt8;
  else if constexpr (std::is_same_v<T, std::int16_t>) return kInt16;
  else if constexpr (std::is_same_v<T, std::int32_t>) return kInt32;
  else if constexpr (std::is_same_v<T, float>) return kFloat32;
  else if constexpr (std::is_same_v<T, double>) return kFloat64;
  else static_assert(sizeof(T) == 0, "unsupported NIfTI element type");
}
}  // namespace nifti_detail

/// Writes a grid as NIfTI-1 with an sform derived from its geometry. The
/// output is gzip-compressed when the path ends in ".gz".
template <typename T>
void write_grid(const std::filesystem::path& path, const VoxelGrid<T>& grid) {
  using namespace nifti_detail;
  const std::string p = path.string();
  const bool gz = path.extension() == ".gz";
  const Geometry& g = grid.geometry();

  Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int k = 0; k < 3; ++k) {
    if (g.dims[k] > 32767) throw NiftiError("dimension exceeds NIfTI-1 limit: " + p);
    h.dim[k + 1] = static_cast<std::int16_t>(g.dims[k]);
  }
  for (int k = 4; k < 8; ++k) h.dim[k] = 1;
  h.datatype = datatype_of<T>();
  h.bitpix = static_cast<std::int16_t>(8 * sizeof(T));
  h.pixdim[0] = 1.0f;
  for (int k = 0; k < 3; ++k) h.pixdim[k + 1] = static_cast<float>(g.spacing[k]);
  for (int k = 4; k < 8; ++k) h.pixdim[k] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.xyzt_units = 2;  // mm
  h.sform_code = 1;
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int r = 0; r < 3; ++r) {
    for (int a = 0; a < 3; ++a)
      rows[r][a] = static_cast<float>(g.direction[a][r] * g.spacing[a]);
    rows[r][3] = static_cast<float>(g.origin[r]);
  }
  std::memcpy(h.magic, "n+1", 4);

  GzHandle f(gzopen(p.c_str(), gz ? "wb6" : "wbT"));
  if (!f) throw NiftiError("cannot open for writing: " + p);
  const char ext[4] = {0, 0, 0, 0};
  auto put = [&](const void* src, std::size_t n) {
    const char* c = static_cast<const char*>(src);
    while (n > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      if (gzwrite(f.get(), c, chunk) != static_cast<int>(chunk))
        throw NiftiError("write failed: " + p);
      c += chunk;
      n -= chunk;
    }
  };
  put(&h, sizeof(h));
  put(ext, sizeof(ext));
  put(grid.values().data(), grid.size() * sizeof(T));
}

}  // namespace curvas

#endif  // CURVAS_NIFTI_HPP
