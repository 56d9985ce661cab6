#include "mrinv/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "mrinv/error.hpp"

namespace mrinv {
namespace {

namespace fs = std::filesystem;

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;  // header + 4-byte extension flag

// Field offsets within the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

struct DtypeInfo {
  DataType type;
  std::int16_t code;
  std::size_t bytes;
};

constexpr DtypeInfo kDtypes[] = {
    {DataType::uint8, 2, 1},    {DataType::int16, 4, 2},    {DataType::int32, 8, 4},
    {DataType::float32, 16, 4}, {DataType::float64, 64, 8}, {DataType::uint16, 512, 2},
};

const DtypeInfo* find_dtype(std::int16_t code) {
  for (const auto& d : kDtypes) {
    if (d.code == code) return &d;
  }
  return nullptr;
}

const DtypeInfo& dtype_info(DataType t) {
  for (const auto& d : kDtypes) {
    if (d.type == t) return d;
  }
  throw std::logic_error("unhandled data type");
}

template <typename T>
T load(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if (swap) std::reverse(buf.begin(), buf.end());
  return std::bit_cast<T>(buf);
}

template <typename T>
void store(std::vector<std::uint8_t>& out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NiftiError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& packed, const fs::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw NiftiError("zlib initialisation failed");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk;
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());
  int rc = Z_OK;
  while (true) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_STREAM_END) {
      // Concatenated gzip members.
      if (zs.avail_in == 0) break;
      inflateReset(&zs);
      continue;
    }
    if (rc != Z_OK) {
      inflateEnd(&zs);
      throw NiftiError("corrupt or truncated gzip stream in " + path.string());
    }
    if (zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw NiftiError("truncated gzip stream in " + path.string());
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> gzip(const std::vector<std::uint8_t>& raw) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw NiftiError("zlib initialisation failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw NiftiError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

Affine qform_affine(const std::uint8_t* h, bool swap, const std::array<double, 8>& pixdim) {
  double b = load<float>(h + kOffQuatern, swap);
  double c = load<float>(h + kOffQuatern + 4, swap);
  double d = load<float>(h + kOffQuatern + 8, swap);
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  const double qfac = pixdim[0] < 0.0 ? -1.0 : 1.0;
  const double xd = pixdim[1] > 0.0 ? pixdim[1] : 1.0;
  const double yd = pixdim[2] > 0.0 ? pixdim[2] : 1.0;
  const double zd = (pixdim[3] > 0.0 ? pixdim[3] : 1.0) * qfac;

  Affine m{};
  m[0] = {(a * a + b * b - c * c - d * d) * xd, 2 * (b * c - a * d) * yd, 2 * (b * d + a * c) * zd, 0};
  m[1] = {2 * (b * c + a * d) * xd, (a * a + c * c - b * b - d * d) * yd, 2 * (c * d - a * b) * zd, 0};
  m[2] = {2 * (b * d - a * c) * xd, 2 * (c * d + a * b) * yd, (a * a + d * d - c * c - b * b) * zd, 0};
  for (int r = 0; r < 3; ++r) m[r][3] = load<float>(h + kOffQoffset + 4 * r, swap);
  m[3] = {0, 0, 0, 1};
  return m;
}

template <typename T>
void decode(const std::uint8_t* src, std::size_t n, bool swap, std::vector<double>& out) {
  for (std::size_t v = 0; v < n; ++v) out[v] = static_cast<double>(load<T>(src + v * sizeof(T), swap));
}

void write_nifti(const Geometry& g, DataType dtype, const std::vector<std::uint8_t>& payload,
                 const fs::path& path) {
  const auto& info = dtype_info(dtype);
  std::vector<std::uint8_t> buf(kDataOffset, 0);
  store<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(g.dims.ni),
                               static_cast<std::int16_t>(g.dims.nj),
                               static_cast<std::int16_t>(g.dims.nk),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(buf, kOffDim + 2 * i, dim[i]);
  store<std::int16_t>(buf, kOffDatatype, info.code);
  store<std::int16_t>(buf, kOffBitpix, static_cast<std::int16_t>(info.bytes * 8));
  store<float>(buf, kOffPixdim, 1.0f);
  for (int i = 0; i < 3; ++i) store<float>(buf, kOffPixdim + 4 * (i + 1), static_cast<float>(g.spacing[i]));
  store<float>(buf, kOffVoxOffset, static_cast<float>(kDataOffset));
  store<float>(buf, kOffSclSlope, 1.0f);
  store<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = 2;  // millimetres
  store<std::int16_t>(buf, kOffQformCode, 0);
  store<std::int16_t>(buf, kOffSformCode, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      store<float>(buf, kOffSrow + 16 * r + 4 * c, static_cast<float>(g.affine[r][c]));
    }
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);
  buf.insert(buf.end(), payload.begin(), payload.end());

  if (path.extension() == ".gz") buf = gzip(buf);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NiftiError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw NiftiError("write failed for " + path.string());
}

void check_dims_fit(const Dims& d, const fs::path& path) {
  constexpr auto lim = static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max());
  if (d.ni > lim || d.nj > lim || d.nk > lim) {
    throw NiftiError("dimensions too large for NIfTI-1: " + path.string());
  }
}

}  // namespace

Volume3D read_volume(const fs::path& path) {
  std::vector<std::uint8_t> bytes = read_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) bytes = gunzip(bytes, path);
  if (bytes.size() < kHeaderSize) throw NiftiError("truncated NIfTI header: " + path.string());

  const std::uint8_t* h = bytes.data();
  bool swap = false;
  if (load<std::int32_t>(h, false) != static_cast<std::int32_t>(kHeaderSize)) {
    if (load<std::int32_t>(h, true) != static_cast<std::int32_t>(kHeaderSize)) {
      throw NiftiError("not a NIfTI-1 file (sizeof_hdr != 348): " + path.string());
    }
    swap = true;
  }
  if (std::memcmp(h + kOffMagic, "n+1\0", 4) != 0) {
    throw NiftiError("missing NIfTI-1 single-file magic 'n+1': " + path.string());
  }

  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + kOffDim + 2 * i, swap);
  const bool squeezable = dim[0] == 4 && dim[4] == 1;
  if (dim[0] != 3 && !squeezable) {
    throw NiftiError("expected a 3D image, found " + std::to_string(dim[0]) + " dimensions: " +
                     path.string());
  }
  if (dim[1] <= 0 || dim[2] <= 0 || dim[3] <= 0) {
    throw NiftiError("non-positive image dimension: " + path.string());
  }

  const std::int16_t code = load<std::int16_t>(h + kOffDatatype, swap);
  const DtypeInfo* info = find_dtype(code);
  if (info == nullptr) {
    throw NiftiError("unsupported NIfTI datatype code " + std::to_string(code) + ": " + path.string());
  }

  std::array<double, 8> pixdim{};
  for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(h + kOffPixdim + 4 * i, swap);

  Geometry g;
  g.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
            static_cast<std::size_t>(dim[3])};
  g.spacing = {pixdim[1], pixdim[2], pixdim[3]};
  for (double s : g.spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) throw NiftiError("non-positive voxel spacing: " + path.string());
  }

  const std::int16_t sform_code = load<std::int16_t>(h + kOffSformCode, swap);
  const std::int16_t qform_code = load<std::int16_t>(h + kOffQformCode, swap);
  if (sform_code > 0) {
    g.affine = diagonal_affine({1, 1, 1});
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) g.affine[r][c] = load<float>(h + kOffSrow + 16 * r + 4 * c, swap);
    }
  } else if (qform_code > 0) {
    g.affine = qform_affine(h, swap, pixdim);
  } else {
    g.affine = diagonal_affine(g.spacing);
  }

  const double vox_offset = load<float>(h + kOffVoxOffset, swap);
  const auto offset = static_cast<std::size_t>(std::max(vox_offset, static_cast<double>(kHeaderSize)));
  const std::size_t n = g.dims.voxel_count();
  if (bytes.size() < offset || (bytes.size() - offset) / info->bytes < n) {
    throw NiftiError("truncated voxel data: " + path.string());
  }

  std::vector<double> data(n);
  const std::uint8_t* src = bytes.data() + offset;
  switch (info->type) {
    case DataType::uint8: decode<std::uint8_t>(src, n, swap, data); break;
    case DataType::int16: decode<std::int16_t>(src, n, swap, data); break;
    case DataType::uint16: decode<std::uint16_t>(src, n, swap, data); break;
    case DataType::int32: decode<std::int32_t>(src, n, swap, data); break;
    case DataType::float32: decode<float>(src, n, swap, data); break;
    case DataType::float64: decode<double>(src, n, swap, data); break;
  }

  SourceType source{info->type, 1.0, 0.0};
  const double slope = load<float>(h + kOffSclSlope, swap);
  const double inter = load<float>(h + kOffSclInter, swap);
  if (slope != 0.0 && std::isfinite(slope)) {
    source.scl_slope = slope;
    source.scl_inter = std::isfinite(inter) ? inter : 0.0;
    if (source.scl_slope != 1.0 || source.scl_inter != 0.0) {
      for (double& x : data) x = x * source.scl_slope + source.scl_inter;
    }
  }
  for (double x : data) {
    if (std::isnan(x)) throw NiftiError("NaN voxel in " + path.string());
    if (!std::isfinite(x)) throw NiftiError("infinite voxel in " + path.string());
  }
  return Volume3D(std::move(g), std::move(data), source);
}

void write_volume(const Volume3D& v, const fs::path& path) {
  check_dims_fit(v.dims(), path);
  std::vector<std::uint8_t> payload(v.size() * sizeof(float));
  const auto values = v.intensities();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    std::memcpy(payload.data() + i * sizeof(float), &f, sizeof(float));
  }
  write_nifti(v.geometry(), DataType::float32, payload, path);
}

LabelVolume read_labels(const fs::path& path, const ClassMap& class_map, bool allow_unknown) {
  const Volume3D raw = read_volume(path);
  std::vector<LabelId> labels(raw.size());
  const auto values = raw.intensities();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = std::round(values[i]);
    if (std::abs(values[i] - r) > 1e-6) {
      throw NiftiError("non-integral label value " + std::to_string(values[i]) + " in " + path.string());
    }
    if (r < 0.0 || r > static_cast<double>(std::numeric_limits<LabelId>::max())) {
      throw NiftiError("label value out of range in " + path.string());
    }
    labels[i] = static_cast<LabelId>(r);
  }
  try {
    return LabelVolume(raw.geometry(), std::move(labels), class_map, allow_unknown);
  } catch (const std::invalid_argument& e) {
    throw NiftiError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

void write_labels(const LabelVolume& labels, const fs::path& path) {
  check_dims_fit(labels.dims(), path);
  const auto values = labels.labels();
  const LabelId top = values.empty() ? 0 : *std::max_element(values.begin(), values.end());
  DataType dtype = DataType::int32;
  if (top <= std::numeric_limits<std::uint8_t>::max()) {
    dtype = DataType::uint8;
  } else if (top <= static_cast<LabelId>(std::numeric_limits<std::int16_t>::max())) {
    dtype = DataType::int16;
  } else if (top > static_cast<LabelId>(std::numeric_limits<std::int32_t>::max())) {
    throw NiftiError("label value too large to store: " + path.string());
  }
  const std::size_t width = dtype_info(dtype).bytes;
  std::vector<std::uint8_t> payload(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint8_t* dst = payload.data() + i * width;
    switch (dtype) {
      case DataType::uint8: *dst = static_cast<std::uint8_t>(values[i]); break;
      case DataType::int16: {
        const auto x = static_cast<std::int16_t>(values[i]);
        std::memcpy(dst, &x, sizeof x);
        break;
      }
      default: {
        const auto x = static_cast<std::int32_t>(values[i]);
        std::memcpy(dst, &x, sizeof x);
        break;
      }
    }
  }
  write_nifti(labels.geometry(), dtype, payload, path);
}

}  // namespace mrinv
