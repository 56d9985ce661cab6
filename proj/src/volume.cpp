#include "mrinv/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mrinv {

Affine diagonal_affine(const Spacing& spacing) {
  Affine a{};
  for (int r = 0; r < 3; ++r) a[r][r] = spacing[r];
  a[3][3] = 1.0;
  return a;
}

void Geometry::validate() const {
  if (dims.ni == 0 || dims.nj == 0 || dims.nk == 0) {
    throw std::invalid_argument("volume dimensions must be positive");
  }
  for (double s : spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("voxel spacing must be positive and finite");
    }
  }
}

std::string to_string(DataType t) {
  switch (t) {
    case DataType::uint8: return "uint8";
    case DataType::int16: return "int16";
    case DataType::uint16: return "uint16";
    case DataType::int32: return "int32";
    case DataType::float32: return "float32";
    case DataType::float64: return "float64";
  }
  return "unknown";
}

Volume3D::Volume3D(Geometry geometry, std::vector<double> intensities, SourceType source)
    : geometry_(std::move(geometry)), data_(std::move(intensities)), source_(source) {
  geometry_.validate();
  if (data_.size() != geometry_.dims.voxel_count()) {
    throw std::invalid_argument("intensity count " + std::to_string(data_.size()) +
                                " does not match dims " +
                                std::to_string(geometry_.dims.voxel_count()));
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw std::invalid_argument("volume contains a non-finite intensity");
  }
  auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
  min_ = *lo;
  max_ = *hi;
}

Volume3D Volume3D::with_intensities(std::vector<double> intensities) const {
  return Volume3D(geometry_, std::move(intensities), source_);
}

std::optional<LabelId> find_label(const ClassMap& map, const std::string& class_name) {
  for (const auto& [id, name] : map) {
    if (name == class_name) return id;
  }
  return std::nullopt;
}

LabelVolume::LabelVolume(Geometry geometry, std::vector<LabelId> labels, ClassMap class_map,
                         bool allow_unknown)
    : geometry_(std::move(geometry)), labels_(std::move(labels)), class_map_(std::move(class_map)) {
  geometry_.validate();
  if (labels_.size() != geometry_.dims.voxel_count()) {
    throw std::invalid_argument("label count does not match dims");
  }
  if (class_map_.contains(0)) {
    throw std::invalid_argument("label 0 is reserved for background");
  }
  if (!allow_unknown) {
    for (LabelId l : labels_) {
      if (l != 0 && !class_map_.contains(l)) {
        throw std::invalid_argument("label " + std::to_string(l) + " is not in the class map");
      }
    }
  }
}

std::size_t LabelVolume::count(LabelId label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile p must lie in [0, 100]");

  const std::size_t n = values.size();
  const double h = static_cast<double>(n - 1) * p / 100.0;
  const auto lo_rank = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo_rank);

  // Two selections instead of a full sort; volumes run to tens of millions of voxels.
  std::vector<double> work(values.begin(), values.end());
  auto nth = work.begin() + static_cast<std::ptrdiff_t>(lo_rank);
  std::nth_element(work.begin(), nth, work.end());
  const double y0 = *nth;
  if (frac == 0.0 || lo_rank + 1 >= n) return y0;
  const double y1 = *std::min_element(nth + 1, work.end());
  return y0 + frac * (y1 - y0);
}

double percentile(const Volume3D& v, double p) { return percentile(v.intensities(), p); }

}  // namespace mrinv
