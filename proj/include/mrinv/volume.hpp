#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrinv {

/// Voxel counts along i, j, k.
struct Dims {
  std::size_t ni = 0;
  std::size_t nj = 0;
  std::size_t nk = 0;

  std::size_t voxel_count() const noexcept { return ni * nj * nk; }
  bool operator==(const Dims&) const = default;
};

using Spacing = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

Affine diagonal_affine(const Spacing& spacing);

/// Shape and placement shared by intensity and label volumes.
///
/// Voxels are stored in NIfTI disk order: i varies fastest, then j, then k.
struct Geometry {
  Dims dims;
  Spacing spacing{1.0, 1.0, 1.0};
  Affine affine = diagonal_affine({1.0, 1.0, 1.0});

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims.ni * (j + dims.nj * k);
  }
  /// Throws std::invalid_argument on zero dims or non-positive spacing.
  void validate() const;
};

enum class DataType { uint8, int16, uint16, int32, float32, float64 };

std::string to_string(DataType t);

/// How the intensities were stored on disk before scaling.
struct SourceType {
  DataType dtype = DataType::float32;
  double scl_slope = 1.0;
  double scl_inter = 0.0;
};

/// Immutable scalar voxel grid.
class Volume3D {
 public:
  /// Throws std::invalid_argument if the data length does not match the dims,
  /// a spacing component is not positive, or an intensity is not finite.
  Volume3D(Geometry geometry, std::vector<double> intensities, SourceType source = {});

  const Geometry& geometry() const noexcept { return geometry_; }
  const Dims& dims() const noexcept { return geometry_.dims; }
  const SourceType& source_type() const noexcept { return source_; }
  std::span<const double> intensities() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_.at(geometry_.index(i, j, k));
  }

  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }

  /// Same geometry and source descriptor, new intensities.
  Volume3D with_intensities(std::vector<double> intensities) const;

 private:
  Geometry geometry_;
  std::vector<double> data_;
  SourceType source_;
  double min_ = 0.0;
  double max_ = 0.0;
};

using LabelId = std::uint32_t;

/// label id -> class name. Id 0 is background and never appears as a key.
using ClassMap = std::map<LabelId, std::string>;

/// Returns the id assigned to class_name, if any.
std::optional<LabelId> find_label(const ClassMap& map, const std::string& class_name);

/// Immutable integer-labeled voxel grid.
class LabelVolume {
 public:
  /// Throws std::invalid_argument on a length mismatch, a class map containing id 0,
  /// or a voxel label that is neither 0 nor in the class map (unless allow_unknown).
  LabelVolume(Geometry geometry, std::vector<LabelId> labels, ClassMap class_map,
              bool allow_unknown = false);

  const Geometry& geometry() const noexcept { return geometry_; }
  const Dims& dims() const noexcept { return geometry_.dims; }
  const ClassMap& class_map() const noexcept { return class_map_; }
  std::span<const LabelId> labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  LabelId at(std::size_t i, std::size_t j, std::size_t k) const {
    return labels_.at(geometry_.index(i, j, k));
  }

  std::size_t count(LabelId label) const;

 private:
  Geometry geometry_;
  std::vector<LabelId> labels_;
  ClassMap class_map_;
};

/// Linear-interpolation percentile over all values, p in [0, 100].
///
/// With sorted values y, h = (N-1) p / 100 and the result is
/// y[floor h] + (h - floor h) (y[floor h + 1] - y[floor h]).
/// Throws std::invalid_argument on empty input or p outside [0, 100].
double percentile(std::span<const double> values, double p);

double percentile(const Volume3D& v, double p);

}  // namespace mrinv
