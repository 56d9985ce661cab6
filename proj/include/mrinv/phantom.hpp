#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mrinv/backend.hpp"
#include "mrinv/volume.hpp"

namespace mrinv {

/// Axis-aligned ellipsoidal organ with a CT-like and a T1-like base intensity.
struct Organ {
  std::string class_name;
  std::array<double, 3> center;  // voxels
  std::array<double, 3> radii;   // voxels
  double ct = 0.0;
  double t1 = 0.0;
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing{1.5, 1.5, 1.5};
  std::uint64_t seed = 42;
  std::vector<Organ> organs;  // later organs overwrite earlier ones where they meet
  double noise_sigma = 20.0;  // organ voxels
  double background_ct = 0.0;
  double background_t1 = 30.0;
  double background_noise_sigma = 0.0;

  /// Throws ConfigError on ellipsoids outside the grid, CT intensities outside
  /// [0, 3000], duplicate or empty class names, or negative noise.
  void validate() const;
};

/// Cube of `size` voxels with the five-organ table scaled to fit.
///
/// Base intensities (CT / T1-like):
///   liver             1150 / 1550
///   spleen             650 / 2050
///   kidney_left       1650 / 1050
///   vertebrae_L1      2300 /  500
///   subcutaneous_fat   150 / 2550
/// The T1 ordering is the exact reverse of the CT ordering, and T1 values sit so that no
/// organ's raw T1 intensity falls in its own CT band (see phantom_ct_band_rules).
PhantomSpec default_phantom_spec(std::size_t size = 64, std::uint64_t seed = 42);

/// Mock CT-trained backend for the default phantom: one intensity band per organ,
/// centred on the organ's CT value.
std::vector<ThresholdRule> phantom_ct_band_rules();

/// Label ids 1..n in organ order.
ClassMap phantom_class_map(const PhantomSpec& spec);

struct Phantom {
  Volume3D ct;
  Volume3D t1;
  LabelVolume gt;
};

/// Voxels inside an organ take its base intensity plus seeded Gaussian noise; everything
/// is clipped to [0, 3000]. Same spec and seed give bit-identical output.
Phantom generate_phantom(const PhantomSpec& spec);

nlohmann::json organ_table_json(const PhantomSpec& spec);

/// Writes ct.nii.gz, t1.nii.gz, gt.nii.gz and organs.json into dir.
void write_phantom(const Phantom& phantom, const PhantomSpec& spec, const std::filesystem::path& dir);

}  // namespace mrinv
