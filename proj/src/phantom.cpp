#include "mrinv/phantom.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "mrinv/error.hpp"
#include "mrinv/nifti.hpp"

namespace mrinv {
namespace {

constexpr double kIntensityCeiling = 3000.0;

struct OrganTemplate {
  const char* name;
  std::array<double, 3> center;  // fraction of the grid edge
  std::array<double, 3> radii;   // fraction of the grid edge
  double ct;
  double t1;
};

// Laid out on a 64-voxel grid, stored as fractions so other sizes scale.
constexpr OrganTemplate kDefaultOrgans[] = {
    {"liver", {20 / 64.0, 28 / 64.0, 32 / 64.0}, {11 / 64.0, 10 / 64.0, 12 / 64.0}, 1150, 1550},
    {"spleen", {46 / 64.0, 22 / 64.0, 32 / 64.0}, {7 / 64.0, 6 / 64.0, 9 / 64.0}, 650, 2050},
    {"kidney_left", {46 / 64.0, 40 / 64.0, 30 / 64.0}, {5 / 64.0, 5 / 64.0, 8 / 64.0}, 1650, 1050},
    {"vertebrae_L1", {32 / 64.0, 50 / 64.0, 32 / 64.0}, {5 / 64.0, 4 / 64.0, 14 / 64.0}, 2300, 500},
    {"subcutaneous_fat", {16 / 64.0, 48 / 64.0, 32 / 64.0}, {6 / 64.0, 6 / 64.0, 10 / 64.0}, 150, 2550},
};

}  // namespace

void PhantomSpec::validate() const {
  Geometry{dims, spacing, diagonal_affine(spacing)}.validate();
  if (!(noise_sigma >= 0.0) || !(background_noise_sigma >= 0.0)) throw ConfigError("noise must be non-negative");
  if (organs.empty()) throw ConfigError("phantom needs at least one organ");
  const std::array<std::size_t, 3> n{dims.ni, dims.nj, dims.nk};
  std::set<std::string> names;
  for (const auto& o : organs) {
    if (o.class_name.empty() || !names.insert(o.class_name).second) {
      throw ConfigError("organ names must be unique and non-empty");
    }
    for (int a = 0; a < 3; ++a) {
      if (!(o.radii[a] > 0.0)) throw ConfigError("organ '" + o.class_name + "' has a non-positive radius");
      if (o.center[a] - o.radii[a] < 0.0 || o.center[a] + o.radii[a] > static_cast<double>(n[a] - 1)) {
        throw ConfigError("organ '" + o.class_name + "' extends outside the grid");
      }
    }
    if (o.ct < 0.0 || o.ct > kIntensityCeiling) {
      throw ConfigError("organ '" + o.class_name + "' CT intensity outside [0, 3000]");
    }
  }
}

PhantomSpec default_phantom_spec(std::size_t size, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = {size, size, size};
  spec.seed = seed;
  // Scale about the grid edge so a 64 grid reproduces the template in whole voxels.
  const double scale = static_cast<double>(size);
  for (const auto& t : kDefaultOrgans) {
    Organ o{t.name, {}, {}, t.ct, t.t1};
    for (int a = 0; a < 3; ++a) {
      o.center[a] = t.center[a] * scale;
      o.radii[a] = t.radii[a] * scale;
    }
    spec.organs.push_back(std::move(o));
  }
  return spec;
}

std::vector<ThresholdRule> phantom_ct_band_rules() {
  // Lower edge of the fat band sits just above the T1 background so that raw T1 air
  // stays unlabelled.
  return {
      {"subcutaneous_fat", 31.0, 400.0},
      {"spleen", 401.0, 900.0},
      {"liver", 901.0, 1400.0},
      {"kidney_left", 1401.0, 1900.0},
      {"vertebrae_L1", 1901.0, 3000.0},
  };
}

ClassMap phantom_class_map(const PhantomSpec& spec) {
  ClassMap map;
  LabelId id = 1;
  for (const auto& o : spec.organs) map.emplace(id++, o.class_name);
  return map;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Geometry g{spec.dims, spec.spacing, diagonal_affine(spec.spacing)};
  const std::size_t n = spec.dims.voxel_count();

  std::vector<LabelId> labels(n, 0);
  for (std::size_t o = 0; o < spec.organs.size(); ++o) {
    const auto& organ = spec.organs[o];
    const auto lo = [&](int a) {
      return static_cast<std::size_t>(std::max(0.0, std::floor(organ.center[a] - organ.radii[a])));
    };
    const auto hi = [&](int a, std::size_t extent) {
      return std::min(extent - 1, static_cast<std::size_t>(std::ceil(organ.center[a] + organ.radii[a])));
    };
    for (std::size_t k = lo(2); k <= hi(2, spec.dims.nk); ++k) {
      for (std::size_t j = lo(1); j <= hi(1, spec.dims.nj); ++j) {
        for (std::size_t i = lo(0); i <= hi(0, spec.dims.ni); ++i) {
          const double di = (static_cast<double>(i) - organ.center[0]) / organ.radii[0];
          const double dj = (static_cast<double>(j) - organ.center[1]) / organ.radii[1];
          const double dk = (static_cast<double>(k) - organ.center[2]) / organ.radii[2];
          if (di * di + dj * dj + dk * dk <= 1.0) labels[g.index(i, j, k)] = static_cast<LabelId>(o + 1);
        }
      }
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ct(n), t1(n);
  for (std::size_t v = 0; v < n; ++v) {
    double base_ct = spec.background_ct, base_t1 = spec.background_t1, sigma = spec.background_noise_sigma;
    if (labels[v] != 0) {
      const auto& organ = spec.organs[labels[v] - 1];
      base_ct = organ.ct;
      base_t1 = organ.t1;
      sigma = spec.noise_sigma;
    }
    double noise_ct = 0.0, noise_t1 = 0.0;
    if (sigma > 0.0) {
      noise_ct = sigma * gauss(rng);
      noise_t1 = sigma * gauss(rng);
    }
    ct[v] = std::clamp(base_ct + noise_ct, 0.0, kIntensityCeiling);
    t1[v] = std::clamp(base_t1 + noise_t1, 0.0, kIntensityCeiling);
  }

  return {Volume3D(g, std::move(ct)), Volume3D(g, std::move(t1)),
          LabelVolume(g, std::move(labels), phantom_class_map(spec))};
}

nlohmann::json organ_table_json(const PhantomSpec& spec) {
  nlohmann::json organs = nlohmann::json::array();
  LabelId id = 1;
  for (const auto& o : spec.organs) {
    organs.push_back({{"label", id++},
                      {"class_name", o.class_name},
                      {"center", o.center},
                      {"radii", o.radii},
                      {"ct", o.ct},
                      {"t1", o.t1}});
  }
  return {{"dims", {spec.dims.ni, spec.dims.nj, spec.dims.nk}},
          {"spacing", spec.spacing},
          {"seed", spec.seed},
          {"noise_sigma", spec.noise_sigma},
          {"background", {{"ct", spec.background_ct}, {"t1", spec.background_t1},
                          {"noise_sigma", spec.background_noise_sigma}}},
          {"organs", organs}};
}

void write_phantom(const Phantom& phantom, const PhantomSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_volume(phantom.ct, dir / "ct.nii.gz");
  write_volume(phantom.t1, dir / "t1.nii.gz");
  write_labels(phantom.gt, dir / "gt.nii.gz");
  std::ofstream out(dir / "organs.json");
  out << organ_table_json(spec).dump(2) << '\n';
  if (!out) throw Error("cannot write organ table in " + dir.string());
}

}  // namespace mrinv
