#pragma once

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "mrinv/volume.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(MRINV_TEST_DATA_DIR); }

inline const nlohmann::json& reference() {
  static const nlohmann::json j = [] {
    std::ifstream in(data_dir() / "reference.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("mrinv-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline mrinv::Geometry cube(std::size_t ni, std::size_t nj, std::size_t nk) {
  mrinv::Geometry g;
  g.dims = {ni, nj, nk};
  return g;
}

/// Random dims in [1, max_edge]^3 with uniform intensities in [lo, hi].
inline mrinv::Volume3D random_volume(std::mt19937_64& rng, std::size_t max_edge, double lo, double hi) {
  std::uniform_int_distribution<std::size_t> edge(1, max_edge);
  std::uniform_real_distribution<double> value(lo, hi);
  auto g = cube(edge(rng), edge(rng), edge(rng));
  std::vector<double> data(g.dims.voxel_count());
  for (double& v : data) v = value(rng);
  return mrinv::Volume3D(g, std::move(data));
}

inline mrinv::Volume3D volume_of(std::vector<double> values) {
  auto g = cube(values.size(), 1, 1);
  return mrinv::Volume3D(g, std::move(values));
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
