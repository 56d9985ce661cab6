#pragma once

#include <cstddef>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrinv/backend.hpp"
#include "mrinv/evaluation.hpp"
#include "mrinv/preprocess.hpp"
#include "mrinv/volume.hpp"

namespace mrinv {

enum class SequenceTag { T1, T2, other };

std::string to_string(SequenceTag tag);
SequenceTag parse_sequence_tag(std::string_view text);

struct ManifestEntry {
  std::string case_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> gt_path;
  SequenceTag sequence_tag = SequenceTag::other;
};

struct CaseManifest {
  std::vector<ManifestEntry> entries;

  /// Throws ConfigError on duplicate or unsafe case ids and on missing files.
  void validate() const;
};

/// JSON ({"cases": [...]} or a bare array) or CSV with the header
/// case_id,image_path,gt_path,sequence_tag. Relative paths resolve against the manifest's
/// directory; an empty gt_path means no ground truth.
CaseManifest load_manifest(const std::filesystem::path& path);
CaseManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json manifest_to_json(const CaseManifest& manifest);

struct RunConfig {
  std::vector<InversionMode> variants;
  PreprocessSpec preprocess;  // mode is replaced per variant
  BackendSpec backend;
  ClassMap classes;  // ground-truth ids; evaluation order is ascending id
  std::size_t jobs = 1;
  std::filesystem::path output_dir;
  SummaryOptions statistics;
  bool keep_intermediates = true;
  bool allow_unknown_labels = false;

  std::vector<std::string> class_list() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Relative paths inside the config resolve against base_dir.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mrinv
