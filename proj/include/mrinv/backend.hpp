#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrinv/volume.hpp"

namespace mrinv {

enum class BackendKind { external_command, mock_threshold };
enum class OutputFormat { per_class_files, multilabel };

std::string to_string(BackendKind k);
std::string to_string(OutputFormat f);

/// Voxels with lo <= x <= hi get class_name.
struct ThresholdRule {
  std::string class_name;
  double lo = 0.0;
  double hi = 0.0;
};

struct BackendSpec {
  BackendKind kind = BackendKind::mock_threshold;
  std::string command_template;  // must contain {input} and {output_dir} exactly once
  double timeout_seconds = 3600.0;
  OutputFormat output_format = OutputFormat::per_class_files;
  std::filesystem::path class_map_path;  // optional
  std::vector<ThresholdRule> rules;      // mock only
};

inline constexpr std::string_view kMultilabelFile = "segmentation.nii.gz";
inline constexpr std::string_view kOutputClassMapFile = "class_map.json";

/// Relative class_map paths are resolved against base_dir. Throws ConfigError.
BackendSpec backend_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json backend_spec_to_json(const BackendSpec& spec);
BackendSpec load_backend_spec(const std::filesystem::path& path);

/// Dry-run checks; an empty list means the spec is usable.
std::vector<std::string> validate_backend(const BackendSpec& spec);

/// Replaces every {input} and {output_dir} literally.
std::string substitute_command(std::string_view tmpl, std::string_view input, std::string_view output_dir);

/// Ids for a mock backend: the spec's class map if given, else 1..n in rule order.
ClassMap mock_class_map(const BackendSpec& spec);

/// First matching rule wins; unmatched voxels are background.
LabelVolume apply_threshold_rules(const Volume3D& v, std::span<const ThresholdRule> rules,
                                  const ClassMap& class_map);

struct BackendOutput {
  LabelVolume labels;
  std::vector<std::string> warnings;
};

/// Loads `<class_name>.nii.gz` (or `.nii`) files from dir and merges them into one label
/// volume. Where masks overlap the lowest class id wins. With an empty class_map the files
/// present are used, with ids assigned in file-name order. Throws BackendError on a dims
/// mismatch against expected or when no class file exists.
BackendOutput merge_class_files(const std::filesystem::path& dir, const ClassMap& class_map,
                                const Geometry& expected);

/// Runs the backend on the volume at input_path.
///
/// The external backend runs in a fresh work_dir; its command line and output go to
/// log_path. Throws BackendError on a non-zero exit, timeout or missing/unreadable
/// outputs, and ConfigError when validate_backend reports problems. The input file is
/// never written.
BackendOutput run_backend(const BackendSpec& spec, const std::filesystem::path& input_path,
                          const std::filesystem::path& work_dir, const std::filesystem::path& log_path);

}  // namespace mrinv
