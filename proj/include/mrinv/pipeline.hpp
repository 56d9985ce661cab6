#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrinv/config.hpp"
#include "mrinv/report.hpp"

namespace mrinv {

struct RunOptions {
  std::filesystem::path output_dir;  // overrides config.output_dir when set
  std::optional<std::size_t> jobs;   // overrides config.jobs when set
  bool resume = false;
};

/// Output files written at the top of the run directory.
namespace run_files {
inline constexpr const char* kRows = "dice.csv";
inline constexpr const char* kSummaryJson = "summary.json";
inline constexpr const char* kSummaryCsv = "summary.csv";
inline constexpr const char* kMarkdown = "report.md";
inline constexpr const char* kConfig = "run_config.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kMetadata = "run_metadata.json";  // timestamps live only here
inline constexpr const char* kUnitRows = "rows.csv";           // per <case_id>/<variant>/
}  // namespace run_files

/// Runs every case x variant unit: preprocess, segment, evaluate.
///
/// Units run on up to `jobs` threads and write into <out>/<case_id>/<variant>/. A failing
/// unit is recorded as a failure and never aborts the run. With resume, units whose
/// rows.csv already exists are not recomputed. Config and manifest problems throw
/// ConfigError before any unit starts.
RunReport run(const RunConfig& config, const CaseManifest& manifest, const RunOptions& options = {});

/// Loads <run_dir>/summary.json.
RunReport load_run_report(const std::filesystem::path& run_dir);

/// Writes a ready-to-run phantom experiment: the phantom volumes, classes.json,
/// backend_mock.json (CT-band mock backend), manifest.json with a CT-like case ("other")
/// and a T1-like case, and config.json running all three variants.
void write_phantom_experiment(const std::filesystem::path& dir, std::size_t size, std::uint64_t seed);

}  // namespace mrinv
