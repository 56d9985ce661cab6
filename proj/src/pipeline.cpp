#include "mrinv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "mrinv/backend.hpp"
#include "mrinv/class_map_io.hpp"
#include "mrinv/error.hpp"
#include "mrinv/nifti.hpp"
#include "mrinv/phantom.hpp"
#include "mrinv/preprocess.hpp"

namespace mrinv {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Unit {
  const ManifestEntry* entry;
  std::size_t variant_index;
  InversionMode mode;
};

struct UnitOutcome {
  std::vector<EvaluationRow> rows;
  std::optional<UnitFailure> failure;
  bool resumed = false;
};

std::vector<EvaluationRow> placeholder_rows(const std::string& case_id, const std::string& variant,
                                            const std::vector<std::string>& classes, DiceStatus status) {
  std::vector<EvaluationRow> rows;
  for (const auto& name : classes) {
    EvaluationRow row;
    row.variant = variant;
    row.result.case_id = case_id;
    row.result.class_name = name;
    row.result.status = status;
    rows.push_back(std::move(row));
  }
  return rows;
}

UnitOutcome run_unit(const Unit& unit, const RunConfig& config, const fs::path& out_dir, bool resume) {
  const auto& entry = *unit.entry;
  const std::string variant = to_string(unit.mode);
  const fs::path rel_dir = fs::path(entry.case_id) / variant;
  const fs::path unit_dir = out_dir / rel_dir;
  const fs::path rows_path = unit_dir / run_files::kUnitRows;
  const fs::path rel_log = rel_dir / (entry.case_id + ".backend.log");
  const fs::path log_path = out_dir / rel_log;
  const auto classes = config.class_list();

  UnitOutcome outcome;
  if (resume && fs::is_regular_file(rows_path)) {
    std::ifstream in(rows_path);
    try {
      outcome.rows = read_rows_csv(in);
      outcome.resumed = true;
      return outcome;
    } catch (const Error&) {
      // unreadable leftovers are recomputed
      outcome.rows.clear();
    }
  }

  fs::create_directories(unit_dir);
  fs::remove(rows_path);
  std::ofstream(log_path, std::ios::trunc).close();
  const fs::path pre_path = unit_dir / "preprocessed.nii.gz";
  const fs::path work_dir = unit_dir / "backend_out";

  try {
    const Volume3D image = read_volume(entry.image_path);
    PreprocessSpec spec = config.preprocess;
    spec.mode = unit.mode;
    write_volume(preprocess_case(image, spec), pre_path);

    BackendOutput seg = run_backend(config.backend, pre_path, work_dir, log_path);
    write_labels(seg.labels, unit_dir / "segmentation.nii.gz");
    save_class_map(seg.labels.class_map(), unit_dir / "class_map.json");

    if (entry.gt_path) {
      const LabelVolume gt = read_labels(*entry.gt_path, config.classes, config.allow_unknown_labels);
      if (!(gt.dims() == seg.labels.dims())) {
        throw Error("ground truth dims differ from the image (no resampling is performed)");
      }
      for (auto& r : evaluate_classes(seg.labels, gt, classes, entry.case_id)) {
        outcome.rows.push_back({variant, std::move(r)});
      }
    } else {
      outcome.rows = placeholder_rows(entry.case_id, variant, classes, DiceStatus::no_gt);
    }

    std::ostringstream csv;
    write_rows_csv(csv, outcome.rows);
    write_atomically(rows_path, csv.str());
  } catch (const std::exception& e) {
    std::ofstream(log_path, std::ios::app) << "error: " << e.what() << '\n';
    outcome.rows = placeholder_rows(entry.case_id, variant, classes, DiceStatus::failed);
    outcome.failure = UnitFailure{entry.case_id, variant, e.what(), rel_log.string()};
  }

  if (!config.keep_intermediates) {
    std::error_code ec;
    fs::remove(pre_path, ec);
    fs::remove_all(work_dir, ec);
  }
  return outcome;
}

}  // namespace

RunReport run(const RunConfig& config, const CaseManifest& manifest, const RunOptions& options) {
  const auto started = std::chrono::system_clock::now();
  config.validate();
  manifest.validate();
  const fs::path out_dir = !options.output_dir.empty() ? options.output_dir : config.output_dir;
  if (out_dir.empty()) throw ConfigError("no output directory given");
  const std::size_t jobs = options.jobs.value_or(config.jobs);
  if (jobs < 1) throw ConfigError("jobs must be at least 1");

  fs::create_directories(out_dir);
  const std::string config_text = run_config_to_json(config).dump(2) + "\n";
  const fs::path config_path = out_dir / run_files::kConfig;
  if (options.resume && fs::is_regular_file(config_path) && read_text(config_path) != config_text) {
    throw ConfigError("cannot resume: " + config_path.string() + " was written by a different configuration");
  }
  write_atomically(config_path, config_text);
  write_atomically(out_dir / run_files::kManifest, manifest_to_json(manifest).dump(2) + "\n");

  std::vector<Unit> units;
  for (const auto& e : manifest.entries) {
    for (std::size_t v = 0; v < config.variants.size(); ++v) units.push_back({&e, v, config.variants[v]});
  }

  std::vector<UnitOutcome> outcomes(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      outcomes[i] = run_unit(units[i], config, out_dir, options.resume);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(jobs, units.size()); ++t) pool.emplace_back(worker);
  }

  // Deterministic order: case id, then variant and class in config order.
  std::map<std::string, std::size_t> variant_rank, class_rank;
  for (std::size_t v = 0; v < config.variants.size(); ++v) variant_rank[to_string(config.variants[v])] = v;
  const auto classes = config.class_list();
  for (std::size_t c = 0; c < classes.size(); ++c) class_rank[classes[c]] = c;
  auto rank = [](const std::map<std::string, std::size_t>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? m.size() : it->second;
  };

  std::vector<EvaluationRow> rows;
  std::vector<UnitFailure> failures;
  std::size_t resumed = 0;
  for (auto& o : outcomes) {
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    if (o.failure) failures.push_back(*o.failure);
    resumed += o.resumed;
  }
  std::sort(rows.begin(), rows.end(), [&](const EvaluationRow& a, const EvaluationRow& b) {
    return std::make_tuple(a.result.case_id, rank(variant_rank, a.variant), rank(class_rank, a.result.class_name)) <
           std::make_tuple(b.result.case_id, rank(variant_rank, b.variant), rank(class_rank, b.result.class_name));
  });
  std::sort(failures.begin(), failures.end(), [&](const UnitFailure& a, const UnitFailure& b) {
    return std::make_pair(a.case_id, rank(variant_rank, a.variant)) <
           std::make_pair(b.case_id, rank(variant_rank, b.variant));
  });

  std::vector<std::pair<std::string, SequenceTag>> case_tags;
  for (const auto& e : manifest.entries) case_tags.emplace_back(e.case_id, e.sequence_tag);
  std::vector<std::string> variant_names;
  for (auto v : config.variants) variant_names.push_back(to_string(v));

  RunReport report = summarize_rows(rows, case_tags, variant_names, classes, config.statistics);
  report.failures = std::move(failures);

  std::ostringstream csv;
  write_rows_csv(csv, rows);
  write_atomically(out_dir / run_files::kRows, csv.str());
  write_atomically(out_dir / run_files::kSummaryJson, render_report(report, ReportFormat::json));
  write_atomically(out_dir / run_files::kSummaryCsv, render_report(report, ReportFormat::csv));
  write_atomically(out_dir / run_files::kMarkdown, render_report(report, ReportFormat::markdown));

  const json metadata = {{"started_at", utc_timestamp(started)},
                         {"finished_at", utc_timestamp(std::chrono::system_clock::now())},
                         {"units", units.size()},
                         {"units_resumed", resumed},
                         {"units_failed", report.failures.size()},
                         {"jobs", jobs}};
  write_atomically(out_dir / run_files::kMetadata, metadata.dump(2) + "\n");
  return report;
}

RunReport load_run_report(const fs::path& run_dir) {
  const fs::path path = run_dir / run_files::kSummaryJson;
  std::ifstream in(path);
  if (!in) throw ConfigError("no " + std::string(run_files::kSummaryJson) + " in " + run_dir.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed " + path.string() + ": " + e.what());
  }
}

void write_phantom_experiment(const fs::path& dir, std::size_t size, std::uint64_t seed) {
  const PhantomSpec spec = default_phantom_spec(size, seed);
  write_phantom(generate_phantom(spec), spec, dir);
  save_class_map(phantom_class_map(spec), dir / "classes.json");

  BackendSpec mock;
  mock.kind = BackendKind::mock_threshold;
  mock.rules = phantom_ct_band_rules();
  write_atomically(dir / "backend_mock.json", backend_spec_to_json(mock).dump(2) + "\n");

  const json manifest = {
      {"cases",
       {{{"case_id", "phantom_ct"}, {"image_path", "ct.nii.gz"}, {"gt_path", "gt.nii.gz"}, {"sequence_tag", "other"}},
        {{"case_id", "phantom_t1"}, {"image_path", "t1.nii.gz"}, {"gt_path", "gt.nii.gz"}, {"sequence_tag", "T1"}}}}};
  write_atomically(dir / "manifest.json", manifest.dump(2) + "\n");

  const json config = {{"variants", {"none", "invert", "invert-bg"}},
                       {"preprocess", {{"clip_min", 0.0}, {"clip_max", 3000.0}, {"bg_percentile", 1.0}}},
                       {"backend_config", "backend_mock.json"},
                       {"classes_path", "classes.json"},
                       {"seed", kDefaultSeed},
                       {"jobs", 1}};
  write_atomically(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace mrinv
