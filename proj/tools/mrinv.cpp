// mrinv: MRI inversion preprocessing, segmentation backend runner and Dice evaluation.
//
// Exit codes: 0 success, 1 configuration or input error, 2 failures during processing.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mrinv/backend.hpp"
#include "mrinv/class_map_io.hpp"
#include "mrinv/config.hpp"
#include "mrinv/error.hpp"
#include "mrinv/evaluation.hpp"
#include "mrinv/nifti.hpp"
#include "mrinv/phantom.hpp"
#include "mrinv/pipeline.hpp"
#include "mrinv/preprocess.hpp"
#include "mrinv/report.hpp"

namespace fs = std::filesystem;
using namespace mrinv;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitFailures = 2;

LabelVolume load_prediction(const fs::path& pred, const ClassMap& classes, bool allow_unknown) {
  if (!fs::is_directory(pred)) return read_labels(pred, classes, allow_unknown);
  for (const char* name : {"segmentation.nii.gz", "segmentation.nii"}) {
    if (fs::is_regular_file(pred / name)) {
      const fs::path map_path = pred / kOutputClassMapFile;
      const ClassMap map = fs::is_regular_file(map_path) ? load_class_map(map_path) : classes;
      return read_labels(pred / name, map, allow_unknown);
    }
  }
  // Per-class files: geometry comes from the first class file found.
  for (const auto& [id, name] : classes) {
    for (const char* ext : {".nii.gz", ".nii"}) {
      const fs::path p = pred / (name + ext);
      if (fs::is_regular_file(p)) return merge_class_files(pred, classes, read_volume(p).geometry()).labels;
    }
  }
  throw ConfigError("no segmentation found in " + pred.string());
}

int cmd_preprocess(const fs::path& in, const fs::path& out, const PreprocessSpec& spec) {
  write_volume(preprocess_case(read_volume(in), spec), out);
  return 0;
}

int cmd_segment(const fs::path& in, const fs::path& backend_config, const fs::path& out_dir) {
  const BackendSpec spec = load_backend_spec(backend_config);
  fs::create_directories(out_dir);
  const std::string stem = in.filename().string().substr(0, in.filename().string().find('.'));
  const fs::path log = out_dir / (stem + ".backend.log");
  BackendOutput seg = run_backend(spec, in, out_dir / "backend_out", log);
  write_labels(seg.labels, out_dir / "segmentation.nii.gz");
  save_class_map(seg.labels.class_map(), out_dir / kOutputClassMapFile);
  for (const auto& w : seg.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& pred_path, const fs::path& gt_path, const fs::path& classes_path,
                 const std::string& format, const std::string& case_id, const std::string& variant,
                 bool allow_unknown) {
  const ClassMap classes = load_class_map(classes_path);
  const LabelVolume gt = read_labels(gt_path, classes, allow_unknown);
  const LabelVolume pred = load_prediction(pred_path, classes, allow_unknown);
  if (!(gt.dims() == pred.dims())) throw ConfigError("prediction and ground truth dims differ");
  const auto names = class_names(classes);
  std::vector<EvaluationRow> rows;
  for (auto& r : evaluate_classes(pred, gt, names, case_id)) rows.push_back({variant, std::move(r)});

  if (format == "csv") {
    write_rows_csv(std::cout, rows);
  } else {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
      const auto& r = row.result;
      out.push_back({{"case_id", r.case_id},
                     {"class_name", r.class_name},
                     {"variant", row.variant},
                     {"dsc", r.dsc ? nlohmann::json(*r.dsc) : nlohmann::json(nullptr)},
                     {"status", to_string(r.status)},
                     {"gt_voxels", r.gt_voxels},
                     {"pred_voxels", r.pred_voxels},
                     {"overlap_voxels", r.overlap_voxels}});
    }
    std::cout << out.dump(2) << '\n';
  }
  return 0;
}

struct RunOverrides {
  std::optional<std::string> aggregate;
  std::optional<std::string> ci_method;
  std::optional<std::string> empty_policy;
  bool no_keep_intermediates = false;
};

int cmd_run(const fs::path& config_path, const fs::path& manifest_path, const fs::path& out, std::optional<std::size_t> jobs,
            bool resume, const RunOverrides& over) {
  RunConfig config = load_run_config(config_path);
  if (over.aggregate) config.statistics.aggregation = parse_aggregation(*over.aggregate);
  if (over.ci_method) config.statistics.method = parse_ci_method(*over.ci_method);
  if (over.empty_policy) config.statistics.empty_policy = parse_empty_policy(*over.empty_policy);
  if (over.no_keep_intermediates) config.keep_intermediates = false;
  const CaseManifest manifest = load_manifest(manifest_path);
  RunOptions options;
  options.output_dir = out;
  options.jobs = jobs;
  options.resume = resume;
  const RunReport report = run(config, manifest, options);
  std::cout << render_report(report, ReportFormat::markdown);
  for (const auto& cell : report.cells) {
    if (!cell.summary) continue;
    for (const auto& w : cell.summary->warnings) {
      std::cerr << "warning [" << to_string(cell.sequence_tag) << "/" << cell.variant << "]: " << w << '\n';
    }
  }
  if (!report.failures.empty()) {
    std::cerr << report.failures.size() << " unit(s) failed; see the logs listed in report.md\n";
    return kExitFailures;
  }
  return 0;
}

int cmd_phantom(const fs::path& out, std::uint64_t seed, std::size_t size) {
  write_phantom_experiment(out, size, seed);
  std::cout << "phantom written to " << out.string() << '\n';
  return 0;
}

int cmd_report(const fs::path& run_dir, const std::string& format) {
  std::cout << render_report(load_run_report(run_dir), parse_report_format(format));
  return 0;
}

int cmd_validate_backend(const fs::path& backend_config) {
  const auto diag = validate_backend(load_backend_spec(backend_config));
  for (const auto& d : diag) std::cout << d << '\n';
  return diag.empty() ? 0 : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRI inversion preprocessing and CT-model segmentation evaluation"};
  app.require_subcommand(1);

  fs::path pre_in, pre_out;
  std::string pre_mode = "invert-bg";
  PreprocessSpec pre_spec;
  auto* pre = app.add_subcommand("preprocess", "Clip and optionally invert one volume");
  pre->add_option("--in", pre_in, "Input NIfTI")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output NIfTI (float32)")->required();
  pre->add_option("--mode", pre_mode, "none | invert | invert-bg")->capture_default_str();
  pre->add_option("--clip-min", pre_spec.clip_lo, "Lower clip bound")->capture_default_str();
  pre->add_option("--clip-max", pre_spec.clip_hi, "Upper clip bound")->capture_default_str();
  pre->add_option("--bg-percentile", pre_spec.bg_percentile, "Background gate percentile")->capture_default_str();

  fs::path seg_in, seg_backend, seg_out;
  auto* seg = app.add_subcommand("segment", "Run a segmentation backend on one volume");
  seg->add_option("--in", seg_in, "Input NIfTI")->required()->check(CLI::ExistingFile);
  seg->add_option("--backend-config", seg_backend, "Backend JSON")->required()->check(CLI::ExistingFile);
  seg->add_option("--out-dir", seg_out, "Output directory")->required();

  fs::path ev_pred, ev_gt, ev_classes;
  std::string ev_format = "csv", ev_case = "case", ev_variant = "-";
  bool ev_unknown = false;
  auto* ev = app.add_subcommand("evaluate", "Per-class Dice of a prediction against ground truth");
  ev->add_option("--pred", ev_pred, "Multilabel NIfTI or directory of outputs")->required()->check(CLI::ExistingPath);
  ev->add_option("--gt", ev_gt, "Ground-truth label NIfTI")->required()->check(CLI::ExistingFile);
  ev->add_option("--classes", ev_classes, "Class map JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--format", ev_format, "csv | json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  ev->add_option("--case-id", ev_case, "case_id column value")->capture_default_str();
  ev->add_option("--variant", ev_variant, "variant column value")->capture_default_str();
  ev->add_flag("--allow-unknown-labels", ev_unknown, "Accept labels missing from the class map");

  fs::path run_config, run_manifest, run_out;
  std::optional<std::size_t> run_jobs;
  bool run_resume = false;
  auto* runc = app.add_subcommand("run", "Run the full experiment over a manifest");
  runc->add_option("--config", run_config, "Run config JSON")->required()->check(CLI::ExistingFile);
  runc->add_option("--manifest", run_manifest, "Manifest JSON or CSV")->required()->check(CLI::ExistingFile);
  runc->add_option("--out", run_out, "Output directory")->required();
  runc->add_option("--jobs", run_jobs, "Parallel units")->check(CLI::PositiveNumber);
  runc->add_flag("--resume", run_resume, "Skip units whose rows already exist");
  RunOverrides run_over;
  runc->add_option("--aggregate", run_over.aggregate, "by-class | pooled")->check(CLI::IsMember({"by-class", "pooled"}));
  runc->add_option("--ci-method", run_over.ci_method, "bootstrap-percentile | student-t")
      ->check(CLI::IsMember({"bootstrap-percentile", "student-t"}));
  runc->add_option("--empty-policy", run_over.empty_policy, "exclude | include-as-one")
      ->check(CLI::IsMember({"exclude", "include-as-one"}));
  runc->add_flag("--no-keep-intermediates", run_over.no_keep_intermediates,
                 "Delete preprocessed volumes and raw backend outputs");

  fs::path ph_out;
  std::uint64_t ph_seed = kDefaultSeed;
  std::size_t ph_size = 64;
  auto* ph = app.add_subcommand("phantom", "Write a synthetic CT/T1 phantom experiment");
  ph->add_option("--out", ph_out, "Output directory")->required();
  ph->add_option("--seed", ph_seed, "Noise seed")->capture_default_str();
  ph->add_option("--size", ph_size, "Grid edge in voxels")->check(CLI::Range(8, 512))->capture_default_str();

  fs::path rep_run;
  std::string rep_format = "markdown";
  auto* rep = app.add_subcommand("report", "Render the summary of a finished run");
  rep->add_option("--run", rep_run, "Run output directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--format", rep_format, "markdown | csv | json")
      ->check(CLI::IsMember({"markdown", "csv", "json"}))
      ->capture_default_str();

  fs::path vb_config;
  auto* vb = app.add_subcommand("validate-backend", "Dry-run checks on a backend config");
  vb->add_option("--backend-config", vb_config, "Backend JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*pre) {
      pre_spec.mode = parse_inversion_mode(pre_mode);
      pre_spec.validate();
      return cmd_preprocess(pre_in, pre_out, pre_spec);
    }
    if (*seg) return cmd_segment(seg_in, seg_backend, seg_out);
    if (*ev) return cmd_evaluate(ev_pred, ev_gt, ev_classes, ev_format, ev_case, ev_variant, ev_unknown);
    if (*runc) return cmd_run(run_config, run_manifest, run_out, run_jobs, run_resume, run_over);
    if (*ph) return cmd_phantom(ph_out, ph_seed, ph_size);
    if (*rep) return cmd_report(rep_run, rep_format);
    if (*vb) return cmd_validate_backend(vb_config);
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
