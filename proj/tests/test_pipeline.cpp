#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mrinv/class_map_io.hpp"
#include "mrinv/error.hpp"
#include "mrinv/nifti.hpp"
#include "mrinv/pipeline.hpp"
#include "support.hpp"

using namespace mrinv;
using testing_support::read_file;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

EvaluationRow row(const std::string& case_id, const std::string& cls, const std::string& variant, double dsc) {
  EvaluationRow r;
  r.variant = variant;
  r.result.case_id = case_id;
  r.result.class_name = cls;
  r.result.dsc = dsc;
  r.result.gt_voxels = 10;
  r.result.pred_voxels = 10;
  r.result.overlap_voxels = 6;
  return r;
}

// Small phantom experiment with loaded config and manifest.
struct Experiment {
  TempDir dir;
  RunConfig config;
  CaseManifest manifest;

  explicit Experiment(std::size_t size = 20) {
    write_phantom_experiment(dir.path(), size, 42);
    config = load_run_config(dir / "config.json");
    manifest = load_manifest(dir / "manifest.json");
  }
};

int run_cli(const std::string& args, const fs::path& out_file) {
  const std::string cmd = std::string(MRINV_CLI_PATH) + " " + args + " > '" + out_file.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RowsCsv, RoundTripKeepsFullPrecision) {
  std::vector<EvaluationRow> rows = {row("a", "liver", "none", 0.1 + 0.2), row("b", "spleen", "invert", 2.0 / 3.0)};
  DiceResult no_gt;
  no_gt.case_id = "c";
  no_gt.class_name = "liver";
  no_gt.status = DiceStatus::no_gt;
  rows.push_back({"invert-bg", no_gt});
  std::stringstream ss;
  write_rows_csv(ss, rows);
  EXPECT_EQ(ss.str().substr(0, kRowsHeader.size()), kRowsHeader);
  const auto back = read_rows_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(*back[0].result.dsc, 0.1 + 0.2);
  EXPECT_EQ(*back[1].result.dsc, 2.0 / 3.0);
  EXPECT_FALSE(back[2].result.dsc.has_value());
  EXPECT_EQ(back[2].result.status, DiceStatus::no_gt);

  std::stringstream bad("case_id,dsc\n");
  EXPECT_THROW(read_rows_csv(bad), Error);
}

TEST(Report, SingleCaseMarkdownCell) {
  const std::vector<std::string> variants{"none"}, classes{"liver"};
  const auto r = summarize_rows({row("a", "liver", "none", 0.6)}, {{"a", SequenceTag::T1}}, variants, classes, {});
  const auto md = render_report(r, ReportFormat::markdown);
  EXPECT_NE(md.find("| T1 | 0.60 (0.60, 0.60) |"), std::string::npos) << md;
  EXPECT_NE(md.find("Unprocessed"), std::string::npos);
}

TEST(Report, MissingCellShowsNa) {
  const std::vector<std::string> variants{"none", "invert-bg"}, classes{"liver"};
  const auto r = summarize_rows({row("a", "liver", "none", 0.6)}, {{"a", SequenceTag::T1}}, variants, classes, {});
  const auto md = render_report(r, ReportFormat::markdown);
  EXPECT_NE(md.find("| T1 | 0.60 (0.60, 0.60) | n/a |"), std::string::npos) << md;
  EXPECT_THROW(render_report(RunReport{}, ReportFormat::markdown), Error);
}

TEST(Report, JsonRoundTripReproducesCsv) {
  const std::vector<std::string> variants{"none", "invert-bg"}, classes{"liver", "spleen"};
  std::vector<EvaluationRow> rows;
  for (int c = 0; c < 6; ++c) {
    const std::string id = "case" + std::to_string(c);
    rows.push_back(row(id, "liver", "none", 0.1 * c));
    rows.push_back(row(id, "spleen", "none", 0.05 * c));
    rows.push_back(row(id, "liver", "invert-bg", 0.9 - 0.01 * c));
    rows.push_back(row(id, "spleen", "invert-bg", 0.8 + 0.013 * c));
  }
  std::vector<std::pair<std::string, SequenceTag>> tags;
  for (int c = 0; c < 6; ++c) tags.emplace_back("case" + std::to_string(c), c < 3 ? SequenceTag::T1 : SequenceTag::T2);
  const auto r = summarize_rows(rows, tags, variants, classes, {});
  const auto back = report_from_json(nlohmann::json::parse(render_report(r, ReportFormat::json)));
  EXPECT_EQ(render_report(back, ReportFormat::csv), render_report(r, ReportFormat::csv));
  EXPECT_EQ(render_report(back, ReportFormat::markdown), render_report(r, ReportFormat::markdown));
  EXPECT_EQ(back.find(SequenceTag::T2, "invert-bg")->summary->overall, r.find(SequenceTag::T2, "invert-bg")->summary->overall);
}

TEST(Manifest, CsvWithEmptyGt) {
  TempDir tmp;
  std::ofstream(tmp / "a.nii.gz") << "x";
  std::ofstream(tmp / "m.csv") << "case_id,image_path,gt_path,sequence_tag\ncase1,a.nii.gz,,T1\n";
  const auto m = load_manifest(tmp / "m.csv");
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].image_path, tmp / "a.nii.gz");
  EXPECT_FALSE(m.entries[0].gt_path.has_value());
  EXPECT_EQ(m.entries[0].sequence_tag, SequenceTag::T1);
  EXPECT_NO_THROW(m.validate());

  std::ofstream(tmp / "dup.csv") << "case_id,image_path,gt_path,sequence_tag\nx,a.nii.gz,,T1\nx,a.nii.gz,,T2\n";
  EXPECT_THROW(load_manifest(tmp / "dup.csv").validate(), ConfigError);
  std::ofstream(tmp / "bad.csv") << "case_id,image_path,gt_path,sequence_tag\n../x,a.nii.gz,,T1\n";
  EXPECT_THROW(load_manifest(tmp / "bad.csv").validate(), ConfigError);
  std::ofstream(tmp / "tag.csv") << "case_id,image_path,gt_path,sequence_tag\nx,a.nii.gz,,PD\n";
  EXPECT_THROW(load_manifest(tmp / "tag.csv"), ConfigError);
}

TEST(Pipeline, EmptyVariantsRejectedBeforeWork) {
  Experiment e;
  e.config.variants.clear();
  EXPECT_THROW(run(e.config, e.manifest, {e.dir / "out"}), ConfigError);
  EXPECT_FALSE(fs::exists(e.dir / "out"));
}

TEST(Pipeline, PhantomRunWritesOutputsAndOrdersVariants) {
  Experiment e;
  const auto t1_before = read_file(e.dir / "t1.nii.gz");
  const auto report = run(e.config, e.manifest, {e.dir / "out"});
  EXPECT_TRUE(report.failures.empty());
  for (const char* f : {run_files::kRows, run_files::kSummaryJson, run_files::kSummaryCsv, run_files::kMarkdown,
                        run_files::kConfig, run_files::kManifest, run_files::kMetadata}) {
    EXPECT_TRUE(fs::is_regular_file(e.dir / "out" / f)) << f;
  }
  EXPECT_TRUE(fs::is_regular_file(e.dir / "out" / "phantom_t1" / "invert-bg" / "segmentation.nii.gz"));
  EXPECT_TRUE(fs::is_regular_file(e.dir / "out" / "phantom_t1" / "invert-bg" / "phantom_t1.backend.log"));

  const auto* none = report.find(SequenceTag::T1, "none");
  const auto* inv = report.find(SequenceTag::T1, "invert");
  const auto* bg = report.find(SequenceTag::T1, "invert-bg");
  const auto* ct = report.find(SequenceTag::other, "none");
  ASSERT_TRUE(none && inv && bg && ct);
  EXPECT_LE(none->summary->overall.mean, 0.2);
  EXPECT_GE(bg->summary->overall.mean, 0.8);
  EXPECT_GE(ct->summary->overall.mean, 0.9);
  EXPECT_GT(bg->summary->overall.mean, inv->summary->overall.mean);
  EXPECT_GT(inv->summary->overall.mean, none->summary->overall.mean);

  // The input images are never modified.
  EXPECT_EQ(read_file(e.dir / "t1.nii.gz"), t1_before);
  EXPECT_EQ(load_run_report(e.dir / "out").cells.size(), report.cells.size());
}

TEST(Pipeline, MissingGroundTruthGivesNoGtRows) {
  Experiment e;
  e.manifest.entries[1].gt_path.reset();
  e.config.variants = {InversionMode::invert_bg};
  const auto report = run(e.config, e.manifest, {e.dir / "out"});
  EXPECT_TRUE(report.failures.empty());
  std::ifstream in(e.dir / "out" / run_files::kRows);
  std::size_t no_gt = 0;
  for (const auto& r : read_rows_csv(in)) no_gt += r.result.status == DiceStatus::no_gt;
  EXPECT_EQ(no_gt, e.config.classes.size());
  const auto* cell = report.find(SequenceTag::T1, "invert-bg");
  ASSERT_NE(cell, nullptr);
  EXPECT_FALSE(cell->summary.has_value());
  EXPECT_NE(render_report(report, ReportFormat::markdown).find("n/a"), std::string::npos);
}

TEST(Pipeline, BackendFailureIsRecordedNotFatal) {
  Experiment e;
  // Fails only for the inverted variants; the plain one gets an empty-but-valid output.
  const auto masks = e.dir / "masks";
  fs::create_directories(masks);
  const auto gt = read_volume(e.dir / "gt.nii.gz");
  write_volume(Volume3D(gt.geometry(), std::vector<double>(gt.size(), 0.0)), masks / "liver.nii.gz");
  e.config.backend = BackendSpec{};
  e.config.backend.kind = BackendKind::external_command;
  e.config.backend.timeout_seconds = 30;
  e.config.backend.command_template =
      "case {input} in */none/*) cp " + masks.string() + "/liver.nii.gz {output_dir}/ ;; *) exit 4 ;; esac";
  e.config.jobs = 3;
  const auto report = run(e.config, e.manifest, {e.dir / "out"});
  ASSERT_EQ(report.failures.size(), 4u);
  EXPECT_EQ(report.failures[0].case_id, "phantom_ct");
  EXPECT_EQ(report.failures[0].variant, "invert");
  EXPECT_NE(report.failures[0].message.find("code 4"), std::string::npos);
  EXPECT_NE(read_file(e.dir / "out" / report.failures[0].log_path).find("exit"), std::string::npos);
  ASSERT_TRUE(report.find(SequenceTag::T1, "none")->summary.has_value());
  EXPECT_FALSE(report.find(SequenceTag::T1, "invert")->summary.has_value());
  EXPECT_NE(render_report(report, ReportFormat::markdown).find("## Failed units"), std::string::npos);
  EXPECT_FALSE(fs::exists(e.dir / "out" / "phantom_ct" / "invert" / run_files::kUnitRows));
}

TEST(Pipeline, DeterministicAcrossJobsAndResume) {
  Experiment e;
  run(e.config, e.manifest, {e.dir / "a", 1});
  run(e.config, e.manifest, {e.dir / "b", 4});
  for (const char* f : {run_files::kRows, run_files::kSummaryJson, run_files::kSummaryCsv, run_files::kMarkdown}) {
    EXPECT_EQ(read_file(e.dir / "a" / f), read_file(e.dir / "b" / f)) << f;
  }

  const auto before = read_file(e.dir / "a" / run_files::kSummaryJson);
  fs::remove(e.dir / "a" / "phantom_t1" / "invert" / run_files::kUnitRows);
  fs::remove(e.dir / "a" / "phantom_ct" / "none" / run_files::kUnitRows);
  fs::remove(e.dir / "a" / run_files::kSummaryJson);
  RunOptions resume{e.dir / "a", 2, true};
  run(e.config, e.manifest, resume);
  EXPECT_EQ(read_file(e.dir / "a" / run_files::kSummaryJson), before);
  EXPECT_EQ(read_file(e.dir / "a" / run_files::kRows), read_file(e.dir / "b" / run_files::kRows));
  const auto meta = nlohmann::json::parse(read_file(e.dir / "a" / run_files::kMetadata));
  EXPECT_EQ(meta.at("units_resumed"), 4);
}

TEST(Pipeline, ResumeRefusesChangedConfig) {
  Experiment e;
  e.config.variants = {InversionMode::none};
  run(e.config, e.manifest, {e.dir / "out"});
  e.config.preprocess.bg_percentile = 5.0;
  EXPECT_THROW(run(e.config, e.manifest, {e.dir / "out", std::nullopt, true}), ConfigError);
}

TEST(Cli, SingleShotCommands) {
  TempDir tmp;
  const auto log = tmp / "log.txt";
  ASSERT_EQ(run_cli("phantom --out " + (tmp / "ph").string() + " --size 16", log), 0) << read_file(log);
  EXPECT_EQ(run_cli("preprocess --in " + (tmp / "ph" / "t1.nii.gz").string() + " --out " +
                        (tmp / "pre.nii.gz").string() + " --mode invert-bg",
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(run_cli("segment --in " + (tmp / "pre.nii.gz").string() + " --backend-config " +
                        (tmp / "ph" / "backend_mock.json").string() + " --out-dir " + (tmp / "seg").string(),
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(run_cli("evaluate --pred " + (tmp / "seg").string() + " --gt " + (tmp / "ph" / "gt.nii.gz").string() +
                        " --classes " + (tmp / "ph" / "classes.json").string() + " --format csv",
                    log),
            0)
      << read_file(log);
  EXPECT_EQ(read_file(log).substr(0, kRowsHeader.size()), kRowsHeader);
  EXPECT_EQ(run_cli("validate-backend --backend-config " + (tmp / "ph" / "backend_mock.json").string(), log), 0);

  EXPECT_EQ(run_cli("preprocess --in " + (tmp / "missing.nii").string() + " --out " + (tmp / "x.nii").string(), log),
            1);
  EXPECT_EQ(run_cli("preprocess --bogus", log), 1);
  std::ofstream(tmp / "bad_backend.json") << R"({"kind": "external-command", "command_template": "exit 5 {input} {output_dir}"})";
  EXPECT_EQ(run_cli("segment --in " + (tmp / "pre.nii.gz").string() + " --backend-config " +
                        (tmp / "bad_backend.json").string() + " --out-dir " + (tmp / "seg2").string(),
                    log),
            2);
  std::ofstream(tmp / "invalid_backend.json") << R"({"kind": "external-command", "command_template": "seg {input}"})";
  EXPECT_EQ(run_cli("validate-backend --backend-config " + (tmp / "invalid_backend.json").string(), log), 1);
}

TEST(Cli, RunAndReport) {
  TempDir tmp;
  const auto log = tmp / "log.txt";
  ASSERT_EQ(run_cli("phantom --out " + tmp.path().string() + " --size 16", log), 0);
  const std::string base = "run --config " + (tmp / "config.json").string() + " --manifest " +
                           (tmp / "manifest.json").string() + " --out " + (tmp / "out").string();
  ASSERT_EQ(run_cli(base, log), 0) << read_file(log);
  EXPECT_NE(read_file(log).find("| T1 |"), std::string::npos);
  ASSERT_EQ(run_cli("report --run " + (tmp / "out").string() + " --format csv", log), 0);
  EXPECT_EQ(read_file(log), read_file(tmp / "out" / run_files::kSummaryCsv));
  EXPECT_EQ(run_cli("report --run " + (tmp / "nowhere").string(), log), 1);

  std::ofstream(tmp / "empty.json") << R"({"variants": [], "backend_config": "backend_mock.json", "classes_path": "classes.json"})";
  EXPECT_EQ(run_cli("run --config " + (tmp / "empty.json").string() + " --manifest " +
                        (tmp / "manifest.json").string() + " --out " + (tmp / "out2").string(),
                    log),
            1);
}

TEST(ShippedData, DefaultClassListHasTwentyClasses) {
  const auto map = load_class_map(testing_support::data_dir().parent_path().parent_path() / "data" / "classes_abdomen20.json");
  EXPECT_EQ(map.size(), 20u);
  EXPECT_EQ(class_names(map).front(), "spleen");
}
