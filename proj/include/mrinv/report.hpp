#pragma once

#include <filesystem>
#include <istream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mrinv/config.hpp"
#include "mrinv/evaluation.hpp"

namespace mrinv {

/// One line of the per-case CSV.
struct EvaluationRow {
  std::string variant;
  DiceResult result;
};

inline constexpr std::string_view kRowsHeader =
    "case_id,class_name,variant,dsc,status,gt_voxels,pred_voxels,overlap_voxels";

void write_rows_csv(std::ostream& out, const std::vector<EvaluationRow>& rows);
/// Throws Error on a wrong header or malformed row.
std::vector<EvaluationRow> read_rows_csv(std::istream& in);

/// Summary of one (sequence tag, variant) pair.
struct ReportCell {
  SequenceTag sequence_tag = SequenceTag::other;
  std::string variant;
  std::optional<VariantSummary> summary;  // empty when nothing could be aggregated
  std::string note;
};

struct UnitFailure {
  std::string case_id;
  std::string variant;
  std::string message;
  std::string log_path;
};

struct RunReport {
  std::vector<std::string> variants;
  std::vector<std::string> classes;
  std::vector<SequenceTag> sequence_tags;
  SummaryOptions statistics;
  std::vector<ReportCell> cells;  // tag-major, variants in config order
  std::vector<UnitFailure> failures;

  const ReportCell* find(SequenceTag tag, std::string_view variant) const;
};

/// Builds the summaries from evaluation rows. case_tags maps case ids to sequence tags.
RunReport summarize_rows(const std::vector<EvaluationRow>& rows,
                         const std::vector<std::pair<std::string, SequenceTag>>& case_tags,
                         const std::vector<std::string>& variants, const std::vector<std::string>& classes,
                         const SummaryOptions& statistics);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { csv, json, markdown };
ReportFormat parse_report_format(std::string_view text);

/// Column heading used in the markdown table for a variant name.
std::string variant_title(std::string_view variant);

/// markdown: one row per sequence tag, one column per variant, cells "mean (lo, hi)" at two
/// decimals, then per-class means per tag. csv and json keep full precision.
/// Throws Error on an empty report.
std::string render_report(const RunReport& report, ReportFormat format);

}  // namespace mrinv
