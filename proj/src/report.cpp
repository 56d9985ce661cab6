#include "mrinv/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "mrinv/csv.hpp"
#include "mrinv/error.hpp"

namespace mrinv {
namespace {

using nlohmann::json;

std::uint64_t parse_count(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw Error("bad count '" + s + "'");
  return v;
}

json stats_to_json(const SummaryStats& s) {
  return {{"mean", s.mean},
          {"ci_lo", s.ci_lo},
          {"ci_hi", s.ci_hi},
          {"n", s.n},
          {"method", to_string(s.method)},
          {"seed", s.seed}};
}

SummaryStats stats_from_json(const json& j) {
  SummaryStats s;
  s.mean = j.at("mean").get<double>();
  s.ci_lo = j.at("ci_lo").get<double>();
  s.ci_hi = j.at("ci_hi").get<double>();
  s.n = j.at("n").get<std::size_t>();
  s.method = parse_ci_method(j.at("method").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::string two_decimals(double v) { return fmt::format("{:.2f}", v); }

std::string cell_text(const ReportCell* cell) {
  if (cell == nullptr || !cell->summary) return "n/a";
  const auto& s = cell->summary->overall;
  return fmt::format("{} ({}, {})", two_decimals(s.mean), two_decimals(s.ci_lo), two_decimals(s.ci_hi));
}

std::string render_markdown(const RunReport& r) {
  std::ostringstream md;
  md << "# Dice summary\n\n";
  md << fmt::format("Mean Dice with 95% confidence interval across {} classes ({} aggregation, {}", r.classes.size(),
                    to_string(r.statistics.aggregation), to_string(r.statistics.method));
  if (r.statistics.method == CiMethod::bootstrap_percentile) {
    md << fmt::format(", {} resamples, seed {}", r.statistics.resamples, r.statistics.seed);
  }
  md << ").\n\n";

  auto header = [&](std::string_view first) {
    md << "| " << first << " |";
    for (const auto& v : r.variants) md << ' ' << variant_title(v) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < r.variants.size(); ++i) md << "---|";
    md << '\n';
  };

  header("Sequence");
  for (auto tag : r.sequence_tags) {
    md << "| " << to_string(tag) << " |";
    for (const auto& v : r.variants) md << ' ' << cell_text(r.find(tag, v)) << " |";
    md << '\n';
  }

  for (auto tag : r.sequence_tags) {
    md << "\n## Per-class mean Dice (" << to_string(tag) << ")\n\n";
    header("Class");
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
      md << "| " << r.classes[c] << " |";
      for (const auto& v : r.variants) {
        const ReportCell* cell = r.find(tag, v);
        std::string text = "n/a";
        if (cell && cell->summary && c < cell->summary->classes.size() && cell->summary->classes[c].mean) {
          text = two_decimals(*cell->summary->classes[c].mean);
        }
        md << ' ' << text << " |";
      }
      md << '\n';
    }
  }

  if (!r.failures.empty()) {
    md << "\n## Failed units\n\n| Case | Variant | Error | Log |\n|---|---|---|---|\n";
    for (const auto& f : r.failures) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      std::replace(msg.begin(), msg.end(), '|', '/');
      md << "| " << f.case_id << " | " << f.variant << " | " << msg << " | " << f.log_path << " |\n";
    }
  }
  return md.str();
}

std::string render_csv(const RunReport& r) {
  std::ostringstream out;
  out << "sequence_tag,variant,scope,class_name,mean,ci_lo,ci_hi,n\n";
  for (const auto& cell : r.cells) {
    if (!cell.summary) continue;
    const auto& s = cell.summary->overall;
    out << fmt::format("{},{},overall,,{},{},{},{}\n", to_string(cell.sequence_tag), cell.variant, s.mean, s.ci_lo,
                       s.ci_hi, s.n);
    for (const auto& c : cell.summary->classes) {
      out << fmt::format("{},{},class,{},{},,,{}\n", to_string(cell.sequence_tag), cell.variant,
                         csv::escape(c.class_name), c.mean ? fmt::format("{}", *c.mean) : std::string(), c.cases);
    }
  }
  return out.str();
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<EvaluationRow>& rows) {
  out << kRowsHeader << '\n';
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << fmt::format("{},{},{},{},{},{},{},{}\n", csv::escape(r.case_id), csv::escape(r.class_name),
                       csv::escape(row.variant), r.dsc ? fmt::format("{}", *r.dsc) : std::string(),
                       to_string(r.status), r.gt_voxels, r.pred_voxels, r.overlap_voxels);
  }
}

std::vector<EvaluationRow> read_rows_csv(std::istream& in) {
  auto records = csv::read_all(in);
  if (records.empty()) throw Error("empty rows file");
  std::ostringstream header;
  for (std::size_t i = 0; i < records[0].size(); ++i) header << (i ? "," : "") << records[0][i];
  if (header.str() != kRowsHeader) throw Error("unexpected rows header '" + header.str() + "'");

  std::vector<EvaluationRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 8) throw Error("rows line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
    EvaluationRow row;
    row.result.case_id = f[0];
    row.result.class_name = f[1];
    row.variant = f[2];
    try {
      if (!f[3].empty()) row.result.dsc = std::stod(f[3]);
      row.result.status = parse_dice_status(f[4]);
      row.result.gt_voxels = parse_count(f[5]);
      row.result.pred_voxels = parse_count(f[6]);
      row.result.overlap_voxels = parse_count(f[7]);
    } catch (const std::logic_error&) {
      throw Error("malformed rows line " + std::to_string(i + 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

const ReportCell* RunReport::find(SequenceTag tag, std::string_view variant) const {
  for (const auto& c : cells) {
    if (c.sequence_tag == tag && c.variant == variant) return &c;
  }
  return nullptr;
}

RunReport summarize_rows(const std::vector<EvaluationRow>& rows,
                         const std::vector<std::pair<std::string, SequenceTag>>& case_tags,
                         const std::vector<std::string>& variants, const std::vector<std::string>& classes,
                         const SummaryOptions& statistics) {
  RunReport report;
  report.variants = variants;
  report.classes = classes;
  report.statistics = statistics;

  std::map<std::string, SequenceTag> tag_of(case_tags.begin(), case_tags.end());
  for (auto tag : {SequenceTag::T1, SequenceTag::T2, SequenceTag::other}) {
    const bool present = std::any_of(case_tags.begin(), case_tags.end(), [&](const auto& ct) { return ct.second == tag; });
    if (present) report.sequence_tags.push_back(tag);
  }

  for (auto tag : report.sequence_tags) {
    for (const auto& variant : variants) {
      ReportCell cell;
      cell.sequence_tag = tag;
      cell.variant = variant;
      std::vector<DiceResult> picked;
      for (const auto& row : rows) {
        auto it = tag_of.find(row.result.case_id);
        if (row.variant == variant && it != tag_of.end() && it->second == tag) picked.push_back(row.result);
      }
      if (picked.empty()) {
        cell.note = "no evaluation rows";
      } else {
        try {
          cell.summary = summarize_variant(picked, classes, statistics);
        } catch (const Error& e) {
          cell.note = e.what();
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

json report_to_json(const RunReport& r) {
  json tags = json::array();
  for (auto t : r.sequence_tags) tags.push_back(to_string(t));
  json cells = json::array();
  for (const auto& c : r.cells) {
    json jc = {{"sequence_tag", to_string(c.sequence_tag)}, {"variant", c.variant}, {"note", c.note}};
    if (c.summary) {
      jc["overall"] = stats_to_json(c.summary->overall);
      json classes = json::array();
      for (const auto& cs : c.summary->classes) {
        classes.push_back({{"class_name", cs.class_name},
                           {"mean", cs.mean ? json(*cs.mean) : json(nullptr)},
                           {"cases", cs.cases}});
      }
      jc["classes"] = classes;
      jc["warnings"] = c.summary->warnings;
    } else {
      jc["overall"] = nullptr;
    }
    cells.push_back(std::move(jc));
  }
  json failures = json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"case_id", f.case_id}, {"variant", f.variant}, {"message", f.message}, {"log", f.log_path}});
  }
  return {{"variants", r.variants},
          {"classes", r.classes},
          {"sequence_tags", tags},
          {"statistics",
           {{"ci_method", to_string(r.statistics.method)},
            {"aggregation", to_string(r.statistics.aggregation)},
            {"empty_policy", to_string(r.statistics.empty_policy)},
            {"seed", r.statistics.seed},
            {"resamples", r.statistics.resamples}}},
          {"cells", cells},
          {"failures", failures}};
}

RunReport report_from_json(const json& j) {
  RunReport r;
  try {
    r.variants = j.at("variants").get<std::vector<std::string>>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& t : j.at("sequence_tags")) r.sequence_tags.push_back(parse_sequence_tag(t.get<std::string>()));
    const auto& s = j.at("statistics");
    r.statistics.method = parse_ci_method(s.at("ci_method").get<std::string>());
    r.statistics.aggregation = parse_aggregation(s.at("aggregation").get<std::string>());
    r.statistics.empty_policy = parse_empty_policy(s.at("empty_policy").get<std::string>());
    r.statistics.seed = s.at("seed").get<std::uint64_t>();
    r.statistics.resamples = s.at("resamples").get<std::size_t>();
    for (const auto& jc : j.at("cells")) {
      ReportCell c;
      c.sequence_tag = parse_sequence_tag(jc.at("sequence_tag").get<std::string>());
      c.variant = jc.at("variant").get<std::string>();
      c.note = jc.value("note", std::string());
      if (!jc.at("overall").is_null()) {
        VariantSummary vs;
        vs.overall = stats_from_json(jc.at("overall"));
        for (const auto& jcs : jc.at("classes")) {
          ClassSummary cs;
          cs.class_name = jcs.at("class_name").get<std::string>();
          if (!jcs.at("mean").is_null()) cs.mean = jcs.at("mean").get<double>();
          cs.cases = jcs.at("cases").get<std::size_t>();
          vs.classes.push_back(std::move(cs));
        }
        vs.warnings = jc.value("warnings", std::vector<std::string>{});
        c.summary = std::move(vs);
      }
      r.cells.push_back(std::move(c));
    }
    for (const auto& jf : j.at("failures")) {
      r.failures.push_back({jf.at("case_id").get<std::string>(), jf.at("variant").get<std::string>(),
                            jf.at("message").get<std::string>(), jf.at("log").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + std::string(text) + "'");
}

std::string variant_title(std::string_view variant) {
  if (variant == "none") return "Unprocessed";
  if (variant == "invert") return "Inverted";
  if (variant == "invert-bg") return "Inverted (black background)";
  return std::string(variant);
}

std::string render_report(const RunReport& report, ReportFormat format) {
  if (report.cells.empty() || report.variants.empty()) throw Error("report is empty");
  switch (format) {
    case ReportFormat::markdown: return render_markdown(report);
    case ReportFormat::csv: return render_csv(report);
    case ReportFormat::json: return report_to_json(report).dump(2) + "\n";
  }
  return {};
}

}  // namespace mrinv
