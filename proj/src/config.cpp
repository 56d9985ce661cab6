#include "mrinv/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mrinv/class_map_io.hpp"
#include "mrinv/csv.hpp"
#include "mrinv/error.hpp"

namespace mrinv {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_relative() && !base.empty() ? base / p : p;
}

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed ") + what + " " + path.string() + ": " + e.what());
  }
}

bool safe_case_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

ManifestEntry make_entry(const std::string& case_id, const std::string& image, const std::string& gt,
                         const std::string& tag, const fs::path& base) {
  ManifestEntry e;
  e.case_id = case_id;
  e.image_path = resolve(image, base);
  if (!gt.empty()) e.gt_path = resolve(gt, base);
  e.sequence_tag = tag.empty() ? SequenceTag::other : parse_sequence_tag(tag);
  return e;
}

}  // namespace

std::string to_string(SequenceTag tag) {
  switch (tag) {
    case SequenceTag::T1: return "T1";
    case SequenceTag::T2: return "T2";
    case SequenceTag::other: return "other";
  }
  return "other";
}

SequenceTag parse_sequence_tag(std::string_view text) {
  if (text == "T1") return SequenceTag::T1;
  if (text == "T2") return SequenceTag::T2;
  if (text == "other") return SequenceTag::other;
  throw ConfigError("unknown sequence tag '" + std::string(text) + "' (expected T1, T2 or other)");
}

void CaseManifest::validate() const {
  if (entries.empty()) throw ConfigError("manifest has no cases");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!safe_case_id(e.case_id)) {
      throw ConfigError("case id '" + e.case_id + "' must use only letters, digits, '_', '-' and '.'");
    }
    if (!ids.insert(e.case_id).second) throw ConfigError("duplicate case id '" + e.case_id + "'");
    if (!fs::is_regular_file(e.image_path)) {
      throw ConfigError("case '" + e.case_id + "': image not found: " + e.image_path.string());
    }
    if (e.gt_path && !fs::is_regular_file(*e.gt_path)) {
      throw ConfigError("case '" + e.case_id + "': ground truth not found: " + e.gt_path->string());
    }
  }
}

CaseManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  const json& cases = j.is_object() && j.contains("cases") ? j.at("cases") : j;
  if (!cases.is_array()) throw ConfigError("manifest must be an array of cases or {\"cases\": [...]}");
  CaseManifest m;
  try {
    for (const auto& c : cases) {
      m.entries.push_back(make_entry(c.at("case_id").get<std::string>(), c.at("image_path").get<std::string>(),
                                     c.value("gt_path", std::string()), c.value("sequence_tag", std::string()),
                                     base_dir));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

json manifest_to_json(const CaseManifest& manifest) {
  json cases = json::array();
  for (const auto& e : manifest.entries) {
    json c = {{"case_id", e.case_id}, {"image_path", e.image_path.string()}, {"sequence_tag", to_string(e.sequence_tag)}};
    if (e.gt_path) c["gt_path"] = e.gt_path->string();
    cases.push_back(std::move(c));
  }
  return {{"cases", cases}};
}

CaseManifest load_manifest(const fs::path& path) {
  const fs::path base = path.parent_path();
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest " + path.string());
    auto rows = csv::read_all(in);
    const std::vector<std::string> header = {"case_id", "image_path", "gt_path", "sequence_tag"};
    if (rows.empty() || rows.front() != header) {
      throw ConfigError("manifest CSV header must be case_id,image_path,gt_path,sequence_tag");
    }
    CaseManifest m;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != header.size()) {
        throw ConfigError("manifest CSV row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                          " fields");
      }
      m.entries.push_back(make_entry(rows[r][0], rows[r][1], rows[r][2], rows[r][3], base));
    }
    return m;
  }
  return manifest_from_json(read_json_file(path, "manifest"), base);
}

std::vector<std::string> RunConfig::class_list() const { return class_names(classes); }

void RunConfig::validate() const {
  if (variants.empty()) throw ConfigError("config lists no variants");
  std::set<InversionMode> seen(variants.begin(), variants.end());
  if (seen.size() != variants.size()) throw ConfigError("config lists a variant twice");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (classes.empty()) throw ConfigError("config has no classes");
  if (statistics.resamples == 0) throw ConfigError("bootstrap resamples must be positive");
  PreprocessSpec p = preprocess;
  p.validate();
  if (auto diag = validate_backend(backend); !diag.empty()) {
    std::string msg = "invalid backend config:";
    for (const auto& d : diag) msg += "\n  " + d;
    throw ConfigError(msg);
  }
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& v : j.at("variants")) c.variants.push_back(parse_inversion_mode(v.get<std::string>()));

    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      c.preprocess.clip_lo = p.value("clip_min", c.preprocess.clip_lo);
      c.preprocess.clip_hi = p.value("clip_max", c.preprocess.clip_hi);
      c.preprocess.bg_percentile = p.value("bg_percentile", c.preprocess.bg_percentile);
    }

    if (j.contains("backend")) {
      c.backend = backend_spec_from_json(j.at("backend"), base_dir);
    } else if (j.contains("backend_config")) {
      c.backend = load_backend_spec(resolve(j.at("backend_config").get<std::string>(), base_dir));
    } else {
      throw ConfigError("config needs 'backend' or 'backend_config'");
    }

    if (j.contains("classes")) {
      c.classes = class_map_from_json(j.at("classes"));
    } else if (j.contains("classes_path")) {
      c.classes = load_class_map(resolve(j.at("classes_path").get<std::string>(), base_dir));
    } else {
      throw ConfigError("config needs 'classes' or 'classes_path'");
    }

    const auto jobs = j.value("jobs", 1LL);
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    c.jobs = static_cast<std::size_t>(jobs);
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    c.statistics.seed = j.value("seed", c.statistics.seed);
    if (j.contains("statistics")) {
      const auto& s = j.at("statistics");
      c.statistics.method = parse_ci_method(s.value("ci_method", to_string(c.statistics.method)));
      c.statistics.aggregation = parse_aggregation(s.value("aggregation", to_string(c.statistics.aggregation)));
      c.statistics.empty_policy = parse_empty_policy(s.value("empty_policy", to_string(c.statistics.empty_policy)));
      c.statistics.resamples = s.value("resamples", c.statistics.resamples);
    }
    c.keep_intermediates = j.value("keep_intermediates", c.keep_intermediates);
    c.allow_unknown_labels = j.value("allow_unknown_labels", c.allow_unknown_labels);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json variants = json::array();
  for (auto v : c.variants) variants.push_back(to_string(v));
  return {
      {"variants", variants},
      {"preprocess",
       {{"clip_min", c.preprocess.clip_lo}, {"clip_max", c.preprocess.clip_hi}, {"bg_percentile", c.preprocess.bg_percentile}}},
      {"backend", backend_spec_to_json(c.backend)},
      {"classes", class_map_to_json(c.classes)},
      {"seed", c.statistics.seed},
      {"statistics",
       {{"ci_method", to_string(c.statistics.method)},
        {"aggregation", to_string(c.statistics.aggregation)},
        {"empty_policy", to_string(c.statistics.empty_policy)},
        {"resamples", c.statistics.resamples}}},
      {"keep_intermediates", c.keep_intermediates},
      {"allow_unknown_labels", c.allow_unknown_labels},
  };
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path, "run config"), path.parent_path());
}

}  // namespace mrinv
