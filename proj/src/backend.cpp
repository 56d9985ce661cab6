#include "mrinv/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mrinv/class_map_io.hpp"
#include "mrinv/error.hpp"
#include "mrinv/nifti.hpp"
#include "mrinv/subprocess.hpp"

namespace mrinv {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

std::string image_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (std::string_view ext : {".nii.gz", ".nii"}) {
    if (name.size() > ext.size() && name.ends_with(ext)) return name.substr(0, name.size() - ext.size());
  }
  return {};
}

void append_log(const fs::path& log_path, const std::string& line) {
  std::ofstream log(log_path, std::ios::app);
  log << line << '\n';
}

BackendOutput load_multilabel(const fs::path& dir, const BackendSpec& spec, const Geometry& expected) {
  auto seg = find_image(dir, "segmentation");
  if (!seg) throw BackendError("backend produced no " + std::string(kMultilabelFile) + " in " + dir.string());

  ClassMap map;
  if (!spec.class_map_path.empty()) {
    map = load_class_map(spec.class_map_path);
  } else if (fs::is_regular_file(dir / kOutputClassMapFile)) {
    map = load_class_map(dir / kOutputClassMapFile);
  } else {
    throw BackendError("multilabel output needs a class map (class_map_path or " +
                       std::string(kOutputClassMapFile) + " next to the segmentation)");
  }

  LabelVolume raw = [&] {
    try {
      return read_labels(*seg, map, /*allow_unknown=*/true);
    } catch (const NiftiError& e) {
      throw BackendError(std::string("unreadable backend output: ") + e.what());
    }
  }();
  if (!(raw.dims() == expected.dims)) throw BackendError("backend segmentation dims differ from the input");

  BackendOutput out{raw, {}};
  std::vector<LabelId> labels(raw.labels().begin(), raw.labels().end());
  std::size_t unknown = 0;
  for (LabelId& l : labels) {
    if (l != 0 && !map.contains(l)) {
      l = 0;
      ++unknown;
    }
  }
  if (unknown > 0) {
    out.warnings.push_back(std::to_string(unknown) + " voxels carried labels outside the class map; set to background");
  }
  out.labels = LabelVolume(raw.geometry(), std::move(labels), map);
  return out;
}

}  // namespace

std::string to_string(BackendKind k) {
  return k == BackendKind::external_command ? "external-command" : "mock-threshold";
}
std::string to_string(OutputFormat f) {
  return f == OutputFormat::per_class_files ? "per-class-files" : "multilabel";
}

BackendSpec backend_spec_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("backend config must be a JSON object");
  BackendSpec spec;
  try {
    const auto kind = j.value("kind", std::string("mock-threshold"));
    if (kind == "external-command") {
      spec.kind = BackendKind::external_command;
    } else if (kind == "mock-threshold") {
      spec.kind = BackendKind::mock_threshold;
    } else {
      throw ConfigError("unknown backend kind '" + kind + "'");
    }
    spec.command_template = j.value("command_template", std::string());
    spec.timeout_seconds = j.value("timeout", spec.timeout_seconds);
    const auto fmt = j.value("output_format", std::string("per-class-files"));
    if (fmt == "per-class-files") {
      spec.output_format = OutputFormat::per_class_files;
    } else if (fmt == "multilabel") {
      spec.output_format = OutputFormat::multilabel;
    } else {
      throw ConfigError("unknown output_format '" + fmt + "'");
    }
    if (j.contains("class_map_path")) {
      fs::path p = j.at("class_map_path").get<std::string>();
      spec.class_map_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        spec.rules.push_back({r.at("class_name").get<std::string>(), r.at("lo").get<double>(),
                              r.at("hi").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed backend config: ") + e.what());
  }
  return spec;
}

json backend_spec_to_json(const BackendSpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  if (spec.kind == BackendKind::external_command) {
    j["command_template"] = spec.command_template;
    j["output_format"] = to_string(spec.output_format);
  }
  j["timeout"] = spec.timeout_seconds;
  if (!spec.class_map_path.empty()) j["class_map_path"] = spec.class_map_path.string();
  if (!spec.rules.empty()) {
    json rules = json::array();
    for (const auto& r : spec.rules) rules.push_back({{"class_name", r.class_name}, {"lo", r.lo}, {"hi", r.hi}});
    j["rules"] = rules;
  }
  return j;
}

BackendSpec load_backend_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open backend config " + path.string());
  try {
    return backend_spec_from_json(json::parse(in), path.parent_path());
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed backend config " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> validate_backend(const BackendSpec& spec) {
  std::vector<std::string> diag;
  if (!(spec.timeout_seconds > 0.0)) diag.push_back("timeout must be positive");

  std::optional<ClassMap> map;
  if (!spec.class_map_path.empty()) {
    try {
      map = load_class_map(spec.class_map_path);
    } catch (const ConfigError& e) {
      diag.push_back(e.what());
    }
  }

  if (spec.kind == BackendKind::external_command) {
    for (std::string_view ph : {"{input}", "{output_dir}"}) {
      const auto n = occurrences(spec.command_template, ph);
      if (n != 1) {
        diag.push_back("command template must contain " + std::string(ph) + " exactly once (found " +
                       std::to_string(n) + ")");
      }
    }
    return diag;
  }

  if (spec.rules.empty()) diag.push_back("mock backend has no threshold rules");
  for (const auto& r : spec.rules) {
    if (!(r.lo < r.hi)) diag.push_back("rule for '" + r.class_name + "' needs lo < hi");
    if (map && !find_label(*map, r.class_name)) {
      diag.push_back("rule class '" + r.class_name + "' is not in the class map");
    }
  }
  for (std::size_t a = 0; a < spec.rules.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.rules.size(); ++b) {
      const auto& ra = spec.rules[a];
      const auto& rb = spec.rules[b];
      if (ra.lo <= rb.hi && rb.lo <= ra.hi) {
        diag.push_back("rules '" + ra.class_name + "' and '" + rb.class_name + "' overlap");
      }
    }
  }
  return diag;
}

std::string substitute_command(std::string_view tmpl, std::string_view input, std::string_view output_dir) {
  std::string out;
  out.reserve(tmpl.size() + input.size() + output_dir.size());
  constexpr std::string_view kIn = "{input}";
  constexpr std::string_view kOut = "{output_dir}";
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.substr(i).starts_with(kIn)) {
      out += input;
      i += kIn.size();
    } else if (tmpl.substr(i).starts_with(kOut)) {
      out += output_dir;
      i += kOut.size();
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

ClassMap mock_class_map(const BackendSpec& spec) {
  if (!spec.class_map_path.empty()) return load_class_map(spec.class_map_path);
  ClassMap map;
  LabelId next = 1;
  for (const auto& r : spec.rules) {
    if (!find_label(map, r.class_name)) map.emplace(next++, r.class_name);
  }
  return map;
}

LabelVolume apply_threshold_rules(const Volume3D& v, std::span<const ThresholdRule> rules,
                                  const ClassMap& class_map) {
  struct Band {
    double lo, hi;
    LabelId id;
  };
  std::vector<Band> bands;
  for (const auto& r : rules) {
    auto id = find_label(class_map, r.class_name);
    if (!id) throw ConfigError("rule class '" + r.class_name + "' is not in the class map");
    bands.push_back({r.lo, r.hi, *id});
  }
  const auto in = v.intensities();
  std::vector<LabelId> labels(in.size(), 0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (const auto& b : bands) {
      if (in[i] >= b.lo && in[i] <= b.hi) {
        labels[i] = b.id;
        break;
      }
    }
  }
  return LabelVolume(v.geometry(), std::move(labels), class_map);
}

BackendOutput merge_class_files(const fs::path& dir, const ClassMap& class_map, const Geometry& expected) {
  std::vector<std::pair<LabelId, fs::path>> files;
  std::vector<std::string> warnings;
  ClassMap map = class_map;
  if (map.empty()) {
    std::vector<std::pair<std::string, fs::path>> found;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto stem = image_stem(e.path());
      if (e.is_regular_file() && !stem.empty() && stem != "segmentation") found.emplace_back(stem, e.path());
    }
    std::sort(found.begin(), found.end());
    LabelId id = 1;
    for (auto& [stem, path] : found) {
      map.emplace(id, stem);
      files.emplace_back(id++, path);
    }
  } else {
    for (const auto& [id, name] : map) {
      if (auto p = find_image(dir, name)) {
        files.emplace_back(id, *p);
      } else {
        warnings.push_back("no output file for class '" + name + "'; treated as empty");
      }
    }
  }
  if (files.empty()) throw BackendError("backend produced no per-class files in " + dir.string());

  std::vector<LabelId> labels(expected.dims.voxel_count(), 0);
  std::size_t overlaps = 0;
  // Ascending id order: the first writer of a voxel is the lowest id.
  std::sort(files.begin(), files.end());
  for (const auto& [id, path] : files) {
    Volume3D mask = [&] {
      try {
        return read_volume(path);
      } catch (const NiftiError& e) {
        throw BackendError(std::string("unreadable backend output: ") + e.what());
      }
    }();
    if (!(mask.dims() == expected.dims)) {
      throw BackendError("class file " + path.filename().string() + " dims differ from the input");
    }
    const auto m = mask.intensities();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0.0) continue;
      if (labels[i] == 0) {
        labels[i] = id;
      } else {
        ++overlaps;
      }
    }
  }
  if (overlaps > 0) {
    warnings.push_back(std::to_string(overlaps) + " voxels claimed by more than one class file; lowest class id kept");
  }
  return {LabelVolume(expected, std::move(labels), std::move(map)), std::move(warnings)};
}

BackendOutput run_backend(const BackendSpec& spec, const fs::path& input_path, const fs::path& work_dir,
                          const fs::path& log_path) {
  if (auto diag = validate_backend(spec); !diag.empty()) {
    std::string msg = "invalid backend config:";
    for (const auto& d : diag) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  if (!fs::is_regular_file(input_path)) throw BackendError("backend input missing: " + input_path.string());
  const Volume3D input = read_volume(input_path);

  if (spec.kind == BackendKind::mock_threshold) {
    append_log(log_path, "mock-threshold backend, " + std::to_string(spec.rules.size()) + " rules, input " +
                             input_path.string());
    return {apply_threshold_rules(input, spec.rules, mock_class_map(spec)), {}};
  }

  std::error_code ec;
  fs::remove_all(work_dir, ec);
  fs::create_directories(work_dir);
  const std::string command = substitute_command(spec.command_template, input_path.string(), work_dir.string());
  append_log(log_path, "command: " + command);

  const auto timeout = std::chrono::milliseconds(static_cast<long long>(std::ceil(spec.timeout_seconds * 1000.0)));
  const CommandResult r = run_shell_command(command, timeout, log_path);
  if (r.timed_out) {
    throw BackendError("backend timed out after " + std::to_string(spec.timeout_seconds) + " s");
  }
  if (r.signal != 0) throw BackendError("backend killed by signal " + std::to_string(r.signal));
  if (r.exit_code != 0) {
    throw BackendError("backend exited with code " + std::to_string(r.exit_code), r.exit_code);
  }

  BackendOutput out = spec.output_format == OutputFormat::multilabel
                          ? load_multilabel(work_dir, spec, input.geometry())
                          : merge_class_files(work_dir,
                                              spec.class_map_path.empty() ? ClassMap{}
                                                                          : load_class_map(spec.class_map_path),
                                              input.geometry());
  for (const auto& w : out.warnings) append_log(log_path, "warning: " + w);
  return out;
}

}  // namespace mrinv
