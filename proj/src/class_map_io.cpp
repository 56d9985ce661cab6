#include "mrinv/class_map_io.hpp"

#include <fstream>
#include <set>

#include "mrinv/error.hpp"

namespace mrinv {

ClassMap class_map_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("class map must be a JSON object of id -> name");
  ClassMap map;
  std::set<std::string> seen;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    unsigned long id = 0;
    try {
      id = std::stoul(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || id == 0 || id > 0xFFFFFFFFul) {
      throw ConfigError("class map key '" + key + "' is not a positive integer label id");
    }
    if (!value.is_string() || value.get<std::string>().empty()) {
      throw ConfigError("class map entry " + key + " must be a non-empty string");
    }
    const auto name = value.get<std::string>();
    if (!seen.insert(name).second) throw ConfigError("class name '" + name + "' appears twice");
    map.emplace(static_cast<LabelId>(id), name);
  }
  if (map.empty()) throw ConfigError("class map is empty");
  return map;
}

nlohmann::json class_map_to_json(const ClassMap& map) {
  // nlohmann sorts object keys lexicographically; that order is stable, which is all
  // the writers need.
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, name] : map) j[std::to_string(id)] = name;
  return j;
}

ClassMap load_class_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open class map " + path.string());
  try {
    return class_map_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed class map " + path.string() + ": " + e.what());
  }
}

void save_class_map(const ClassMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << class_map_to_json(map).dump(2) << '\n';
}

std::vector<std::string> class_names(const ClassMap& map) {
  std::vector<std::string> names;
  names.reserve(map.size());
  for (const auto& [id, name] : map) names.push_back(name);
  return names;
}

}  // namespace mrinv
