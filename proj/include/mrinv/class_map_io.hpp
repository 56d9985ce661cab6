#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mrinv/volume.hpp"

namespace mrinv {

/// Class maps on disk are JSON objects keyed by label id: {"1": "spleen", "5": "liver"}.
ClassMap class_map_from_json(const nlohmann::json& j);
nlohmann::json class_map_to_json(const ClassMap& map);

/// Throws ConfigError if the file is missing or malformed.
ClassMap load_class_map(const std::filesystem::path& path);
void save_class_map(const ClassMap& map, const std::filesystem::path& path);

/// Class names in ascending label-id order.
std::vector<std::string> class_names(const ClassMap& map);

}  // namespace mrinv
