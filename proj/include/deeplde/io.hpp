#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace deeplde {

/// Writes through a temporary sibling file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j, int indent = -1);

}  // namespace deeplde
