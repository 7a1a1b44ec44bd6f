#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace causal_gate::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; output is deterministic.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace causal_gate::io
