#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tdlfd {

std::string_view tool_version();

/// Hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

/// Directories searched for named resources: entries of TDLFD_DATA_PATH
/// (colon separated), then the shipped data directory.
std::vector<std::filesystem::path> data_search_path();

/// Resolves an existing path as is, otherwise looks for <dir>/<kind>/<name>
/// and <dir>/<kind>/<name>.json along the search path. Throws IoError.
std::filesystem::path resolve_resource(const std::string& name, std::string_view kind);

struct RunManifest {
  std::string command;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::filesystem::path> inputs;
  std::uint64_t seed = 0;
  std::string started;   // UTC, ISO 8601
  std::string finished;

  nlohmann::json to_json() const;
};

std::string utc_timestamp();

/// `<output>.manifest.json`
std::filesystem::path manifest_path(const std::filesystem::path& output);

/// Writes the manifest next to `output` and returns its file name.
std::string write_manifest(const RunManifest& manifest, const std::filesystem::path& output);

}  // namespace tdlfd
