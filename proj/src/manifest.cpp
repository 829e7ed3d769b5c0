#include "tdlfd/manifest.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "tdlfd/error.hpp"

#ifndef TDLFD_DATA_DIR
#define TDLFD_DATA_DIR "data"
#endif
#ifndef TDLFD_VERSION
#define TDLFD_VERSION "0.0.0"
#endif

namespace tdlfd {

namespace {

using DigestCtx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

DigestCtx new_digest() {
  DigestCtx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "cannot initialise SHA-256");
  }
  return ctx;
}

std::string finish_digest(EVP_MD_CTX* ctx) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, out, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(out[i]);
  return hex.str();
}

}  // namespace

std::string_view tool_version() { return TDLFD_VERSION; }

std::string sha256_hex(std::string_view bytes) {
  DigestCtx ctx = new_digest();
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  return finish_digest(ctx.get());
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  DigestCtx ctx = new_digest();
  char chunk[1 << 16];
  while (in) {
    in.read(chunk, sizeof chunk);
    EVP_DigestUpdate(ctx.get(), chunk, static_cast<std::size_t>(in.gcount()));
  }
  return finish_digest(ctx.get());
}

std::vector<std::filesystem::path> data_search_path() {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("TDLFD_DATA_PATH")) {
    std::string_view rest(env);
    while (!rest.empty()) {
      const auto colon = rest.find(':');
      const std::string_view item = rest.substr(0, colon);
      if (!item.empty()) dirs.emplace_back(item);
      if (colon == std::string_view::npos) break;
      rest.remove_prefix(colon + 1);
    }
  }
  dirs.emplace_back(TDLFD_DATA_DIR);
  return dirs;
}

std::filesystem::path resolve_resource(const std::string& name, std::string_view kind) {
  if (name.empty()) throw Error(ErrorCode::IoError, "empty " + std::string(kind) + " name");
  if (std::filesystem::is_regular_file(name)) return name;
  for (const auto& dir : data_search_path()) {
    for (const auto& candidate : {dir / kind / name, dir / kind / (name + ".json")}) {
      if (std::filesystem::is_regular_file(candidate)) return candidate;
    }
  }
  throw Error(ErrorCode::IoError, "no " + std::string(kind) + " named '" + name + "' on the data path");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json digests = nlohmann::json::object();
  for (const auto& p : inputs) digests[p.string()] = sha256_file(p);
  return {{"format", "tdlfd-manifest"},
          {"command", command},
          {"parameters", parameters},
          {"inputs", digests},
          {"seed", seed},
          {"tool_version", std::string(tool_version())},
          {"started", started},
          {"finished", finished}};
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

std::string write_manifest(const RunManifest& manifest, const std::filesystem::path& output) {
  const auto path = manifest_path(output);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  out << manifest.to_json().dump(2) << '\n';
  return path.filename().string();
}

}  // namespace tdlfd
