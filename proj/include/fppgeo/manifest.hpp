#pragma once

// Run manifests: the canonical config, seeds, timestamps and a SHA-256 digest
// of every output file.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fppgeo/error.hpp"

namespace fppgeo {

inline constexpr const char* kToolName = "fppgeo";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw Error(ErrorCode::kIo, "SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + p.string());
}

/// Sorted keys, no whitespace; nlohmann prints doubles in shortest
/// round-trip form, so the text is a pure function of the value.
inline std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

/// UTC, second resolution, ISO 8601.
inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct OutputDigest {
  std::string path;  // relative to the manifest's directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string tool = kToolName;
  std::string version = kToolVersion;
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  std::string started;
  std::string finished;
  std::vector<OutputDigest> outputs;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : m.outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return {{"tool", m.tool},         {"version", m.version}, {"command", m.command},   {"config", m.config},
          {"seeds", m.seeds},       {"started", m.started}, {"finished", m.finished}, {"outputs", outs}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.tool = j.at("tool").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    for (const auto& o : j.at("outputs"))
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>(),
                           o.at("bytes").get<std::uintmax_t>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("manifest: ") + e.what());
  }
}

/// Digest of a file as listed in a manifest next to it.
inline OutputDigest digest_file(const std::filesystem::path& file) {
  const std::string bytes = read_file(file);
  return {file.filename().string(), sha256_hex(bytes), bytes.size()};
}

/// `<dir>/<stem>.manifest.json` for a primary output path.
inline std::filesystem::path manifest_path_for(const std::filesystem::path& primary) {
  return primary.parent_path() / (primary.stem().string() + ".manifest.json");
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_file(path, to_json(m).dump(2) + "\n");
}

/// Recomputes every listed digest; returns the paths that no longer match.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& manifest) {
  const RunManifest m = manifest_from_json(nlohmann::json::parse(read_file(manifest)));
  std::vector<std::string> bad;
  for (const auto& o : m.outputs) {
    const auto file = manifest.parent_path() / o.path;
    if (!std::filesystem::exists(file)) {
      bad.push_back(o.path);
      continue;
    }
    const OutputDigest now = digest_file(file);
    if (now.sha256 != o.sha256 || now.bytes != o.bytes) bad.push_back(o.path);
  }
  return bad;
}

}  // namespace fppgeo
