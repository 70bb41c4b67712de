#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sfgl/error.hpp"

namespace sfgl {

using json = nlohmann::json;

inline std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Stable 64-bit FNV-1a over the canonical (sorted-key) config dump; lets
// two reports assert they came from identical resolved configs.
inline std::string config_hash(const json& config) {
  std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) fail(errc::io, "write failed for '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(errc::parse, path + ": " + e.what());
  }
  return j;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(errc::io, "cannot create directory '" + dir + "': " + ec.message());
}

}  // namespace sfgl
