#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsc/error.hpp"
#include "wsc/feature_store.hpp"
#include "wsc/rng.hpp"

namespace wsc {

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_content_hash(const std::string& path) {
  return hash_hex(fnv1a64(detail::read_file_bytes(path)));
}

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Per-command provenance record: command, resolved config, seeds, artifact
/// paths with content hashes, wall time. Deterministic except for wall_time.
inline void write_manifest(const std::string& path, const std::string& command,
                           const nlohmann::json& resolved_config,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<std::string>& artifacts, double wall_seconds) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = resolved_config;
  m["seeds"] = seeds;
  m["artifacts"] = nlohmann::json::array();
  for (const std::string& a : artifacts)
    m["artifacts"].push_back({{"path", a}, {"hash", file_content_hash(a)}});
  m["wall_time_seconds"] = wall_seconds;
  detail::write_file_bytes(path, m.dump(2) + "\n");
}

}  // namespace wsc
