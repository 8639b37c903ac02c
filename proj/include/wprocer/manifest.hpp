#pragma once

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wprocer/common.hpp"

namespace wprocer {

inline std::string digest_bytes(std::string_view bytes) { return "fnv1a64:" + to_hex(fnv1a64(bytes)); }

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for digest");
  std::ostringstream buf;
  buf << in.rdbuf();
  return digest_bytes(buf.str());
}

/// SOURCE_DATE_EPOCH makes every timestamp (and therefore every manifest)
/// reproducible across reruns.
inline bool deterministic_output() { return std::getenv("SOURCE_DATE_EPOCH") != nullptr; }

inline std::string manifest_timestamp() {
  std::time_t t;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  } else {
    t = std::time(nullptr);
  }
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string(buf);
}

/// Audit record for one CLI invocation: what ran, on which inputs (by
/// digest), and which artifacts it produced.
struct RunManifest {
  std::string command;
  uint64_t config_hash = 0;
  nlohmann::json effective_config = nlohmann::json::object();
  std::vector<uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> inputs;     // path, digest
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, digest
  std::string timestamp;

  void add_input(const std::string& path) { inputs.push_back({path, file_digest(path)}); }
  void add_artifact(const std::string& path) { artifacts.push_back({path, file_digest(path)}); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = to_hex(config_hash);
    j["effective_config"] = effective_config;
    j["seeds"] = seeds;
    nlohmann::json in = nlohmann::json::array();
    for (const auto& [path, digest] : inputs) in.push_back({{"path", path}, {"digest", digest}});
    j["inputs"] = in;
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [path, digest] : artifacts) out.push_back({{"path", path}, {"digest", digest}});
    j["artifacts"] = out;
    j["timestamp"] = timestamp.empty() ? manifest_timestamp() : timestamp;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace wprocer
