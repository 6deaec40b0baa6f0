#pragma once

#include <string>

#include <json.hpp>

#include "ihb/analysis.hpp"
#include "ihb/observer.hpp"
#include "ihb/sender.hpp"

// Operator-facing configuration file (JSON) and the versioned on-disk
// snapshot format. Parsing is strict: unknown keys and out-of-range
// thresholds are errors, so a typo cannot silently fall back to a default.
namespace ihb::config {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Config {
  sender::SenderConfig sender_cfg;
  observer::StoreConfig observer_cfg;
  uint16_t udp_port = wire::kDefaultUdpPort;
  analysis::PipelineConfig pipeline;
  std::string state_dir;
  std::string report_path;
};

Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

// --- snapshot persistence (version 1) ---

inline constexpr int kSnapshotVersion = 1;

nlohmann::json snapshot_to_json(const observer::Snapshot& snap);
observer::Snapshot snapshot_from_json(const nlohmann::json& j);

void save_snapshot(const observer::Snapshot& snap, const std::string& path);
observer::Snapshot load_snapshot(const std::string& path);

}  // namespace ihb::config
