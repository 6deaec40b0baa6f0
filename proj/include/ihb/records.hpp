#pragma once

#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

#include <json.hpp>

#include "ihb/inference.hpp"
#include "ihb/sender.hpp"
#include "ihb/wire.hpp"

// Line-delimited JSON schemas for everything that crosses a file or pipe
// boundary: emissions, observed heartbeats, and analysis reports. Field
// names here are a stable interface; bump kSchemaVersion when they change.
namespace ihb::records {

inline constexpr int kSchemaVersion = 1;

class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

using nlohmann::json;

std::string hex_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> hex_decode(const std::string& hex);

// --- wire types ---
json heartbeat_to_json(const wire::Heartbeat& hb);
wire::Heartbeat heartbeat_from_json(const json& j);

std::string transport_to_string(const wire::TransportKind& t);
wire::TransportKind transport_from_string(const std::string& s);

json observed_to_json(const wire::ObservedHeartbeat& obs);
wire::ObservedHeartbeat observed_from_json(const json& j);

// --- sender emissions ---
json emission_to_json(const sender::Emission& e);
sender::Emission emission_from_json(const json& j);

// --- analysis reports (tagged with "type") ---
using Report = std::variant<inference::OutageAssessment,
                            inference::PathChangeEvent, inference::SpoofAlert,
                            inference::AliasCandidateSet,
                            inference::NatEstimate,
                            inference::FaultLocalization>;

json report_to_json(const Report& r);
Report report_from_json(const json& j);

// --- jsonl plumbing ---
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const json& j);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

// Calls fn once per non-empty line; throws SchemaError with the line
// number on parse failures.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const json&)>& fn);

}  // namespace ihb::records
