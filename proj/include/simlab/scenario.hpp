#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace simlab {

/// Plot-ready table. Floats are written with 17 significant digits so a
/// round-trip read reproduces them exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// RFC-4180-style CSV with '.' decimal separator. NaN/Inf are rejected.
void emit_csv(const CsvTable& table, const std::string& path);

/// JSON with stable (sorted) key order.
void emit_json(const nlohmann::json& doc, const std::string& path);

std::string format_double(double v);

struct ScenarioConfig {
  std::string kind;
  nlohmann::json params;
  int trials = 1;
  std::uint64_t master_seed = 0;
  std::string out_dir = ".";
  int jobs = 1;

  static ScenarioConfig from_json(const nlohmann::json& doc);
};

struct RunRecord {
  std::string kind;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> trial_seeds;
  std::vector<std::string> outputs;  // file paths, relative to out_dir
  nlohmann::json summary;
  double wall_clock_seconds = 0.0;
};

/// Known experiment kinds, in dispatch order.
const std::vector<std::string>& scenario_kinds();

/// Validates a config against the owning module's preconditions without
/// running anything. Throws ConfigInvalid with a field-level message.
void validate_scenario(const ScenarioConfig& cfg);

/// Runs a scenario: dispatches on kind, writes CSV/JSON artifacts plus a
/// manifest with content hashes, aggregates multi-trial statistics.
RunRecord run_scenario(const ScenarioConfig& cfg);

/// FNV-1a hash of a file's bytes, used for the manifest.
std::uint64_t hash_file(const std::string& path);

}  // namespace simlab
