#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qsdse/model.hpp"
#include "qsdse/optim.hpp"
#include "qsdse/pareto.hpp"
#include "qsdse/search.hpp"
#include "qsdse/synth.hpp"

namespace qsdse {

using nlohmann::json;

/// Shortest round-trip decimal form of a double ('.' separator); the CSV
/// writers use this so seeded outputs are byte-stable.
std::string fmt_double(double v);

json network_to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const json& j);

json costs_to_json(const CostTable& table);
CostTable costs_from_json(const json& j);

/// SearchReport schema: {algorithm, best_config, best_latency_ms,
/// considered_states, learning_curve[], seed}. Wall time is intentionally
/// not serialised: seeded runs must be byte-identical.
json report_to_json(const SearchReport& report);

json quant_to_json(const QuantParams& params);
json pool_plan_to_json(const PoolPlan& plan);

NetworkSpec load_network(const std::filesystem::path& path);
CostTable load_costs(const std::filesystem::path& path);
void save_json(const json& j, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

/// Learning-curve CSV: header plus one (episode, latency_ms) row per episode.
std::string curve_csv(const SearchReport& report);

struct CompareRow {
  std::string algorithm;
  double latency_ms = 0.0;
  std::uint64_t considered_states = 0;
  double accuracy_pct = 0.0;
  std::optional<std::uint64_t> seed;
};
std::string compare_csv(const std::vector<CompareRow>& rows);

/// Front CSV: (label, latency_ms, accuracy_pct, memory_bytes,
/// speedup_vs_ref) with speedups relative to `ref_latency_ms`.
std::string front_csv(const std::vector<ParetoPoint>& points,
                      double ref_latency_ms);

/// Minimal scatter emitter for the two fronts; no interactivity.
std::string front_svg(const std::vector<ParetoPoint>& points,
                      FrontObjective objective);

/// Histogram CSV: (bin_edge, count) rows, one per bin, with uniformly spaced
/// upper edges; the last edge is the histogram range.
Histogram load_histogram_csv(const std::filesystem::path& path);

/// Measurement CSV: header (layer_id, library, algorithm, algorithm_config,
/// data_type, layout, core, memory_bytes, warm_up_count, run1..runN).
std::vector<MeasurementRecord> load_measurements_csv(
    const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

/// Reproducibility audit record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  json parameters;
  std::string tool_version;
  std::vector<std::pair<std::string, std::string>> outputs; // (path, sha256)
};
json manifest_to_json(const RunManifest& manifest);

} // namespace qsdse
