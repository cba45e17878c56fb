#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsdse/model.hpp"
#include "qsdse/search.hpp"

namespace qsdse {

/// Latency is always minimised; the second objective picks the front.
enum class FrontObjective { LatencyAccuracy, LatencyMemory };

struct ParetoPoint {
  Configuration config;
  double latency_ms = 0.0;
  double accuracy_pct = 0.0;
  std::int64_t memory_bytes = 0;
  std::string label; // Ref-FP32 | Opt-FP32 | INT8 | searched
};

/// Accuracy surrogate. Additive mode subtracts per-impl degradation deltas
/// from the base; table mode looks up measured accuracies by configuration
/// fingerprint.
struct AccuracyModel {
  enum class Mode { Additive, Table };
  Mode mode = Mode::Additive;
  double base_top1_pct = 100.0;
  std::map<std::string, double> table; // fingerprint -> accuracy

  static AccuracyModel additive(double base) {
    return AccuracyModel{Mode::Additive, base, {}};
  }
};

/// Canonical fingerprint of a configuration: FNV-1a 64 over the (layer id,
/// impl id) pairs in layer-id order, as fixed-width hex. Stable across runs.
std::string config_fingerprint(const Configuration& config);

double accuracy_of(const DesignSpace& space, const Configuration& config,
                   const AccuracyModel& model);

/// Keeps solutions at most `slack` slower than the fastest one.
std::vector<ParetoPoint> filter_candidates(const std::vector<ParetoPoint>& solutions,
                                           double slack = 0.25);

/// All non-dominated points under strict Pareto dominance (better-or-equal
/// in both objectives, strictly better in one), sorted by latency. Equal
/// points are all retained.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points,
                                      FrontObjective objective);

struct InterestingPoints {
  std::optional<ParetoPoint> ref_fp32;
  std::optional<ParetoPoint> opt_fp32;
  std::optional<ParetoPoint> int8;
  std::vector<ParetoPoint> searched; // points contributed by the searches
  std::vector<ParetoPoint> front_latency_accuracy;
  std::vector<ParetoPoint> front_latency_memory;
  std::vector<std::string> warnings;
};

/// Computes the labelled reference points and both fronts:
///  - Ref-FP32: the reference library's FP32/NCHW impl on every layer;
///  - Opt-FP32: best configuration over the FP32-only sub-space;
///  - INT8: best configuration over the INT8-only sub-space;
///  - searched: the best configs of the supplied search reports.
/// Sub-space optimisation uses Dijkstra on chains and RL (with
/// `fallback_params`) otherwise. Infeasible or missing points are omitted
/// with a warning.
InterestingPoints interesting_points(const DesignSpace& space,
                                     const std::vector<SearchReport>& searches,
                                     const AccuracyModel& model,
                                     const SearchParams& fallback_params = {});

/// Ref latency divided by point latency (the brace annotations on the
/// fronts).
inline double speedup_vs(const ParetoPoint& ref, const ParetoPoint& p) {
  return ref.latency_ms / p.latency_ms;
}

} // namespace qsdse
