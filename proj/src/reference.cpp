#include "qsdse/reference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qsdse::reference {

SearchReport best_configuration(const DesignSpace& space, std::uint64_t cap) {
  const double t0 = omp_get_wtime();
  const auto count = space.config_count(cap);
  if (!count)
    raise(ErrorCode::SpaceTooLarge,
          "space size exceeds brute-force cap of " + std::to_string(cap));
  const int depth = space.layer_count();

  std::vector<int> idx(depth, 0);
  std::vector<int> best_idx;
  double best = std::numeric_limits<double>::infinity();

  for (std::uint64_t i = 0; i < *count; ++i) {
    if (auto m = space.try_evaluate(idx)) {
      if (m->latency_ms < best) { // first hit wins ties: lowest impl ids
        best = m->latency_ms;
        best_idx = idx;
      }
    }
    for (int l = depth - 1; l >= 0; --l) {
      if (++idx[l] < space.impl_count(l)) break;
      idx[l] = 0;
    }
  }

  if (best_idx.empty())
    raise(ErrorCode::NoFeasiblePath, "no feasible configuration exists");

  SearchReport report;
  report.algorithm = "brute";
  report.best_config = space.to_configuration(best_idx);
  report.best_latency_ms = space.try_evaluate(best_idx)->latency_ms;
  report.considered_states = *count * static_cast<std::uint64_t>(depth);
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

namespace {

bool better_or_equal_lat_acc(const ParetoPoint& a, const ParetoPoint& b) {
  return a.latency_ms <= b.latency_ms && a.accuracy_pct >= b.accuracy_pct;
}

bool better_or_equal_lat_mem(const ParetoPoint& a, const ParetoPoint& b) {
  return a.latency_ms <= b.latency_ms && a.memory_bytes <= b.memory_bytes;
}

bool same_objectives(const ParetoPoint& a, const ParetoPoint& b,
                     FrontObjective objective) {
  if (objective == FrontObjective::LatencyAccuracy)
    return a.latency_ms == b.latency_ms && a.accuracy_pct == b.accuracy_pct;
  return a.latency_ms == b.latency_ms && a.memory_bytes == b.memory_bytes;
}

} // namespace

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points,
                                      FrontObjective objective) {
  if (points.empty()) raise(ErrorCode::EmptyInput, "no points");

  std::vector<ParetoPoint> front;
  for (const auto& p : points) {
    bool has_dominator = false;
    for (const auto& q : points) {
      const bool beq = objective == FrontObjective::LatencyAccuracy
                           ? better_or_equal_lat_acc(q, p)
                           : better_or_equal_lat_mem(q, p);
      if (beq && !same_objectives(q, p, objective)) {
        has_dominator = true;
        break;
      }
    }
    if (!has_dominator) front.push_back(p);
  }
  std::stable_sort(front.begin(), front.end(),
                   [](const ParetoPoint& a, const ParetoPoint& b) {
                     return a.latency_ms < b.latency_ms;
                   });
  return front;
}

std::vector<double> kl_sweep(const std::vector<double>& normalized_histogram,
                             int levels) {
  const int nbins = static_cast<int>(normalized_histogram.size());
  std::vector<double> divergence;
  divergence.reserve(nbins - levels + 1);
  for (int t = levels; t <= nbins; ++t)
    divergence.push_back(kl_at_threshold(normalized_histogram, t, levels));
  return divergence;
}

double max_roundtrip_error(const std::vector<double>& values,
                           const QuantParams& params) {
  const double lo = params.mode == QuantMode::Symmetric ? -127.0 : 0.0;
  const double hi = params.mode == QuantMode::Symmetric ? 127.0 : 255.0;
  double max_error = 0.0;
  for (double v : values) {
    const double q =
        std::clamp(std::round(v / params.scale) + params.offset, lo, hi);
    const double back = (q - params.offset) * params.scale;
    max_error = std::max(max_error, std::abs(v - back));
  }
  return max_error;
}

} // namespace qsdse::reference
