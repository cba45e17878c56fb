#include "qsdse/pareto.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>

namespace qsdse {

std::string config_fingerprint(const Configuration& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0x1f;
    h *= 0x100000001b3ull;
  };
  for (const auto& [layer, impl] : config.assignment) {
    mix(layer);
    mix(impl);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

double accuracy_of(const DesignSpace& space, const Configuration& config,
                   const AccuracyModel& model) {
  if (model.mode == AccuracyModel::Mode::Table) {
    auto it = model.table.find(config_fingerprint(config));
    if (it == model.table.end())
      raise(ErrorCode::UnknownConfiguration,
            "no measured accuracy for this configuration");
    return it->second;
  }
  const auto idx = space.to_indices(config);
  double drop = 0.0;
  for (int l = 0; l < space.layer_count(); ++l)
    drop += space.impl(l, idx[l]).accuracy_delta_pp;
  return std::clamp(model.base_top1_pct - drop, 0.0, 100.0);
}

std::vector<ParetoPoint> filter_candidates(
    const std::vector<ParetoPoint>& solutions, double slack) {
  if (solutions.empty())
    raise(ErrorCode::EmptyInput, "no solutions to filter");
  double fastest = solutions[0].latency_ms;
  for (const auto& s : solutions) fastest = std::min(fastest, s.latency_ms);
  const double threshold = (1.0 + slack) * fastest;
  std::vector<ParetoPoint> kept;
  for (const auto& s : solutions)
    if (s.latency_ms <= threshold) kept.push_back(s);
  return kept;
}

namespace {

bool dominates(const ParetoPoint& a, const ParetoPoint& b,
               FrontObjective objective) {
  if (objective == FrontObjective::LatencyAccuracy)
    return a.latency_ms <= b.latency_ms && a.accuracy_pct >= b.accuracy_pct &&
           (a.latency_ms < b.latency_ms || a.accuracy_pct > b.accuracy_pct);
  return a.latency_ms <= b.latency_ms && a.memory_bytes <= b.memory_bytes &&
         (a.latency_ms < b.latency_ms || a.memory_bytes < b.memory_bytes);
}

} // namespace

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points,
                                      FrontObjective objective) {
  if (points.empty()) raise(ErrorCode::EmptyInput, "no points");
  const int n = static_cast<int>(points.size());
  std::vector<char> dominated(n, 0);

  #pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i && dominates(points[j], points[i], objective)) {
        dominated[i] = 1;
        break;
      }
    }
  }

  std::vector<ParetoPoint> front;
  for (int i = 0; i < n; ++i)
    if (!dominated[i]) front.push_back(points[i]);
  std::stable_sort(front.begin(), front.end(),
                   [](const ParetoPoint& a, const ParetoPoint& b) {
                     return a.latency_ms < b.latency_ms;
                   });
  return front;
}

namespace {

CostTable restrict_table(const CostTable& table, DataType dtype) {
  CostTable out = table;
  for (auto& [layer, impls] : out.entries) {
    std::vector<ImplDescriptor> kept;
    for (const auto& impl : impls)
      if (impl.data_type == dtype) kept.push_back(impl);
    impls = std::move(kept);
  }
  return out;
}

std::optional<Configuration> best_in_subspace(const NetworkSpec& net,
                                              const CostTable& table,
                                              const SearchParams& params,
                                              std::string* why_not) {
  try {
    DesignSpace sub = DesignSpace::build(net, table);
    SearchReport report =
        sub.is_chain() ? run_dijkstra(sub) : run_rl(sub, params);
    return report.best_config;
  } catch (const Error& e) {
    *why_not = e.what();
    return std::nullopt;
  }
}

} // namespace

InterestingPoints interesting_points(const DesignSpace& space,
                                     const std::vector<SearchReport>& searches,
                                     const AccuracyModel& model,
                                     const SearchParams& fallback_params) {
  InterestingPoints out;
  const CostTable& table = space.table();

  auto make_point = [&](const Configuration& config, const std::string& label) {
    Metrics m = space.evaluate(config);
    ParetoPoint p;
    p.config = config;
    p.latency_ms = m.latency_ms;
    p.memory_bytes = m.memory_bytes;
    p.accuracy_pct = accuracy_of(space, config, model);
    p.label = label;
    return p;
  };

  // Reference library: the tagged one, or the only library present.
  std::string ref_lib = table.reference_library;
  if (ref_lib.empty()) {
    std::set<std::string> libs;
    for (const auto& [layer, impls] : table.entries)
      for (const auto& impl : impls) libs.insert(impl.library);
    if (libs.size() == 1) ref_lib = *libs.begin();
  }
  if (ref_lib.empty())
    raise(ErrorCode::MissingReferenceImpl,
          "cost table does not tag a reference library");

  {
    Configuration ref;
    for (int l = 0; l < space.layer_count(); ++l) {
      int pick = -1;
      for (int k = 0; k < space.impl_count(l); ++k) {
        const ImplDescriptor& impl = space.impl(l, k);
        if (impl.library == ref_lib && impl.data_type == DataType::FP32 &&
            impl.layout == Layout::NCHW) {
          pick = k;
          break;
        }
      }
      if (pick < 0)
        raise(ErrorCode::MissingReferenceImpl,
              "layer " + space.layer(l).id + " has no " + ref_lib +
                  " FP32/NCHW implementation");
      ref.assignment[space.layer(l).id] = space.impl(l, pick).id;
    }
    out.ref_fp32 = make_point(ref, "Ref-FP32");
  }

  std::string why;
  if (auto best = best_in_subspace(space.network(),
                                   restrict_table(table, DataType::FP32),
                                   fallback_params, &why)) {
    out.opt_fp32 = make_point(*best, "Opt-FP32");
  } else {
    out.warnings.push_back("Opt-FP32 point omitted: " + why);
  }
  if (auto best = best_in_subspace(space.network(),
                                   restrict_table(table, DataType::INT8),
                                   fallback_params, &why)) {
    out.int8 = make_point(*best, "INT8");
  } else {
    out.warnings.push_back("INT8 point omitted: " + why);
  }

  for (const auto& report : searches)
    out.searched.push_back(make_point(report.best_config, "searched"));

  std::vector<ParetoPoint> all;
  all.push_back(*out.ref_fp32);
  if (out.opt_fp32) all.push_back(*out.opt_fp32);
  if (out.int8) all.push_back(*out.int8);
  for (const auto& p : out.searched) all.push_back(p);

  out.front_latency_accuracy =
      pareto_front(all, FrontObjective::LatencyAccuracy);
  out.front_latency_memory = pareto_front(all, FrontObjective::LatencyMemory);
  return out;
}

} // namespace qsdse
