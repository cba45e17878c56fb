#pragma once

#include <string>
#include <vector>

#include "qsdse/model.hpp"
#include "qsdse/rng.hpp"

namespace qsdse::test {

inline LayerSpec layer(const std::string& id, LayerKind kind, int depth,
                       std::vector<std::string> preds,
                       std::int64_t output_size = 1000,
                       std::int64_t params_size = 0) {
  LayerSpec l;
  l.id = id;
  l.kind = kind;
  l.depth = depth;
  l.predecessors = std::move(preds);
  l.output_size = output_size;
  l.params_size = params_size;
  return l;
}

inline ImplDescriptor impl(const std::string& id, double latency,
                           DataType dtype = DataType::FP32,
                           Layout layout = Layout::NCHW,
                           std::int64_t memory = 0) {
  ImplDescriptor d;
  d.id = id;
  d.library = "testlib";
  d.algorithm = "gemm";
  d.data_type = dtype;
  d.layout = layout;
  d.core = Core::CPU;
  d.latency_ms = latency;
  d.memory_bytes = memory;
  return d;
}

// The 3-layer local-minimum fixture: the fastest middle impl ("b", 4 ms)
// carries 2 ms conversion penalties on both sides, so the greedy-by-latency
// trace lands on 12 ms while the global optimum is the all-"a" path at 9 ms.
inline DesignSpace local_minimum_space() {
  NetworkSpec net;
  net.name = "three_layer";
  net.layers = {layer("L1", LayerKind::Input, 0, {}),
                layer("L2", LayerKind::Convolution, 1, {"L1"}),
                layer("L3", LayerKind::Softmax, 2, {"L2"})};

  CostTable table;
  table.network_name = net.name;
  table.entries["L1"] = {impl("a", 2.0), impl("b", 3.0, DataType::INT8, Layout::NHWC)};
  table.entries["L2"] = {impl("a", 5.0), impl("b", 4.0, DataType::INT8, Layout::NHWC)};
  table.entries["L3"] = {impl("a", 2.0), impl("b", 3.0, DataType::INT8, Layout::NHWC)};

  ConversionRule fwd;
  fwd.from.data_type = DataType::FP32;
  fwd.to.data_type = DataType::INT8;
  fwd.penalty_ms = 2.0;
  ConversionRule back;
  back.from.data_type = DataType::INT8;
  back.to.data_type = DataType::FP32;
  back.penalty_ms = 2.0;
  table.conversions = {fwd, back};
  return DesignSpace::build(net, table);
}

// Two-layer trap: the penalty-aware greedy eats the 2.0 first layer, pays 6
// for the a->b conversion (11 ms total) and never sees the 5.5 ms b,b path.
inline DesignSpace greedy_trap_space() {
  NetworkSpec net;
  net.name = "trap";
  net.layers = {layer("L1", LayerKind::Input, 0, {}),
                layer("L2", LayerKind::Convolution, 1, {"L1"})};

  CostTable table;
  table.network_name = net.name;
  table.entries["L1"] = {impl("a", 2.0), impl("b", 2.5)};
  table.entries["L2"] = {impl("a", 10.0), impl("b", 3.0)};

  EdgeOverride ov;
  ov.pred_layer = "L1";
  ov.layer = "L2";
  ov.from_impl = "a";
  ov.to_impl = "b";
  ov.penalty_ms = 6.0;
  table.edge_overrides = {ov};
  return DesignSpace::build(net, table);
}

// Seeded random chain space, depth <= 8, branching <= 5, mixed attributes,
// random penalties including some FORBIDDEN overrides. Impl 0 of every layer
// is FP32/NCHW and never forbidden, so a feasible path always exists.
inline DesignSpace random_chain_space(std::uint64_t seed) {
  RandomSource rng(seed);
  const int depth = 2 + static_cast<int>(rng.next_index(7)); // 2..8

  NetworkSpec net;
  net.name = "random_chain_" + std::to_string(seed);
  CostTable table;
  table.network_name = net.name;

  std::vector<int> counts(depth);
  std::string prev;
  for (int d = 0; d < depth; ++d) {
    const std::string id = "l" + std::to_string(d);
    net.layers.push_back(layer(id, d == 0 ? LayerKind::Input
                                          : LayerKind::Convolution,
                               d, d == 0 ? std::vector<std::string>{}
                                         : std::vector<std::string>{prev}));
    counts[d] = 1 + static_cast<int>(rng.next_index(5)); // 1..5
    std::vector<ImplDescriptor> impls;
    for (int k = 0; k < counts[d]; ++k) {
      DataType dt = k == 0 ? DataType::FP32
                           : (rng.next_index(2) ? DataType::INT8
                                                : DataType::FP32);
      Layout la = k == 0 ? Layout::NCHW
                         : (rng.next_index(2) ? Layout::NHWC : Layout::NCHW);
      impls.push_back(impl("i" + std::to_string(k),
                           0.5 + 9.5 * rng.next_double(), dt, la));
    }
    table.entries[id] = std::move(impls);
    prev = id;
  }

  const double dtype_pen = 3.0 * rng.next_double();
  const double layout_pen = 2.0 * rng.next_double();
  for (DataType da : {DataType::FP32, DataType::INT8})
    for (DataType db : {DataType::FP32, DataType::INT8})
      for (Layout la : {Layout::NCHW, Layout::NHWC})
        for (Layout lb : {Layout::NCHW, Layout::NHWC}) {
          if (da == db && la == lb) continue;
          ConversionRule rule;
          rule.from.data_type = da;
          rule.from.layout = la;
          rule.to.data_type = db;
          rule.to.layout = lb;
          rule.penalty_ms = (da != db ? dtype_pen : 0.0) +
                            (la != lb ? layout_pen : 0.0);
          table.conversions.push_back(rule);
        }

  for (int d = 1; d < depth; ++d) {
    if (rng.next_double() < 0.3) {
      const int j = static_cast<int>(rng.next_index(counts[d - 1]));
      const int k = static_cast<int>(rng.next_index(counts[d]));
      if (j == 0 && k == 0) continue; // keep the reference path alive
      EdgeOverride ov;
      ov.pred_layer = "l" + std::to_string(d - 1);
      ov.layer = "l" + std::to_string(d);
      ov.from_impl = "i" + std::to_string(j);
      ov.to_impl = "i" + std::to_string(k);
      ov.penalty_ms = kForbidden;
      table.edge_overrides.push_back(ov);
    }
  }

  return DesignSpace::build(net, table);
}

// 60-layer, 7-impl chain for the considered-state accounting checks.
inline DesignSpace wide_chain_space(std::uint64_t seed = 17) {
  RandomSource rng(seed);
  NetworkSpec net;
  net.name = "wide_chain";
  CostTable table;
  table.network_name = net.name;

  std::string prev;
  for (int d = 0; d < 60; ++d) {
    const std::string id = "l" + std::to_string(d);
    net.layers.push_back(layer(id, d == 0 ? LayerKind::Input
                                          : LayerKind::Convolution,
                               d, d == 0 ? std::vector<std::string>{}
                                         : std::vector<std::string>{prev}));
    std::vector<ImplDescriptor> impls;
    for (int k = 0; k < 7; ++k)
      impls.push_back(impl("i" + std::to_string(k),
                           1.0 + 9.0 * rng.next_double(),
                           k % 2 ? DataType::INT8 : DataType::FP32,
                           k % 3 ? Layout::NHWC : Layout::NCHW));
    table.entries[id] = std::move(impls);
    prev = id;
  }

  ConversionRule dtype_rule;
  dtype_rule.from.data_type = DataType::FP32;
  dtype_rule.to.data_type = DataType::INT8;
  dtype_rule.penalty_ms = 0.4;
  ConversionRule dtype_back;
  dtype_back.from.data_type = DataType::INT8;
  dtype_back.to.data_type = DataType::FP32;
  dtype_back.penalty_ms = 0.4;
  table.conversions = {dtype_rule, dtype_back};
  return DesignSpace::build(net, table);
}

} // namespace qsdse::test
