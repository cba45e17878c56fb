#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qsdse/model.hpp"

namespace qsdse {

enum class Preset { SqueezenetLike, ResnetLike, MobilenetLike, Chain };

Preset preset_from_string(const std::string& s);
const char* to_string(Preset p);

/// Deterministic topology fixtures. chain(D) is an input layer followed by
/// D 3x3 convolutions; squeezenet_like branches into concats,
/// resnet_like adds residual elementwise layers, mobilenet_like stacks
/// depthwise/pointwise pairs (a pure chain).
NetworkSpec gen_network(Preset preset, int chain_depth = 8);

/// Distribution bounds for the synthetic cost generator. Uplifts are the
/// latency ratio of a variant over the reference GEMM-FP32-NCHW impl;
/// defaults follow the reported per-layer speedup envelopes (fast FP32
/// convolutions up to 2.5-3.9x, INT8 no higher than 1.7x, NHWC around
/// an 8% net gain).
struct CostProfile {
  struct Range {
    double lo = 1.0;
    double hi = 1.0;
  };

  std::map<LayerKind, double> base_ms; // per-kind latency scale (defaulted)
  Range fast_fp32_uplift{1.2, 2.5};
  Range int8_uplift{0.9, 1.7};
  Range nhwc_uplift{0.95, 1.25};
  Range depthwise_uplift{1.5, 3.5};
  Range int8_delta_pp{0.05, 0.6};
  Range int8_depthwise_delta_pp{2.0, 8.0};
  Range fast_fp32_delta_pp{0.0, 0.2};
  double dtype_penalty_ms = 0.25;
  double layout_penalty_ms = 0.12;
  double jitter = 0.1; // +/- fraction applied to the reference latency
  double winograd_memory_factor = 1.5;
  std::string reference_library = "openblas";
  std::string tuned_library = "acclib";
  std::uint64_t seed = 0;

  static CostProfile defaults(std::uint64_t seed);
};

/// Emits, per layer, the reference impl plus NHWC / fast-FP32 (3x3 convs
/// only) / INT8 / depthwise-optimised variants with latencies drawn from the
/// profile, and attribute conversion rules for dtype/layout mismatches.
/// Same (net, profile) always produces the identical table.
CostTable gen_cost_table(const NetworkSpec& net, const CostProfile& profile);

/// One benchmarked (layer, impl) sample: raw per-run latencies with the
/// leading warm-up runs still included.
struct MeasurementRecord {
  std::string layer_id;
  std::string library;
  std::string algorithm;
  std::string algorithm_config;
  DataType data_type = DataType::FP32;
  Layout layout = Layout::NCHW;
  Core core = Core::CPU;
  std::int64_t memory_bytes = 0;
  int warm_up_count = 0;
  std::vector<double> runs_ms;
};

/// Aggregates measurements into a cost table: drops each record's warm-up
/// runs, pools duplicate (layer, impl) records, and stores the arithmetic
/// mean latency. Conversion penalties that were never measured fall back to
/// the supplied attribute rules.
CostTable ingest_measurements(const std::vector<MeasurementRecord>& records,
                              std::vector<ConversionRule> fallback_rules = {});

} // namespace qsdse
