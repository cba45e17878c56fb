#include "qsdse/synth.hpp"

#include <algorithm>
#include <cmath>

#include "qsdse/rng.hpp"

namespace qsdse {

Preset preset_from_string(const std::string& s) {
  if (s == "squeezenet_like") return Preset::SqueezenetLike;
  if (s == "resnet_like") return Preset::ResnetLike;
  if (s == "mobilenet_like") return Preset::MobilenetLike;
  if (s == "chain") return Preset::Chain;
  raise(ErrorCode::UnknownPreset,
        "unknown preset '" + s +
            "' (valid: chain, squeezenet_like, resnet_like, mobilenet_like)");
}

const char* to_string(Preset p) {
  switch (p) {
    case Preset::SqueezenetLike: return "squeezenet_like";
    case Preset::ResnetLike: return "resnet_like";
    case Preset::MobilenetLike: return "mobilenet_like";
    case Preset::Chain: return "chain";
  }
  return "?";
}

namespace {

class NetBuilder {
public:
  explicit NetBuilder(std::string name) { net_.name = std::move(name); }

  std::string add(const std::string& id, LayerKind kind,
                  std::vector<std::string> preds, std::int64_t output_size,
                  std::int64_t params_size = 0) {
    LayerSpec l;
    l.id = id;
    l.kind = kind;
    l.depth = static_cast<int>(net_.layers.size());
    l.predecessors = std::move(preds);
    l.output_size = output_size;
    l.params_size = params_size;
    net_.layers.push_back(std::move(l));
    return id;
  }

  NetworkSpec take() { return std::move(net_); }

private:
  NetworkSpec net_;
};

} // namespace

NetworkSpec gen_network(Preset preset, int chain_depth) {
  switch (preset) {
    case Preset::Chain: {
      NetBuilder b("chain" + std::to_string(chain_depth));
      std::string prev = b.add("data", LayerKind::Input, {}, 150528);
      for (int i = 1; i <= chain_depth; ++i)
        prev = b.add("conv" + std::to_string(i) + "_3x3",
                     LayerKind::Convolution, {prev}, 200704, 9 * 64 * 64);
      return b.take();
    }

    case Preset::SqueezenetLike: {
      NetBuilder b("squeezenet_like");
      std::string prev = b.add("data", LayerKind::Input, {}, 150528);
      prev = b.add("conv1_3x3", LayerKind::Convolution, {prev}, 281784,
                   9 * 3 * 64);
      prev = b.add("pool1", LayerKind::Pooling, {prev}, 69696);
      for (int f = 2; f <= 4; ++f) {
        const std::string fire = "fire" + std::to_string(f);
        std::string squeeze = b.add(fire + "_squeeze1x1",
                                    LayerKind::Convolution, {prev}, 17424,
                                    16 * 64);
        std::string e1 = b.add(fire + "_expand1x1", LayerKind::Convolution,
                               {squeeze}, 69696, 16 * 64);
        std::string e3 = b.add(fire + "_expand3x3", LayerKind::Convolution,
                               {squeeze}, 69696, 9 * 16 * 64);
        prev = b.add(fire + "_concat", LayerKind::Concat, {e1, e3}, 139392);
      }
      prev = b.add("conv_final_1x1", LayerKind::Convolution, {prev}, 169000,
                   128 * 1000);
      prev = b.add("pool_final", LayerKind::Pooling, {prev}, 1000);
      b.add("softmax", LayerKind::Softmax, {prev}, 1000);
      return b.take();
    }

    case Preset::ResnetLike: {
      NetBuilder b("resnet_like");
      std::string prev = b.add("data", LayerKind::Input, {}, 150528);
      prev = b.add("conv1_3x3", LayerKind::Convolution, {prev}, 802816,
                   9 * 3 * 64);
      for (int k = 1; k <= 3; ++k) {
        const std::string block = "block" + std::to_string(k);
        std::string a = b.add(block + "_conv_a_3x3", LayerKind::Convolution,
                              {prev}, 401408, 9 * 64 * 64);
        std::string r = b.add(block + "_relu", LayerKind::Activation, {a},
                              401408);
        std::string c = b.add(block + "_conv_b_3x3", LayerKind::Convolution,
                              {r}, 401408, 9 * 64 * 64);
        prev = b.add(block + "_add", LayerKind::Elementwise, {c, prev},
                     401408);
      }
      prev = b.add("pool_final", LayerKind::Pooling, {prev}, 2048);
      prev = b.add("fc", LayerKind::FullyConnected, {prev}, 1000,
                   2048 * 1000);
      b.add("softmax", LayerKind::Softmax, {prev}, 1000);
      return b.take();
    }

    case Preset::MobilenetLike: {
      NetBuilder b("mobilenet_like");
      std::string prev = b.add("data", LayerKind::Input, {}, 150528);
      prev = b.add("conv1_3x3", LayerKind::Convolution, {prev}, 401408,
                   9 * 3 * 32);
      for (int k = 1; k <= 5; ++k) {
        const std::string stage = "dw" + std::to_string(k);
        prev = b.add(stage + "_depthwise", LayerKind::DepthwiseConvolution,
                     {prev}, 200704, 9 * 64);
        prev = b.add(stage + "_pointwise_1x1", LayerKind::Convolution, {prev},
                     200704, 64 * 64);
        prev = b.add(stage + "_relu", LayerKind::Activation, {prev}, 200704);
      }
      prev = b.add("pool_final", LayerKind::Pooling, {prev}, 1024);
      prev = b.add("fc", LayerKind::FullyConnected, {prev}, 1000,
                   1024 * 1000);
      b.add("softmax", LayerKind::Softmax, {prev}, 1000);
      return b.take();
    }
  }
  raise(ErrorCode::UnknownPreset, "unhandled preset");
}

CostProfile CostProfile::defaults(std::uint64_t seed) {
  CostProfile p;
  p.seed = seed;
  p.base_ms = {
      {LayerKind::Convolution, 4.0},
      {LayerKind::DepthwiseConvolution, 2.5},
      {LayerKind::FullyConnected, 3.0},
      {LayerKind::Pooling, 0.6},
      {LayerKind::Activation, 0.3},
      {LayerKind::Bnorm, 0.4},
      {LayerKind::Scale, 0.3},
      {LayerKind::Elementwise, 0.4},
      {LayerKind::Concat, 0.5},
      {LayerKind::Reshape, 0.05},
      {LayerKind::Flatten, 0.05},
      {LayerKind::Softmax, 0.2},
      {LayerKind::Input, 0.0},
      {LayerKind::Output, 0.0},
  };
  return p;
}

namespace {

bool is_winograd_eligible(const LayerSpec& l) {
  // The presets put the kernel size in the layer id; fast convolutions exist
  // for the 3x3 case only.
  return l.kind == LayerKind::Convolution &&
         l.id.find("3x3") != std::string::npos;
}

std::int64_t impl_memory(const LayerSpec& l, DataType dtype,
                         double working_factor) {
  const std::int64_t elem = dtype == DataType::INT8 ? 1 : 4;
  const double working =
      static_cast<double>(l.output_size) * elem * working_factor;
  return l.params_size * elem + static_cast<std::int64_t>(working);
}

} // namespace

CostTable gen_cost_table(const NetworkSpec& net, const CostProfile& profile) {
  RandomSource rng(profile.seed);
  CostTable table;
  table.network_name = net.name;
  table.reference_library = profile.reference_library;

  auto draw = [&](const CostProfile::Range& r) {
    return rng.next_range(r.lo, r.hi);
  };

  for (const auto& l : net.layers) {
    const double base = profile.base_ms.count(l.kind)
                            ? profile.base_ms.at(l.kind)
                            : 1.0;
    const double size_factor =
        std::max(0.05, (static_cast<double>(l.output_size) +
                        static_cast<double>(l.params_size)) /
                           1e5);
    const double jitter =
        1.0 + profile.jitter * (2.0 * rng.next_double() - 1.0);
    const double ref_latency = base * size_factor * jitter;

    std::vector<ImplDescriptor> impls;

    ImplDescriptor ref;
    ref.id = "ref_gemm_fp32_nchw";
    ref.library = profile.reference_library;
    ref.algorithm = l.kind == LayerKind::Convolution ||
                            l.kind == LayerKind::FullyConnected
                        ? "gemm"
                        : "direct";
    ref.algorithm_config = "im2row";
    ref.data_type = DataType::FP32;
    ref.layout = Layout::NCHW;
    ref.core = Core::CPU;
    ref.latency_ms = ref_latency;
    ref.memory_bytes = impl_memory(l, DataType::FP32, 1.0);
    impls.push_back(ref);

    if (l.kind != LayerKind::Input) {
      ImplDescriptor nhwc = ref;
      nhwc.id = "opt_fp32_nhwc";
      nhwc.library = profile.tuned_library;
      nhwc.algorithm_config = "vectorised";
      nhwc.layout = Layout::NHWC;
      nhwc.latency_ms = ref_latency / draw(profile.nhwc_uplift);
      impls.push_back(nhwc);
    } else {
      // Input data can be presented in either layout at no cost.
      ImplDescriptor nhwc = ref;
      nhwc.id = "ref_fp32_nhwc";
      nhwc.layout = Layout::NHWC;
      impls.push_back(nhwc);
    }

    if (is_winograd_eligible(l)) {
      ImplDescriptor fast = ref;
      fast.id = "fast_fp32_nhwc";
      fast.library = profile.tuned_library;
      fast.algorithm = "winograd";
      fast.algorithm_config = "f2x2_3x3";
      fast.layout = Layout::NHWC;
      fast.latency_ms = ref_latency / draw(profile.fast_fp32_uplift);
      fast.memory_bytes =
          impl_memory(l, DataType::FP32, profile.winograd_memory_factor);
      fast.accuracy_delta_pp = draw(profile.fast_fp32_delta_pp);
      impls.push_back(fast);
    }

    if (l.kind == LayerKind::DepthwiseConvolution) {
      ImplDescriptor dw = ref;
      dw.id = "dwopt_fp32_nhwc";
      dw.library = profile.tuned_library;
      dw.algorithm = "dwconv";
      dw.algorithm_config = "simd";
      dw.layout = Layout::NHWC;
      dw.latency_ms = ref_latency / draw(profile.depthwise_uplift);
      impls.push_back(dw);
    }

    {
      ImplDescriptor int8 = ref;
      int8.id = "int8_nhwc";
      int8.library =
          l.kind == LayerKind::Input ? profile.reference_library
                                     : profile.tuned_library;
      int8.algorithm_config = "requant";
      int8.data_type = DataType::INT8;
      int8.layout = Layout::NHWC;
      int8.latency_ms =
          l.kind == LayerKind::Input
              ? 0.0
              : ref_latency / draw(profile.int8_uplift);
      int8.memory_bytes = impl_memory(l, DataType::INT8, 1.0);
      int8.accuracy_delta_pp =
          l.kind == LayerKind::Input ? 0.0
          : l.kind == LayerKind::DepthwiseConvolution
              ? draw(profile.int8_depthwise_delta_pp)
              : draw(profile.int8_delta_pp);
      impls.push_back(int8);
    }

    table.entries[l.id] = std::move(impls);
  }

  // Attribute conversion rules: both-mismatch pairs first (first match
  // wins), then single-attribute pairs.
  const std::vector<DataType> dtypes = {DataType::FP32, DataType::INT8};
  const std::vector<Layout> layouts = {Layout::NCHW, Layout::NHWC};
  for (DataType da : dtypes)
    for (DataType db : dtypes)
      for (Layout la : layouts)
        for (Layout lb : layouts) {
          if (da == db && la == lb) continue;
          ConversionRule rule;
          rule.from.data_type = da;
          rule.from.layout = la;
          rule.to.data_type = db;
          rule.to.layout = lb;
          double penalty = 0.0;
          if (da != db) penalty += profile.dtype_penalty_ms;
          if (la != lb) penalty += profile.layout_penalty_ms;
          rule.penalty_ms = penalty;
          table.conversions.push_back(rule);
        }
  return table;
}

CostTable ingest_measurements(const std::vector<MeasurementRecord>& records,
                              std::vector<ConversionRule> fallback_rules) {
  struct Pooled {
    ImplDescriptor impl;
    std::vector<double> runs;
  };
  // Key preserves first-seen order for deterministic output.
  std::vector<std::pair<std::string, std::string>> order; // (layer, impl id)
  std::map<std::pair<std::string, std::string>, Pooled> pooled;

  for (const auto& rec : records) {
    if (rec.warm_up_count >= static_cast<int>(rec.runs_ms.size()))
      raise(ErrorCode::NoRunsAfterWarmup,
            "record for " + rec.layer_id + " has no runs after warm-up");

    ImplDescriptor impl;
    impl.library = rec.library;
    impl.algorithm = rec.algorithm;
    impl.algorithm_config = rec.algorithm_config;
    impl.data_type = rec.data_type;
    impl.layout = rec.layout;
    impl.core = rec.core;
    impl.memory_bytes = rec.memory_bytes;
    impl.id = rec.library + "." + rec.algorithm +
              (rec.algorithm_config.empty() ? "" : "." + rec.algorithm_config) +
              "." + to_string(rec.data_type) + "." + to_string(rec.layout) +
              "." + to_string(rec.core);

    const auto key = std::make_pair(rec.layer_id, impl.id);
    auto it = pooled.find(key);
    if (it == pooled.end()) {
      it = pooled.emplace(key, Pooled{impl, {}}).first;
      order.push_back(key);
    } else if (it->second.impl.memory_bytes != rec.memory_bytes) {
      raise(ErrorCode::ConflictingDuplicates,
            "records for " + rec.layer_id + "/" + impl.id +
                " disagree on memory");
    }
    it->second.runs.insert(it->second.runs.end(),
                           rec.runs_ms.begin() + rec.warm_up_count,
                           rec.runs_ms.end());
  }

  CostTable table;
  table.conversions = std::move(fallback_rules);
  for (const auto& key : order) {
    Pooled& p = pooled.at(key);
    double sum = 0.0;
    for (double r : p.runs) sum += r;
    p.impl.latency_ms = sum / static_cast<double>(p.runs.size());
    table.entries[key.first].push_back(p.impl);
  }
  return table;
}

} // namespace qsdse
