#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsdse/model.hpp"

namespace qsdse {

struct BnormStats {
  std::vector<double> mean;     // per channel
  std::vector<double> variance; // per channel, variance + epsilon > 0
  double epsilon = 0.0;
};

struct ScaleParams {
  std::vector<double> gamma;
  std::vector<double> beta;
};

/// Per-layer numeric payload for the static-fusion pass. Convolution /
/// fully-connected layers carry weights (one sequence per output channel)
/// and bias; bnorm and scale layers carry their statistics.
struct FoldableParams {
  struct Entry {
    std::vector<std::vector<double>> weights; // [channel][element]
    std::vector<double> bias;                 // [channel]
    std::optional<BnormStats> bnorm;
    std::optional<ScaleParams> scale;
  };
  std::map<std::string, Entry> layers;
};

/// Folds bnorm/scale layers that immediately follow a convolution or
/// fully-connected layer into that layer's weights and bias:
///   w' = w * gamma / sqrt(variance + eps)
///   b' = (b - mean) * gamma / sqrt(variance + eps) + beta
/// The fused layers are removed, depths recomputed, and downstream
/// predecessors rewired. Throws NonFoldablePlacement when a bnorm/scale
/// layer does not directly follow a foldable layer that it solely consumes.
std::pair<NetworkSpec, FoldableParams> fuse_static(const NetworkSpec& net,
                                                   const FoldableParams& params);

struct TensorLifetime {
  std::string tensor_id;
  int producer_depth = 0;
  int last_consumer_depth = 0; // >= producer_depth
  std::int64_t size_bytes = 0;
};

struct PoolPlan {
  std::map<std::string, std::int64_t> offsets;
  std::int64_t footprint_bytes = 0;
  std::set<std::string> inplace_set; // layers computing in place
};

/// Activation / reshape / flatten layers whose input tensor has exactly one
/// consumer can write onto their input allocation.
std::set<std::string> plan_inplace(const NetworkSpec& net);

/// Greedy first-fit by decreasing size: tensors with disjoint lifetimes may
/// share pool bytes, overlapping lifetimes get disjoint ranges.
PoolPlan plan_memory_pool(const std::vector<TensorLifetime>& lifetimes);

/// Output-tensor lifetimes of a network, one per layer, sized
/// output_size * elem_bytes. Layers in `inplace` alias their input: their
/// output tensor disappears and the input's lifetime is extended over the
/// alias's consumers.
std::vector<TensorLifetime> activation_lifetimes(
    const NetworkSpec& net, const std::set<std::string>& inplace = {},
    std::int64_t elem_bytes = 4);

enum class QuantMode { Symmetric, Asymmetric };

struct QuantParams {
  double scale = 1.0;
  int offset = 0; // 0 for symmetric
  int bit_width = 8;
  QuantMode mode = QuantMode::Symmetric;
};

/// Min/max calibration:
///   symmetric:  scale = max(|min|, |max|) / 127, offset 0
///   asymmetric: scale = (max - min) / 255, offset = round(-min / scale)
QuantParams quant_params_minmax(double min_value, double max_value,
                                QuantMode mode);

/// Histogram of absolute activation magnitudes: `counts.size()` uniform bins
/// over [0, max_abs].
struct Histogram {
  std::vector<std::uint64_t> counts;
  double max_abs = 0.0;
};

/// Sweeps every candidate clipping threshold (bin edge): clip the reference
/// distribution there, requantise to `levels` bins, expand back, and measure
/// the KL divergence against the clipped reference. Returns symmetric params
/// with scale = best threshold / 127; ties pick the smaller threshold. The
/// sweep is OpenMP-parallel over candidates.
QuantParams kl_calibrate(const Histogram& histogram, int levels = 256);

/// Quantise (round to nearest, clamp to the representable range),
/// dequantise, and report the max absolute error (OpenMP max-reduction).
double quantize_roundtrip(const std::vector<double>& values,
                          const QuantParams& params);

/// KL(P || Q) = sum over bins with p > 0 of p * ln(p/q); exposed for the
/// calibration tests' independent re-computation at the chosen threshold.
double kl_divergence(const std::vector<double>& reference,
                     const std::vector<double>& candidate);

/// The clip-requantise-expand step for one candidate threshold, exposed for
/// the same reason.
double kl_at_threshold(const std::vector<double>& normalized_histogram,
                       int threshold_bins, int levels);

} // namespace qsdse
