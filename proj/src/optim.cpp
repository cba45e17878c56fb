#include "qsdse/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qsdse {

namespace {

bool foldable_root(LayerKind k) {
  return k == LayerKind::Convolution ||
         k == LayerKind::DepthwiseConvolution ||
         k == LayerKind::FullyConnected;
}

// Multiplies channel c of the entry by factor[c] and shifts the bias:
//   w'_c = w_c * factor_c,  b'_c = b_c * factor_c + shift_c
// Folding a bnorm uses factor = 1/sqrt(var+eps), shift = -mean*factor;
// folding a scale uses factor = gamma, shift = beta. Composing the two gives
// the usual w*gamma/sqrt(var+eps) fold.
void apply_affine_fold(FoldableParams::Entry& entry,
                       const std::vector<double>& factor,
                       const std::vector<double>& shift,
                       const std::string& at) {
  const std::size_t channels = factor.size();
  if (!entry.weights.empty() && entry.weights.size() != channels)
    raise(ErrorCode::NonFoldablePlacement,
          "channel mismatch while folding into " + at);
  if (entry.bias.empty()) entry.bias.assign(channels, 0.0);
  if (entry.bias.size() != channels)
    raise(ErrorCode::NonFoldablePlacement,
          "bias channel mismatch while folding into " + at);

  for (std::size_t c = 0; c < entry.weights.size(); ++c)
    for (double& w : entry.weights[c]) w *= factor[c];
  for (std::size_t c = 0; c < channels; ++c)
    entry.bias[c] = entry.bias[c] * factor[c] + shift[c];
}

} // namespace

std::pair<NetworkSpec, FoldableParams> fuse_static(
    const NetworkSpec& net, const FoldableParams& params) {
  std::map<std::string, int> consumer_count;
  std::map<std::string, const LayerSpec*> by_id;
  for (const auto& l : net.layers) {
    by_id[l.id] = &l;
    for (const auto& p : l.predecessors) consumer_count[p]++;
  }

  FoldableParams folded = params;
  std::map<std::string, std::string> rewire; // removed id -> surviving root
  auto resolve = [&](std::string id) {
    for (auto it = rewire.find(id); it != rewire.end(); it = rewire.find(id))
      id = it->second;
    return id;
  };

  std::vector<LayerSpec> kept;
  std::vector<const LayerSpec*> ordered(net.layers.size());
  for (const auto& l : net.layers) ordered[l.depth] = &l;

  for (const LayerSpec* lp : ordered) {
    const LayerSpec& l = *lp;
    if (l.kind != LayerKind::Bnorm && l.kind != LayerKind::Scale) {
      kept.push_back(l);
      continue;
    }

    if (l.predecessors.size() != 1)
      raise(ErrorCode::NonFoldablePlacement,
            l.id + " must have exactly one predecessor");
    const std::string& pred = l.predecessors[0];
    if (consumer_count[pred] != 1)
      raise(ErrorCode::NonFoldablePlacement,
            l.id + " cannot fold: " + pred + " has multiple consumers");
    const std::string root = resolve(pred);
    if (!foldable_root(by_id.at(root)->kind))
      raise(ErrorCode::NonFoldablePlacement,
            l.id + " does not follow a convolution or fully-connected layer");

    auto& root_entry = folded.layers[root];
    auto self = folded.layers.find(l.id);
    if (l.kind == LayerKind::Bnorm) {
      if (self == folded.layers.end() || !self->second.bnorm)
        raise(ErrorCode::NonFoldablePlacement,
              "no bnorm statistics for " + l.id);
      const BnormStats& st = *self->second.bnorm;
      if (st.variance.size() != st.mean.size())
        raise(ErrorCode::NonFoldablePlacement,
              "mean/variance size mismatch at " + l.id);
      std::vector<double> factor(st.mean.size());
      std::vector<double> shift(st.mean.size());
      for (std::size_t c = 0; c < st.mean.size(); ++c) {
        const double denom = st.variance[c] + st.epsilon;
        if (!(denom > 0.0))
          raise(ErrorCode::DegenerateRange,
                "variance + epsilon must be positive at " + l.id);
        factor[c] = 1.0 / std::sqrt(denom);
        shift[c] = -st.mean[c] * factor[c];
      }
      apply_affine_fold(root_entry, factor, shift, root);
    } else {
      if (self == folded.layers.end() || !self->second.scale)
        raise(ErrorCode::NonFoldablePlacement,
              "no scale parameters for " + l.id);
      const ScaleParams& sc = *self->second.scale;
      if (sc.beta.size() != sc.gamma.size())
        raise(ErrorCode::NonFoldablePlacement,
              "gamma/beta size mismatch at " + l.id);
      apply_affine_fold(root_entry, sc.gamma, sc.beta, root);
    }
    folded.layers.erase(l.id);
    rewire[l.id] = root;
  }

  NetworkSpec out;
  out.name = net.name;
  for (std::size_t d = 0; d < kept.size(); ++d) {
    LayerSpec l = kept[d];
    l.depth = static_cast<int>(d);
    for (auto& p : l.predecessors) p = resolve(p);
    out.layers.push_back(std::move(l));
  }
  return {std::move(out), std::move(folded)};
}

std::set<std::string> plan_inplace(const NetworkSpec& net) {
  std::map<std::string, int> consumer_count;
  for (const auto& l : net.layers)
    for (const auto& p : l.predecessors) consumer_count[p]++;

  std::set<std::string> inplace;
  for (const auto& l : net.layers) {
    const bool eligible_kind = l.kind == LayerKind::Activation ||
                               l.kind == LayerKind::Reshape ||
                               l.kind == LayerKind::Flatten;
    if (eligible_kind && l.predecessors.size() == 1 &&
        consumer_count[l.predecessors[0]] == 1)
      inplace.insert(l.id);
  }
  return inplace;
}

PoolPlan plan_memory_pool(const std::vector<TensorLifetime>& lifetimes) {
  for (const auto& t : lifetimes)
    if (t.producer_depth > t.last_consumer_depth || t.size_bytes < 0)
      raise(ErrorCode::Io, "malformed lifetime for tensor " + t.tensor_id);

  std::vector<const TensorLifetime*> order;
  for (const auto& t : lifetimes) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const TensorLifetime* a, const TensorLifetime* b) {
              if (a->size_bytes != b->size_bytes)
                return a->size_bytes > b->size_bytes; // big first
              if (a->producer_depth != b->producer_depth)
                return a->producer_depth < b->producer_depth;
              return a->tensor_id < b->tensor_id;
            });

  struct Placed {
    const TensorLifetime* tensor;
    std::int64_t offset;
  };
  std::vector<Placed> placed;

  PoolPlan plan;
  for (const TensorLifetime* t : order) {
    // Intervals blocked by already-placed tensors alive at the same time.
    std::vector<std::pair<std::int64_t, std::int64_t>> blocked;
    for (const auto& p : placed)
      if (p.tensor->producer_depth <= t->last_consumer_depth &&
          t->producer_depth <= p.tensor->last_consumer_depth)
        blocked.emplace_back(p.offset, p.offset + p.tensor->size_bytes);
    std::sort(blocked.begin(), blocked.end());

    std::int64_t offset = 0;
    for (const auto& [lo, hi] : blocked) {
      if (offset + t->size_bytes <= lo) break;
      offset = std::max(offset, hi);
    }
    placed.push_back({t, offset});
    plan.offsets[t->tensor_id] = offset;
    plan.footprint_bytes =
        std::max(plan.footprint_bytes, offset + t->size_bytes);
  }
  return plan;
}

std::vector<TensorLifetime> activation_lifetimes(
    const NetworkSpec& net, const std::set<std::string>& inplace,
    std::int64_t elem_bytes) {
  std::map<std::string, const LayerSpec*> by_id;
  for (const auto& l : net.layers) by_id[l.id] = &l;

  // An in-place layer writes onto its input's allocation; follow the alias
  // chain up to the owning (allocating) layer.
  auto owner_of = [&](const LayerSpec* l) {
    while (inplace.count(l->id)) l = by_id.at(l->predecessors[0]);
    return l;
  };

  std::map<std::string, TensorLifetime> tensors; // owner id -> lifetime
  for (const auto& l : net.layers) {
    const LayerSpec* owner = owner_of(&l);
    auto [it, fresh] = tensors.try_emplace(owner->id);
    TensorLifetime& t = it->second;
    if (fresh) {
      t.tensor_id = owner->id;
      t.producer_depth = owner->depth;
      t.last_consumer_depth = owner->depth;
      t.size_bytes = owner->output_size * elem_bytes;
    }
    // Any member of the alias group keeps the bytes alive while it writes,
    // and so does every reader of any member.
    t.last_consumer_depth = std::max(t.last_consumer_depth, l.depth);
    t.size_bytes = std::max(t.size_bytes, l.output_size * elem_bytes);
  }
  for (const auto& l : net.layers) {
    for (const auto& p : l.predecessors) {
      const LayerSpec* owner = owner_of(by_id.at(p));
      TensorLifetime& t = tensors.at(owner->id);
      t.last_consumer_depth = std::max(t.last_consumer_depth, l.depth);
    }
  }

  std::vector<TensorLifetime> out;
  for (const auto& l : net.layers) {
    auto it = tensors.find(l.id);
    if (it != tensors.end()) out.push_back(it->second);
  }
  return out;
}

QuantParams quant_params_minmax(double min_value, double max_value,
                                QuantMode mode) {
  if (min_value > max_value)
    raise(ErrorCode::DegenerateRange, "min exceeds max");
  if (min_value == 0.0 && max_value == 0.0)
    raise(ErrorCode::DegenerateRange, "all-zero range");

  QuantParams params;
  params.mode = mode;
  if (mode == QuantMode::Symmetric) {
    const double bound = std::max(std::abs(min_value), std::abs(max_value));
    params.scale = bound / 127.0;
    params.offset = 0;
  } else {
    const double range = max_value - min_value;
    if (range == 0.0)
      raise(ErrorCode::DegenerateRange, "zero-width asymmetric range");
    params.scale = range / 255.0;
    params.offset = static_cast<int>(std::lround(-min_value / params.scale));
  }
  return params;
}

double kl_divergence(const std::vector<double>& reference,
                     const std::vector<double>& candidate) {
  double kl = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (reference[i] > 0.0) kl += reference[i] * std::log(reference[i] / candidate[i]);
  return kl;
}

double kl_at_threshold(const std::vector<double>& normalized_histogram,
                       int threshold_bins, int levels) {
  const int t = threshold_bins;
  const auto& hist = normalized_histogram;

  // Reference: the clipped distribution, with everything beyond the
  // threshold collapsed into the last kept bin.
  std::vector<double> ref(hist.begin(), hist.begin() + t);
  for (std::size_t j = t; j < hist.size(); ++j) ref[t - 1] += hist[j];

  // Candidate: requantise the unclipped slice (no outlier mass) into
  // `levels` coarse bins and expand back, keeping zero bins at zero. Each
  // fine bin straddles at most two coarse bins since t >= levels; the
  // boundary bin is split proportionally.
  const double per_level = static_cast<double>(t) / levels;
  std::vector<double> mass(levels, 0.0);
  std::vector<double> occupancy(levels, 0.0); // fractional nonzero-bin count
  auto split = [&](int i, auto&& take) {
    const int jlo = std::min(static_cast<int>(i / per_level), levels - 1);
    const int jhi =
        std::min(static_cast<int>((i + 1) / per_level), levels - 1);
    if (jlo == jhi) {
      take(jlo, 1.0);
    } else {
      const double boundary = jhi * per_level;
      take(jlo, boundary - i);
      take(jhi, (i + 1) - boundary);
    }
  };
  for (int i = 0; i < t; ++i) {
    if (hist[i] == 0.0) continue;
    split(i, [&](int j, double f) {
      mass[j] += f * hist[i];
      occupancy[j] += f;
    });
  }
  std::vector<double> expanded(t, 0.0);
  for (int i = 0; i < t; ++i) {
    if (hist[i] == 0.0) continue; // empty source bins stay empty
    split(i, [&](int j, double f) {
      if (occupancy[j] > 0.0) expanded[i] += f * mass[j] / occupancy[j];
    });
  }

  // Epsilon-smooth and renormalise both before comparing.
  const double eps = 1e-4;
  double ref_sum = 0.0, exp_sum = 0.0;
  for (int i = 0; i < t; ++i) {
    ref[i] += eps;
    expanded[i] += eps;
    ref_sum += ref[i];
    exp_sum += expanded[i];
  }
  for (int i = 0; i < t; ++i) {
    ref[i] /= ref_sum;
    expanded[i] /= exp_sum;
  }
  return kl_divergence(ref, expanded);
}

QuantParams kl_calibrate(const Histogram& histogram, int levels) {
  const int nbins = static_cast<int>(histogram.counts.size());
  std::uint64_t total = 0;
  for (auto c : histogram.counts) total += c;
  if (nbins == 0 || total == 0)
    raise(ErrorCode::EmptyHistogram, "empty histogram");
  if (nbins < levels)
    raise(ErrorCode::EmptyHistogram,
          "histogram needs at least " + std::to_string(levels) + " bins");
  if (!(histogram.max_abs > 0.0))
    raise(ErrorCode::EmptyHistogram, "histogram range must be positive");

  std::vector<double> normalized(nbins);
  for (int i = 0; i < nbins; ++i)
    normalized[i] =
        static_cast<double>(histogram.counts[i]) / static_cast<double>(total);

  // Candidate thresholds are the bin edges t = levels .. nbins; the last one
  // keeps the full range (no clipping).
  const int candidates = nbins - levels + 1;
  std::vector<double> divergence(candidates);

  #pragma omp parallel for schedule(static)
  for (int c = 0; c < candidates; ++c)
    divergence[c] = kl_at_threshold(normalized, levels + c, levels);

  int best = 0;
  for (int c = 1; c < candidates; ++c)
    if (divergence[c] < divergence[best]) best = c; // ties keep the smaller t

  const double bin_width = histogram.max_abs / nbins;
  QuantParams params;
  params.mode = QuantMode::Symmetric;
  params.offset = 0;
  params.scale = (levels + best) * bin_width / 127.0;
  return params;
}

double quantize_roundtrip(const std::vector<double>& values,
                          const QuantParams& params) {
  const double lo = params.mode == QuantMode::Symmetric ? -127.0 : 0.0;
  const double hi = params.mode == QuantMode::Symmetric ? 127.0 : 255.0;
  const double scale = params.scale;
  const double offset = params.offset;
  const std::int64_t n = static_cast<std::int64_t>(values.size());

  double max_error = 0.0;
  #pragma omp parallel for schedule(static) reduction(max : max_error)
  for (std::int64_t i = 0; i < n; ++i) {
    const double q =
        std::clamp(std::round(values[i] / scale) + offset, lo, hi);
    const double back = (q - offset) * scale;
    max_error = std::max(max_error, std::abs(values[i] - back));
  }
  return max_error;
}

} // namespace qsdse
