#include "qsdse/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace qsdse {

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Convolution: return "convolution";
    case LayerKind::DepthwiseConvolution: return "depthwise_convolution";
    case LayerKind::FullyConnected: return "fully_connected";
    case LayerKind::Pooling: return "pooling";
    case LayerKind::Activation: return "activation";
    case LayerKind::Bnorm: return "bnorm";
    case LayerKind::Scale: return "scale";
    case LayerKind::Elementwise: return "elementwise";
    case LayerKind::Concat: return "concat";
    case LayerKind::Reshape: return "reshape";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Input: return "input";
    case LayerKind::Output: return "output";
  }
  return "?";
}

const char* to_string(DataType t) {
  switch (t) {
    case DataType::FP32: return "FP32";
    case DataType::FP16: return "FP16";
    case DataType::INT8: return "INT8";
  }
  return "?";
}

const char* to_string(Layout l) {
  return l == Layout::NCHW ? "NCHW" : "NHWC";
}

const char* to_string(Core c) {
  switch (c) {
    case Core::CPU: return "CPU";
    case Core::GPU: return "GPU";
    case Core::FPGA: return "FPGA";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  static const std::map<std::string, LayerKind> m = {
      {"convolution", LayerKind::Convolution},
      {"depthwise_convolution", LayerKind::DepthwiseConvolution},
      {"fully_connected", LayerKind::FullyConnected},
      {"pooling", LayerKind::Pooling},
      {"activation", LayerKind::Activation},
      {"bnorm", LayerKind::Bnorm},
      {"scale", LayerKind::Scale},
      {"elementwise", LayerKind::Elementwise},
      {"concat", LayerKind::Concat},
      {"reshape", LayerKind::Reshape},
      {"flatten", LayerKind::Flatten},
      {"softmax", LayerKind::Softmax},
      {"input", LayerKind::Input},
      {"output", LayerKind::Output},
  };
  auto it = m.find(s);
  if (it == m.end()) raise(ErrorCode::Io, "unknown layer kind: " + s);
  return it->second;
}

DataType data_type_from_string(const std::string& s) {
  if (s == "FP32") return DataType::FP32;
  if (s == "FP16") return DataType::FP16;
  if (s == "INT8") return DataType::INT8;
  raise(ErrorCode::Io, "unknown data type: " + s);
}

Layout layout_from_string(const std::string& s) {
  if (s == "NCHW") return Layout::NCHW;
  if (s == "NHWC") return Layout::NHWC;
  raise(ErrorCode::Io, "unknown layout: " + s);
}

Core core_from_string(const std::string& s) {
  if (s == "CPU") return Core::CPU;
  if (s == "GPU") return Core::GPU;
  if (s == "FPGA") return Core::FPGA;
  raise(ErrorCode::Io, "unknown core: " + s);
}

bool NetworkSpec::is_chain() const {
  std::vector<const LayerSpec*> by_depth(layers.size(), nullptr);
  for (const auto& l : layers) {
    if (l.depth < 0 || l.depth >= static_cast<int>(layers.size())) return false;
    by_depth[l.depth] = &l;
  }
  for (const auto* l : by_depth)
    if (!l) return false;
  for (std::size_t d = 0; d < by_depth.size(); ++d) {
    const LayerSpec& l = *by_depth[d];
    if (d == 0) {
      if (!l.predecessors.empty()) return false;
    } else {
      if (l.predecessors.size() != 1 ||
          l.predecessors[0] != by_depth[d - 1]->id)
        return false;
    }
  }
  return true;
}

const LayerSpec* NetworkSpec::find(const std::string& id) const {
  for (const auto& l : layers)
    if (l.id == id) return &l;
  return nullptr;
}

std::vector<std::string> validate_network(const NetworkSpec& net) {
  std::vector<std::string> violations;
  const int depth_count = static_cast<int>(net.layers.size());

  std::set<std::string> ids;
  std::map<std::string, int> depth_of;
  std::set<int> depths;
  for (const auto& l : net.layers) {
    if (!ids.insert(l.id).second)
      violations.push_back("duplicate layer id " + l.id);
    if (l.depth < 0 || l.depth >= depth_count)
      violations.push_back("depth out of range at " + l.id);
    else if (!depths.insert(l.depth).second)
      violations.push_back("duplicate depth " + std::to_string(l.depth));
    depth_of[l.id] = l.depth;
  }

  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::Input) {
      if (!l.predecessors.empty())
        violations.push_back("input layer " + l.id + " has predecessors");
    } else if (l.predecessors.empty()) {
      violations.push_back("no predecessor at " + l.id);
    }
    for (const auto& p : l.predecessors) {
      auto it = depth_of.find(p);
      if (it == depth_of.end()) {
        violations.push_back("unknown predecessor " + p + " at " + l.id);
      } else if (it->second >= l.depth) {
        violations.push_back("cycle/forward-ref at " + l.id);
      }
    }
    if (l.output_size < 0 || l.params_size < 0)
      violations.push_back("negative size at " + l.id);
  }
  return violations;
}

namespace {

bool edge_override_key_less(const EdgeOverride& a, const EdgeOverride& b) {
  return std::tie(a.pred_layer, a.layer, a.from_impl, a.to_impl) <
         std::tie(b.pred_layer, b.layer, b.from_impl, b.to_impl);
}

// Resolution order fixed by the table contract: per-edge override, then the
// first matching attribute rule, then identity-0, then the default mismatch
// rule.
struct ResolvedEdge {
  EdgeCost penalty;
  std::int64_t buffer_bytes;
};

ResolvedEdge resolve_edge(const CostTable& table,
                          const std::vector<EdgeOverride>& sorted_overrides,
                          const std::string& pred_layer,
                          const std::string& layer, const ImplDescriptor& from,
                          const ImplDescriptor& to) {
  EdgeOverride key;
  key.pred_layer = pred_layer;
  key.layer = layer;
  key.from_impl = from.id;
  key.to_impl = to.id;
  auto it = std::lower_bound(sorted_overrides.begin(), sorted_overrides.end(),
                             key, edge_override_key_less);
  if (it != sorted_overrides.end() && it->pred_layer == pred_layer &&
      it->layer == layer && it->from_impl == from.id && it->to_impl == to.id)
    return {it->penalty_ms, it->buffer_bytes};

  for (const auto& rule : table.conversions)
    if (rule.from.matches(from) && rule.to.matches(to))
      return {rule.penalty_ms, rule.buffer_bytes};

  if (from.data_type == to.data_type && from.layout == to.layout &&
      from.core == to.core)
    return {0.0, 0};

  return {table.default_mismatch_penalty_ms, 0};
}

} // namespace

DesignSpace DesignSpace::build(NetworkSpec net, CostTable table) {
  {
    auto violations = validate_network(net);
    if (!violations.empty())
      raise(ErrorCode::InvalidCostTable,
            "invalid network: " + violations.front());
  }
  for (const auto& rule : table.conversions) {
    if (rule.from == rule.to && (!rule.penalty_ms || *rule.penalty_ms != 0.0))
      raise(ErrorCode::InvalidCostTable,
            "identity conversion rule must have penalty 0");
  }

  DesignSpace space;

  // Depth order.
  space.layers_.resize(net.layers.size());
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i)
    space.layers_[net.layers[i].depth] = i;

  // Consumers, for fusion expansion.
  std::map<std::string, std::vector<int>> consumers; // layer id -> depths
  for (int d = 0; d < static_cast<int>(space.layers_.size()); ++d)
    for (const auto& p : net.layers[space.layers_[d]].predecessors)
      consumers[p].push_back(d);

  // Expand runtime-fusion variants. A fusing impl executes its consumer in
  // the same pass, so it pairs only with the injected passthrough, and the
  // passthrough pairs only with it.
  for (int d = 0; d < static_cast<int>(space.layers_.size()); ++d) {
    const LayerSpec& l = net.layers[space.layers_[d]];
    auto entry = table.entries.find(l.id);
    if (entry == table.entries.end() || entry->second.empty())
      raise(ErrorCode::MissingImplementations,
            "no implementations for layer " + l.id);

    std::vector<ImplDescriptor> fusers;
    for (const auto& impl : entry->second)
      if (impl.fuses_next) fusers.push_back(impl);
    if (fusers.empty()) continue;

    auto cons = consumers.find(l.id);
    if (cons == consumers.end() || cons->second.size() != 1)
      raise(ErrorCode::FusionTargetMismatch,
            "fusing impl on " + l.id + " requires exactly one consumer");
    const LayerSpec& next = net.layers[space.layers_[cons->second[0]]];
    auto& next_impls = table.entries[next.id];

    for (const auto& fuser : fusers) {
      if (*fuser.fuses_next != next.kind)
        raise(ErrorCode::FusionTargetMismatch,
              "impl " + fuser.id + " on " + l.id + " fuses " +
                  to_string(*fuser.fuses_next) + " but successor " + next.id +
                  " is " + to_string(next.kind));

      ImplDescriptor pass;
      pass.id = fuser.id + ".fused";
      pass.library = fuser.library;
      pass.algorithm = "fused_passthrough";
      pass.algorithm_config = fuser.id;
      pass.data_type = fuser.data_type;
      pass.layout = fuser.layout;
      pass.core = fuser.core;
      pass.latency_ms = 0.0;
      pass.memory_bytes = 0;
      pass.accuracy_delta_pp = 0.0;

      // Exclusive pairing via FORBIDDEN overrides.
      for (const auto& other : entry->second) {
        EdgeOverride ov;
        ov.pred_layer = l.id;
        ov.layer = next.id;
        ov.from_impl = other.id;
        ov.to_impl = pass.id;
        ov.penalty_ms = (other.id == fuser.id) ? EdgeCost(0.0) : kForbidden;
        table.edge_overrides.push_back(ov);
      }
      for (const auto& other : next_impls) {
        EdgeOverride ov;
        ov.pred_layer = l.id;
        ov.layer = next.id;
        ov.from_impl = fuser.id;
        ov.to_impl = other.id;
        ov.penalty_ms = kForbidden;
        table.edge_overrides.push_back(ov);
      }
      next_impls.push_back(pass);
    }
  }

  // Impl vectors, sorted by id: index order == tie-break order.
  space.impls_.resize(space.layers_.size());
  for (int d = 0; d < static_cast<int>(space.layers_.size()); ++d) {
    const LayerSpec& l = net.layers[space.layers_[d]];
    auto impls = table.entries.at(l.id);
    std::sort(impls.begin(), impls.end(),
              [](const ImplDescriptor& a, const ImplDescriptor& b) {
                return a.id < b.id;
              });
    for (const auto& impl : impls)
      if (impl.latency_ms < 0 || impl.memory_bytes < 0 ||
          impl.accuracy_delta_pp < 0)
        raise(ErrorCode::InvalidCostTable,
              "negative cost on impl " + impl.id + " of " + l.id);
    space.vertices_ += impls.size();
    space.impls_[d] = std::move(impls);
    space.layer_ids_[l.id] = d;
  }

  // Dependency edges in canonical order and their penalty matrices.
  std::vector<EdgeOverride> sorted_overrides = table.edge_overrides;
  std::sort(sorted_overrides.begin(), sorted_overrides.end(),
            edge_override_key_less);

  space.incoming_.resize(space.layers_.size());
  for (int d = 0; d < static_cast<int>(space.layers_.size()); ++d) {
    const LayerSpec& l = net.layers[space.layers_[d]];
    for (const auto& p : l.predecessors) {
      int pd = space.layer_ids_.at(p);
      int edge = static_cast<int>(space.dep_edges_.size());
      space.dep_edges_.emplace_back(pd, d);
      space.incoming_[d].push_back(edge);
      const auto& from_impls = space.impls_[pd];
      const auto& to_impls = space.impls_[d];
      space.edges_ += from_impls.size() * to_impls.size();

      std::vector<EdgeEntry> matrix(from_impls.size() * to_impls.size());
      for (std::size_t a = 0; a < from_impls.size(); ++a) {
        for (std::size_t b = 0; b < to_impls.size(); ++b) {
          ResolvedEdge r = resolve_edge(table, sorted_overrides, p, l.id,
                                        from_impls[a], to_impls[b]);
          EdgeEntry& e = matrix[a * to_impls.size() + b];
          if (!r.penalty) {
            e.forbidden = true;
          } else {
            if (*r.penalty < 0)
              raise(ErrorCode::InvalidCostTable, "negative penalty on edge " +
                                                     p + " -> " + l.id);
            e.penalty_ms = *r.penalty;
            e.buffer_bytes = r.buffer_bytes;
          }
        }
      }
      space.edge_costs_.push_back(std::move(matrix));
    }
  }

  space.chain_ = net.is_chain();
  space.net_ = std::move(net);
  space.table_ = std::move(table);
  return space;
}

double DesignSpace::space_size() const {
  double size = 1.0;
  for (const auto& impls : impls_) size *= static_cast<double>(impls.size());
  return size;
}

std::optional<std::uint64_t> DesignSpace::config_count(
    std::uint64_t cap) const {
  std::uint64_t count = 1;
  for (const auto& impls : impls_) {
    const std::uint64_t b = impls.size();
    if (b == 0) return 0;
    if (count > cap / b) return std::nullopt;
    count *= b;
    if (count > cap) return std::nullopt;
  }
  return count;
}

int DesignSpace::layer_index(const std::string& id) const {
  auto it = layer_ids_.find(id);
  if (it == layer_ids_.end())
    raise(ErrorCode::UnknownImpl, "unknown layer " + id);
  return it->second;
}

int DesignSpace::impl_index(int layer, const std::string& impl_id) const {
  const auto& impls = impls_[layer];
  for (int k = 0; k < static_cast<int>(impls.size()); ++k)
    if (impls[k].id == impl_id) return k;
  return -1;
}

EdgeCost DesignSpace::edge_cost(const std::string& pred_layer,
                                const std::string& layer,
                                const std::string& from_impl,
                                const std::string& to_impl) const {
  int pd = layer_index(pred_layer);
  int d = layer_index(layer);
  int edge = -1;
  for (int e : incoming_[d])
    if (dep_edges_[e].first == pd) edge = e;
  if (edge < 0)
    raise(ErrorCode::UnknownImpl,
          "no dependency edge " + pred_layer + " -> " + layer);
  int a = impl_index(pd, from_impl);
  int b = impl_index(d, to_impl);
  if (a < 0)
    raise(ErrorCode::UnknownImpl, "unknown impl " + from_impl + " on " + pred_layer);
  if (b < 0)
    raise(ErrorCode::UnknownImpl, "unknown impl " + to_impl + " on " + layer);
  return edge_cost(edge, a, b);
}

std::vector<int> DesignSpace::to_indices(const Configuration& config) const {
  std::vector<int> idx(layers_.size(), -1);
  for (const auto& [layer_id, impl_id] : config.assignment) {
    auto it = layer_ids_.find(layer_id);
    if (it == layer_ids_.end())
      raise(ErrorCode::UnknownImpl, "unknown layer " + layer_id);
    int k = impl_index(it->second, impl_id);
    if (k < 0)
      raise(ErrorCode::UnknownImpl,
            "unknown impl " + impl_id + " on " + layer_id);
    idx[it->second] = k;
  }
  for (std::size_t d = 0; d < idx.size(); ++d)
    if (idx[d] < 0)
      raise(ErrorCode::IncompleteConfiguration,
            "no impl assigned to layer " + layer(static_cast<int>(d)).id);
  return idx;
}

Configuration DesignSpace::to_configuration(const std::vector<int>& idx) const {
  Configuration config;
  for (std::size_t d = 0; d < idx.size(); ++d)
    config.assignment[layer(static_cast<int>(d)).id] =
        impls_[d][idx[d]].id;
  return config;
}

std::optional<Metrics> DesignSpace::try_evaluate(
    const std::vector<int>& idx) const {
  Metrics m;
  for (int d = 0; d < layer_count(); ++d) {
    const ImplDescriptor& impl = impls_[d][idx[d]];
    double step = impl.latency_ms;
    for (int e : incoming_[d]) {
      const int pd = dep_edges_[e].first;
      const EdgeEntry& entry =
          edge_costs_[e][matrix_index(e, idx[pd], idx[d])];
      if (entry.forbidden) return std::nullopt;
      step += entry.penalty_ms;
      m.memory_bytes += entry.buffer_bytes;
    }
    m.latency_ms += step;
    m.memory_bytes += impl.memory_bytes;
  }
  return m;
}

Metrics DesignSpace::evaluate(const Configuration& config) const {
  auto idx = to_indices(config);
  auto m = try_evaluate(idx);
  if (!m) {
    for (const auto& inc : check_incompatibilities(config))
      if (!inc.penalty_ms)
        raise(ErrorCode::ForbiddenConfiguration,
              "forbidden edge " + inc.pred_layer + " -> " + inc.layer + " (" +
                  inc.from_impl + " -> " + inc.to_impl + ")");
    raise(ErrorCode::ForbiddenConfiguration, "forbidden configuration");
  }
  return *m;
}

std::vector<Incompatibility> DesignSpace::check_incompatibilities(
    const Configuration& config) const {
  auto idx = to_indices(config);
  std::vector<Incompatibility> list;
  for (int e = 0; e < static_cast<int>(dep_edges_.size()); ++e) {
    const auto [pd, d] = dep_edges_[e];
    EdgeCost c = edge_cost(e, idx[pd], idx[d]);
    if (!c || *c != 0.0) {
      Incompatibility inc;
      inc.pred_layer = layer(pd).id;
      inc.layer = layer(d).id;
      inc.from_impl = impls_[pd][idx[pd]].id;
      inc.to_impl = impls_[d][idx[d]].id;
      inc.penalty_ms = c;
      list.push_back(std::move(inc));
    }
  }
  return list;
}

} // namespace qsdse
