#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsdse/errors.hpp"

namespace qsdse {

enum class LayerKind {
  Convolution,
  DepthwiseConvolution,
  FullyConnected,
  Pooling,
  Activation,
  Bnorm,
  Scale,
  Elementwise,
  Concat,
  Reshape,
  Flatten,
  Softmax,
  Input,
  Output,
};

enum class DataType { FP32, FP16, INT8 };
enum class Layout { NCHW, NHWC };
enum class Core { CPU, GPU, FPGA };

const char* to_string(LayerKind k);
const char* to_string(DataType t);
const char* to_string(Layout l);
const char* to_string(Core c);
LayerKind layer_kind_from_string(const std::string& s);
DataType data_type_from_string(const std::string& s);
Layout layout_from_string(const std::string& s);
Core core_from_string(const std::string& s);

/// One layer of the network being deployed. `depth` is the topological
/// position; predecessors must all sit at lower depths.
struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Convolution;
  int depth = 0;
  std::vector<std::string> predecessors;
  std::int64_t output_size = 0; // tensor element count
  std::int64_t params_size = 0; // weight element count
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers; // ordered by depth

  /// True iff every non-input layer has exactly one predecessor, the
  /// immediately preceding layer.
  bool is_chain() const;

  const LayerSpec* find(const std::string& id) const;
};

/// Checks all LayerSpec/NetworkSpec invariants. Violations are data, not
/// faults: the returned list is empty iff the network is well-formed.
std::vector<std::string> validate_network(const NetworkSpec& net);

/// One execution option for a layer: the library/algorithm/format tuple that
/// determines its cost.
struct ImplDescriptor {
  std::string id;
  std::string library;
  std::string algorithm;
  std::string algorithm_config;
  DataType data_type = DataType::FP32;
  Layout layout = Layout::NCHW;
  Core core = Core::CPU;
  double latency_ms = 0.0;
  std::int64_t memory_bytes = 0;
  double accuracy_delta_pp = 0.0; // degradation contribution, >= 0
  std::optional<LayerKind> fuses_next; // runtime-fusion variant absorbs this kind
};

/// Partial attribute match over (data_type, layout, core); unset fields
/// match anything.
struct AttrPattern {
  std::optional<DataType> data_type;
  std::optional<Layout> layout;
  std::optional<Core> core;

  bool matches(const ImplDescriptor& impl) const {
    return (!data_type || *data_type == impl.data_type) &&
           (!layout || *layout == impl.layout) && (!core || *core == impl.core);
  }
  bool operator==(const AttrPattern&) const = default;
};

/// A finite conversion penalty in milliseconds, or FORBIDDEN (nullopt).
/// FORBIDDEN is a distinct value by design, never a large finite number.
using EdgeCost = std::optional<double>;
inline constexpr std::nullopt_t kForbidden = std::nullopt;

/// Directional conversion-penalty rule; first match in table order wins.
struct ConversionRule {
  AttrPattern from;
  AttrPattern to;
  EdgeCost penalty_ms = 0.0;      // nullopt == forbidden
  std::int64_t buffer_bytes = 0;  // conversion buffer memory, defaults to 0
};

/// Measured per-edge penalty; takes precedence over attribute rules.
struct EdgeOverride {
  std::string pred_layer;
  std::string layer;
  std::string from_impl;
  std::string to_impl;
  EdgeCost penalty_ms = 0.0;
  std::int64_t buffer_bytes = 0;
};

struct CostTable {
  std::string network_name;
  std::map<std::string, std::vector<ImplDescriptor>> entries; // layer id -> impls
  std::vector<ConversionRule> conversions;                    // ordered, first match
  std::vector<EdgeOverride> edge_overrides;
  EdgeCost default_mismatch_penalty_ms = 0.0; // used when attributes differ and no rule matches
  std::string reference_library;              // tags the Ref-FP32 library for module pareto
};

/// Total assignment of one implementation to every layer.
struct Configuration {
  std::map<std::string, std::string> assignment; // layer id -> impl id
};

struct Metrics {
  double latency_ms = 0.0;
  std::int64_t memory_bytes = 0;
  std::optional<double> accuracy_pct; // filled by module pareto
};

/// One nonzero-or-forbidden entry from check_incompatibilities.
struct Incompatibility {
  std::string pred_layer;
  std::string layer;
  std::string from_impl;
  std::string to_impl;
  EdgeCost penalty_ms;
};

/// The weighted layered graph over (layer, impl) vertices. Immutable after
/// construction; safe to share read-only across concurrent searches.
///
/// Construction expands runtime-fusion variants: an impl with `fuses_next`
/// on layer i adds a zero-latency fused-passthrough impl to its consumer,
/// paired exclusively with the fusing variant via FORBIDDEN edge overrides.
/// Impls are kept sorted by id within each layer so index order doubles as
/// the deterministic tie-break order used by all searches.
class DesignSpace {
public:
  static DesignSpace build(NetworkSpec net, CostTable table);

  const NetworkSpec& network() const { return net_; }
  const CostTable& table() const { return table_; }

  int layer_count() const { return static_cast<int>(layers_.size()); }
  int impl_count(int layer) const {
    return static_cast<int>(impls_[layer].size());
  }
  const ImplDescriptor& impl(int layer, int k) const { return impls_[layer][k]; }
  const LayerSpec& layer(int i) const { return net_.layers[layers_[i]]; }

  std::size_t vertex_count() const { return vertices_; }
  std::size_t edge_count() const { return edges_; }

  /// Product of per-layer impl counts, as a double (it overflows integers
  /// for realistic networks: 7^66 ~ 6e55).
  double space_size() const;
  /// Exact configuration count, or nullopt once it exceeds `cap`.
  std::optional<std::uint64_t> config_count(std::uint64_t cap) const;

  bool is_chain() const { return chain_; }

  /// Data-dependency edges as (pred layer index, layer index), in canonical
  /// order: consumers by depth, predecessors in declared order.
  const std::vector<std::pair<int, int>>& dependency_edges() const {
    return dep_edges_;
  }
  /// Edge indices grouped by consumer layer.
  const std::vector<std::vector<int>>& incoming_edges() const {
    return incoming_;
  }

  /// O(1) lookup of the conversion penalty on a dependency edge.
  EdgeCost edge_cost(int edge, int from_k, int to_k) const {
    const EdgeEntry& e = edge_costs_[edge][matrix_index(edge, from_k, to_k)];
    if (e.forbidden) return kForbidden;
    return e.penalty_ms;
  }
  std::int64_t edge_buffer_bytes(int edge, int from_k, int to_k) const {
    return edge_costs_[edge][matrix_index(edge, from_k, to_k)].buffer_bytes;
  }

  /// String-keyed surface over the same lookup. Throws UnknownImpl.
  EdgeCost edge_cost(const std::string& pred_layer, const std::string& layer,
                     const std::string& from_impl,
                     const std::string& to_impl) const;

  int layer_index(const std::string& id) const;
  int impl_index(int layer, const std::string& impl_id) const; // -1 if absent

  std::vector<int> to_indices(const Configuration& config) const;
  Configuration to_configuration(const std::vector<int>& idx) const;

  /// Latency/memory of a configuration, nullopt if any edge is FORBIDDEN.
  /// Latency accumulates per layer as acc += (impl latency + penalties into
  /// the layer); Dijkstra uses the same expression so chain optima compare
  /// bit-exactly against enumeration.
  std::optional<Metrics> try_evaluate(const std::vector<int>& idx) const;

  /// Same, over the public Configuration type. Throws IncompleteConfiguration
  /// or ForbiddenConfiguration.
  Metrics evaluate(const Configuration& config) const;

  /// Exactly the edges with nonzero or FORBIDDEN cost; evaluate() is
  /// consistent with this list.
  std::vector<Incompatibility> check_incompatibilities(
      const Configuration& config) const;

private:
  struct EdgeEntry {
    double penalty_ms = 0.0;
    std::int64_t buffer_bytes = 0;
    bool forbidden = false;
  };

  std::size_t matrix_index(int edge, int from_k, int to_k) const {
    return static_cast<std::size_t>(from_k) *
               impls_[dep_edges_[edge].second].size() +
           static_cast<std::size_t>(to_k);
  }

  NetworkSpec net_;
  CostTable table_;                        // after fusion expansion
  std::vector<int> layers_;                // depth -> index into net_.layers
  std::vector<std::vector<ImplDescriptor>> impls_; // per layer, sorted by id
  std::vector<std::pair<int, int>> dep_edges_;
  std::vector<std::vector<int>> incoming_; // layer -> edge indices
  std::vector<std::vector<EdgeEntry>> edge_costs_; // per edge, B_from x B_to
  std::map<std::string, int> layer_ids_;
  std::size_t vertices_ = 0;
  std::size_t edges_ = 0;
  bool chain_ = false;
};

/// Free-function spellings matching the operation names used throughout.
inline DesignSpace build_space(NetworkSpec net, CostTable table) {
  return DesignSpace::build(std::move(net), std::move(table));
}

} // namespace qsdse
