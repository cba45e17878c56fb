#include "doctest.h"

#include <cmath>

#include "qsdse/model.hpp"
#include "qsdse/rng.hpp"
#include "testutil.hpp"

using namespace qsdse;
using namespace qsdse::test;

TEST_CASE("validate_network accepts a minimal chain") {
  NetworkSpec net;
  net.name = "minimal";
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"}),
                layer("sm", LayerKind::Softmax, 2, {"conv"})};
  CHECK(validate_network(net).empty());
  CHECK(net.is_chain());
}

TEST_CASE("validate_network flags forward references") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("a", LayerKind::Convolution, 1, {"b"}),
                layer("b", LayerKind::Convolution, 2, {"in"})};
  auto violations = validate_network(net);
  REQUIRE(!violations.empty());
  bool found = false;
  for (const auto& v : violations)
    if (v == "cycle/forward-ref at a") found = true;
  CHECK(found);
}

TEST_CASE("validate_network flags duplicate depths") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("a", LayerKind::Convolution, 2, {"in"}),
                layer("b", LayerKind::Convolution, 2, {"a"})};
  auto violations = validate_network(net);
  bool found = false;
  for (const auto& v : violations)
    if (v == "duplicate depth 2") found = true;
  CHECK(found);
}

TEST_CASE("validate_network flags inputs with predecessors and orphans") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("rogue", LayerKind::Convolution, 1, {})};
  auto violations = validate_network(net);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "no predecessor at rogue");
}

TEST_CASE("space size matches the product of impl counts") {
  // 3 layers with {2,3,2} impls: 7 vertices, 2*3+3*2 edges, 12 configs.
  NetworkSpec net;
  net.layers = {layer("a", LayerKind::Input, 0, {}),
                layer("b", LayerKind::Convolution, 1, {"a"}),
                layer("c", LayerKind::Softmax, 2, {"b"})};
  CostTable table;
  table.entries["a"] = {impl("x", 1), impl("y", 1)};
  table.entries["b"] = {impl("x", 1), impl("y", 1), impl("z", 1)};
  table.entries["c"] = {impl("x", 1), impl("y", 1)};
  auto space = DesignSpace::build(net, table);
  CHECK(space.vertex_count() == 7);
  CHECK(space.edge_count() == 12);
  CHECK(space.config_count(100).value() == 12);
  CHECK(space.space_size() == doctest::Approx(12.0));
}

TEST_CASE("space size for uniform branching is B^D") {
  NetworkSpec net;
  CostTable table;
  std::string prev;
  for (int d = 0; d < 66; ++d) {
    const std::string id = "l" + std::to_string(d);
    net.layers.push_back(layer(id, d == 0 ? LayerKind::Input
                                          : LayerKind::Convolution,
                               d, d == 0 ? std::vector<std::string>{}
                                         : std::vector<std::string>{prev}));
    std::vector<ImplDescriptor> impls;
    for (int k = 0; k < 7; ++k) impls.push_back(impl("i" + std::to_string(k), 1));
    table.entries[id] = impls;
    prev = id;
  }
  auto space = DesignSpace::build(net, table);
  CHECK(space.space_size() == doctest::Approx(std::pow(7.0, 66)).epsilon(1e-12));
  CHECK(space.space_size() > 5.9e55);
  CHECK(space.space_size() < 6.1e55);
  CHECK(!space.config_count(10'000'000).has_value());
}

TEST_CASE("degenerate one-layer space") {
  NetworkSpec net;
  net.layers = {layer("only", LayerKind::Input, 0, {})};
  CostTable table;
  table.entries["only"] = {impl("x", 0.0)};
  auto space = DesignSpace::build(net, table);
  CHECK(space.vertex_count() == 1);
  CHECK(space.edge_count() == 0);
  CHECK(space.config_count(10).value() == 1);

  Configuration config;
  config.assignment["only"] = "x";
  CHECK(space.evaluate(config).latency_ms == 0.0);
}

TEST_CASE("build_space reports missing implementations") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"})};
  CostTable table;
  table.entries["in"] = {impl("x", 1)};
  CHECK_THROWS_WITH_AS(DesignSpace::build(net, table),
                       doctest::Contains("conv"), Error);
}

TEST_CASE("edge_cost resolution order") {
  auto space = local_minimum_space();

  SUBCASE("identity attributes cost nothing") {
    CHECK(space.edge_cost("L1", "L2", "a", "a") == EdgeCost(0.0));
  }
  SUBCASE("attribute rules apply") {
    CHECK(space.edge_cost("L1", "L2", "a", "b") == EdgeCost(2.0));
    CHECK(space.edge_cost("L2", "L3", "b", "a") == EdgeCost(2.0));
  }
  SUBCASE("unknown impls are rejected") {
    CHECK_THROWS_AS((void)space.edge_cost("L1", "L2", "nope", "a"), Error);
  }
}

TEST_CASE("edge overrides take precedence over attribute rules") {
  auto space = greedy_trap_space();
  // Same attributes everywhere, but the override prices a->b at 6.
  CHECK(space.edge_cost("L1", "L2", "a", "b") == EdgeCost(6.0));
  CHECK(space.edge_cost("L1", "L2", "a", "a") == EdgeCost(0.0));
  CHECK(space.edge_cost("L1", "L2", "b", "b") == EdgeCost(0.0));
  // Penalties are directional: no implicit symmetry.
  CHECK(space.edge_cost("L1", "L2", "b", "a") == EdgeCost(0.0));
}

TEST_CASE("evaluate sums latencies and penalties") {
  auto space = local_minimum_space();

  Configuration all_a;
  all_a.assignment = {{"L1", "a"}, {"L2", "a"}, {"L3", "a"}};
  CHECK(space.evaluate(all_a).latency_ms == 9.0);

  Configuration aba;
  aba.assignment = {{"L1", "a"}, {"L2", "b"}, {"L3", "a"}};
  CHECK(space.evaluate(aba).latency_ms == 12.0);

  SUBCASE("incomplete configurations are rejected") {
    Configuration partial;
    partial.assignment = {{"L1", "a"}};
    CHECK_THROWS_AS(space.evaluate(partial), Error);
  }
}

TEST_CASE("check_incompatibilities lists exactly the charged edges") {
  auto space = local_minimum_space();

  Configuration all_a;
  all_a.assignment = {{"L1", "a"}, {"L2", "a"}, {"L3", "a"}};
  CHECK(space.check_incompatibilities(all_a).empty());

  Configuration aba;
  aba.assignment = {{"L1", "a"}, {"L2", "b"}, {"L3", "a"}};
  auto incs = space.check_incompatibilities(aba);
  REQUIRE(incs.size() == 2);
  CHECK(incs[0].penalty_ms == EdgeCost(2.0));
  CHECK(incs[1].penalty_ms == EdgeCost(2.0));
}

TEST_CASE("evaluate decomposes into latencies plus incompatibility penalties") {
  // Decomposition exactness over randomly sampled configs.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto space = random_chain_space(seed);
    RandomSource rng(seed * 977);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> idx(space.layer_count());
      for (int l = 0; l < space.layer_count(); ++l)
        idx[l] = static_cast<int>(rng.next_index(space.impl_count(l)));
      Configuration config = space.to_configuration(idx);

      auto metrics = space.try_evaluate(idx);
      auto incs = space.check_incompatibilities(config);
      const bool forbidden = [&] {
        for (const auto& inc : incs)
          if (!inc.penalty_ms) return true;
        return false;
      }();
      CHECK(metrics.has_value() == !forbidden);
      if (!metrics) continue;

      double expected = 0.0;
      for (int l = 0; l < space.layer_count(); ++l)
        expected += space.impl(l, idx[l]).latency_ms;
      for (const auto& inc : incs) expected += *inc.penalty_ms;
      CHECK(metrics->latency_ms == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("fusion variants expand into exclusive passthrough pairs") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"}),
                layer("relu", LayerKind::Activation, 2, {"conv"})};
  CostTable table;
  table.entries["in"] = {impl("x", 0.0)};
  ImplDescriptor fusing = impl("conv_fuse", 4.5);
  fusing.fuses_next = LayerKind::Activation;
  table.entries["conv"] = {impl("conv_plain", 5.0), fusing};
  table.entries["relu"] = {impl("relu_plain", 1.0)};

  auto space = DesignSpace::build(net, table);
  const int relu_idx = space.layer_index("relu");
  CHECK(space.impl_count(relu_idx) == 2); // plain + passthrough

  // Passthrough after the non-fusing impl is forbidden; after the fusing
  // impl it is free, and the fusing impl cannot pair with the plain relu.
  CHECK(space.edge_cost("conv", "relu", "conv_plain", "conv_fuse.fused") ==
        kForbidden);
  CHECK(space.edge_cost("conv", "relu", "conv_fuse", "conv_fuse.fused") ==
        EdgeCost(0.0));
  CHECK(space.edge_cost("conv", "relu", "conv_fuse", "relu_plain") ==
        kForbidden);
  CHECK(space.edge_cost("conv", "relu", "conv_plain", "relu_plain") ==
        EdgeCost(0.0));

  // Fused path: 0 + 4.5 + 0 = 4.5 beats 0 + 5 + 1 = 6.
  Configuration fused;
  fused.assignment = {{"in", "x"}, {"conv", "conv_fuse"}, {"relu", "conv_fuse.fused"}};
  CHECK(space.evaluate(fused).latency_ms == 4.5);

  Configuration crossed;
  crossed.assignment = {{"in", "x"}, {"conv", "conv_fuse"}, {"relu", "relu_plain"}};
  CHECK_THROWS_AS(space.evaluate(crossed), Error);
}

TEST_CASE("fusion kind mismatch is rejected") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"}),
                layer("pool", LayerKind::Pooling, 2, {"conv"})};
  CostTable table;
  table.entries["in"] = {impl("x", 0.0)};
  ImplDescriptor fusing = impl("conv_fuse", 4.5);
  fusing.fuses_next = LayerKind::Activation;
  table.entries["conv"] = {fusing};
  table.entries["pool"] = {impl("p", 1.0)};
  CHECK_THROWS_AS(DesignSpace::build(net, table), Error);
}

TEST_CASE("DAG evaluation covers every data-dependency edge") {
  // in -> a, in -> b, concat(a, b): four edges in total.
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("a", LayerKind::Convolution, 1, {"in"}),
                layer("b", LayerKind::Convolution, 2, {"in"}),
                layer("cat", LayerKind::Concat, 3, {"a", "b"})};
  CostTable table;
  table.entries["in"] = {impl("f", 0.0), impl("q", 0.0, DataType::INT8)};
  table.entries["a"] = {impl("f", 2.0)};
  table.entries["b"] = {impl("f", 3.0)};
  table.entries["cat"] = {impl("f", 1.0)};
  ConversionRule rule;
  rule.from.data_type = DataType::INT8;
  rule.to.data_type = DataType::FP32;
  rule.penalty_ms = 1.5;
  table.conversions = {rule};

  auto space = DesignSpace::build(net, table);
  CHECK(!space.is_chain());

  Configuration quantized_input;
  quantized_input.assignment = {{"in", "q"}, {"a", "f"}, {"b", "f"}, {"cat", "f"}};
  // Both in->a and in->b cross the dtype boundary: 0 + (2+1.5) + (3+1.5) + 1.
  CHECK(space.evaluate(quantized_input).latency_ms == 9.0);
  CHECK(space.check_incompatibilities(quantized_input).size() == 2);
}

TEST_CASE("conversion rules can carry buffer memory") {
  auto make = [](std::int64_t buffer) {
    NetworkSpec net;
    net.layers = {layer("in", LayerKind::Input, 0, {}),
                  layer("conv", LayerKind::Convolution, 1, {"in"})};
    CostTable table;
    table.entries["in"] = {impl("f", 1.0, DataType::FP32, Layout::NCHW, 100)};
    table.entries["conv"] = {impl("q", 2.0, DataType::INT8, Layout::NCHW, 50)};
    ConversionRule rule;
    rule.from.data_type = DataType::FP32;
    rule.to.data_type = DataType::INT8;
    rule.penalty_ms = 0.5;
    rule.buffer_bytes = buffer;
    table.conversions = {rule};
    return DesignSpace::build(net, table);
  };

  Configuration config;
  config.assignment = {{"in", "f"}, {"conv", "q"}};
  CHECK(make(0).evaluate(config).memory_bytes == 150);
  CHECK(make(64).evaluate(config).memory_bytes == 214);
}

TEST_CASE("identity conversion rules must be free") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"})};
  CostTable table;
  table.entries["in"] = {impl("f", 1.0)};
  table.entries["conv"] = {impl("f", 1.0)};
  ConversionRule bad;
  bad.from.data_type = DataType::FP32;
  bad.to.data_type = DataType::FP32;
  bad.penalty_ms = 1.0;
  table.conversions = {bad};
  CHECK_THROWS_AS(DesignSpace::build(net, table), Error);
}
