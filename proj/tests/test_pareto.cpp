#include "doctest.h"

#include <algorithm>
#include <set>

#include "qsdse/pareto.hpp"
#include "qsdse/reference.hpp"
#include "qsdse/synth.hpp"
#include "testutil.hpp"

using namespace qsdse;
using namespace qsdse::test;

namespace {

ParetoPoint point(double latency, double accuracy, std::int64_t memory = 0) {
  ParetoPoint p;
  p.latency_ms = latency;
  p.accuracy_pct = accuracy;
  p.memory_bytes = memory;
  return p;
}

// Independent restatement of strict dominance for the oracle check.
bool oracle_dominated(const std::vector<ParetoPoint>& points, std::size_t i,
                      FrontObjective objective) {
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    const auto& a = points[j];
    const auto& b = points[i];
    bool beq, strict;
    if (objective == FrontObjective::LatencyAccuracy) {
      beq = a.latency_ms <= b.latency_ms && a.accuracy_pct >= b.accuracy_pct;
      strict = a.latency_ms < b.latency_ms || a.accuracy_pct > b.accuracy_pct;
    } else {
      beq = a.latency_ms <= b.latency_ms && a.memory_bytes <= b.memory_bytes;
      strict = a.latency_ms < b.latency_ms || a.memory_bytes < b.memory_bytes;
    }
    if (beq && strict) return true;
  }
  return false;
}

using Key = std::tuple<double, double, std::int64_t>;
std::multiset<Key> keys(const std::vector<ParetoPoint>& points) {
  std::multiset<Key> out;
  for (const auto& p : points)
    out.insert({p.latency_ms, p.accuracy_pct, p.memory_bytes});
  return out;
}

std::vector<ParetoPoint> random_points(RandomSource& rng) {
  const std::size_t n = 1 + rng.next_index(40);
  std::vector<ParetoPoint> points;
  for (std::size_t i = 0; i < n; ++i)
    points.push_back(point(1.0 + 99.0 * rng.next_double(),
                           100.0 * rng.next_double(),
                           static_cast<std::int64_t>(rng.next_index(1 << 20))));
  return points;
}

} // namespace

TEST_CASE("fingerprints are canonical and stable") {
  Configuration a;
  a.assignment = {{"l0", "x"}, {"l1", "y"}};
  Configuration b;
  b.assignment = {{"l1", "y"}, {"l0", "x"}};
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 16);

  Configuration c = a;
  c.assignment["l1"] = "z";
  CHECK(config_fingerprint(c) != config_fingerprint(a));
}

TEST_CASE("additive accuracy subtracts per-impl deltas") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("c1", LayerKind::Convolution, 1, {"in"}),
                layer("c2", LayerKind::Convolution, 2, {"c1"})};
  CostTable table;
  table.entries["in"] = {impl("x", 0.0)};
  ImplDescriptor lossy1 = impl("x", 1.0);
  lossy1.accuracy_delta_pp = 1.1;
  ImplDescriptor lossy2 = impl("x", 1.0);
  lossy2.accuracy_delta_pp = 1.1;
  table.entries["c1"] = {lossy1};
  table.entries["c2"] = {lossy2};
  auto space = DesignSpace::build(net, table);

  Configuration config;
  config.assignment = {{"in", "x"}, {"c1", "x"}, {"c2", "x"}};
  CHECK(accuracy_of(space, config, AccuracyModel::additive(89.8)) ==
        doctest::Approx(87.6).epsilon(1e-12));

  SUBCASE("zero-delta configurations keep the base accuracy") {
    lossy1.accuracy_delta_pp = 0.0;
    lossy2.accuracy_delta_pp = 0.0;
    table.entries["c1"] = {lossy1};
    table.entries["c2"] = {lossy2};
    auto clean = DesignSpace::build(net, table);
    CHECK(accuracy_of(clean, config, AccuracyModel::additive(89.8)) == 89.8);
  }
  SUBCASE("accuracy clamps at zero") {
    CHECK(accuracy_of(space, config, AccuracyModel::additive(1.0)) == 0.0);
  }
}

TEST_CASE("table-mode accuracy looks up fingerprints") {
  auto space = local_minimum_space();
  Configuration config;
  config.assignment = {{"L1", "a"}, {"L2", "a"}, {"L3", "a"}};

  AccuracyModel model;
  model.mode = AccuracyModel::Mode::Table;
  model.table[config_fingerprint(config)] = 88.4;
  CHECK(accuracy_of(space, config, model) == 88.4);

  Configuration other;
  other.assignment = {{"L1", "b"}, {"L2", "a"}, {"L3", "a"}};
  CHECK_THROWS_AS(accuracy_of(space, other, model), Error);
}

TEST_CASE("filter_candidates keeps solutions within the slack") {
  std::vector<ParetoPoint> solutions = {point(10, 0), point(12, 0),
                                        point(13, 0)};
  auto kept = filter_candidates(solutions, 0.25);
  REQUIRE(kept.size() == 2); // 13 > 12.5
  CHECK(kept[0].latency_ms == 10);
  CHECK(kept[1].latency_ms == 12);

  SUBCASE("a single solution survives") {
    CHECK(filter_candidates({point(42, 0)}, 0.25).size() == 1);
  }
  SUBCASE("zero slack keeps only the fastest and exact ties") {
    auto tied = filter_candidates({point(10, 0), point(10, 1), point(11, 0)},
                                  0.0);
    CHECK(tied.size() == 2);
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(filter_candidates({}, 0.25), Error);
  }
}

TEST_CASE("filter_candidates is idempotent") {
  RandomSource rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto points = random_points(rng);
    auto once = filter_candidates(points, 0.25);
    auto twice = filter_candidates(once, 0.25);
    CHECK(keys(once) == keys(twice));
  }
}

TEST_CASE("pareto_front on the hand-checked examples") {
  SUBCASE("full dominance keeps one point") {
    auto front = pareto_front({point(10, 90), point(12, 89)},
                              FrontObjective::LatencyAccuracy);
    REQUIRE(front.size() == 1);
    CHECK(front[0].latency_ms == 10);
  }
  SUBCASE("slower-but-more-accurate survives") {
    auto front = pareto_front({point(10, 88), point(12, 90), point(15, 89)},
                              FrontObjective::LatencyAccuracy);
    REQUIRE(front.size() == 2);
    CHECK(front[0].latency_ms == 10);
    CHECK(front[1].latency_ms == 12);
  }
  SUBCASE("identical points are all retained") {
    auto front = pareto_front({point(10, 90), point(10, 90), point(10, 90)},
                              FrontObjective::LatencyAccuracy);
    CHECK(front.size() == 3);
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(pareto_front({}, FrontObjective::LatencyAccuracy), Error);
  }
}

TEST_CASE("pareto_front agrees with the quadratic oracle on random sets") {
  RandomSource rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    auto points = random_points(rng);
    for (auto objective : {FrontObjective::LatencyAccuracy,
                           FrontObjective::LatencyMemory}) {
      auto front = pareto_front(points, objective);

      std::multiset<Key> expected;
      for (std::size_t i = 0; i < points.size(); ++i)
        if (!oracle_dominated(points, i, objective))
          expected.insert({points[i].latency_ms, points[i].accuracy_pct,
                           points[i].memory_bytes});
      CHECK(keys(front) == expected);

      // The serial reference formulation lands on the same front.
      CHECK(keys(reference::pareto_front(points, objective)) == expected);

      CHECK(std::is_sorted(front.begin(), front.end(),
                           [](const ParetoPoint& a, const ParetoPoint& b) {
                             return a.latency_ms < b.latency_ms;
                           }));
    }
  }
}

TEST_CASE("interesting points on a single-library FP32 space coincide") {
  auto space = greedy_trap_space(); // one library, FP32/NCHW only
  auto pts = interesting_points(space, {}, AccuracyModel::additive(90.0));
  REQUIRE(pts.ref_fp32.has_value());
  REQUIRE(pts.opt_fp32.has_value());
  CHECK(!pts.int8.has_value()); // no INT8 impls: omitted with a warning
  CHECK(pts.warnings.size() == 1);
  // Ref is the all-first-impl chain a,a = 12.0; Opt is the optimum 5.5.
  CHECK(pts.ref_fp32->latency_ms == 12.0);
  CHECK(pts.opt_fp32->latency_ms == 5.5);
  CHECK(pts.opt_fp32->latency_ms <= pts.ref_fp32->latency_ms);
}

TEST_CASE("Opt-FP32 never loses to Ref-FP32") {
  for (std::uint64_t seed = 200; seed <= 230; ++seed) {
    auto space = random_chain_space(seed);
    auto pts = interesting_points(space, {}, AccuracyModel::additive(95.0));
    REQUIRE(pts.ref_fp32.has_value());
    REQUIRE(pts.opt_fp32.has_value());
    CHECK(pts.opt_fp32->latency_ms <= pts.ref_fp32->latency_ms);
  }
}

TEST_CASE("INT8 point is omitted with a warning when its edges are forbidden") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"})};
  CostTable table;
  table.reference_library = "testlib";
  table.entries["in"] = {impl("f", 1.0), impl("q", 1.0, DataType::INT8)};
  table.entries["conv"] = {impl("f", 2.0), impl("q", 2.0, DataType::INT8)};
  EdgeOverride ov;
  ov.pred_layer = "in";
  ov.layer = "conv";
  ov.from_impl = "q";
  ov.to_impl = "q";
  ov.penalty_ms = kForbidden;
  table.edge_overrides = {ov};
  auto space = DesignSpace::build(net, table);

  auto pts = interesting_points(space, {}, AccuracyModel::additive(90.0));
  CHECK(!pts.int8.has_value());
  REQUIRE(!pts.warnings.empty());
  CHECK(pts.warnings[0].find("INT8") != std::string::npos);
}

TEST_CASE("missing reference impls are an error") {
  NetworkSpec net;
  net.layers = {layer("in", LayerKind::Input, 0, {}),
                layer("conv", LayerKind::Convolution, 1, {"in"})};
  CostTable table;
  table.reference_library = "someotherlib";
  table.entries["in"] = {impl("f", 1.0)};
  table.entries["conv"] = {impl("f", 2.0)};
  auto space = DesignSpace::build(net, table);
  CHECK_THROWS_AS(interesting_points(space, {}, AccuracyModel::additive(90.0)),
                  Error);
}

TEST_CASE("adding impls never worsens the oracle optimum") {
  for (std::uint64_t seed = 300; seed <= 320; ++seed) {
    auto space = random_chain_space(seed);

    // Remove the last impl of the widest layer; the optimum must not drop.
    CostTable reduced = space.table();
    int widest = 0;
    for (int l = 1; l < space.layer_count(); ++l)
      if (space.impl_count(l) > space.impl_count(widest)) widest = l;
    if (space.impl_count(widest) < 2) continue;
    auto& impls = reduced.entries[space.layer(widest).id];
    impls.pop_back();

    auto sub = DesignSpace::build(space.network(), reduced);
    CHECK(run_brute_force(space).best_latency_ms <=
          run_brute_force(sub).best_latency_ms);
  }
}

TEST_CASE("synthetic squeezenet profile rewards the search over the reference") {
  auto net = gen_network(Preset::SqueezenetLike);
  auto table = gen_cost_table(net, CostProfile::defaults(21));
  auto space = DesignSpace::build(net, table);

  SearchParams params;
  params.total_episodes = 1500;
  params.seed = 5;
  auto rl = run_rl(space, params);

  auto pts = interesting_points(space, {rl}, AccuracyModel::additive(89.8),
                                params);
  REQUIRE(pts.ref_fp32.has_value());
  REQUIRE(pts.opt_fp32.has_value());
  CHECK(speedup_vs(*pts.ref_fp32, *pts.opt_fp32) > 1.0);
  CHECK(pts.searched.size() == 1);
  CHECK(!pts.front_latency_accuracy.empty());
  CHECK(!pts.front_latency_memory.empty());
}
