// qsdse: design-space exploration for per-layer implementation selection.
// Three-phase flow: gen/ingest build the cost model, search/compare explore
// it, pareto evaluates the learnt solutions.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qsdse/json_io.hpp"
#include "qsdse/optim.hpp"
#include "qsdse/pareto.hpp"
#include "qsdse/search.hpp"
#include "qsdse/synth.hpp"

namespace fs = std::filesystem;
using namespace qsdse;

namespace {

constexpr const char* kToolVersion = "qsdse 0.1.0";

std::uint64_t brute_cap_from_env() {
  if (const char* env = std::getenv("QSDSE_BRUTE_CAP"))
    return std::strtoull(env, nullptr, 10);
  return kDefaultBruteForceCap;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::UnknownPreset: return 2;
    case ErrorCode::NoFeasiblePath: return 3;
    case ErrorCode::NotAChain: return 4;
    case ErrorCode::SpaceTooLarge: return 5;
    default: return 1;
  }
}

// Collects outputs and their digests for the per-command manifest.
class OutputWriter {
public:
  OutputWriter(std::string command, fs::path out_dir)
      : out_dir_(std::move(out_dir)) {
    manifest_.command = std::move(command);
    manifest_.tool_version = kToolVersion;
    fs::create_directories(out_dir_);
  }

  void set_seed(std::uint64_t seed) { manifest_.seed = seed; }
  void add_input(const fs::path& path) {
    manifest_.inputs.push_back(path.string());
  }
  void set_parameters(json params) { manifest_.parameters = std::move(params); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path path = out_dir_ / name;
    write_file(path, content);
    manifest_.outputs.emplace_back(name, sha256_hex(content));
    return path;
  }

  void finish() {
    const json j = manifest_to_json(manifest_);
    write_file(out_dir_ / (manifest_.command + ".manifest.json"),
               j.dump(2) + "\n");
  }

private:
  fs::path out_dir_;
  RunManifest manifest_;
};

CostProfile profile_from_json(const json& j, std::uint64_t seed) {
  CostProfile p = CostProfile::defaults(seed);
  auto range = [&](const char* key, CostProfile::Range& out) {
    if (j.contains(key)) {
      out.lo = j.at(key).at(0).get<double>();
      out.hi = j.at(key).at(1).get<double>();
    }
  };
  range("fast_fp32_uplift", p.fast_fp32_uplift);
  range("int8_uplift", p.int8_uplift);
  range("nhwc_uplift", p.nhwc_uplift);
  range("depthwise_uplift", p.depthwise_uplift);
  range("int8_delta_pp", p.int8_delta_pp);
  range("int8_depthwise_delta_pp", p.int8_depthwise_delta_pp);
  range("fast_fp32_delta_pp", p.fast_fp32_delta_pp);
  if (j.contains("dtype_penalty_ms"))
    p.dtype_penalty_ms = j.at("dtype_penalty_ms").get<double>();
  if (j.contains("layout_penalty_ms"))
    p.layout_penalty_ms = j.at("layout_penalty_ms").get<double>();
  if (j.contains("jitter")) p.jitter = j.at("jitter").get<double>();
  if (j.contains("winograd_memory_factor"))
    p.winograd_memory_factor = j.at("winograd_memory_factor").get<double>();
  if (j.contains("reference_library"))
    p.reference_library = j.at("reference_library").get<std::string>();
  if (j.contains("base_ms"))
    for (const auto& [kind, ms] : j.at("base_ms").items())
      p.base_ms[layer_kind_from_string(kind)] = ms.get<double>();
  return p;
}

SearchReport dispatch_search(const DesignSpace& space,
                             const std::string& algorithm,
                             const SearchParams& params) {
  if (algorithm == "rl") return run_rl(space, params);
  if (algorithm == "random")
    return run_random(space, params.total_episodes, params.seed);
  if (algorithm == "ds") return run_direct(space, false);
  if (algorithm == "ds+") return run_direct(space, true);
  if (algorithm == "dijkstra") return run_dijkstra(space);
  if (algorithm == "astar") return run_astar(space);
  if (algorithm == "brute") return run_brute_force(space, brute_cap_from_env());
  raise(ErrorCode::Io, "unknown algorithm '" + algorithm +
                           "' (valid: rl, random, ds, ds+, dijkstra, astar, "
                           "brute)");
}

struct GenArgs {
  std::string preset;
  int depth = 8;
  std::string profile_path;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_gen(const GenArgs& args) {
  const Preset preset = preset_from_string(args.preset);
  CostProfile profile = CostProfile::defaults(args.seed);
  if (!args.profile_path.empty())
    profile = profile_from_json(json::parse(read_file(args.profile_path)),
                                args.seed);

  const NetworkSpec net = gen_network(preset, args.depth);
  const CostTable table = gen_cost_table(net, profile);

  OutputWriter out("gen", args.out);
  out.set_seed(args.seed);
  if (!args.profile_path.empty()) out.add_input(args.profile_path);
  out.set_parameters(json{{"preset", args.preset}, {"depth", args.depth}});
  out.write("network.json", network_to_json(net).dump(2) + "\n");
  out.write("costs.json", costs_to_json(table).dump(2) + "\n");
  out.finish();
  return 0;
}

struct IngestArgs {
  std::string measurements;
  std::string network_name = "measured";
  std::string out = ".";
};

int cmd_ingest(const IngestArgs& args) {
  auto records = load_measurements_csv(args.measurements);
  CostTable table = ingest_measurements(records);
  table.network_name = args.network_name;

  OutputWriter out("ingest", args.out);
  out.add_input(args.measurements);
  out.set_parameters(json{{"network_name", args.network_name},
                          {"records", records.size()}});
  out.write("costs.json", costs_to_json(table).dump(2) + "\n");
  out.finish();
  return 0;
}

struct SearchArgs {
  std::string network;
  std::string costs;
  std::string algorithm = "rl";
  SearchParams params;
  std::string out = ".";
};

int cmd_search(const SearchArgs& args) {
  const DesignSpace space =
      DesignSpace::build(load_network(args.network), load_costs(args.costs));
  const SearchReport report =
      dispatch_search(space, args.algorithm, args.params);

  OutputWriter out("search", args.out);
  out.add_input(args.network);
  out.add_input(args.costs);
  if (report.seed) out.set_seed(*report.seed);
  out.set_parameters(json{{"algorithm", args.algorithm},
                          {"episodes", args.params.total_episodes},
                          {"alpha", args.params.alpha},
                          {"gamma", args.params.gamma},
                          {"replay_batch", args.params.replay_batch}});
  out.write("report.json", report_to_json(report).dump(2) + "\n");
  if (args.algorithm == "rl" || args.algorithm == "random")
    out.write("learning_curve.csv", curve_csv(report));
  out.finish();

  std::cout << args.algorithm << ": best latency "
            << fmt_double(report.best_latency_ms) << " ms over "
            << report.considered_states << " considered states\n";
  return 0;
}

struct CompareArgs {
  std::string network;
  std::string costs;
  std::vector<std::uint64_t> seeds = {1};
  SearchParams params;
  double base_accuracy = 100.0;
  std::string out = ".";
};

int cmd_compare(const CompareArgs& args) {
  const DesignSpace space =
      DesignSpace::build(load_network(args.network), load_costs(args.costs));
  const AccuracyModel model = AccuracyModel::additive(args.base_accuracy);

  std::vector<CompareRow> rows;
  auto add_row = [&](const SearchReport& report) -> const CompareRow& {
    CompareRow row;
    row.algorithm = report.algorithm;
    row.latency_ms = report.best_latency_ms;
    row.considered_states = report.considered_states;
    row.accuracy_pct = accuracy_of(space, report.best_config, model);
    row.seed = report.seed;
    rows.push_back(std::move(row));
    return rows.back();
  };

  std::uint64_t rl_states = 0, rs_states = 0, dijkstra_states = 0,
                astar_states = 0, ds_states = 0, dsp_states = 0;
  for (const auto seed : args.seeds) {
    SearchParams params = args.params;
    params.seed = seed;
    rl_states = add_row(run_rl(space, params)).considered_states;
    rs_states = add_row(run_random(space, params.total_episodes, seed))
                    .considered_states;
  }
  auto run_quiet = [&](auto&& runner, std::uint64_t* states) {
    try {
      *states = add_row(runner()).considered_states;
    } catch (const Error& e) {
      std::cerr << "note: " << e.what() << "\n";
    }
  };
  run_quiet([&] { return run_dijkstra(space); }, &dijkstra_states);
  run_quiet([&] { return run_astar(space); }, &astar_states);
  run_quiet([&] { return run_direct(space, true); }, &dsp_states);
  run_quiet([&] { return run_direct(space, false); }, &ds_states);
  if (space.config_count(brute_cap_from_env())) {
    std::uint64_t ignored = 0;
    run_quiet([&] { return run_brute_force(space, brute_cap_from_env()); },
              &ignored);
  }

  const bool ordering_ok =
      rl_states == rs_states && rs_states >= dijkstra_states &&
      dijkstra_states >= astar_states && astar_states >= dsp_states &&
      dsp_states == ds_states;
  if (!ordering_ok)
    std::cerr << "warning: considered-state ordering violated "
              << "(rl=" << rl_states << " rs=" << rs_states
              << " dijkstra=" << dijkstra_states << " astar=" << astar_states
              << " ds+=" << dsp_states << " ds=" << ds_states << ")\n";

  OutputWriter out("compare", args.out);
  out.add_input(args.network);
  out.add_input(args.costs);
  out.set_parameters(json{{"episodes", args.params.total_episodes},
                          {"seeds", args.seeds},
                          {"base_accuracy", args.base_accuracy},
                          {"ordering_ok", ordering_ok}});
  out.write("compare.csv", compare_csv(rows));
  out.finish();
  return 0;
}

struct ParetoArgs {
  std::string network;
  std::string costs;
  SearchParams params;
  int num_searches = 5;
  double slack = 0.25;
  double base_accuracy = 100.0;
  std::string accuracy_table_path;
  std::optional<double> max_accuracy_drop;
  std::optional<std::int64_t> max_memory;
  bool svg = false;
  std::string out = ".";
};

int cmd_pareto(const ParetoArgs& args) {
  const DesignSpace space =
      DesignSpace::build(load_network(args.network), load_costs(args.costs));

  AccuracyModel model = AccuracyModel::additive(args.base_accuracy);
  if (!args.accuracy_table_path.empty()) {
    model.mode = AccuracyModel::Mode::Table;
    for (const auto& [fp, acc] :
         json::parse(read_file(args.accuracy_table_path)).items())
      model.table[fp] = acc.get<double>();
  }

  // Phase 2: learn solutions from several seeded searches.
  std::vector<SearchReport> searches;
  for (int i = 0; i < args.num_searches; ++i) {
    SearchParams params = args.params;
    params.seed = args.params.seed + static_cast<std::uint64_t>(i);
    searches.push_back(run_rl(space, params));
  }

  // Phase 3: keep only solutions within the latency slack, then extract the
  // fronts over the labelled points and the survivors.
  auto pts = interesting_points(space, searches, model, args.params);
  for (const auto& warning : pts.warnings)
    std::cerr << "warning: " << warning << "\n";

  std::vector<ParetoPoint> all;
  all.push_back(*pts.ref_fp32);
  if (pts.opt_fp32) all.push_back(*pts.opt_fp32);
  if (pts.int8) all.push_back(*pts.int8);
  if (!pts.searched.empty())
    for (const auto& p : filter_candidates(pts.searched, args.slack))
      all.push_back(p);

  auto constrain = [&](std::vector<ParetoPoint> front) {
    std::vector<ParetoPoint> kept;
    for (const auto& p : front) {
      if (args.max_accuracy_drop &&
          p.accuracy_pct <
              pts.ref_fp32->accuracy_pct - *args.max_accuracy_drop)
        continue;
      if (args.max_memory && p.memory_bytes > *args.max_memory) continue;
      kept.push_back(p);
    }
    return kept;
  };

  const auto front_acc =
      constrain(pareto_front(all, FrontObjective::LatencyAccuracy));
  const auto front_mem =
      constrain(pareto_front(all, FrontObjective::LatencyMemory));

  OutputWriter out("pareto", args.out);
  out.add_input(args.network);
  out.add_input(args.costs);
  out.set_seed(args.params.seed);
  json params{{"episodes", args.params.total_episodes},
              {"num_searches", args.num_searches},
              {"slack", args.slack},
              {"base_accuracy", args.base_accuracy}};
  if (args.max_accuracy_drop)
    params["max_accuracy_drop"] = *args.max_accuracy_drop;
  if (args.max_memory) params["max_memory"] = *args.max_memory;
  out.set_parameters(std::move(params));

  const double ref_latency = pts.ref_fp32->latency_ms;
  out.write("latency_accuracy.csv", front_csv(front_acc, ref_latency));
  out.write("latency_memory.csv", front_csv(front_mem, ref_latency));
  json points = json::array();
  for (const auto& p : all) {
    points.push_back(json{{"label", p.label},
                          {"latency_ms", p.latency_ms},
                          {"accuracy_pct", p.accuracy_pct},
                          {"memory_bytes", p.memory_bytes},
                          {"speedup_vs_ref", ref_latency / p.latency_ms},
                          {"fingerprint", config_fingerprint(p.config)}});
  }
  out.write("points.json", points.dump(2) + "\n");
  if (args.svg) {
    out.write("latency_accuracy.svg",
              front_svg(front_acc, FrontObjective::LatencyAccuracy));
    out.write("latency_memory.svg",
              front_svg(front_mem, FrontObjective::LatencyMemory));
  }
  out.finish();
  return 0;
}

struct QuantArgs {
  std::string histogram;
  std::optional<double> min_value;
  std::optional<double> max_value;
  std::string mode = "symmetric";
  std::string method = "minmax";
  int levels = 256;
  std::string out = ".";
};

int cmd_quant(const QuantArgs& args) {
  const QuantMode mode = args.mode == "asymmetric" ? QuantMode::Asymmetric
                                                   : QuantMode::Symmetric;
  QuantParams params;
  if (args.method == "kl") {
    if (args.histogram.empty())
      raise(ErrorCode::Io, "--method kl requires --histogram");
    params = kl_calibrate(load_histogram_csv(args.histogram), args.levels);
  } else if (args.method == "minmax") {
    double lo, hi;
    if (args.min_value && args.max_value) {
      lo = *args.min_value;
      hi = *args.max_value;
    } else if (!args.histogram.empty()) {
      const Histogram hist = load_histogram_csv(args.histogram);
      lo = -hist.max_abs;
      hi = hist.max_abs;
    } else {
      raise(ErrorCode::Io,
            "--method minmax requires --min/--max or --histogram");
    }
    params = quant_params_minmax(lo, hi, mode);
  } else {
    raise(ErrorCode::Io,
          "unknown method '" + args.method + "' (valid: minmax, kl)");
  }

  OutputWriter out("quant", args.out);
  if (!args.histogram.empty()) out.add_input(args.histogram);
  out.set_parameters(json{{"method", args.method},
                          {"mode", args.mode},
                          {"levels", args.levels}});
  out.write("quant_params.json", quant_to_json(params).dump(2) + "\n");
  out.finish();

  std::cout << "scale " << fmt_double(params.scale) << ", offset "
            << params.offset << "\n";
  return 0;
}

struct MemplanArgs {
  std::string network;
  std::int64_t elem_bytes = 4;
  bool no_inplace = false;
  std::string out = ".";
};

int cmd_memplan(const MemplanArgs& args) {
  const NetworkSpec net = load_network(args.network);
  const std::set<std::string> inplace =
      args.no_inplace ? std::set<std::string>{} : plan_inplace(net);
  const auto lifetimes = activation_lifetimes(net, inplace, args.elem_bytes);
  PoolPlan plan = plan_memory_pool(lifetimes);
  plan.inplace_set = inplace;

  OutputWriter out("memplan", args.out);
  out.add_input(args.network);
  out.set_parameters(json{{"elem_bytes", args.elem_bytes},
                          {"inplace", !args.no_inplace}});
  out.write("pool_plan.json", pool_plan_to_json(plan).dump(2) + "\n");
  out.finish();

  std::cout << "activation pool footprint: " << plan.footprint_bytes
            << " bytes (" << plan.inplace_set.size() << " in-place layers)\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-space exploration for per-layer implementation "
               "selection under conversion penalties"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd =
      app.add_subcommand("gen", "Generate a synthetic network and cost table");
  gen_cmd->add_option("--preset", gen.preset,
                      "chain | squeezenet_like | resnet_like | mobilenet_like")
      ->required();
  gen_cmd->add_option("--depth", gen.depth, "Chain depth (chain preset)");
  gen_cmd->add_option("--profile", gen.profile_path, "Cost profile JSON");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Output directory");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "Build a cost table from benchmark measurements");
  ingest_cmd
      ->add_option("--measurements", ingest.measurements, "Measurement CSV")
      ->required();
  ingest_cmd->add_option("--network-name", ingest.network_name,
                         "Name recorded in the table");
  ingest_cmd->add_option("--out", ingest.out, "Output directory");

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Search the design space");
  search_cmd->add_option("--network", search.network, "network.json")
      ->required();
  search_cmd->add_option("--costs", search.costs, "costs.json")->required();
  search_cmd->add_option("--algorithm", search.algorithm,
                         "rl | random | ds | ds+ | dijkstra | astar | brute");
  search_cmd->add_option("--episodes", search.params.total_episodes,
                         "Episodes (rl/random)");
  search_cmd->add_option("--seed", search.params.seed, "RNG seed");
  search_cmd->add_option("--alpha", search.params.alpha, "Learning rate");
  search_cmd->add_option("--gamma", search.params.gamma, "Discount factor");
  search_cmd->add_option("--replay-batch", search.params.replay_batch,
                         "Replayed transitions per episode");
  search_cmd->add_option("--out", search.out, "Output directory");

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand(
      "compare", "Run every algorithm and tabulate the results");
  compare_cmd->add_option("--network", compare.network, "network.json")
      ->required();
  compare_cmd->add_option("--costs", compare.costs, "costs.json")->required();
  compare_cmd->add_option("--seeds", compare.seeds,
                          "Seeds for the stochastic searches");
  compare_cmd->add_option("--episodes", compare.params.total_episodes,
                          "Episodes (rl/random)");
  compare_cmd->add_option("--alpha", compare.params.alpha, "Learning rate");
  compare_cmd->add_option("--gamma", compare.params.gamma, "Discount factor");
  compare_cmd->add_option("--replay-batch", compare.params.replay_batch,
                          "Replayed transitions per episode");
  compare_cmd->add_option("--base-accuracy", compare.base_accuracy,
                          "Additive accuracy base");
  compare_cmd->add_option("--out", compare.out, "Output directory");

  ParetoArgs pareto;
  auto* pareto_cmd = app.add_subcommand(
      "pareto", "Evaluate learnt solutions and emit the fronts");
  pareto_cmd->add_option("--network", pareto.network, "network.json")
      ->required();
  pareto_cmd->add_option("--costs", pareto.costs, "costs.json")->required();
  pareto_cmd->add_option("--episodes", pareto.params.total_episodes,
                         "Episodes per search");
  pareto_cmd->add_option("--seed", pareto.params.seed, "Base RNG seed");
  pareto_cmd->add_option("--alpha", pareto.params.alpha, "Learning rate");
  pareto_cmd->add_option("--gamma", pareto.params.gamma, "Discount factor");
  pareto_cmd->add_option("--replay-batch", pareto.params.replay_batch,
                         "Replayed transitions per episode");
  pareto_cmd->add_option("--num-searches", pareto.num_searches,
                         "Seeded searches to pool");
  pareto_cmd->add_option("--slack", pareto.slack,
                         "Latency slack for candidate filtering");
  pareto_cmd->add_option("--base-accuracy", pareto.base_accuracy,
                         "Additive accuracy base");
  pareto_cmd->add_option("--accuracy-table", pareto.accuracy_table_path,
                         "Measured accuracy JSON (fingerprint -> pct)");
  double max_drop = -1.0;
  pareto_cmd->add_option("--max-accuracy-drop", max_drop,
                         "Drop points losing more accuracy than this");
  std::int64_t max_memory = -1;
  pareto_cmd->add_option("--max-memory", max_memory,
                         "Drop points above this many bytes");
  pareto_cmd->add_flag("--svg", pareto.svg, "Also emit SVG scatters");
  pareto_cmd->add_option("--out", pareto.out, "Output directory");

  QuantArgs quant;
  auto* quant_cmd = app.add_subcommand(
      "quant", "Derive quantisation parameters from a range or histogram");
  quant_cmd->add_option("--histogram", quant.histogram,
                        "Histogram CSV (bin_edge, count)");
  double qmin = 0.0, qmax = 0.0;
  auto* qmin_opt = quant_cmd->add_option("--min", qmin, "Range minimum");
  auto* qmax_opt = quant_cmd->add_option("--max", qmax, "Range maximum");
  quant_cmd->add_option("--mode", quant.mode, "symmetric | asymmetric");
  quant_cmd->add_option("--method", quant.method, "minmax | kl");
  quant_cmd->add_option("--levels", quant.levels,
                        "Quantisation levels for KL calibration");
  quant_cmd->add_option("--out", quant.out, "Output directory");

  MemplanArgs memplan;
  auto* memplan_cmd = app.add_subcommand(
      "memplan", "Plan the shared activation pool for a network");
  memplan_cmd->add_option("--network", memplan.network, "network.json")
      ->required();
  memplan_cmd->add_option("--elem-bytes", memplan.elem_bytes,
                          "Bytes per tensor element");
  memplan_cmd->add_flag("--no-inplace", memplan.no_inplace,
                        "Disable in-place aliasing");
  memplan_cmd->add_option("--out", memplan.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*search_cmd) return cmd_search(search);
    if (*compare_cmd) return cmd_compare(compare);
    if (*pareto_cmd) {
      if (max_drop >= 0.0) pareto.max_accuracy_drop = max_drop;
      if (max_memory >= 0) pareto.max_memory = max_memory;
      return cmd_pareto(pareto);
    }
    if (*quant_cmd) {
      if (qmin_opt->count()) quant.min_value = qmin;
      if (qmax_opt->count()) quant.max_value = qmax;
      return cmd_quant(quant);
    }
    if (*memplan_cmd) return cmd_memplan(memplan);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
