#include "qsdse/json_io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace qsdse {

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

json edge_cost_to_json(const EdgeCost& c) {
  if (!c) return "forbidden";
  return *c;
}

EdgeCost edge_cost_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "forbidden") return kForbidden;
    raise(ErrorCode::Io, "penalty must be a number or \"forbidden\"");
  }
  return j.get<double>();
}

json pattern_to_json(const AttrPattern& p) {
  json j = json::object();
  if (p.data_type) j["data_type"] = to_string(*p.data_type);
  if (p.layout) j["layout"] = to_string(*p.layout);
  if (p.core) j["core"] = to_string(*p.core);
  return j;
}

AttrPattern pattern_from_json(const json& j) {
  AttrPattern p;
  if (j.contains("data_type"))
    p.data_type = data_type_from_string(j.at("data_type").get<std::string>());
  if (j.contains("layout"))
    p.layout = layout_from_string(j.at("layout").get<std::string>());
  if (j.contains("core"))
    p.core = core_from_string(j.at("core").get<std::string>());
  return p;
}

json impl_to_json(const ImplDescriptor& impl) {
  json j;
  j["id"] = impl.id;
  j["library"] = impl.library;
  j["algorithm"] = impl.algorithm;
  j["algorithm_config"] = impl.algorithm_config;
  j["data_type"] = to_string(impl.data_type);
  j["layout"] = to_string(impl.layout);
  j["core"] = to_string(impl.core);
  j["latency_ms"] = impl.latency_ms;
  j["memory_bytes"] = impl.memory_bytes;
  j["accuracy_delta_pp"] = impl.accuracy_delta_pp;
  if (impl.fuses_next) j["fuses_next"] = to_string(*impl.fuses_next);
  return j;
}

ImplDescriptor impl_from_json(const json& j) {
  ImplDescriptor impl;
  impl.id = j.at("id").get<std::string>();
  impl.library = j.value("library", "");
  impl.algorithm = j.value("algorithm", "");
  impl.algorithm_config = j.value("algorithm_config", "");
  impl.data_type = data_type_from_string(j.value("data_type", "FP32"));
  impl.layout = layout_from_string(j.value("layout", "NCHW"));
  impl.core = core_from_string(j.value("core", "CPU"));
  impl.latency_ms = j.at("latency_ms").get<double>();
  impl.memory_bytes = j.value("memory_bytes", std::int64_t{0});
  impl.accuracy_delta_pp = j.value("accuracy_delta_pp", 0.0);
  if (j.contains("fuses_next"))
    impl.fuses_next =
        layer_kind_from_string(j.at("fuses_next").get<std::string>());
  return impl;
}

} // namespace

json network_to_json(const NetworkSpec& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    json lj;
    lj["id"] = l.id;
    lj["kind"] = to_string(l.kind);
    lj["depth"] = l.depth;
    lj["predecessors"] = l.predecessors;
    lj["output_size"] = l.output_size;
    lj["params_size"] = l.params_size;
    layers.push_back(std::move(lj));
  }
  return json{{"name", net.name}, {"layers", std::move(layers)}};
}

NetworkSpec network_from_json(const json& j) {
  NetworkSpec net;
  net.name = j.at("name").get<std::string>();
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.id = lj.at("id").get<std::string>();
    l.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
    l.depth = lj.at("depth").get<int>();
    if (lj.contains("predecessors"))
      l.predecessors = lj.at("predecessors").get<std::vector<std::string>>();
    l.output_size = lj.value("output_size", std::int64_t{0});
    l.params_size = lj.value("params_size", std::int64_t{0});
    net.layers.push_back(std::move(l));
  }
  return net;
}

json costs_to_json(const CostTable& table) {
  json entries = json::object();
  for (const auto& [layer, impls] : table.entries) {
    json arr = json::array();
    for (const auto& impl : impls) arr.push_back(impl_to_json(impl));
    entries[layer] = std::move(arr);
  }

  json conversions = json::array();
  for (const auto& rule : table.conversions) {
    json rj;
    rj["from"] = pattern_to_json(rule.from);
    rj["to"] = pattern_to_json(rule.to);
    rj["penalty_ms"] = edge_cost_to_json(rule.penalty_ms);
    if (rule.buffer_bytes != 0) rj["buffer_bytes"] = rule.buffer_bytes;
    conversions.push_back(std::move(rj));
  }

  json j;
  j["network_name"] = table.network_name;
  j["entries"] = std::move(entries);
  j["conversions"] = std::move(conversions);
  if (!table.edge_overrides.empty()) {
    json overrides = json::array();
    for (const auto& ov : table.edge_overrides) {
      json oj;
      oj["edge"] = json::array({ov.pred_layer, ov.layer});
      oj["from_impl"] = ov.from_impl;
      oj["to_impl"] = ov.to_impl;
      oj["penalty_ms"] = edge_cost_to_json(ov.penalty_ms);
      if (ov.buffer_bytes != 0) oj["buffer_bytes"] = ov.buffer_bytes;
      overrides.push_back(std::move(oj));
    }
    j["edge_overrides"] = std::move(overrides);
  }
  if (!table.default_mismatch_penalty_ms ||
      *table.default_mismatch_penalty_ms != 0.0)
    j["default_mismatch_penalty_ms"] =
        edge_cost_to_json(table.default_mismatch_penalty_ms);
  if (!table.reference_library.empty())
    j["reference_library"] = table.reference_library;
  return j;
}

CostTable costs_from_json(const json& j) {
  CostTable table;
  table.network_name = j.at("network_name").get<std::string>();
  for (const auto& [layer, arr] : j.at("entries").items()) {
    std::vector<ImplDescriptor> impls;
    for (const auto& ij : arr) impls.push_back(impl_from_json(ij));
    table.entries[layer] = std::move(impls);
  }
  for (const auto& rj : j.value("conversions", json::array())) {
    ConversionRule rule;
    rule.from = pattern_from_json(rj.at("from"));
    rule.to = pattern_from_json(rj.at("to"));
    rule.penalty_ms = edge_cost_from_json(rj.at("penalty_ms"));
    rule.buffer_bytes = rj.value("buffer_bytes", std::int64_t{0});
    table.conversions.push_back(std::move(rule));
  }
  for (const auto& oj : j.value("edge_overrides", json::array())) {
    EdgeOverride ov;
    ov.pred_layer = oj.at("edge").at(0).get<std::string>();
    ov.layer = oj.at("edge").at(1).get<std::string>();
    ov.from_impl = oj.at("from_impl").get<std::string>();
    ov.to_impl = oj.at("to_impl").get<std::string>();
    ov.penalty_ms = edge_cost_from_json(oj.at("penalty_ms"));
    ov.buffer_bytes = oj.value("buffer_bytes", std::int64_t{0});
    table.edge_overrides.push_back(std::move(ov));
  }
  if (j.contains("default_mismatch_penalty_ms"))
    table.default_mismatch_penalty_ms =
        edge_cost_from_json(j.at("default_mismatch_penalty_ms"));
  table.reference_library = j.value("reference_library", "");
  return table;
}

json report_to_json(const SearchReport& report) {
  json config = json::object();
  for (const auto& [layer, impl] : report.best_config.assignment)
    config[layer] = impl;
  json j;
  j["algorithm"] = report.algorithm;
  j["best_config"] = std::move(config);
  j["best_latency_ms"] = report.best_latency_ms;
  j["considered_states"] = report.considered_states;
  j["learning_curve"] = report.learning_curve;
  if (report.seed)
    j["seed"] = *report.seed;
  else
    j["seed"] = nullptr;
  return j;
}

json quant_to_json(const QuantParams& params) {
  return json{{"scale", params.scale},
              {"offset", params.offset},
              {"bit_width", params.bit_width},
              {"mode", params.mode == QuantMode::Symmetric ? "symmetric"
                                                           : "asymmetric"}};
}

json pool_plan_to_json(const PoolPlan& plan) {
  json offsets = json::object();
  for (const auto& [tensor, offset] : plan.offsets) offsets[tensor] = offset;
  json j;
  j["offsets"] = std::move(offsets);
  j["footprint_bytes"] = plan.footprint_bytes;
  j["inplace_set"] =
      std::vector<std::string>(plan.inplace_set.begin(), plan.inplace_set.end());
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::Io, "cannot write " + path.string());
  out << data;
  if (!out) raise(ErrorCode::Io, "short write to " + path.string());
}

NetworkSpec load_network(const std::filesystem::path& path) {
  return network_from_json(json::parse(read_file(path)));
}

CostTable load_costs(const std::filesystem::path& path) {
  return costs_from_json(json::parse(read_file(path)));
}

void save_json(const json& j, const std::filesystem::path& path) {
  write_file(path, j.dump(2) + "\n");
}

std::string curve_csv(const SearchReport& report) {
  std::string csv = "episode,latency_ms\n";
  for (std::size_t i = 0; i < report.learning_curve.size(); ++i) {
    csv += std::to_string(i);
    csv += ',';
    csv += fmt_double(report.learning_curve[i]);
    csv += '\n';
  }
  return csv;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string csv = "algorithm,latency_ms,considered_states,accuracy_pct,seed\n";
  for (const auto& r : rows) {
    csv += r.algorithm;
    csv += ',';
    csv += fmt_double(r.latency_ms);
    csv += ',';
    csv += std::to_string(r.considered_states);
    csv += ',';
    csv += fmt_double(r.accuracy_pct);
    csv += ',';
    if (r.seed) csv += std::to_string(*r.seed);
    csv += '\n';
  }
  return csv;
}

std::string front_csv(const std::vector<ParetoPoint>& points,
                      double ref_latency_ms) {
  std::string csv = "label,latency_ms,accuracy_pct,memory_bytes,speedup_vs_ref\n";
  for (const auto& p : points) {
    csv += p.label;
    csv += ',';
    csv += fmt_double(p.latency_ms);
    csv += ',';
    csv += fmt_double(p.accuracy_pct);
    csv += ',';
    csv += std::to_string(p.memory_bytes);
    csv += ',';
    csv += fmt_double(ref_latency_ms / p.latency_ms);
    csv += '\n';
  }
  return csv;
}

std::string front_svg(const std::vector<ParetoPoint>& points,
                      FrontObjective objective) {
  const double width = 640, height = 420, margin = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto y_of = [&](const ParetoPoint& p) {
    return objective == FrontObjective::LatencyAccuracy
               ? p.accuracy_pct
               : static_cast<double>(p.memory_bytes);
  };
  for (const auto& p : points) {
    xmin = std::min(xmin, p.latency_ms);
    xmax = std::max(xmax, p.latency_ms);
    ymin = std::min(ymin, y_of(p));
    ymax = std::max(ymax, y_of(p));
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_double(width) +
      "\" height=\"" + fmt_double(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : points) {
    const double x =
        margin + (p.latency_ms - xmin) / (xmax - xmin) * (width - 2 * margin);
    const double y = height - margin -
                     (y_of(p) - ymin) / (ymax - ymin) * (height - 2 * margin);
    const char* fill = p.label == "Ref-FP32"   ? "#d62728"
                       : p.label == "Opt-FP32" ? "#2ca02c"
                       : p.label == "INT8"     ? "#1f77b4"
                                               : "#7f7f7f";
    svg += "<circle cx=\"" + fmt_double(x) + "\" cy=\"" + fmt_double(y) +
           "\" r=\"4\" fill=\"" + fill + "\"><title>" + p.label + "</title></circle>\n";
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

} // namespace

Histogram load_histogram_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  Histogram hist;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("bin_edge") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    auto cells = split_csv_line(line);
    if (cells.size() != 2)
      raise(ErrorCode::Io, "histogram rows must be (bin_edge, count)");
    hist.max_abs = std::stod(cells[0]); // edges ascend; last edge is the range
    hist.counts.push_back(std::stoull(cells[1]));
  }
  return hist;
}

std::vector<MeasurementRecord> load_measurements_csv(
    const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line))
    raise(ErrorCode::Io, "empty measurement file " + path.string());

  std::vector<MeasurementRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() < 10)
      raise(ErrorCode::Io, "measurement row needs at least one run column");
    MeasurementRecord rec;
    rec.layer_id = cells[0];
    rec.library = cells[1];
    rec.algorithm = cells[2];
    rec.algorithm_config = cells[3];
    rec.data_type = data_type_from_string(cells[4]);
    rec.layout = layout_from_string(cells[5]);
    rec.core = core_from_string(cells[6]);
    rec.memory_bytes = std::stoll(cells[7]);
    rec.warm_up_count = std::stoi(cells[8]);
    for (std::size_t i = 9; i < cells.size(); ++i)
      if (!cells[i].empty()) rec.runs_ms.push_back(std::stod(cells[i]));
    records.push_back(std::move(rec));
  }
  return records;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

json manifest_to_json(const RunManifest& manifest) {
  json outputs = json::array();
  for (const auto& [path, digest] : manifest.outputs)
    outputs.push_back(json{{"path", path}, {"sha256", digest}});
  json j;
  j["command"] = manifest.command;
  j["inputs"] = manifest.inputs;
  if (manifest.seed)
    j["seed"] = *manifest.seed;
  else
    j["seed"] = nullptr;
  j["parameters"] = manifest.parameters;
  j["tool_version"] = manifest.tool_version;
  j["outputs"] = std::move(outputs);
  return j;
}

} // namespace qsdse
