// Compares the OpenMP kernels against their serial reference
// implementations: exhaustive enumeration, Pareto extraction, the KL
// calibration sweep, and the quantisation round-trip scan.

#include <omp.h>

#include <cstdio>
#include <vector>

#include "qsdse/reference.hpp"
#include "qsdse/rng.hpp"
#include "qsdse/search.hpp"
#include "qsdse/synth.hpp"

using namespace qsdse;

namespace {

DesignSpace bench_space() {
  NetworkSpec net;
  CostTable table;
  RandomSource rng(1);
  std::string prev;
  for (int d = 0; d < 9; ++d) {
    LayerSpec l;
    l.id = "l" + std::to_string(d);
    l.kind = d == 0 ? LayerKind::Input : LayerKind::Convolution;
    l.depth = d;
    if (d > 0) l.predecessors = {prev};
    l.output_size = 1000;
    net.layers.push_back(l);

    std::vector<ImplDescriptor> impls;
    for (int k = 0; k < 6; ++k) {
      ImplDescriptor impl;
      impl.id = "i" + std::to_string(k);
      impl.library = "bench";
      impl.data_type = k % 2 ? DataType::INT8 : DataType::FP32;
      impl.layout = k % 3 ? Layout::NHWC : Layout::NCHW;
      impl.latency_ms = 0.5 + 9.5 * rng.next_double();
      impls.push_back(impl);
    }
    table.entries[l.id] = impls;
    prev = l.id;
  }
  ConversionRule dtype;
  dtype.from.data_type = DataType::FP32;
  dtype.to.data_type = DataType::INT8;
  dtype.penalty_ms = 0.7;
  ConversionRule back;
  back.from.data_type = DataType::INT8;
  back.to.data_type = DataType::FP32;
  back.penalty_ms = 0.7;
  table.conversions = {dtype, back};
  return DesignSpace::build(net, table);
}

void report(const char* kernel, double serial_s, double parallel_s,
            bool match) {
  std::printf("%-18s serial %8.1f ms   openmp %8.1f ms   speedup %5.2fx   %s\n",
              kernel, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              match ? "results match" : "RESULTS DIFFER");
}

} // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  { // exhaustive enumeration: ~10^7 configurations
    auto space = bench_space();
    double t0 = omp_get_wtime();
    auto serial = reference::best_configuration(space, 20'000'000);
    double t1 = omp_get_wtime();
    auto parallel = run_brute_force(space, 20'000'000);
    double t2 = omp_get_wtime();
    report("brute_force", t1 - t0, t2 - t1,
           serial.best_latency_ms == parallel.best_latency_ms &&
               serial.best_config.assignment ==
                   parallel.best_config.assignment);
  }

  { // Pareto extraction over 8k points (quadratic dominance)
    RandomSource rng(2);
    std::vector<ParetoPoint> points(8000);
    for (auto& p : points) {
      p.latency_ms = 1.0 + 99.0 * rng.next_double();
      p.accuracy_pct = 100.0 * rng.next_double();
      p.memory_bytes = static_cast<std::int64_t>(rng.next_index(1 << 24));
    }
    double t0 = omp_get_wtime();
    auto serial = reference::pareto_front(points, FrontObjective::LatencyAccuracy);
    double t1 = omp_get_wtime();
    auto parallel = pareto_front(points, FrontObjective::LatencyAccuracy);
    double t2 = omp_get_wtime();
    report("pareto_front", t1 - t0, t2 - t1, serial.size() == parallel.size());
  }

  { // KL calibration sweep: 4096 bins, 256 levels
    RandomSource rng(3);
    Histogram hist;
    hist.counts.assign(4096, 0);
    for (auto& c : hist.counts) c = rng.next_index(10000);
    hist.max_abs = 4.0;

    std::uint64_t total = 0;
    for (auto c : hist.counts) total += c;
    std::vector<double> normalized(hist.counts.size());
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
      normalized[i] = static_cast<double>(hist.counts[i]) / total;

    double t0 = omp_get_wtime();
    auto serial = reference::kl_sweep(normalized, 256);
    double t1 = omp_get_wtime();
    auto params = kl_calibrate(hist, 256);
    double t2 = omp_get_wtime();

    int best = 0;
    for (std::size_t c = 1; c < serial.size(); ++c)
      if (serial[c] < serial[best]) best = static_cast<int>(c);
    const double serial_scale = (256 + best) * (hist.max_abs / 4096) / 127.0;
    report("kl_sweep", t1 - t0, t2 - t1, params.scale == serial_scale);
  }

  { // round-trip error scan over 5M values
    RandomSource rng(4);
    auto params = quant_params_minmax(-2.0, 2.0, QuantMode::Symmetric);
    std::vector<double> values(5'000'000);
    for (auto& v : values) v = rng.next_range(-2.0, 2.0);
    double t0 = omp_get_wtime();
    const double serial = reference::max_roundtrip_error(values, params);
    double t1 = omp_get_wtime();
    const double parallel = quantize_roundtrip(values, params);
    double t2 = omp_get_wtime();
    report("quant_roundtrip", t1 - t0, t2 - t1, serial == parallel);
  }

  return 0;
}
