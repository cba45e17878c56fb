#pragma once

#include "qsdse/optim.hpp"
#include "qsdse/pareto.hpp"
#include "qsdse/search.hpp"

// Serial counterparts of the OpenMP kernels. They stay deliberately plain --
// straight loops, no chunking, separate dominance formulation -- and are used
// by the tests to cross-check the parallel paths and by the benchmark target
// as the baseline.
namespace qsdse::reference {

SearchReport best_configuration(const DesignSpace& space,
                                std::uint64_t cap = kDefaultBruteForceCap);

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points,
                                      FrontObjective objective);

std::vector<double> kl_sweep(const std::vector<double>& normalized_histogram,
                             int levels);

double max_roundtrip_error(const std::vector<double>& values,
                           const QuantParams& params);

} // namespace qsdse::reference
