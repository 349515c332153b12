#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "xicoal/simulate.hpp"

namespace xicoal {

enum class CouplingKind { Reduction, Joining };
const char* to_string(CouplingKind k);

// Reduction: derived count >= base count at all times.
// Joining: derived count <= base count at all times.
struct CoupledPair {
  Trajectory base;
  Trajectory derived;
  CouplingKind kind = CouplingKind::Reduction;
  double delta = 0.0;
  std::uint64_t shared_seed = 0;
};

// All three processes on one stream: joining <= base <= reduction.
struct CoupledTriple {
  Trajectory base;
  Trajectory reduction;
  Trajectory joining;
  double delta = 0.0;
  std::uint64_t shared_seed = 0;
};

// Every process colors block position i at ring r of atom j with
// stream_uniform(seed, coloring(j), r, i); the reduction additionally flips
// position i with stream_uniform(seed, flip(j), r, i) < delta. The base path
// equals simulate_block_count with the same arguments.
CoupledPair simulate_reduction_coupling(const XiMeasure& m, double delta, int n0, double horizon,
                                        std::uint64_t seed, std::optional<double> epsilon = std::nullopt);
CoupledPair simulate_joining_coupling(const XiMeasure& m, int n0, double horizon, std::uint64_t seed,
                                      std::optional<double> epsilon = std::nullopt);
CoupledTriple simulate_sandwich(const XiMeasure& m, double delta, int n0, double horizon, std::uint64_t seed,
                                std::optional<double> epsilon = std::nullopt);

// "t,n_base,n_derived" on the given grid, càdlàg sampling.
void write_paired_csv(std::ostream& os, const CoupledPair& pair, const std::vector<double>& grid);

}  // namespace xicoal
