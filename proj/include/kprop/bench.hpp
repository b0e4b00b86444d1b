#pragma once

// Per-iteration cost of the label engine as the edge count grows at fixed
// vertex count and k.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kprop/inference.hpp"

namespace kprop {

struct ScalingConfig {
  std::size_t vertices_per_type = 10000;
  std::size_t num_types = 3;
  std::size_t classes = 3;
  std::vector<std::size_t> edge_counts{50000, 100000, 200000};
  std::size_t iterations = 5;
  double seed_fraction = 0.05;
  UpdateRule rule = UpdateRule::Multiplicative;
  std::size_t workers = 1;
  std::uint64_t seed = 7;
};

struct ScalingPoint {
  std::size_t edges = 0;  // generated, not requested
  double ms_per_iteration = 0.0;  // median over the timed iterations
};

std::vector<ScalingPoint> run_scaling(const ScalingConfig& config);

}  // namespace kprop
