#pragma once

// Synthetic K-partite graphs with planted labels: edge probability between
// two vertices is proportional to B*(label(u), label(v)) for their type pair.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/matrix.hpp"
#include "kprop/model.hpp"

namespace kprop {

struct PlantedSpec {
  std::size_t num_types = 0;
  std::vector<std::size_t> sizes;
  std::size_t classes = 0;
  /// One k x k matrix per unordered type pair, in (0,1), (0,2), ..., (1,2) order.
  std::vector<Matrix> pair_b;
  /// Label distribution per type; uniform when empty.
  std::vector<std::vector<double>> label_dist;
  double edges_per_vertex = 6.0;
  std::uint64_t seed = 42;

  std::size_t pair_index(std::size_t t, std::size_t t2) const;
};

/// Parses `key=value` lines: K, n (comma list), k, B.t.t2 (row-major comma
/// list), labels.t (comma list), epv, seed. Unset pairs default to I/k.
PlantedSpec read_planted_spec(std::istream& in);
PlantedSpec load_planted_spec(const std::filesystem::path& path);

struct PlantedInstance {
  KPartiteGraph graph;
  LabelTable truth;
};

/// Expected edge count for a pair is epv / (K - 1) * (n_t + n_t') / 2.
/// Throws when that count would need an edge probability above 1.
PlantedInstance generate_planted(const PlantedSpec& spec);

/// Writes prefix.vertices, prefix.edges and prefix.truth.
void write_planted(const PlantedInstance& inst, const std::string& prefix);

}  // namespace kprop
