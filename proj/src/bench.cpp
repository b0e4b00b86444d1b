#include "kprop/bench.hpp"

#include <algorithm>

#include "kprop/planted.hpp"

namespace kprop {

std::vector<ScalingPoint> run_scaling(const ScalingConfig& config) {
  std::vector<ScalingPoint> points;
  const std::size_t k = config.classes;
  const double total_vertices =
      static_cast<double>(config.vertices_per_type * config.num_types);
  for (std::size_t m : config.edge_counts) {
    PlantedSpec spec;
    spec.num_types = config.num_types;
    spec.sizes.assign(config.num_types, config.vertices_per_type);
    spec.classes = k;
    // Mostly homophilic with some spread, so every entry of B stays active.
    Matrix b(k, k, 0.25 / static_cast<double>(k * k));
    for (std::size_t i = 0; i < k; ++i) b(i, i) += 0.75 / static_cast<double>(k);
    spec.pair_b.assign(config.num_types * (config.num_types - 1) / 2, b);
    spec.edges_per_vertex = 2.0 * static_cast<double>(m) / total_vertices;
    spec.seed = config.seed;
    const PlantedInstance inst = generate_planted(spec);

    const SeedSet seeds = select_seeds(inst.graph, inst.truth, config.seed_fraction).seeds;
    InferenceConfig ic;
    ic.rule = config.rule;
    ic.max_iter = config.iterations;
    ic.tol = 0.0;
    ic.workers = config.workers;
    const InferenceResult r = run_inference(inst.graph, seeds, ic);

    std::vector<double> ms(r.trace.millis.begin() + 1, r.trace.millis.end());
    std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
    points.push_back({inst.graph.num_edges(), ms[ms.size() / 2]});
  }
  return points;
}

}  // namespace kprop
