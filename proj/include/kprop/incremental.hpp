#pragma once

// Lazy label updates after a graph/label delta: only a candidate set grown
// from the changed vertices is re-solved. Also the gain/loss utility used to
// choose between an incremental update and a full recompute.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/inference.hpp"
#include "kprop/model.hpp"

namespace kprop {

struct EdgeStat {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t edges = 0;
};

/// Mean and spread of Y(u)^T B Y(v) per unordered type pair. Pairs without
/// edges have no entry.
struct EdgeStats {
  std::size_t num_types = 0;
  std::vector<std::optional<EdgeStat>> pairs;

  const EdgeStat* find(TypeIndex t, TypeIndex t2) const;
};

EdgeStats compute_edge_stats(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b);

/// Y(u)^T B(t(u),t(v)) Y(v) for global ids u, v of different types.
double edge_effect(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                   std::size_t u, std::size_t v);

/// sqrt(1 / (1 - theta)) * sigma
double expansion_threshold(double sigma, double theta);
bool deviates(double effect, const EdgeStat& stat, double theta);

struct ExpansionCount {
  std::size_t examined = 0;
  std::size_t admitted = 0;
};

/// Neighbors of u (ascending global id) that are not yet candidates and whose
/// edge effect deviates from the pair mean by at least the threshold.
std::vector<std::size_t> expand_candidates(std::size_t u, const KPartiteGraph& g,
                                           const LabelMatrix& y, const PropagationSet& b,
                                           const EdgeStats& stats, double theta,
                                           std::span<const char> in_cand,
                                           ExpansionCount* count = nullptr);

struct IncrementalConfig {
  double theta = 0.5;
  std::size_t max_rounds = 100;
  double tol = 1e-6;
  UpdateRule rule = UpdateRule::Multiplicative;
  double beta = 5.0;
  double epsilon = 1e-9;
  /// One B update pass before the candidate rounds; B is frozen otherwise.
  bool refresh_b = false;
  BMode b_mode = BMode::Full;
  /// Full Gram recomputation period, in row updates per type.
  std::size_t gram_refresh = 64;
};

struct RoundStats {
  std::size_t updated = 0;
  std::size_t examined = 0;
  std::size_t admitted = 0;
  double max_change = 0.0;
};

struct IncrementalResult {
  LabelMatrix labels;
  PropagationSet propagation;
  std::size_t rounds = 0;
  bool converged = false;
  /// Every vertex that entered the candidate set, in admission order.
  std::vector<std::size_t> candidates;
  std::vector<RoundStats> round_stats;

  std::size_t touched() const noexcept { return candidates.size(); }
};

/// Rows of `y` are the starting point on the new graph (see carry_over_labels);
/// `changed` are global ids of the new graph.
IncrementalResult run_incremental(const KPartiteGraph& g, LabelMatrix y, PropagationSet b,
                                  const SeedSet& seeds, std::span<const std::size_t> changed,
                                  const IncrementalConfig& config);

/// Surviving rows copied from the old matrix; new vertices initialized from
/// same-type seed similarity (uniform when there is none).
LabelMatrix carry_over_labels(const LabelMatrix& old, const DeltaResult& delta,
                              const SeedSet& seeds, std::size_t workers = 1);

// --- utility ----------------------------------------------------------------------

/// |G'| / ((2 - theta) |dG|) with |.| = vertices + edges; +inf when dG is empty.
double compute_gain(std::size_t whole, std::size_t changed_part, double theta);
double compute_gain(const KPartiteGraph& updated, std::span<const std::size_t> changed,
                    double theta);

struct LossConfig {
  std::size_t max_pairs = 10000;
  std::uint64_t seed = 20190408;
};

struct LossEstimate {
  double loss_new = 0.0;
  double loss_fixed = 0.0;
  double total() const noexcept { return loss_new + loss_fixed; }
};

/// All pairs of a x b when there are at most max_pairs of them, otherwise
/// max_pairs uniform draws.
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::span<const std::size_t> a,
                                                              std::span<const std::size_t> b,
                                                              const LossConfig& config);

/// Mean of min-max normalized scores; 0 for an empty batch.
double mean_normalized(std::span<const double> raw);

/// Similarity drift between the updated graph and, respectively, the changed
/// part (V- x V+) and the old graph (V^L x V-). All vertex lists are global ids
/// of `updated`; `delta_graph` shares its vertex ids; `new_to_old` maps into
/// `old` (nullopt for vertices the old graph lacks, whose similarity is 0).
LossEstimate estimate_loss(const KPartiteGraph& updated, const KPartiteGraph& delta_graph,
                           const KPartiteGraph& old,
                           std::span<const std::optional<std::size_t>> new_to_old,
                           std::span<const std::size_t> labeled, std::span<const std::size_t> plus,
                           std::span<const std::size_t> minus, const LossConfig& config = {});

enum class Recommendation { Incremental, Recompute };

struct UtilityConfig {
  double u_s = 60.0;
  double u_a = 100.0;
  double threshold = 200.0;
  LossConfig loss{};
};

struct UtilityReport {
  double gain = 0.0;
  double loss_new = 0.0;
  double loss_fixed = 0.0;
  double utility = 0.0;
  Recommendation recommendation = Recommendation::Recompute;
};

UtilityReport utility(double gain, double loss_new, double loss_fixed, const UtilityConfig& config);

/// Full decision for a delta: V+ is the changed set plus every candidate the
/// incremental run admitted, V- the remaining non-seed vertices.
UtilityReport assess_update(const KPartiteGraph& old, const DeltaResult& delta,
                            const SeedSet& seeds, std::span<const std::size_t> candidates,
                            double theta, const UtilityConfig& config);

void write_report(const UtilityReport& report, std::ostream& out);

}  // namespace kprop
