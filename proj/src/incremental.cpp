#include "kprop/incremental.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "kprop/error.hpp"
#include "kprop/kernels.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

// --- edge statistics -------------------------------------------------------------

const EdgeStat* EdgeStats::find(TypeIndex t, TypeIndex t2) const {
  if (t == t2 || t >= num_types || t2 >= num_types) return nullptr;
  if (t > t2) std::swap(t, t2);
  // Pairs are laid out (0,1), (0,2), ..., (1,2), ...
  const std::size_t idx = t * num_types - t * (t + 1) / 2 + (t2 - t - 1);
  return pairs[idx] ? &*pairs[idx] : nullptr;
}

namespace {

double canonical_effect(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                        std::size_t u, std::size_t v, std::vector<double>& scratch) {
  TypeIndex tu = g.type_of(u), tv = g.type_of(v);
  if (tu > tv) {
    std::swap(u, v);
    std::swap(tu, tv);
  }
  multiply_vector(b.stored(tu, tv), y.row(v), scratch);
  return dot(y.row(u), scratch);
}

}  // namespace

EdgeStats compute_edge_stats(const KPartiteGraph& g, const LabelMatrix& y,
                             const PropagationSet& b) {
  EdgeStats stats;
  stats.num_types = g.num_types();
  std::vector<double> scratch(y.classes()), values;
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < g.num_types(); ++t2) {
      const auto edges = g.edges(t, t2);
      if (edges.empty()) {
        stats.pairs.emplace_back();
        continue;
      }
      values.clear();
      for (const Edge& e : edges)
        values.push_back(
            canonical_effect(g, y, b, g.global({t, e.u}), g.global({t2, e.v}), scratch));
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      stats.pairs.push_back(EdgeStat{mean, std::sqrt(var), values.size()});
    }
  return stats;
}

double edge_effect(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                   std::size_t u, std::size_t v) {
  std::vector<double> scratch(y.classes());
  return canonical_effect(g, y, b, u, v, scratch);
}

double expansion_threshold(double sigma, double theta) {
  return std::sqrt(1.0 / (1.0 - theta)) * sigma;
}

bool deviates(double effect, const EdgeStat& stat, double theta) {
  return std::abs(effect - stat.mean) >= expansion_threshold(stat.stddev, theta);
}

namespace {

/// Shared by the public entry point and the cached path in run_incremental;
/// `effect(v)` is the edge effect between u and neighbor v.
template <class Effect>
void expand_into(std::size_t u, const KPartiteGraph& g, const EdgeStats& stats, double theta,
                 std::span<const char> in_cand, Effect&& effect, std::vector<std::size_t>& out,
                 ExpansionCount* count) {
  const TypeIndex t = g.type_of(u);
  for (const Neighbor& n : g.neighbors(u)) {
    if (in_cand[n.vertex]) continue;
    const EdgeStat* stat = stats.find(t, g.type_of(n.vertex));
    if (stat == nullptr) continue;
    if (count) ++count->examined;
    if (deviates(effect(n.vertex), *stat, theta)) {
      out.push_back(n.vertex);
      if (count) ++count->admitted;
    }
  }
}

}  // namespace

std::vector<std::size_t> expand_candidates(std::size_t u, const KPartiteGraph& g,
                                           const LabelMatrix& y, const PropagationSet& b,
                                           const EdgeStats& stats, double theta,
                                           std::span<const char> in_cand, ExpansionCount* count) {
  std::vector<std::size_t> out;
  std::vector<double> scratch(y.classes());
  expand_into(
      u, g, stats, theta, in_cand,
      [&](std::size_t v) { return canonical_effect(g, y, b, u, v, scratch); }, out, count);
  return out;
}

// --- incremental run --------------------------------------------------------------

IncrementalResult run_incremental(const KPartiteGraph& g, LabelMatrix y, PropagationSet b,
                                  const SeedSet& seeds, std::span<const std::size_t> changed,
                                  const IncrementalConfig& config) {
  if (y.type_sizes() != g.type_sizes())
    throw Error("run_incremental: label matrix does not match graph shape");
  if (b.num_types() != g.num_types() || b.classes() != y.classes())
    throw Error("run_incremental: propagation matrices do not match graph shape");
  if (!(config.theta >= 0.0 && config.theta < 1.0))
    throw Error("run_incremental: theta must lie in [0, 1)");

  IncrementalResult result;
  if (changed.empty()) {
    result.labels = std::move(y);
    result.propagation = std::move(b);
    result.converged = true;
    return result;
  }
  if (config.refresh_b) {
    InferenceConfig ic;
    ic.rule = config.rule;
    ic.epsilon = config.epsilon;
    ic.b_mode = config.b_mode;
    update_propagation(g, y, b, ic);
  }

  const std::size_t k = y.classes();
  const std::size_t types = g.num_types();
  const auto lookup = seed_lookup(g, seeds);
  const EdgeStats stats = compute_edge_stats(g, y, b);

  std::vector<Matrix> grams(types);
  for (std::size_t t = 0; t < types; ++t) grams[t] = gram(y, t);
  std::vector<std::size_t> since_refresh(types, 0);
  std::vector<Matrix> common(types);
  std::vector<char> dirty(types, 1);

  // proj[v * types + t] = B(t, t(v)) Y(v): v's contribution to the message of a
  // type-t neighbor. Rows outside cand never change, so neither do theirs.
  std::vector<Matrix> oriented(types * types);
  for (std::size_t t = 0; t < types; ++t)
    for (std::size_t t2 = 0; t2 < types; ++t2)
      if (t != t2) oriented[t * types + t2] = b.oriented(t, t2);
  std::vector<double> proj(g.num_vertices() * types * k, 0.0);
  const auto project = [&](std::size_t v) {
    const std::size_t tv = g.type_of(v);
    for (std::size_t t = 0; t < types; ++t)
      if (t != tv)
        multiply_vector(oriented[t * types + tv], y.row(v),
                        std::span<double>(proj.data() + (v * types + t) * k, k));
  };
  const auto proj_of = [&](std::size_t v, std::size_t t) {
    return std::span<const double>(proj.data() + (v * types + t) * k, k);
  };
  for (std::size_t v = 0; v < g.num_vertices(); ++v) project(v);
  // Same value and rounding as edge_effect(): B applied to the higher type's row.
  const auto effect = [&](std::size_t u, std::size_t v) {
    const std::size_t tu = g.type_of(u), tv = g.type_of(v);
    return tu < tv ? dot(y.row(u), proj_of(v, tu)) : dot(y.row(v), proj_of(u, tv));
  };

  std::vector<char> in_cand(g.num_vertices(), 0);
  std::vector<std::size_t>& cand = result.candidates;
  for (std::size_t u : changed)
    if (!in_cand[u]) {
      in_cand[u] = 1;
      cand.push_back(u);
    }

  std::vector<double> previous(k), message(k), scratch(k);
  std::vector<std::size_t> admitted;
  while (result.rounds < config.max_rounds) {
    RoundStats rs;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      const std::size_t u = cand[i];
      const TypeIndex t = g.type_of(u);
      if (dirty[t]) {
        common[t] = common_term_from_grams(t, grams, b);
        dirty[t] = 0;
      }
      const std::span<const double> seed =
          lookup[u] ? std::span<const double>(lookup[u], k) : std::span<const double>{};
      std::fill(message.begin(), message.end(), 0.0);
      for (const Neighbor& n : g.neighbors(u)) simd::axpy(message, n.weight, proj_of(n.vertex, t));
      const double eta =
          config.rule == UpdateRule::Additive
              ? 1.0 / lipschitz_y(common[t], config.beta, !seed.empty(), config.epsilon)
              : 0.0;
      auto row = y.row(u);
      std::copy(row.begin(), row.end(), previous.begin());
      update_row(config.rule, row, message, scratch, common[t], seed, config.beta, config.epsilon,
                 eta);
      project(u);
      for (std::size_t l = 0; l < k; ++l)
        rs.max_change = std::max(rs.max_change, std::abs(row[l] - previous[l]));
      ++rs.updated;

      if (++since_refresh[t] >= config.gram_refresh) {
        grams[t] = gram(y, t);
        since_refresh[t] = 0;
      } else {
        Matrix& gm = grams[t];
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t c = 0; c < k; ++c)
            gm(a, c) += row[a] * row[c] - previous[a] * previous[c];
      }
      for (std::size_t t2 = 0; t2 < types; ++t2)
        if (t2 != t) dirty[t2] = 1;

      ExpansionCount count;
      admitted.clear();
      expand_into(
          u, g, stats, config.theta, in_cand, [&](std::size_t v) { return effect(u, v); },
          admitted, &count);
      for (std::size_t v : admitted) {
        in_cand[v] = 1;
        cand.push_back(v);
      }
      rs.examined += count.examined;
      rs.admitted += count.admitted;
    }
    result.round_stats.push_back(rs);
    ++result.rounds;
    if (rs.max_change < config.tol) {
      result.converged = true;
      break;
    }
  }
  result.labels = std::move(y);
  result.propagation = std::move(b);
  return result;
}

LabelMatrix carry_over_labels(const LabelMatrix& old, const DeltaResult& delta,
                              const SeedSet& seeds, std::size_t workers) {
  if (old.rows() != delta.old_to_new.size())
    throw Error("carry_over_labels: label matrix does not match the pre-delta graph");
  const KPartiteGraph& g = delta.graph;
  LabelMatrix y(g.type_sizes(), old.classes());
  std::vector<char> carried(g.num_vertices(), 0);
  for (std::size_t i = 0; i < old.rows(); ++i)
    if (const auto& j = delta.old_to_new[i]) {
      std::copy_n(old.row(i).begin(), old.classes(), y.row(*j).begin());
      carried[*j] = 1;
    }
  std::vector<std::size_t> fresh;
  for (std::size_t v = 0; v < g.num_vertices(); ++v)
    if (!carried[v]) fresh.push_back(v);
  if (!fresh.empty()) init_label_rows(g, seeds, fresh, y, workers);
  return y;
}

// --- utility ----------------------------------------------------------------------

double compute_gain(std::size_t whole, std::size_t changed_part, double theta) {
  if (changed_part == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(whole) / ((2.0 - theta) * static_cast<double>(changed_part));
}

double compute_gain(const KPartiteGraph& updated, std::span<const std::size_t> changed,
                    double theta) {
  if (changed.empty()) return std::numeric_limits<double>::infinity();
  return compute_gain(updated.num_vertices() + updated.num_edges(),
                      induced_subgraph(updated, changed).total(), theta);
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::span<const std::size_t> a,
                                                              std::span<const std::size_t> b,
                                                              const LossConfig& config) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (a.empty() || b.empty()) return out;
  if (a.size() <= config.max_pairs / b.size()) {
    out.reserve(a.size() * b.size());
    for (std::size_t u : a)
      for (std::size_t v : b) out.emplace_back(u, v);
    return out;
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1), pick_b(0, b.size() - 1);
  out.reserve(config.max_pairs);
  for (std::size_t i = 0; i < config.max_pairs; ++i) {
    const std::size_t u = a[pick_a(rng)];
    out.emplace_back(u, b[pick_b(rng)]);
  }
  return out;
}

double mean_normalized(std::span<const double> raw) {
  if (raw.empty()) return 0.0;
  const auto norm = normalize_scores(raw);
  double sum = 0.0;
  for (double v : norm) sum += v;
  return sum / static_cast<double>(norm.size());
}

LossEstimate estimate_loss(const KPartiteGraph& updated, const KPartiteGraph& delta_graph,
                           const KPartiteGraph& old,
                           std::span<const std::optional<std::size_t>> new_to_old,
                           std::span<const std::size_t> labeled, std::span<const std::size_t> plus,
                           std::span<const std::size_t> minus, const LossConfig& config) {
  LossEstimate loss;
  std::vector<double> lhs, rhs;

  const auto new_pairs = sample_pairs(minus, plus, config);
  for (const auto& [u, v] : new_pairs) {
    lhs.push_back(adamic_adar(updated, u, v));
    rhs.push_back(adamic_adar(delta_graph, u, v));
  }
  loss.loss_new = std::abs(mean_normalized(lhs) - mean_normalized(rhs));

  lhs.clear();
  rhs.clear();
  const auto fixed_pairs = sample_pairs(labeled, minus, config);
  for (const auto& [u, v] : fixed_pairs) {
    lhs.push_back(adamic_adar(updated, u, v));
    const auto& ou = new_to_old[u];
    const auto& ov = new_to_old[v];
    rhs.push_back(ou && ov ? adamic_adar(old, *ou, *ov) : 0.0);
  }
  loss.loss_fixed = std::abs(mean_normalized(lhs) - mean_normalized(rhs));
  return loss;
}

UtilityReport utility(double gain, double loss_new, double loss_fixed,
                      const UtilityConfig& config) {
  UtilityReport r;
  r.gain = gain;
  r.loss_new = loss_new;
  r.loss_fixed = loss_fixed;
  r.utility = config.u_s * gain - config.u_a * (loss_new + loss_fixed);
  r.recommendation =
      r.utility > config.threshold ? Recommendation::Incremental : Recommendation::Recompute;
  return r;
}

UtilityReport assess_update(const KPartiteGraph& old, const DeltaResult& delta,
                            const SeedSet& seeds, std::span<const std::size_t> candidates,
                            double theta, const UtilityConfig& config) {
  const KPartiteGraph& g = delta.graph;
  const std::size_t n = g.num_vertices();
  std::vector<std::optional<std::size_t>> new_to_old(n);
  for (std::size_t i = 0; i < delta.old_to_new.size(); ++i)
    if (const auto& j = delta.old_to_new[i]) new_to_old[*j] = i;

  std::vector<char> role(n, 0);  // 1 seed, 2 plus
  std::vector<std::size_t> labeled, plus, minus;
  for (const auto& [ref, row] : seeds.rows) role[g.global(ref)] = 1;
  for (std::size_t v : delta.changed)
    if (role[v] == 0) role[v] = 2;
  for (std::size_t v : candidates)
    if (role[v] == 0) role[v] = 2;
  for (std::size_t v = 0; v < n; ++v)
    (role[v] == 1 ? labeled : role[v] == 2 ? plus : minus).push_back(v);

  const KPartiteGraph delta_graph = restrict_edges(g, delta.changed);
  const LossEstimate loss =
      estimate_loss(g, delta_graph, old, new_to_old, labeled, plus, minus, config.loss);
  return utility(compute_gain(g, delta.changed, theta), loss.loss_new, loss.loss_fixed, config);
}

void write_report(const UtilityReport& report, std::ostream& out) {
  out << "GAIN " << text::format_decimal(report.gain) << '\n'
      << "LOSS_NEW " << text::format_decimal(report.loss_new) << '\n'
      << "LOSS_FIXED " << text::format_decimal(report.loss_fixed) << '\n'
      << "UTILITY " << text::format_decimal(report.utility) << '\n'
      << "RECOMMEND "
      << (report.recommendation == Recommendation::Incremental ? "INCREMENTAL" : "RECOMPUTE")
      << '\n';
}

}  // namespace kprop
