#pragma once

// Random instances and dense (Eigen) reconstructions shared by the suites.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/model.hpp"

namespace testing {

using kprop::KPartiteGraph;
using kprop::LabelMatrix;
using kprop::PropagationSet;
using kprop::SeedSet;
using kprop::TypeIndex;

inline std::string vid(std::size_t i) { return "x" + std::to_string(i); }

/// Every cross-type pair is an edge with probability `density`; weights are 1
/// or uniform in (0.5, 2) when `weighted`.
inline KPartiteGraph random_graph(const std::vector<std::size_t>& sizes, double density,
                                  std::mt19937_64& rng, bool weighted = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  kprop::GraphBuilder b(sizes.size());
  for (std::size_t t = 0; t < sizes.size(); ++t)
    for (std::size_t i = 0; i < sizes[t]; ++i) b.add_vertex(static_cast<TypeIndex>(t), vid(i));
  for (std::size_t t = 0; t < sizes.size(); ++t)
    for (std::size_t t2 = t + 1; t2 < sizes.size(); ++t2)
      for (std::size_t i = 0; i < sizes[t]; ++i)
        for (std::size_t j = 0; j < sizes[t2]; ++j)
          if (unit(rng) < density)
            b.add_edge(static_cast<TypeIndex>(t), vid(i), static_cast<TypeIndex>(t2), vid(j),
                       weighted ? 0.5 + 1.5 * unit(rng) : 1.0);
  return b.build();
}

inline LabelMatrix random_labels(const KPartiteGraph& g, std::size_t k, std::mt19937_64& rng,
                                 double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  LabelMatrix y(g.type_sizes(), k);
  for (double& v : y.data()) v = d(rng);
  return y;
}

inline PropagationSet random_propagation(std::size_t types, std::size_t k, std::mt19937_64& rng,
                                         double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  PropagationSet b(types, k);
  for (kprop::Matrix& m : b.pairs())
    for (double& v : m.data()) v = d(rng);
  return b;
}

/// Each vertex becomes a one-hot seed with probability `fraction`.
inline SeedSet random_seeds(const KPartiteGraph& g, std::size_t k, double fraction,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, k - 1);
  SeedSet s;
  s.classes = k;
  for (std::size_t v = 0; v < g.num_vertices(); ++v)
    if (unit(rng) < fraction) {
      std::vector<double> row(k, 0.0);
      row[label(rng)] = 1.0;
      s.rows.emplace(g.ref(v), row);
    }
  return s;
}

// --- dense views ------------------------------------------------------------------

inline Eigen::MatrixXd dense_block(const LabelMatrix& y, std::size_t t) {
  const std::size_t n = y.type_sizes()[t], k = y.classes();
  Eigen::MatrixXd m(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) m(i, l) = y.row(y.type_offset(t) + i)[l];
  return m;
}

inline Eigen::MatrixXd dense(const kprop::Matrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  return m;
}

/// G_tt' as an n_t x n_t' dense matrix (t < t2).
inline Eigen::MatrixXd dense_adjacency(const KPartiteGraph& g, TypeIndex t, TypeIndex t2) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.num_vertices(t), g.num_vertices(t2));
  for (const kprop::Edge& e : g.edges(t, t2)) m(e.u, e.v) = e.weight;
  return m;
}

/// Y*_t rows (zero for non-seeds) and the seed indicator S_t.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> dense_seeds(const KPartiteGraph& g,
                                                               const SeedSet& s, std::size_t t,
                                                               std::size_t k) {
  const std::size_t n = g.num_vertices(static_cast<TypeIndex>(t));
  Eigen::MatrixXd ys = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
  for (const auto& [ref, row] : s.rows)
    if (ref.type == t) {
      ind(ref.index) = 1.0;
      for (std::size_t l = 0; l < k; ++l) ys(ref.index, l) = row[l];
    }
  return {ys, ind};
}

/// Dense objective: sum over unordered pairs of ||G - Y_t B Y_t'^T||_F^2 plus
/// beta * sum over seeds ||Y(u) - Y*(u)||^2.
inline double dense_objective(const KPartiteGraph& g, const LabelMatrix& y,
                              const PropagationSet& b, const SeedSet& s, double beta) {
  double total = 0.0;
  const std::size_t types = g.num_types();
  for (TypeIndex t = 0; t < types; ++t)
    for (TypeIndex t2 = t + 1; t2 < types; ++t2) {
      const Eigen::MatrixXd r = dense_adjacency(g, t, t2) -
                                dense_block(y, t) * dense(b.stored(t, t2)) *
                                    dense_block(y, t2).transpose();
      total += r.squaredNorm();
    }
  for (std::size_t t = 0; t < types; ++t) {
    const auto [ys, ind] = dense_seeds(g, s, t, y.classes());
    total += beta * (ind.asDiagonal() * (dense_block(y, t) - ys)).squaredNorm();
  }
  return total;
}

}  // namespace testing
