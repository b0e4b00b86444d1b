#include "kprop/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kprop/error.hpp"
#include "kprop/kernels.hpp"
#include "kprop/parallel.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

// --- auxiliary graphs ------------------------------------------------------------

std::vector<AuxGraph> read_aux_graph(std::istream& in, const KPartiteGraph& g) {
  std::vector<AuxGraph> by_type(g.num_types());
  for (TypeIndex t = 0; t < g.num_types(); ++t) by_type[t].type = t;
  text::for_each_record(in, [&](std::size_t line, std::string_view rec) {
    const auto f = text::split_tabs(rec);
    if ((f.size() != 5 && f.size() != 6) || f[0] != "E")
      throw ParseError(line, "expected E<TAB>t1<TAB>id1<TAB>t2<TAB>id2[<TAB>weight]");
    const auto t1 = static_cast<TypeIndex>(text::parse_index(f[1], line));
    const auto t2 = static_cast<TypeIndex>(text::parse_index(f[3], line));
    if (t1 != t2) throw ParseError(line, "auxiliary edge must join vertices of one type");
    const auto a = g.find(t1, f[2]);
    const auto b = g.find(t2, f[4]);
    if (!a || !b) throw ParseError(line, "unknown vertex");
    const double w = f.size() == 6 ? text::parse_double(f[5], line) : 1.0;
    if (!(w >= 0.0)) throw ParseError(line, "negative weight");
    if (a->index != b->index) by_type[t1].links.push_back({a->index, b->index, w});
  });
  std::vector<AuxGraph> out;
  for (auto& aux : by_type)
    if (!aux.links.empty()) out.push_back(std::move(aux));
  return out;
}

std::vector<AuxGraph> load_aux_graph(const std::filesystem::path& path, const KPartiteGraph& g) {
  auto in = text::open_input(path);
  return read_aux_graph(in, g);
}

// --- common terms ------------------------------------------------------------------

Matrix gram(const LabelMatrix& y, std::size_t t) {
  const std::size_t k = y.classes();
  Matrix out(k, k);
  const std::size_t off = y.type_offset(t);
  for (std::size_t i = 0; i < y.type_sizes()[t]; ++i) {
    const auto row = y.row(off + i);
    for (std::size_t a = 0; a < k; ++a)
      if (row[a] != 0.0) simd::axpy(out.row(a), row[a], row);
  }
  return out;
}

Matrix common_term_from_grams(std::size_t t, std::span<const Matrix> grams,
                              const PropagationSet& b) {
  const std::size_t k = b.classes();
  Matrix a(k, k);
  for (std::size_t t2 = 0; t2 < grams.size(); ++t2) {
    if (t2 == t) continue;
    a += sandwich(b.oriented(t, t2), grams[t2]);
  }
  return a;
}

Matrix compute_common_term(std::size_t t, const LabelMatrix& y, const PropagationSet& b) {
  std::vector<Matrix> grams(y.num_types());
  for (std::size_t t2 = 0; t2 < y.num_types(); ++t2)
    if (t2 != t) grams[t2] = gram(y, t2);
  return common_term_from_grams(t, grams, b);
}

// --- per-vertex rules ---------------------------------------------------------------

std::vector<double> neighbor_message(std::size_t u, const KPartiteGraph& g, const LabelMatrix& y,
                                     const PropagationSet& b) {
  const std::size_t k = y.classes();
  const TypeIndex t = g.type_of(u);
  std::vector<Matrix> oriented(g.num_types());
  for (TypeIndex t2 = 0; t2 < g.num_types(); ++t2)
    if (t2 != t) oriented[t2] = b.oriented(t, t2);
  std::vector<double> msg(k, 0.0), tmp(k);
  for (const Neighbor& n : g.neighbors(u)) {
    multiply_vector(oriented[g.type_of(n.vertex)], y.row(n.vertex), tmp);
    simd::axpy(msg, n.weight, tmp);
  }
  return msg;
}

namespace {

/// Numerator and denominator of the multiplicative rule for one row; the
/// additive rule uses their difference as its descent direction.
void row_terms(std::span<const double> row, std::span<const double> seed, double beta,
               const Matrix& common, std::span<double> num, std::span<double> den) {
  multiply_vector(common, row, den);
  if (!seed.empty())
    for (std::size_t l = 0; l < row.size(); ++l) {
      num[l] += beta * seed[l];
      den[l] += beta * row[l];
    }
}

void sub_into(std::span<double> num, std::span<const double> den) {
  for (std::size_t l = 0; l < num.size(); ++l) num[l] -= den[l];
}

}  // namespace

void update_row(UpdateRule rule, std::span<double> row, std::span<double> message,
                std::span<double> scratch, const Matrix& common, std::span<const double> seed,
                double beta, double epsilon, double eta) {
  row_terms(row, seed, beta, common, message, scratch);
  if (rule == UpdateRule::Multiplicative) {
    simd::sqrt_ratio_scale(row, message, scratch, epsilon);
  } else {
    sub_into(message, scratch);
    simd::projected_step(row, message, 2.0 * eta, epsilon);
  }
}

std::vector<double> update_vertex_multiplicative(std::size_t u, const KPartiteGraph& g,
                                                 const LabelMatrix& y, const PropagationSet& b,
                                                 const Matrix& common,
                                                 std::span<const double> seed, double beta,
                                                 double epsilon) {
  auto msg = neighbor_message(u, g, y, b);
  std::vector<double> den(y.classes());
  std::vector<double> out(y.row(u).begin(), y.row(u).end());
  update_row(UpdateRule::Multiplicative, out, msg, den, common, seed, beta, epsilon, 0.0);
  return out;
}

double lipschitz_y(const Matrix& common, double beta, bool is_seed, double epsilon) {
  double l = 2.0 * common.frobenius_norm();
  if (is_seed) l += 2.0 * beta;
  return std::max(l, 2.0 * epsilon);
}

std::vector<double> update_vertex_additive(std::size_t u, const KPartiteGraph& g,
                                           const LabelMatrix& y, const PropagationSet& b,
                                           const Matrix& common, std::span<const double> seed,
                                           double beta, double epsilon, double eta) {
  auto msg = neighbor_message(u, g, y, b);
  std::vector<double> den(y.classes());
  std::vector<double> out(y.row(u).begin(), y.row(u).end());
  update_row(UpdateRule::Additive, out, msg, den, common, seed, beta, epsilon, eta);
  return out;
}

std::vector<double> vertex_gradient(std::span<const double> row, std::span<const double> message,
                                    const Matrix& common, std::span<const double> seed,
                                    double beta) {
  std::vector<double> grad(row.size());
  multiply_vector(common, row, grad);
  for (std::size_t l = 0; l < row.size(); ++l) {
    grad[l] -= message[l];
    if (!seed.empty()) grad[l] += beta * (row[l] - seed[l]);
    grad[l] *= 2.0;
  }
  return grad;
}

// --- propagation rules ---------------------------------------------------------------

Matrix cross_term(std::size_t t, std::size_t t2, const KPartiteGraph& g, const LabelMatrix& y) {
  const std::size_t k = y.classes();
  const std::size_t nt = y.type_sizes()[t];
  const std::size_t off = y.type_offset(t);
  const std::size_t off2 = y.type_offset(t2);
  // H = G_tt' Y_t' (n_t x k), then Y_t^T H.
  std::vector<double> h(nt * k, 0.0);
  for (const Edge& e : g.edges(static_cast<TypeIndex>(t), static_cast<TypeIndex>(t2)))
    simd::axpy(std::span<double>(h.data() + e.u * k, k), e.weight, y.row(off2 + e.v));
  Matrix c(k, k);
  for (std::size_t u = 0; u < nt; ++u) {
    const auto row = y.row(off + u);
    const std::span<const double> hu(h.data() + u * k, k);
    for (std::size_t a = 0; a < k; ++a)
      if (row[a] != 0.0) simd::axpy(c.row(a), row[a], hu);
  }
  return c;
}

Matrix update_b_multiplicative(std::size_t t, std::size_t t2, const KPartiteGraph& g,
                               const LabelMatrix& y, const Matrix& b, double epsilon) {
  const Matrix num = cross_term(t, t2, g, y);
  const Matrix den = multiply(multiply(gram(y, t), b), gram(y, t2));
  Matrix out = b;
  simd::sqrt_ratio_scale(out.data(), num.data(), den.data(), epsilon);
  return out;
}

double lipschitz_b(const Matrix& gram_t, const Matrix& gram_t2) {
  return 2.0 * gram_t.frobenius_norm() * gram_t2.frobenius_norm();
}

Matrix update_b_additive(std::size_t t, std::size_t t2, const KPartiteGraph& g,
                         const LabelMatrix& y, const Matrix& b, double epsilon,
                         std::optional<double> eta) {
  const Matrix gt = gram(y, t);
  const Matrix gt2 = gram(y, t2);
  const double lip = lipschitz_b(gt, gt2);
  if (lip == 0.0) return b;
  Matrix dir = cross_term(t, t2, g, y);
  const Matrix den = multiply(multiply(gt, b), gt2);
  sub_into(dir.data(), den.data());
  Matrix out = b;
  simd::projected_step(out.data(), dir.data(), 2.0 * eta.value_or(1.0 / lip), epsilon);
  return out;
}

void apply_b_mode(PropagationSet& b, BMode mode) {
  const std::size_t k = b.classes();
  switch (mode) {
    case BMode::Full:
      return;
    case BMode::Identity:
      for (Matrix& m : b.pairs()) m = Matrix::identity(k, 1.0 / static_cast<double>(k));
      return;
    case BMode::Diagonal:
      for (Matrix& m : b.pairs())
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            if (i != j) m(i, j) = 0.0;
      return;
    case BMode::SingleShared: {
      if (b.num_pairs() == 0) return;
      Matrix mean(k, k);
      for (const Matrix& m : b.pairs()) mean += m;
      for (double& v : mean.data()) v /= static_cast<double>(b.num_pairs());
      for (Matrix& m : b.pairs()) m = mean;
      return;
    }
  }
}

void update_propagation(const KPartiteGraph& g, const LabelMatrix& y, PropagationSet& b,
                        const InferenceConfig& config) {
  if (config.b_mode == BMode::Identity) {
    apply_b_mode(b, BMode::Identity);
    return;
  }
  for (std::size_t t = 0; t < g.num_types(); ++t)
    for (std::size_t t2 = t + 1; t2 < g.num_types(); ++t2) {
      Matrix& m = b.stored(t, t2);
      m = config.rule == UpdateRule::Multiplicative
              ? update_b_multiplicative(t, t2, g, y, m, config.epsilon)
              : update_b_additive(t, t2, g, y, m, config.epsilon);
    }
  apply_b_mode(b, config.b_mode);
}

// --- objective -----------------------------------------------------------------------

double compute_objective(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                         const SeedSet& seeds, double beta) {
  const std::size_t k = y.classes();
  std::vector<Matrix> grams(y.num_types());
  for (std::size_t t = 0; t < y.num_types(); ++t) grams[t] = gram(y, t);
  double total = 0.0;
  std::vector<double> q(k);
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < g.num_types(); ++t2) {
      const Matrix& bm = b.stored(t, t2);
      double edge_part = 0.0;
      for (const Edge& e : g.edges(t, t2)) {
        multiply_vector(bm, y.row(g.global({t2, e.v})), q);
        const double pred = dot(y.row(g.global({t, e.u})), q);
        const double resid = e.weight - pred;
        edge_part += resid * resid - pred * pred;
      }
      // ||Y_t B Y_t'^T||_F^2 = tr(Gram_t B Gram_t' B^T)
      const Matrix m = multiply(multiply(grams[t], bm), grams[t2]);
      double dense_part = 0.0;
      for (std::size_t i = 0; i < k * k; ++i) dense_part += m.data()[i] * bm.data()[i];
      total += edge_part + dense_part;
    }
  double seed_part = 0.0;
  for (const auto& [ref, target] : seeds.rows) {
    const auto row = y.row(g.global(ref));
    for (std::size_t l = 0; l < k; ++l) {
      const double d = row[l] - target[l];
      seed_part += d * d;
    }
  }
  // A sum of squares; the expanded form can dip below zero by rounding.
  const double obj = total + beta * seed_part;
  return obj < 0.0 ? 0.0 : obj;
}

// --- regularization ------------------------------------------------------------------

double laplacian_penalty(const LabelMatrix& y, std::span<const AuxGraph> aux) {
  double total = 0.0;
  for (const AuxGraph& ag : aux) {
    const std::size_t off = y.type_offset(ag.type);
    for (const auto& link : ag.links) {
      const auto a = y.row(off + link.a);
      const auto c = y.row(off + link.b);
      for (std::size_t l = 0; l < y.classes(); ++l) total += link.weight * (a[l] - c[l]) * (a[l] - c[l]);
    }
  }
  return total;
}

LabelMatrix regularize_proximal(const LabelMatrix& ys, std::span<const AuxGraph> aux,
                                double lambda, double tol, std::size_t max_inner) {
  LabelMatrix y = ys;
  if (lambda == 0.0 || aux.empty()) return y;
  const std::size_t k = ys.classes();
  for (const AuxGraph& ag : aux) {
    const std::size_t t = ag.type;
    const std::size_t nt = ys.type_sizes()[t];
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(nt);
    std::vector<double> degree(nt, 0.0);
    for (const auto& link : ag.links) {
      adj[link.a].emplace_back(link.b, link.weight);
      adj[link.b].emplace_back(link.a, link.weight);
      degree[link.a] += link.weight;
      degree[link.b] += link.weight;
    }
    // Jacobi on (I + lambda L) Y = Ys: diagonal 1 + lambda d_i, off-diagonal -lambda w_ij.
    std::vector<double> cur(ys.block(t).begin(), ys.block(t).end());
    std::vector<double> next(cur.size());
    const auto src = ys.block(t);
    double residual = 0.0;
    std::size_t iter = 0;
    for (;; ++iter) {
      residual = 0.0;
      for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double off_sum = 0.0;
          for (const auto& [j, w] : adj[i]) off_sum += w * cur[j * k + l];
          const double diag = 1.0 + lambda * degree[i];
          residual = std::max(residual,
                              std::abs(diag * cur[i * k + l] - lambda * off_sum - src[i * k + l]));
          next[i * k + l] = (src[i * k + l] + lambda * off_sum) / diag;
        }
      if (residual < tol) break;
      if (iter == max_inner)
        throw NumericError("regularize_proximal: no convergence after " +
                           std::to_string(max_inner) + " iterations, residual " +
                           text::format_decimal(residual));
      cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), y.block(t).begin());
  }
  return y;
}

// --- matrix-form update ----------------------------------------------------------------

std::vector<double> matrix_form_update_y(std::size_t t, const KPartiteGraph& g,
                                         const LabelMatrix& y, const PropagationSet& b,
                                         const SeedSet& seeds, double beta, double epsilon) {
  const std::size_t k = y.classes();
  const std::size_t nt = y.type_sizes()[t];
  const std::size_t off = y.type_offset(t);
  std::vector<double> num(nt * k, 0.0), den(nt * k, 0.0);
  for (std::size_t t2 = 0; t2 < y.num_types(); ++t2) {
    if (t2 == t) continue;
    const Matrix bo = b.oriented(t, t2);
    // G_tt' Y_t', then times B^T.
    std::vector<double> h(nt * k, 0.0);
    const auto lo = static_cast<TypeIndex>(std::min(t, t2));
    const auto hi = static_cast<TypeIndex>(std::max(t, t2));
    for (const Edge& e : g.edges(lo, hi)) {
      const std::size_t mine = t < t2 ? e.u : e.v;
      const std::size_t other = y.type_offset(t2) + (t < t2 ? e.v : e.u);
      for (std::size_t l = 0; l < k; ++l) h[mine * k + l] += e.weight * y.row(other)[l];
    }
    const Matrix mid = sandwich(bo, gram(y, t2));
    for (std::size_t u = 0; u < nt; ++u)
      for (std::size_t i = 0; i < k; ++i) {
        double sn = 0.0, sd = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          sn += h[u * k + j] * bo(i, j);
          sd += y.row(off + u)[j] * mid(j, i);
        }
        num[u * k + i] += sn;
        den[u * k + i] += sd;
      }
  }
  std::vector<double> out(y.block(t).begin(), y.block(t).end());
  for (const auto& [ref, target] : seeds.rows) {
    if (ref.type != t) continue;
    for (std::size_t l = 0; l < k; ++l) {
      num[ref.index * k + l] += beta * target[l];
      den[ref.index * k + l] += beta * out[ref.index * k + l];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::sqrt(num[i] / (den[i] + epsilon));
  return out;
}

// --- sweeps ---------------------------------------------------------------------------

void sweep_type(std::size_t t, const KPartiteGraph& g, LabelMatrix& y, const PropagationSet& b,
                std::span<const double* const> seeds, const InferenceConfig& config,
                const LabelMatrix* previous, double momentum) {
  const std::size_t k = y.classes();
  const std::size_t nt = y.type_sizes()[t];
  const std::size_t off = y.type_offset(t);
  if (nt == 0) return;
  const Matrix common = compute_common_term(t, y, b);

  // Messages B(t,t') Y(v) for every vertex outside type t.
  std::vector<std::vector<double>> messages(y.num_types());
  for (std::size_t t2 = 0; t2 < y.num_types(); ++t2) {
    if (t2 == t) continue;
    const Matrix bo = b.oriented(t, t2);
    const std::size_t n2 = y.type_sizes()[t2];
    messages[t2].resize(n2 * k);
    for (std::size_t v = 0; v < n2; ++v)
      multiply_vector(bo, y.row(y.type_offset(t2) + v),
                      std::span<double>(messages[t2].data() + v * k, k));
  }

  const bool additive = config.rule == UpdateRule::Additive;
  const bool extrapolate = additive && previous != nullptr && momentum > 0.0;
  std::vector<double> num(nt * k, 0.0), den(nt * k, 0.0);
  // Extrapolated rows (Nesterov); otherwise a copy of the block.
  std::vector<double> point(y.block(t).begin(), y.block(t).end());
  double lip_plain = 0.0, lip_seed = 0.0;
  if (additive) {
    lip_plain = lipschitz_y(common, config.beta, false, config.epsilon);
    lip_seed = lipschitz_y(common, config.beta, true, config.epsilon);
  }

  parallel_for(nt, config.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t u = off + i;
      std::span<double> nu(num.data() + i * k, k);
      std::span<double> de(den.data() + i * k, k);
      std::span<double> pt(point.data() + i * k, k);
      if (extrapolate) {
        const auto prev = previous->row(u);
        for (std::size_t l = 0; l < k; ++l) pt[l] += momentum * (pt[l] - prev[l]);
      }
      for (const Neighbor& n : g.neighbors(u)) {
        const TypeIndex t2 = g.type_of(n.vertex);
        const std::size_t v = n.vertex - y.type_offset(t2);
        simd::axpy(nu, n.weight, std::span<const double>(messages[t2].data() + v * k, k));
      }
      const double* seed = seeds[u];
      row_terms(pt, seed ? std::span<const double>(seed, k) : std::span<const double>{},
                config.beta, common, nu, de);
      if (additive) {
        sub_into(nu, de);
        const double eta =
            config.step_override.value_or(1.0 / (seed ? lip_seed : lip_plain));
        simd::projected_step(pt, nu, 2.0 * eta, config.epsilon);
      }
    }
  });

  auto block = y.block(t);
  if (additive)
    std::copy(point.begin(), point.end(), block.begin());
  else
    simd::sqrt_ratio_scale(block, num, den, config.epsilon);
}

// --- driver ---------------------------------------------------------------------------

namespace {

double full_objective(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                      const SeedSet& seeds, const InferenceConfig& config,
                      std::span<const AuxGraph> aux) {
  double obj = compute_objective(g, y, b, seeds, config.beta);
  if (config.lambda > 0.0 && !aux.empty()) obj += config.lambda * laplacian_penalty(y, aux);
  return obj;
}

}  // namespace

InferenceResult run_inference_from(const KPartiteGraph& g, const SeedSet& seeds,
                                   const InferenceConfig& config, LabelMatrix y,
                                   PropagationSet b, std::span<const AuxGraph> aux) {
  using Clock = std::chrono::steady_clock;
  if (y.rows() != g.num_vertices() || y.type_sizes() != g.type_sizes())
    throw Error("run_inference: label matrix does not match graph shape");
  if (config.b_mode == BMode::Identity) apply_b_mode(b, BMode::Identity);
  const auto lookup = seed_lookup(g, seeds);

  InferenceResult result;
  IterationTrace& trace = result.trace;
  const double obj0 = full_objective(g, y, b, seeds, config, aux);
  if (!std::isfinite(obj0)) throw NumericError("run_inference: initial objective is not finite");
  trace.objective.push_back(obj0);
  trace.millis.push_back(0.0);

  const bool nesterov = config.nesterov && config.rule == UpdateRule::Additive;
  LabelMatrix previous = nesterov ? y : LabelMatrix{};
  double prev_obj = obj0;
  // The expanded objective carries absolute rounding error proportional to
  // |G|^2, so the floor on the denominator scales with it.
  double weight_sq = 0.0;
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < g.num_types(); ++t2)
      for (const Edge& e : g.edges(t, t2)) weight_sq += e.weight * e.weight;
  const double scale = std::max(obj0, config.epsilon * std::max(1.0, weight_sq));
  for (std::size_t r = 1; r <= config.max_iter; ++r) {
    const auto start = Clock::now();
    update_propagation(g, y, b, config);
    const double momentum = nesterov ? static_cast<double>(r - 1) / static_cast<double>(r + 2) : 0.0;
    LabelMatrix before = nesterov ? y : LabelMatrix{};
    for (std::size_t t = 0; t < g.num_types(); ++t)
      sweep_type(t, g, y, b, lookup, config, nesterov ? &previous : nullptr, momentum);
    if (nesterov) previous = std::move(before);
    if (config.lambda > 0.0 && !aux.empty()) y = regularize_proximal(y, aux, config.lambda);
    const double obj = full_objective(g, y, b, seeds, config, aux);
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (!std::isfinite(obj))
      throw NumericError("run_inference: objective became non-finite at iteration " +
                         std::to_string(r));
    trace.objective.push_back(obj);
    trace.millis.push_back(ms);
    trace.iterations = r;
    if (std::abs(obj - prev_obj) / scale < config.tol) {
      trace.reason = StopReason::Converged;
      break;
    }
    prev_obj = obj;
  }
  result.labels = std::move(y);
  result.propagation = std::move(b);
  return result;
}

InferenceResult run_inference(const KPartiteGraph& g, const SeedSet& seeds,
                              const InferenceConfig& config, std::span<const AuxGraph> aux) {
  if (seeds.rows.empty()) throw Error("run_inference: seed set is empty");
  return run_inference_from(g, seeds, config, init_labels(g, seeds, config.workers),
                            init_propagation(g, seeds, config.b_mode), aux);
}

}  // namespace kprop
