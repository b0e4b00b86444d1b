#pragma once

// Alternating propagation-matrix / label updates with multiplicative or
// projected-gradient rules, cached per-type common terms, optional graph
// Laplacian regularization and convergence control.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/matrix.hpp"
#include "kprop/model.hpp"

namespace kprop {

enum class UpdateRule { Multiplicative, Additive };

struct InferenceConfig {
  UpdateRule rule = UpdateRule::Multiplicative;
  double beta = 5.0;
  double lambda = 0.0;
  double epsilon = 1e-9;
  double tol = 1e-6;
  std::size_t max_iter = 100;
  BMode b_mode = BMode::Full;
  /// Fixed reduction order for sums. Row updates are always written to
  /// disjoint rows, so this only matters if a future reduction is parallel.
  bool deterministic_order = true;
  std::size_t workers = 1;
  /// Additive rule only: FISTA-style extrapolation of the label rows.
  bool nesterov = false;
  /// Additive rule only: fixed step instead of 1 / Lipschitz.
  std::optional<double> step_override;
};

enum class StopReason { Converged, MaxIterations };

struct IterationTrace {
  /// objective[0] is the initial state; objective[r] follows iteration r.
  std::vector<double> objective;
  std::vector<double> millis;
  std::size_t iterations = 0;
  StopReason reason = StopReason::MaxIterations;
};

struct InferenceResult {
  LabelMatrix labels;
  PropagationSet propagation;
  IterationTrace trace;
};

/// Intra-type graph used only by the Laplacian regularizer.
struct AuxGraph {
  TypeIndex type = 0;
  struct Link {
    std::uint32_t a;
    std::uint32_t b;
    double weight;
  };
  std::vector<Link> links;
};

std::vector<AuxGraph> read_aux_graph(std::istream& in, const KPartiteGraph& g);
std::vector<AuxGraph> load_aux_graph(const std::filesystem::path& path, const KPartiteGraph& g);

// --- building blocks -------------------------------------------------------------

/// Y_t^T Y_t.
Matrix gram(const LabelMatrix& y, std::size_t t);

/// A_t = sum over v outside type t of B(t,t(v)) Y(v) Y(v)^T B(t,t(v))^T,
/// assembled as sum_{t' != t} B(t,t') Gram_t' B(t,t')^T.
Matrix compute_common_term(std::size_t t, const LabelMatrix& y, const PropagationSet& b);
Matrix common_term_from_grams(std::size_t t, std::span<const Matrix> grams,
                              const PropagationSet& b);

/// sum_{v in N(u)} G(u,v) B(t(u),t(v)) Y(v)
std::vector<double> neighbor_message(std::size_t u, const KPartiteGraph& g, const LabelMatrix& y,
                                     const PropagationSet& b);

/// Multiplicative rule for one row. `seed` is Y*(u) or empty.
std::vector<double> update_vertex_multiplicative(std::size_t u, const KPartiteGraph& g,
                                                 const LabelMatrix& y, const PropagationSet& b,
                                                 const Matrix& common,
                                                 std::span<const double> seed, double beta,
                                                 double epsilon);

/// Lipschitz constant of the per-vertex gradient: 2||A_t||_F, plus 2 beta for
/// seeds, floored at 2 epsilon.
double lipschitz_y(const Matrix& common, double beta, bool is_seed, double epsilon = 1e-9);

/// Projected gradient step: max(eps, y + 2 eta (message - A y + beta 1_L (y* - y))).
std::vector<double> update_vertex_additive(std::size_t u, const KPartiteGraph& g,
                                           const LabelMatrix& y, const PropagationSet& b,
                                           const Matrix& common, std::span<const double> seed,
                                           double beta, double epsilon, double eta);

/// Either rule applied in place to `row` from its neighbor message. `message`
/// and `scratch` (k entries each) are overwritten; `eta` is only read by the
/// additive rule.
void update_row(UpdateRule rule, std::span<double> row, std::span<double> message,
                std::span<double> scratch, const Matrix& common, std::span<const double> seed,
                double beta, double epsilon, double eta);

/// Gradient of the per-vertex subobjective at `row` (message and A fixed).
std::vector<double> vertex_gradient(std::span<const double> row, std::span<const double> message,
                                    const Matrix& common, std::span<const double> seed,
                                    double beta);

/// Y_t^T G_tt' Y_t', assembled over the edge list. Requires t < t2.
Matrix cross_term(std::size_t t, std::size_t t2, const KPartiteGraph& g, const LabelMatrix& y);

Matrix update_b_multiplicative(std::size_t t, std::size_t t2, const KPartiteGraph& g,
                               const LabelMatrix& y, const Matrix& b, double epsilon);

/// Lipschitz constant of the gradient of ||G_tt' - Y_t B Y_t'^T||^2 in B:
/// 2 ||Y_t^T Y_t||_F ||Y_t'^T Y_t'||_F.
double lipschitz_b(const Matrix& gram_t, const Matrix& gram_t2);

/// Returns `b` unchanged when the Lipschitz constant is zero. `eta` overrides
/// the 1 / L step when set.
Matrix update_b_additive(std::size_t t, std::size_t t2, const KPartiteGraph& g,
                         const LabelMatrix& y, const Matrix& b, double epsilon,
                         std::optional<double> eta = std::nullopt);

void apply_b_mode(PropagationSet& b, BMode mode);

/// Sparse-form objective: each unordered type pair once, plus the seed term.
double compute_objective(const KPartiteGraph& g, const LabelMatrix& y, const PropagationSet& b,
                         const SeedSet& seeds, double beta);

/// Solves (I + lambda L) Y_t = Y_s,t per type owning an aux graph.
LabelMatrix regularize_proximal(const LabelMatrix& ys, std::span<const AuxGraph> aux,
                                double lambda, double tol = 1e-8,
                                std::size_t max_inner = 1000);

/// sum_t tr(Y_t^T L_t Y_t)
double laplacian_penalty(const LabelMatrix& y, std::span<const AuxGraph> aux);

/// Block (matrix-form) multiplicative update of Y_t; returns the new block in
/// row-major order.
std::vector<double> matrix_form_update_y(std::size_t t, const KPartiteGraph& g,
                                         const LabelMatrix& y, const PropagationSet& b,
                                         const SeedSet& seeds, double beta, double epsilon);

/// One vertex-centric sweep over every row of type t, all rows reading the
/// pre-sweep block. `seeds` comes from seed_lookup(). `previous` (additive +
/// Nesterov only) holds the rows from the prior iteration.
void sweep_type(std::size_t t, const KPartiteGraph& g, LabelMatrix& y, const PropagationSet& b,
                std::span<const double* const> seeds, const InferenceConfig& config,
                const LabelMatrix* previous = nullptr, double momentum = 0.0);

/// One pass of B updates over every pair, followed by the mode constraint.
void update_propagation(const KPartiteGraph& g, const LabelMatrix& y, PropagationSet& b,
                        const InferenceConfig& config);

InferenceResult run_inference(const KPartiteGraph& g, const SeedSet& seeds,
                              const InferenceConfig& config,
                              std::span<const AuxGraph> aux = {});

/// Same loop from a caller-provided starting point.
InferenceResult run_inference_from(const KPartiteGraph& g, const SeedSet& seeds,
                                   const InferenceConfig& config, LabelMatrix y,
                                   PropagationSet b, std::span<const AuxGraph> aux = {});

}  // namespace kprop
