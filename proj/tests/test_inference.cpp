#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "kprop/error.hpp"
#include "kprop/inference.hpp"
#include "support.hpp"

using namespace kprop;
using testing::dense;
using testing::dense_adjacency;
using testing::dense_block;

namespace {

std::span<const double> none() { return {}; }

/// Two-type complete bipartite graph with G(u, v) = Y(u)^T B Y(v).
KPartiteGraph exact_graph(const LabelMatrix& y, const Matrix& b) {
  GraphBuilder gb(2);
  const auto n0 = y.type_sizes()[0], n1 = y.type_sizes()[1];
  for (std::size_t i = 0; i < n0; ++i) gb.add_vertex(0, testing::vid(i));
  for (std::size_t j = 0; j < n1; ++j) gb.add_vertex(1, testing::vid(j));
  std::vector<double> q(y.classes());
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      multiply_vector(b, y.row(n0 + j), q);
      gb.add_edge(0, testing::vid(i), 1, testing::vid(j), dot(y.row(i), q));
    }
  return gb.build();
}

/// Per-vertex subobjective summed densely over every vertex of another type.
double vertex_objective(std::size_t u, std::span<const double> row, const KPartiteGraph& g,
                        const LabelMatrix& y, const PropagationSet& b,
                        std::span<const double> seed, double beta) {
  const TypeIndex t = g.type_of(u);
  const std::size_t k = y.classes();
  double total = 0.0;
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    const TypeIndex t2 = g.type_of(v);
    if (t2 == t) continue;
    const Matrix bo = b.oriented(t, t2);
    double pred = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) pred += row[i] * bo(i, j) * y.row(v)[j];
    const double r = g.weight(u, v).value_or(0.0) - pred;
    total += r * r;
  }
  if (!seed.empty())
    for (std::size_t l = 0; l < k; ++l) total += beta * (row[l] - seed[l]) * (row[l] - seed[l]);
  return total;
}

Eigen::VectorXd dense_message(std::size_t u, const KPartiteGraph& g, const LabelMatrix& y,
                              const PropagationSet& b) {
  const TypeIndex t = g.type_of(u);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(y.classes()));
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    if (g.type_of(v) == t) continue;
    const double w = g.weight(u, v).value_or(0.0);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.row(v).data(),
                                                           static_cast<Eigen::Index>(y.classes()));
    m += w * dense(b.oriented(t, g.type_of(v))) * yv;
  }
  return m;
}

}  // namespace

TEST_CASE("common term") {
  std::mt19937_64 rng(1);
  const auto g = testing::random_graph({3, 3, 3}, 0.5, rng);
  const auto b = testing::random_propagation(3, 2, rng);
  LabelMatrix zero(g.type_sizes(), 2);
  CHECK(compute_common_term(0, zero, b) == Matrix(2, 2));

  LabelMatrix single({1, 1}, 2);
  single.row(1)[0] = 1.0;
  PropagationSet id(2, 2);
  id.stored(0, 1) = Matrix::identity(2);
  const Matrix a = compute_common_term(0, single, id);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 1) == 0.0);

  const auto y = testing::random_labels(g, 2, rng);
  for (std::size_t t = 0; t < 3; ++t) {
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 2);
    for (std::size_t v = 0; v < g.num_vertices(); ++v) {
      if (g.type_of(v) == t) continue;
      const Eigen::MatrixXd bo = dense(b.oriented(t, g.type_of(v)));
      Eigen::Vector2d yv(y.row(v)[0], y.row(v)[1]);
      expect += bo * yv * yv.transpose() * bo.transpose();
    }
    const Eigen::MatrixXd got = dense(compute_common_term(t, y, b));
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("multiplicative row update") {
  std::mt19937_64 rng(2);
  const auto g = testing::random_graph({4, 5, 3}, 0.6, rng, true);
  auto y = testing::random_labels(g, 3, rng);
  const auto b = testing::random_propagation(3, 3, rng);
  y.row(2)[1] = 0.0;
  const std::vector<double> seed{0.0, 1.0, 0.0};
  const Matrix a = compute_common_term(0, y, b);
  const auto locked = update_vertex_multiplicative(2, g, y, b, a, seed, 5.0, 1e-9);
  CHECK(locked[1] == 0.0);

  // Dense evaluation of the rule for every type-1 row.
  const Matrix a1 = compute_common_term(1, y, b);
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t u = g.type_offset(1) + i;
    const auto got = update_vertex_multiplicative(u, g, y, b, a1, none(), 5.0, 1e-9);
    const Eigen::VectorXd msg = dense_message(u, g, y, b);
    Eigen::Vector3d yu(y.row(u)[0], y.row(u)[1], y.row(u)[2]);
    const Eigen::Vector3d den = dense(a1) * yu;
    for (int l = 0; l < 3; ++l) {
      const double expect = yu(l) * std::sqrt(msg(l) / (den(l) + 1e-9));
      CHECK(got[static_cast<std::size_t>(l)] == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("multiplicative row update at an exact fixed point") {
  std::mt19937_64 rng(3);
  LabelMatrix y({4, 5}, 3);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : y.data()) v = d(rng);
  PropagationSet b(2, 3);
  for (double& v : b.stored(0, 1).data()) v = d(rng);
  const auto g = exact_graph(y, b.stored(0, 1));
  for (std::size_t u = 0; u < g.num_vertices(); ++u) {
    const Matrix a = compute_common_term(g.type_of(u), y, b);
    const auto row = update_vertex_multiplicative(u, g, y, b, a, none(), 5.0, 1e-9);
    for (std::size_t l = 0; l < 3; ++l) CHECK(std::abs(row[l] - y.row(u)[l]) < 1e-9);
  }
}

TEST_CASE("lipschitz constant for rows") {
  const Matrix id = Matrix::identity(2);
  CHECK(lipschitz_y(id, 5.0, false) == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(lipschitz_y(id, 5.0, true) == doctest::Approx(2.0 * (std::sqrt(2.0) + 5.0)));
  CHECK(lipschitz_y(Matrix(2, 2), 5.0, false, 1e-9) == 2e-9);
}

TEST_CASE("additive row update") {
  // Zero gradient: G(u,v) reproduced exactly.
  std::mt19937_64 rng(4);
  LabelMatrix y({3, 3}, 2);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : y.data()) v = d(rng);
  PropagationSet b(2, 2);
  for (double& v : b.stored(0, 1).data()) v = d(rng);
  const auto g = exact_graph(y, b.stored(0, 1));
  const Matrix a = compute_common_term(0, y, b);
  const auto same = update_vertex_additive(0, g, y, b, a, none(), 5.0, 1e-9, 0.1);
  CHECK(std::abs(same[0] - y.row(0)[0]) < 1e-12);
  CHECK(std::abs(same[1] - y.row(0)[1]) < 1e-12);

  // A large negative step projects onto epsilon.
  // At the exact state only the seed term pulls: y0 - 2 * 50 * y0 < 0.
  const std::vector<double> seed{0.0, 1.0};
  const auto clamped = update_vertex_additive(0, g, y, b, a, seed, 50.0, 1e-9, 1.0);
  CHECK(clamped[0] == 1e-9);
}

TEST_CASE("additive row step never increases the vertex subobjective") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = testing::random_graph({5, 6, 4}, 0.5, rng, true);
    const auto y = testing::random_labels(g, 3, rng);
    const auto b = testing::random_propagation(3, 3, rng);
    for (std::size_t u = 0; u < g.num_vertices(); ++u) {
      const TypeIndex t = g.type_of(u);
      const Matrix a = compute_common_term(t, y, b);
      const std::vector<double> seed{0.2, 0.8, 0.0};
      const bool is_seed = u % 3 == 0;
      const std::span<const double> s = is_seed ? std::span<const double>(seed) : none();
      const double eta = 1.0 / lipschitz_y(a, 5.0, is_seed);
      const auto next = update_vertex_additive(u, g, y, b, a, s, 5.0, 1e-9, eta);
      const double before = vertex_objective(u, y.row(u), g, y, b, s, 5.0);
      const double after = vertex_objective(u, next, g, y, b, s, 5.0);
      CHECK(after <= before + 1e-12 * before);
      for (double v : next) CHECK(v >= 1e-9);
    }
  }
}

TEST_CASE("analytic row gradient matches central differences") {
  std::mt19937_64 rng(6);
  const auto g = testing::random_graph({4, 4, 4}, 0.6, rng, true);
  const auto y = testing::random_labels(g, 3, rng);
  const auto b = testing::random_propagation(3, 3, rng);
  const std::vector<double> seed{1.0, 0.0, 0.0};
  for (std::size_t u = 0; u < g.num_vertices(); ++u) {
    const std::span<const double> s = u % 2 ? std::span<const double>(seed) : none();
    const Matrix a = compute_common_term(g.type_of(u), y, b);
    const auto msg = neighbor_message(u, g, y, b);
    const auto grad = vertex_gradient(y.row(u), msg, a, s, 5.0);
    std::vector<double> p(y.row(u).begin(), y.row(u).end());
    const double h = 1e-6;
    for (std::size_t l = 0; l < 3; ++l) {
      auto plus = p, minus = p;
      plus[l] += h;
      minus[l] -= h;
      const double fd = (vertex_objective(u, plus, g, y, b, s, 5.0) -
                         vertex_objective(u, minus, g, y, b, s, 5.0)) /
                        (2 * h);
      CHECK(std::abs(fd - grad[l]) <= 1e-6 * std::max(1.0, std::abs(grad[l])));
    }
  }
}

TEST_CASE("multiplicative B update") {
  std::mt19937_64 rng(7);
  const auto g = testing::random_graph({3, 4}, 0.7, rng, true);
  const auto y = testing::random_labels(g, 2, rng);
  auto b = testing::random_propagation(2, 2, rng);
  b.stored(0, 1)(1, 0) = 0.0;
  const Matrix next = update_b_multiplicative(0, 1, g, y, b.stored(0, 1), 1e-9);
  CHECK(next(1, 0) == 0.0);

  const Eigen::MatrixXd y0 = dense_block(y, 0), y1 = dense_block(y, 1);
  const Eigen::MatrixXd num = y0.transpose() * dense_adjacency(g, 0, 1) * y1;
  const Eigen::MatrixXd den = y0.transpose() * y0 * dense(b.stored(0, 1)) * y1.transpose() * y1;
  CHECK((dense(cross_term(0, 1, g, y)) - num).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double expect = b.stored(0, 1)(i, j) * std::sqrt(num(i, j) / (den(i, j) + 1e-9));
      CHECK(std::abs(next(i, j) - expect) < 1e-12);
    }

  LabelMatrix ex({3, 4}, 2);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : ex.data()) v = d(rng);
  Matrix bm(2, 2);
  for (double& v : bm.data()) v = d(rng);
  const auto eg = exact_graph(ex, bm);
  const Matrix kept = update_b_multiplicative(0, 1, eg, ex, bm, 1e-9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(kept.data()[i] - bm.data()[i]) < 1e-9);
}

TEST_CASE("additive B update") {
  std::mt19937_64 rng(8);
  LabelMatrix ex({3, 4}, 2);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : ex.data()) v = d(rng);
  Matrix bm(2, 2);
  for (double& v : bm.data()) v = d(rng);
  const auto eg = exact_graph(ex, bm);
  const Matrix kept = update_b_additive(0, 1, eg, ex, bm, 1e-9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(kept.data()[i] - bm.data()[i]) < 1e-12);

  Matrix big = bm;
  big(0, 1) = 50.0;
  const Matrix proj = update_b_additive(0, 1, eg, ex, big, 1e-9, 1.0);
  CHECK(proj(0, 1) == 1e-9);

  LabelMatrix zero({3, 4}, 2);
  CHECK(update_b_additive(0, 1, eg, zero, bm, 1e-9) == bm);

  for (int rep = 0; rep < 30; ++rep) {
    const auto g = testing::random_graph({5, 6}, 0.5, rng, true);
    const auto y = testing::random_labels(g, 3, rng);
    const auto b = testing::random_propagation(2, 3, rng);
    const auto fit = [&](const Matrix& m) {
      return (dense_adjacency(g, 0, 1) -
              dense_block(y, 0) * dense(m) * dense_block(y, 1).transpose())
          .squaredNorm();
    };
    const Matrix next = update_b_additive(0, 1, g, y, b.stored(0, 1), 1e-9);
    CHECK(fit(next) <= fit(b.stored(0, 1)) * (1 + 1e-12));
  }
}

TEST_CASE("B Lipschitz constant holds when the Gram product vanishes") {
  // Gram_t = diag(1, 0), Gram_t' = diag(0, 1): the product is zero but the
  // gradient still moves by 2 |dB_01|.
  LabelMatrix y({1, 1}, 2);
  y.row(0)[0] = 1.0;
  y.row(1)[1] = 1.0;
  const Matrix g0 = gram(y, 0), g1 = gram(y, 1);
  CHECK(multiply(g1, g0).frobenius_norm() == 0.0);
  const double lip = lipschitz_b(g0, g1);
  Matrix db(2, 2);
  db(0, 1) = 1.0;
  const double moved = 2.0 * multiply(multiply(g0, db), g1).frobenius_norm();
  CHECK(moved == 2.0);
  CHECK(moved <= lip * db.frobenius_norm());
}

TEST_CASE("b modes") {
  PropagationSet b(3, 2);
  b.stored(0, 1) = Matrix(2, 2);
  b.stored(0, 1)(0, 0) = 0.4;
  b.stored(0, 1)(0, 1) = 0.1;
  b.stored(0, 1)(1, 0) = 0.2;
  b.stored(0, 1)(1, 1) = 0.3;
  auto full = b;
  apply_b_mode(full, BMode::Full);
  CHECK(full == b);
  auto diag = b;
  apply_b_mode(diag, BMode::Diagonal);
  CHECK(diag.stored(0, 1)(0, 1) == 0.0);
  CHECK(diag.stored(0, 1)(1, 0) == 0.0);
  CHECK(diag.stored(0, 1)(0, 0) == 0.4);

  // Three types give three pairs: I, the swap, and 0.5 everywhere. The mean is
  // 0.5 everywhere, as for the two-pair case I and the swap alone.
  Matrix swap(2, 2);
  swap(0, 1) = swap(1, 0) = 1.0;
  PropagationSet shared(3, 2);
  shared.pairs()[0] = Matrix::identity(2);
  shared.pairs()[1] = swap;
  shared.pairs()[2] = Matrix(2, 2, 0.5);
  apply_b_mode(shared, BMode::SingleShared);
  for (const Matrix& m : shared.pairs())
    for (double v : m.data()) CHECK(v == doctest::Approx(0.5));

  auto id = b;
  apply_b_mode(id, BMode::Identity);
  for (const Matrix& m : id.pairs()) CHECK(m == Matrix::identity(2, 0.5));
}

TEST_CASE("objective") {
  std::mt19937_64 rng(9);
  const auto g = testing::random_graph({4, 4, 4}, 0.5, rng, true);
  const auto b = testing::random_propagation(3, 2, rng);
  LabelMatrix zero(g.type_sizes(), 2);
  double sq = 0.0;
  for (TypeIndex t = 0; t < 3; ++t)
    for (TypeIndex t2 = t + 1; t2 < 3; ++t2)
      for (const Edge& e : g.edges(t, t2)) sq += e.weight * e.weight;
  CHECK(compute_objective(g, zero, b, SeedSet{2, {}}, 5.0) == doctest::Approx(sq).epsilon(1e-14));

  for (int rep = 0; rep < 10; ++rep) {
    const auto gg = testing::random_graph({4, 5, 3}, 0.5, rng, true);
    const auto y = testing::random_labels(gg, 2, rng);
    const auto bb = testing::random_propagation(3, 2, rng);
    const auto seeds = testing::random_seeds(gg, 2, 0.3, rng);
    const double sparse = compute_objective(gg, y, bb, seeds, 5.0);
    const double brute = testing::dense_objective(gg, y, bb, seeds, 5.0);
    CHECK(std::abs(sparse - brute) <= 1e-10 * brute);
  }

  // Exact factorization with matching seeds.
  LabelMatrix ex({3, 3}, 2);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : ex.data()) v = d(rng);
  PropagationSet eb(2, 2);
  for (double& v : eb.stored(0, 1).data()) v = d(rng);
  const auto eg = exact_graph(ex, eb.stored(0, 1));
  SeedSet s;
  s.classes = 2;
  s.rows.emplace(VertexRef{0, 0}, std::vector<double>(ex.row(0).begin(), ex.row(0).end()));
  CHECK(std::abs(compute_objective(eg, ex, eb, s, 5.0)) < 1e-9);
}

TEST_CASE("laplacian proximal step") {
  LabelMatrix ys({2, 1}, 2);
  ys.row(0)[0] = 1.0;
  ys.row(1)[1] = 0.6;
  ys.row(1)[0] = 0.2;
  ys.row(2)[0] = 0.9;
  CHECK(regularize_proximal(ys, {}, 1.0) == ys);
  std::vector<AuxGraph> aux{{0, {{0, 1, 1.0}}}};
  CHECK(regularize_proximal(ys, aux, 0.0) == ys);
  const std::vector<AuxGraph> empty{{0, {}}};
  CHECK(regularize_proximal(ys, empty, 1.0) == ys);

  // (I + L) Y = Ys with L = [[1, -1], [-1, 1]] gives Y = [[2, 1], [1, 2]] Ys / 3.
  const auto y = regularize_proximal(ys, aux, 1.0);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(std::abs(y.row(0)[l] - (2 * ys.row(0)[l] + ys.row(1)[l]) / 3) < 1e-8);
    CHECK(std::abs(y.row(1)[l] - (ys.row(0)[l] + 2 * ys.row(1)[l]) / 3) < 1e-8);
  }
  CHECK(y.row(2)[0] == 0.9);
  CHECK(laplacian_penalty(ys, aux) == doctest::Approx(0.64 + 0.36));
  CHECK_THROWS_AS(regularize_proximal(ys, aux, 1.0, 1e-8, 3), NumericError);
}

TEST_CASE("aux graph file") {
  GraphBuilder gb(2);
  gb.add_vertex(0, "a");
  gb.add_vertex(0, "b");
  gb.add_vertex(1, "c");
  const auto g = gb.build();
  std::istringstream ok("E\t0\ta\t0\tb\t2\n");
  const auto aux = read_aux_graph(ok, g);
  REQUIRE(aux.size() == 1);
  CHECK(aux[0].links[0].weight == 2.0);
  std::istringstream cross("E\t0\ta\t1\tc\n");
  CHECK_THROWS_AS(read_aux_graph(cross, g), ParseError);
}

TEST_CASE("vertex sweep equals the block update") {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = testing::random_graph({6, 5, 7}, 0.4, rng, true);
    auto y = testing::random_labels(g, 3, rng);
    const auto b = testing::random_propagation(3, 3, rng);
    const auto seeds = testing::random_seeds(g, 3, 0.3, rng);
    const auto lookup = seed_lookup(g, seeds);
    InferenceConfig cfg;
    for (std::size_t t = 0; t < 3; ++t) {
      const auto block = matrix_form_update_y(t, g, y, b, seeds, cfg.beta, cfg.epsilon);
      sweep_type(t, g, y, b, lookup, cfg);
      for (std::size_t i = 0; i < block.size(); ++i)
        CHECK(std::abs(block[i] - y.block(t)[i]) < 1e-12);
    }
  }
}

TEST_CASE("block update on a hand instance") {
  // u - v with weight 2, k = 2, B = I, Y(u) = (1, 1), Y(v) = (1, 0):
  // message (2, 0), A y = (1, 0), so u -> (sqrt(2 / (1 + eps)), 0).
  GraphBuilder gb(2);
  gb.add_vertex(0, "u");
  gb.add_vertex(1, "v");
  gb.add_edge(0, "u", 1, "v", 2.0);
  const auto g = gb.build();
  LabelMatrix y({1, 1}, 2);
  y.row(0)[0] = y.row(0)[1] = 1.0;
  y.row(1)[0] = 1.0;
  PropagationSet b(2, 2);
  b.stored(0, 1) = Matrix::identity(2);
  const SeedSet none_seeds{2, {}};
  const auto block = matrix_form_update_y(0, g, y, b, none_seeds, 5.0, 1e-9);
  const auto row =
      update_vertex_multiplicative(0, g, y, b, compute_common_term(0, y, b), none(), 5.0, 1e-9);
  CHECK(block[0] == doctest::Approx(std::sqrt(2.0 / (1.0 + 1e-9))).epsilon(1e-14));
  CHECK(block[1] == 0.0);
  CHECK(row[0] == block[0]);
  CHECK(row[1] == 0.0);

  // With seed Y*(u) = (0, 1), beta = 1: numerator (2, 1) equals denominator (2, 1).
  SeedSet s{2, {{VertexRef{0, 0}, {0.0, 1.0}}}};
  const auto seeded = matrix_form_update_y(0, g, y, b, s, 1.0, 0.0);
  CHECK(seeded[0] == 1.0);
  CHECK(seeded[1] == 1.0);

  LabelMatrix z({1, 1}, 2);
  z.row(1)[0] = 1.0;
  const auto zero = matrix_form_update_y(0, g, z, b, none_seeds, 5.0, 1e-9);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("run inference: exact input stops after one iteration") {
  std::mt19937_64 rng(11);
  LabelMatrix y({4, 4}, 2);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  for (double& v : y.data()) v = d(rng);
  PropagationSet b(2, 2);
  for (double& v : b.stored(0, 1).data()) v = d(rng);
  const auto g = exact_graph(y, b.stored(0, 1));
  SeedSet s{2, {{VertexRef{0, 0}, {y.row(0)[0], y.row(0)[1]}}}};
  const auto r = run_inference_from(g, s, InferenceConfig{}, y, b);
  CHECK(r.trace.iterations == 1);
  CHECK(r.trace.reason == StopReason::Converged);
  CHECK(std::abs(r.trace.objective[1] - r.trace.objective[0]) < 1e-9);
}

TEST_CASE("run inference: monotone, nonnegative, zero-locked") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    const auto g = testing::random_graph({20, 15, 25}, 0.15, rng);
    const auto seeds = testing::random_seeds(g, 3, 0.2, rng);
    auto y = init_labels(g, seeds);
    y.row(3)[0] = 0.0;
    InferenceConfig cfg;
    cfg.tol = 0.0;
    cfg.max_iter = 40;
    const auto r = run_inference_from(g, seeds, cfg, y, init_propagation(g, seeds, BMode::Full));
    const auto& obj = r.trace.objective;
    CHECK(obj.size() == 41);
    for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] + 1e-9 * obj[0]);
    for (double v : r.labels.data()) CHECK(v >= 0.0);
    CHECK(r.labels.row(3)[0] == 0.0);
  }
}

TEST_CASE("run inference: additive stays above epsilon and improves") {
  std::mt19937_64 rng(13);
  const auto g = testing::random_graph({20, 20, 20}, 0.15, rng);
  const auto seeds = testing::random_seeds(g, 3, 0.2, rng);
  for (bool nesterov : {false, true}) {
    InferenceConfig cfg;
    cfg.rule = UpdateRule::Additive;
    cfg.nesterov = nesterov;
    cfg.max_iter = 30;
    const auto r = run_inference(g, seeds, cfg);
    for (double v : r.labels.data()) CHECK(v >= cfg.epsilon);
    for (const Matrix& m : r.propagation.pairs())
      for (double v : m.data()) CHECK(v >= cfg.epsilon);
    CHECK(r.trace.objective.back() < r.trace.objective.front());
  }
}

TEST_CASE("run inference: worker count does not change results") {
  std::mt19937_64 rng(14);
  const auto g = testing::random_graph({40, 30, 35}, 0.1, rng, true);
  const auto seeds = testing::random_seeds(g, 3, 0.1, rng);
  for (UpdateRule rule : {UpdateRule::Multiplicative, UpdateRule::Additive}) {
    InferenceConfig cfg;
    cfg.rule = rule;
    cfg.max_iter = 15;
    cfg.workers = 1;
    const auto one = run_inference(g, seeds, cfg);
    cfg.workers = 4;
    const auto four = run_inference(g, seeds, cfg);
    CHECK(one.labels == four.labels);
    CHECK(one.propagation == four.propagation);
    CHECK(one.trace.objective == four.trace.objective);
  }
}

TEST_CASE("run inference: identity mode matches a frozen-B reference loop") {
  std::mt19937_64 rng(15);
  const auto g = testing::random_graph({15, 15, 15}, 0.2, rng);
  const auto seeds = testing::random_seeds(g, 3, 0.2, rng);
  InferenceConfig cfg;
  cfg.b_mode = BMode::Identity;
  cfg.tol = 0.0;
  cfg.max_iter = 20;
  const auto r = run_inference(g, seeds, cfg);

  auto y = init_labels(g, seeds);
  PropagationSet b(3, 3);
  for (Matrix& m : b.pairs()) m = Matrix::identity(3, 1.0 / 3.0);
  for (int it = 0; it < 20; ++it)
    for (std::size_t t = 0; t < 3; ++t) {
      const auto block = matrix_form_update_y(t, g, y, b, seeds, cfg.beta, cfg.epsilon);
      std::copy(block.begin(), block.end(), y.block(t).begin());
    }
  CHECK(r.propagation == b);
  for (std::size_t i = 0; i < y.data().size(); ++i)
    CHECK(std::abs(r.labels.data()[i] - y.data()[i]) <= 1e-10 * std::max(1.0, y.data()[i]));
}

TEST_CASE("run inference: diagonal and single modes keep their shape") {
  std::mt19937_64 rng(16);
  const auto g = testing::random_graph({15, 15, 15}, 0.2, rng);
  const auto seeds = testing::random_seeds(g, 3, 0.3, rng);
  InferenceConfig cfg;
  cfg.max_iter = 10;
  cfg.b_mode = BMode::Diagonal;
  const auto diag = run_inference(g, seeds, cfg).propagation;
  for (const Matrix& m : diag.pairs())
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) CHECK(m(i, j) == 0.0);
  cfg.b_mode = BMode::SingleShared;
  const auto single = run_inference(g, seeds, cfg).propagation;
  for (const Matrix& m : single.pairs()) CHECK(m == single.pairs()[0]);
}

TEST_CASE("run inference: non-finite objective aborts") {
  GraphBuilder gb(2);
  gb.add_vertex(0, "a");
  gb.add_vertex(1, "b");
  gb.add_edge(0, "a", 1, "b", 1e300);
  const auto g = gb.build();
  SeedSet s{2, {{VertexRef{0, 0}, {1.0, 0.0}}}};
  CHECK_THROWS_AS(run_inference(g, s, InferenceConfig{}), NumericError);
}

TEST_CASE("run inference: regularized run reports the penalized objective") {
  std::mt19937_64 rng(17);
  const auto g = testing::random_graph({10, 10}, 0.3, rng);
  const auto seeds = testing::random_seeds(g, 2, 0.3, rng);
  std::vector<AuxGraph> aux{{0, {}}};
  for (std::uint32_t i = 0; i + 1 < 10; ++i) aux[0].links.push_back({i, i + 1, 1.0});
  InferenceConfig cfg;
  cfg.lambda = 0.5;
  cfg.max_iter = 5;
  const auto r = run_inference(g, seeds, cfg, aux);
  const double expect = compute_objective(g, r.labels, r.propagation, seeds, cfg.beta) +
                        cfg.lambda * laplacian_penalty(r.labels, aux);
  CHECK(r.trace.objective.back() == doctest::Approx(expect).epsilon(1e-14));
}
