#include "kprop/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "kprop/error.hpp"
#include "kprop/parallel.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

std::string_view to_string(BMode mode) noexcept {
  switch (mode) {
    case BMode::Full:
      return "full";
    case BMode::Diagonal:
      return "diag";
    case BMode::Identity:
      return "identity";
    case BMode::SingleShared:
      return "single";
  }
  return "full";
}

std::optional<BMode> parse_b_mode(std::string_view name) noexcept {
  if (name == "full") return BMode::Full;
  if (name == "diag") return BMode::Diagonal;
  if (name == "identity") return BMode::Identity;
  if (name == "single") return BMode::SingleShared;
  return std::nullopt;
}

// --- LabelMatrix / PropagationSet ------------------------------------------------

LabelMatrix::LabelMatrix(std::vector<std::size_t> type_sizes, std::size_t classes, double fill)
    : classes_(classes), type_sizes_(std::move(type_sizes)) {
  type_offset_.assign(type_sizes_.size() + 1, 0);
  for (std::size_t t = 0; t < type_sizes_.size(); ++t)
    type_offset_[t + 1] = type_offset_[t] + type_sizes_[t];
  rows_ = type_offset_.back();
  data_.assign(rows_ * classes_, fill);
}

PropagationSet::PropagationSet(std::size_t num_types, std::size_t classes)
    : num_types_(num_types),
      classes_(classes),
      pairs_(num_types * (num_types > 0 ? num_types - 1 : 0) / 2, Matrix(classes, classes)) {}

std::size_t PropagationSet::index(std::size_t t, std::size_t t2) const {
  if (t > t2) std::swap(t, t2);
  return t * num_types_ - t * (t + 1) / 2 + (t2 - t - 1);
}

Matrix PropagationSet::oriented(std::size_t t, std::size_t t2) const {
  return t < t2 ? stored(t, t2) : stored(t2, t).transpose();
}

// --- label files -----------------------------------------------------------------

std::vector<double> make_label_row(std::span<const std::pair<std::size_t, double>> labels,
                                   std::size_t classes) {
  std::vector<double> row(classes, 0.0);
  for (const auto& [label, mass] : labels) {
    if (label >= classes)
      throw Error("label " + std::to_string(label) + " out of range for k=" + std::to_string(classes));
    if (!(mass >= 0.0) || !std::isfinite(mass)) throw Error("label mass must be finite and >= 0");
    row[label] += mass;
  }
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  if (!(total > 0.0)) throw Error("label row has no positive mass");
  for (double& v : row) v /= total;
  return row;
}

LabelTable read_labels(std::istream& in, const KPartiteGraph& g,
                       std::optional<std::size_t> classes) {
  std::map<VertexRef, std::vector<std::pair<std::size_t, double>>> raw;
  std::map<VertexRef, std::size_t> first_line;
  std::size_t max_label = 0;
  text::for_each_record(in, [&](std::size_t line, std::string_view rec) {
    const auto f = text::split_tabs(rec);
    if ((f.size() != 4 && f.size() != 5) || f[0] != "L")
      throw ParseError(line, "expected L<TAB>type<TAB>id<TAB>label[<TAB>prob]");
    const auto t = static_cast<TypeIndex>(text::parse_index(f[1], line));
    const auto ref = g.find(t, f[2]);
    if (!ref) throw ParseError(line, "unknown vertex " + std::string(f[1]) + ":" + std::string(f[2]));
    const std::size_t label = text::parse_index(f[3], line);
    const double prob = f.size() == 5 ? text::parse_double(f[4], line) : 1.0;
    if (!(prob >= 0.0)) throw ParseError(line, "negative label probability");
    if (classes && label >= *classes) throw ParseError(line, "label out of range");
    max_label = std::max(max_label, label);
    raw[*ref].emplace_back(label, prob);
    first_line.emplace(*ref, line);
  });
  LabelTable table;
  table.classes = classes.value_or(std::max<std::size_t>(2, max_label + 1));
  for (auto& [ref, labels] : raw) {
    try {
      table.rows.emplace(ref, make_label_row(labels, table.classes));
    } catch (const Error& e) {
      throw ParseError(first_line[ref], e.what());
    }
  }
  return table;
}

LabelTable load_labels(const std::filesystem::path& path, const KPartiteGraph& g,
                       std::optional<std::size_t> classes) {
  auto in = text::open_input(path);
  return read_labels(in, g, classes);
}

void write_labels(const LabelTable& table, const KPartiteGraph& g, std::ostream& out) {
  for (const auto& [ref, row] : table.rows)
    for (std::size_t l = 0; l < row.size(); ++l)
      if (row[l] > 0.0)
        out << "L\t" << ref.type << '\t' << g.id(ref) << '\t' << l << '\t'
            << text::format_decimal(row[l]) << '\n';
}

SeedSet remap_seeds(const SeedSet& seeds, const KPartiteGraph& old_graph,
                    const DeltaResult& delta) {
  SeedSet out;
  out.classes = seeds.classes;
  for (const auto& [ref, row] : seeds.rows)
    if (auto g = delta.old_to_new[old_graph.global(ref)]) out.rows.emplace(delta.graph.ref(*g), row);
  for (const LabelChange& change : delta.label_changes) {
    if (change.labels.empty())
      out.rows.erase(change.vertex);
    else
      out.rows.insert_or_assign(change.vertex, make_label_row(change.labels, out.classes));
  }
  return out;
}

std::vector<const double*> seed_lookup(const KPartiteGraph& g, const SeedSet& seeds) {
  std::vector<const double*> lookup(g.num_vertices(), nullptr);
  for (const auto& [ref, row] : seeds.rows) lookup[g.global(ref)] = row.data();
  return lookup;
}

// --- seeds -------------------------------------------------------------------------

SeedSelection select_seeds(const KPartiteGraph& g, const LabelTable& truth, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("seed fraction must lie in (0, 1]");
  const std::size_t n = g.num_vertices();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g.degree(a) > g.degree(b);
  });
  // Tolerate representation error in fraction * n (0.05 * 900 = 45.000000000000007).
  const auto take = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  SeedSelection sel;
  sel.seeds.classes = truth.classes;
  for (std::size_t i = 0; i < take; ++i) {
    const VertexRef r = g.ref(order[i]);
    if (const auto* row = truth.find(r))
      sel.seeds.rows.emplace(r, *row);
    else
      ++sel.skipped;
  }
  return sel;
}

// --- initialization ------------------------------------------------------------------

void init_label_rows(const KPartiteGraph& g, const SeedSet& seeds,
                     std::span<const std::size_t> vertices, LabelMatrix& labels,
                     std::size_t workers) {
  const std::size_t k = labels.classes();
  const std::size_t n = g.num_vertices();
  const auto lookup = seed_lookup(g, seeds);

  // Seed ordinal within its own type, and each type's seed list.
  std::vector<std::int64_t> ordinal(n, -1);
  std::vector<std::vector<std::size_t>> type_seeds(g.num_types());
  for (std::size_t v = 0; v < n; ++v)
    if (lookup[v] != nullptr) {
      auto& list = type_seeds[g.type_of(v)];
      ordinal[v] = static_cast<std::int64_t>(list.size());
      list.push_back(v);
    }

  std::vector<double> inv_log_degree(n, 0.0);
  for (std::size_t w = 0; w < n; ++w)
    if (g.degree(w) >= 2) inv_log_degree[w] = 1.0 / std::log(static_cast<double>(g.degree(w)));

  const double uniform = 1.0 / static_cast<double>(k);
  parallel_for(vertices.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<double> scores;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t u = vertices[i];
      auto row = labels.row(u);
      if (lookup[u] != nullptr) {
        std::copy_n(lookup[u], k, row.begin());
        continue;
      }
      const TypeIndex t = g.type_of(u);
      const auto& candidates = type_seeds[t];
      if (candidates.empty()) {
        std::fill(row.begin(), row.end(), uniform);
        continue;
      }
      // Adamic-Adar to every same-type seed via two-hop walks; contributions
      // arrive in ascending common-neighbor order, matching adamic_adar().
      scores.assign(candidates.size(), 0.0);
      for (const Neighbor& w : g.neighbors(u)) {
        if (g.degree(w.vertex) < 2) continue;
        for (const Neighbor& x : g.neighbors(w.vertex))
          if (ordinal[x.vertex] >= 0 && x.vertex != u && g.type_of(x.vertex) == t)
            scores[static_cast<std::size_t>(ordinal[x.vertex])] += inv_log_degree[w.vertex];
      }
      const auto sim = normalize_scores(scores);
      std::fill(row.begin(), row.end(), 0.0);
      double mass = 0.0;
      for (std::size_t s = 0; s < candidates.size(); ++s) {
        if (sim[s] == 0.0) continue;
        const double* seed_row = lookup[candidates[s]];
        for (std::size_t l = 0; l < k; ++l) row[l] += sim[s] * seed_row[l];
        mass += sim[s];
      }
      if (mass == 0.0) {
        std::fill(row.begin(), row.end(), uniform);
        continue;
      }
      const double count = static_cast<double>(candidates.size());
      for (double& v : row) v /= count;
    }
  });
}

LabelMatrix init_labels(const KPartiteGraph& g, const SeedSet& seeds, std::size_t workers) {
  LabelMatrix labels(g.type_sizes(), seeds.classes);
  std::vector<std::size_t> all(g.num_vertices());
  std::iota(all.begin(), all.end(), std::size_t{0});
  init_label_rows(g, seeds, all, labels, workers);
  return labels;
}

PropagationSet init_propagation(const KPartiteGraph& g, const SeedSet& seeds, BMode mode) {
  const std::size_t k = seeds.classes;
  if (k < 2) throw Error("init_propagation: need at least 2 classes");
  const std::size_t types = g.num_types();
  PropagationSet b(types, k);
  if (mode == BMode::Identity) {
    for (Matrix& m : b.pairs()) m = Matrix::identity(k, 1.0 / static_cast<double>(k));
    return b;
  }
  const auto lookup = seed_lookup(g, seeds);
  Matrix pooled(k, k);
  for (TypeIndex t = 0; t < types; ++t)
    for (TypeIndex t2 = t + 1; t2 < types; ++t2) {
      Matrix counts(k, k);
      for (const Edge& e : g.edges(t, t2)) {
        const double* yu = lookup[g.global({t, e.u})];
        const double* yv = lookup[g.global({t2, e.v})];
        if (yu == nullptr || yv == nullptr) continue;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            if (yu[i] > 0.0 && yv[j] > 0.0) counts(i, j) += 1.0;
      }
      pooled += counts;
      Matrix& m = b.stored(t, t2);
      m = Matrix::identity(k);
      m += counts;
    }
  if (mode == BMode::SingleShared) {
    Matrix shared = Matrix::identity(k);
    shared += pooled;
    for (Matrix& m : b.pairs()) m = shared;
  }
  for (Matrix& m : b.pairs()) {
    if (mode == BMode::Diagonal)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          if (i != j) m(i, j) = 0.0;
    const double total = m.sum();
    for (double& v : m.data()) v /= total;
  }
  return b;
}

}  // namespace kprop
