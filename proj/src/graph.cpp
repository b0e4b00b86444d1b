#include "kprop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "kprop/error.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

// --- KPartiteGraph -------------------------------------------------------------

std::vector<std::size_t> KPartiteGraph::type_sizes() const {
  std::vector<std::size_t> sizes(num_types());
  for (std::size_t t = 0; t < sizes.size(); ++t) sizes[t] = ids_[t].size();
  return sizes;
}

VertexRef KPartiteGraph::ref(std::size_t global) const {
  const auto it = std::upper_bound(type_offset_.begin(), type_offset_.end(), global);
  const auto t = static_cast<TypeIndex>(it - type_offset_.begin() - 1);
  return {t, static_cast<std::uint32_t>(global - type_offset_[t])};
}

std::optional<VertexRef> KPartiteGraph::find(TypeIndex t, std::string_view id) const {
  if (t >= num_types()) return std::nullopt;
  const auto it = id_index_[t].find(std::string(id));
  if (it == id_index_[t].end()) return std::nullopt;
  return VertexRef{t, it->second};
}

std::size_t KPartiteGraph::pair_index(TypeIndex t, TypeIndex t2) const {
  if (t > t2) std::swap(t, t2);
  const std::size_t k = num_types();
  return t * k - t * (t + 1) / 2 + (t2 - t - 1);
}

std::span<const Edge> KPartiteGraph::edges(TypeIndex t, TypeIndex t2) const {
  return pair_edges_[pair_index(t, t2)];
}

std::optional<double> KPartiteGraph::weight(std::size_t a, std::size_t b) const {
  const auto nbrs = neighbors(a);
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), b,
                                   [](const Neighbor& n, std::size_t x) { return n.vertex < x; });
  if (it == nbrs.end() || it->vertex != b) return std::nullopt;
  return it->weight;
}

bool operator==(const KPartiteGraph& a, const KPartiteGraph& b) {
  if (a.ids_ != b.ids_ || a.pair_edges_.size() != b.pair_edges_.size()) return false;
  for (std::size_t p = 0; p < a.pair_edges_.size(); ++p) {
    const auto& ea = a.pair_edges_[p];
    const auto& eb = b.pair_edges_[p];
    if (!std::equal(ea.begin(), ea.end(), eb.begin(), eb.end(), [](const Edge& x, const Edge& y) {
          return x.u == y.u && x.v == y.v && x.weight == y.weight;
        }))
      return false;
  }
  return true;
}

GraphBuilder KPartiteGraph::to_builder() const {
  GraphBuilder b(num_types());
  for (TypeIndex t = 0; t < num_types(); ++t)
    for (const auto& id : ids_[t]) b.add_vertex(t, id);
  for (TypeIndex t = 0; t < num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < num_types(); ++t2)
      for (const Edge& e : edges(t, t2))
        b.add_edge(t, ids_[t][e.u], t2, ids_[t2][e.v], e.weight);
  return b;
}

// --- GraphBuilder --------------------------------------------------------------

GraphBuilder::GraphBuilder(std::size_t num_types) : types_(num_types) {}

void GraphBuilder::ensure_types(std::size_t k) {
  if (types_.size() < k) types_.resize(k);
}

std::uint32_t GraphBuilder::add_vertex(TypeIndex t, std::string_view id) {
  ensure_types(std::size_t{t} + 1);
  TypeSlot& slot = types_[t];
  const auto h = static_cast<std::uint32_t>(slot.ids.size());
  if (!slot.index.emplace(std::string(id), h).second)
    throw Error("duplicate vertex " + std::to_string(t) + ":" + std::string(id));
  slot.ids.emplace_back(id);
  slot.alive.push_back(true);
  slot.adjacency.emplace_back();
  return h;
}

std::uint32_t GraphBuilder::require(TypeIndex t, std::string_view id) const {
  if (t < types_.size()) {
    const auto it = types_[t].index.find(std::string(id));
    if (it != types_[t].index.end()) return it->second;
  }
  throw Error("unknown vertex " + std::to_string(t) + ":" + std::string(id));
}

bool GraphBuilder::has_vertex(TypeIndex t, std::string_view id) const {
  return handle(t, id).has_value();
}

std::optional<std::uint32_t> GraphBuilder::handle(TypeIndex t, std::string_view id) const {
  if (t >= types_.size()) return std::nullopt;
  const auto it = types_[t].index.find(std::string(id));
  if (it == types_[t].index.end()) return std::nullopt;
  return it->second;
}

void GraphBuilder::remove_vertex(TypeIndex t, std::string_view id) {
  const std::uint32_t h = require(t, id);
  TypeSlot& slot = types_[t];
  for (const auto& [key, w] : slot.adjacency[h]) types_[key.first].adjacency[key.second].erase({t, h});
  slot.adjacency[h].clear();
  slot.alive[h] = false;
  slot.index.erase(std::string(id));
}

void GraphBuilder::add_edge(TypeIndex t1, std::string_view id1, TypeIndex t2,
                            std::string_view id2, double weight) {
  if (t1 == t2) throw Error("intra-type edge " + std::string(id1) + " -- " + std::string(id2));
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw Error("negative weight on edge " + std::string(id1) + " -- " + std::string(id2));
  const std::uint32_t h1 = require(t1, id1);
  const std::uint32_t h2 = require(t2, id2);
  types_[t1].adjacency[h1][{t2, h2}] += weight;
  types_[t2].adjacency[h2][{t1, h1}] += weight;
}

void GraphBuilder::remove_edge(TypeIndex t1, std::string_view id1, TypeIndex t2,
                               std::string_view id2) {
  const std::uint32_t h1 = require(t1, id1);
  const std::uint32_t h2 = require(t2, id2);
  if (types_[t1].adjacency[h1].erase({t2, h2}) == 0)
    throw Error("unknown edge " + std::string(id1) + " -- " + std::string(id2));
  types_[t2].adjacency[h2].erase({t1, h1});
}

std::vector<std::pair<TypeIndex, std::uint32_t>> GraphBuilder::neighbors(TypeIndex t,
                                                                         std::uint32_t h) const {
  std::vector<std::pair<TypeIndex, std::uint32_t>> out;
  for (const auto& [key, w] : types_[t].adjacency[h]) out.push_back(key);
  return out;
}

std::vector<std::vector<std::optional<std::uint32_t>>> GraphBuilder::compaction() const {
  std::vector<std::vector<std::optional<std::uint32_t>>> out(types_.size());
  for (std::size_t t = 0; t < types_.size(); ++t) {
    std::uint32_t next = 0;
    for (bool alive : types_[t].alive)
      out[t].push_back(alive ? std::optional<std::uint32_t>(next++) : std::nullopt);
  }
  return out;
}

KPartiteGraph GraphBuilder::build() const {
  KPartiteGraph g;
  const std::size_t k = types_.size();
  // Compaction: builder handle -> local index among survivors.
  std::vector<std::vector<std::uint32_t>> local(k);
  g.ids_.resize(k);
  g.id_index_.resize(k);
  g.type_offset_.assign(k + 1, 0);
  for (std::size_t t = 0; t < k; ++t) {
    const TypeSlot& slot = types_[t];
    local[t].assign(slot.ids.size(), 0);
    for (std::uint32_t h = 0; h < slot.ids.size(); ++h) {
      if (!slot.alive[h]) continue;
      local[t][h] = static_cast<std::uint32_t>(g.ids_[t].size());
      g.id_index_[t].emplace(slot.ids[h], local[t][h]);
      g.ids_[t].push_back(slot.ids[h]);
    }
    g.type_offset_[t + 1] = g.type_offset_[t] + g.ids_[t].size();
  }

  g.pair_edges_.assign(k * (k - (k > 0 ? 1 : 0)) / 2, {});
  g.adj_offset_.assign(g.num_vertices() + 1, 0);
  g.adjacency_.clear();
  for (std::size_t t = 0; t < k; ++t) {
    const TypeSlot& slot = types_[t];
    for (std::uint32_t h = 0; h < slot.ids.size(); ++h) {
      if (!slot.alive[h]) continue;
      const std::uint32_t u = local[t][h];
      for (const auto& [key, w] : slot.adjacency[h]) {
        const auto v = local[key.first][key.second];
        g.adjacency_.push_back(
            {static_cast<std::uint32_t>(g.type_offset_[key.first] + v), w});
        if (key.first > t) {
          g.pair_edges_[g.pair_index(static_cast<TypeIndex>(t), key.first)].push_back({u, v, w});
          ++g.num_edges_;
        }
      }
      g.adj_offset_[g.type_offset_[t] + u + 1] = g.adjacency_.size();
    }
  }
  return g;
}

// --- text formats --------------------------------------------------------------

KPartiteGraph read_graph(std::istream& vertices, std::istream& edges) {
  GraphBuilder builder;
  text::for_each_record(vertices, [&](std::size_t line, std::string_view rec) {
    const auto f = text::split_tabs(rec);
    if (f.size() != 3 || f[0] != "V") throw ParseError(line, "expected V<TAB>type<TAB>id");
    const auto t = static_cast<TypeIndex>(text::parse_index(f[1], line));
    try {
      builder.add_vertex(t, f[2]);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  });
  text::for_each_record(edges, [&](std::size_t line, std::string_view rec) {
    const auto f = text::split_tabs(rec);
    if ((f.size() != 5 && f.size() != 6) || f[0] != "E")
      throw ParseError(line, "expected E<TAB>t1<TAB>id1<TAB>t2<TAB>id2[<TAB>weight]");
    const auto t1 = static_cast<TypeIndex>(text::parse_index(f[1], line));
    const auto t2 = static_cast<TypeIndex>(text::parse_index(f[3], line));
    const double w = f.size() == 6 ? text::parse_double(f[5], line) : 1.0;
    try {
      builder.add_edge(t1, f[2], t2, f[4], w);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  });
  return builder.build();
}

KPartiteGraph load_graph(const std::filesystem::path& vertex_file,
                         const std::filesystem::path& edge_file) {
  auto vin = text::open_input(vertex_file);
  auto ein = text::open_input(edge_file);
  return read_graph(vin, ein);
}

void write_graph(const KPartiteGraph& g, std::ostream& vertices, std::ostream& edges) {
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (std::uint32_t i = 0; i < g.num_vertices(t); ++i)
      vertices << "V\t" << t << '\t' << g.id({t, i}) << '\n';
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < g.num_types(); ++t2)
      for (const Edge& e : g.edges(t, t2))
        edges << "E\t" << t << '\t' << g.id({t, e.u}) << '\t' << t2 << '\t' << g.id({t2, e.v})
              << '\t' << text::format_decimal(e.weight) << '\n';
}

// --- similarity ----------------------------------------------------------------

double adamic_adar(const KPartiteGraph& g, std::size_t u, std::size_t v) {
  const auto a = g.neighbors(u);
  const auto b = g.neighbors(v);
  double score = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].vertex < b[j].vertex) {
      ++i;
    } else if (b[j].vertex < a[i].vertex) {
      ++j;
    } else {
      // Degree is at least 2 unless u == v.
      const std::size_t d = g.degree(a[i].vertex);
      if (d >= 2) score += 1.0 / std::log(static_cast<double>(d));
      ++i;
      ++j;
    }
  }
  return score;
}

std::vector<double> normalize_scores(std::span<const double> scores) {
  if (scores.empty()) throw Error("normalize_scores: empty input");
  double lo = scores[0], hi = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) throw Error("normalize_scores: scores must be finite and >= 0");
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::vector<double> out(scores.size(), 0.0);
  if (hi == lo) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / range;
  return out;
}

// --- deltas ----------------------------------------------------------------------

DeltaBatch read_delta(std::istream& in) {
  DeltaBatch batch;
  text::for_each_record(in, [&](std::size_t line, std::string_view rec) {
    const auto f = text::split_whitespace(rec);
    DeltaOp op{};
    const auto type_at = [&](std::size_t i) {
      return static_cast<TypeIndex>(text::parse_index(f[i], line));
    };
    const auto arity = [&](std::size_t lo, std::size_t hi) {
      if (f.size() < lo || f.size() > hi)
        throw ParseError(line, "wrong field count for " + std::string(f[0]));
    };
    if (f[0] == "ADDV" || f[0] == "DELV" || f[0] == "UNSETL") {
      arity(3, 3);
      op.kind = f[0] == "ADDV"   ? DeltaKind::AddVertex
                : f[0] == "DELV" ? DeltaKind::RemoveVertex
                                 : DeltaKind::UnsetLabel;
      op.type = type_at(1);
      op.id = f[2];
    } else if (f[0] == "ADDE" || f[0] == "DELE") {
      const bool add = f[0] == "ADDE";
      arity(5, add ? 6 : 5);
      op.kind = add ? DeltaKind::AddEdge : DeltaKind::RemoveEdge;
      op.type = type_at(1);
      op.id = f[2];
      op.type2 = type_at(3);
      op.id2 = f[4];
      if (f.size() == 6) op.weight = text::parse_double(f[5], line);
    } else if (f[0] == "SETL") {
      arity(4, 5);
      op.kind = DeltaKind::SetLabel;
      op.type = type_at(1);
      op.id = f[2];
      op.label = text::parse_index(f[3], line);
      if (f.size() == 5) op.prob = text::parse_double(f[4], line);
    } else {
      throw ParseError(line, "unknown delta operation '" + std::string(f[0]) + "'");
    }
    batch.push_back(std::move(op));
  });
  return batch;
}

DeltaBatch load_delta(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return read_delta(in);
}

void write_delta(const DeltaBatch& batch, std::ostream& out) {
  for (const DeltaOp& op : batch) {
    switch (op.kind) {
      case DeltaKind::AddVertex:
        out << "ADDV " << op.type << ' ' << op.id << '\n';
        break;
      case DeltaKind::RemoveVertex:
        out << "DELV " << op.type << ' ' << op.id << '\n';
        break;
      case DeltaKind::AddEdge:
        out << "ADDE " << op.type << ' ' << op.id << ' ' << op.type2 << ' ' << op.id2 << ' '
            << text::format_decimal(op.weight) << '\n';
        break;
      case DeltaKind::RemoveEdge:
        out << "DELE " << op.type << ' ' << op.id << ' ' << op.type2 << ' ' << op.id2 << '\n';
        break;
      case DeltaKind::SetLabel:
        out << "SETL " << op.type << ' ' << op.id << ' ' << op.label << ' '
            << text::format_decimal(op.prob) << '\n';
        break;
      case DeltaKind::UnsetLabel:
        out << "UNSETL " << op.type << ' ' << op.id << '\n';
        break;
    }
  }
}

DeltaResult apply_delta(const KPartiteGraph& g, const DeltaBatch& delta) {
  using Key = std::pair<TypeIndex, std::uint32_t>;
  GraphBuilder builder = g.to_builder();
  const std::size_t k = g.num_types();
  std::set<Key> touched;
  std::map<Key, std::vector<std::pair<std::size_t, double>>> labels;

  for (std::size_t i = 0; i < delta.size(); ++i) {
    const DeltaOp& op = delta[i];
    const auto check_type = [&](TypeIndex t) {
      if (t >= k) throw Error("delta op " + std::to_string(i + 1) + ": unknown type " + std::to_string(t));
    };
    check_type(op.type);
    switch (op.kind) {
      case DeltaKind::AddVertex:
        touched.insert({op.type, builder.add_vertex(op.type, op.id)});
        break;
      case DeltaKind::RemoveVertex: {
        const auto h = builder.handle(op.type, op.id);
        if (!h) throw Error("delta op " + std::to_string(i + 1) + ": unknown vertex " + op.id);
        for (const Key& n : builder.neighbors(op.type, *h)) touched.insert(n);
        builder.remove_vertex(op.type, op.id);
        touched.erase({op.type, *h});
        labels.erase({op.type, *h});
        break;
      }
      case DeltaKind::AddEdge:
      case DeltaKind::RemoveEdge:
        check_type(op.type2);
        if (op.kind == DeltaKind::AddEdge)
          builder.add_edge(op.type, op.id, op.type2, op.id2, op.weight);
        else
          builder.remove_edge(op.type, op.id, op.type2, op.id2);
        touched.insert({op.type, *builder.handle(op.type, op.id)});
        touched.insert({op.type2, *builder.handle(op.type2, op.id2)});
        break;
      case DeltaKind::SetLabel:
      case DeltaKind::UnsetLabel: {
        const auto h = builder.handle(op.type, op.id);
        if (!h) throw Error("delta op " + std::to_string(i + 1) + ": unknown vertex " + op.id);
        touched.insert({op.type, *h});
        auto& row = labels[{op.type, *h}];
        if (op.kind == DeltaKind::UnsetLabel)
          row.clear();
        else
          row.emplace_back(op.label, op.prob);
        break;
      }
    }
  }

  DeltaResult result;
  result.graph = builder.build();
  const KPartiteGraph& out = result.graph;

  const auto local = builder.compaction();
  const auto to_global = [&](TypeIndex t, std::uint32_t h) -> std::optional<std::size_t> {
    if (h >= local[t].size() || !local[t][h]) return std::nullopt;
    return out.global({t, *local[t][h]});
  };

  for (const Key& key : touched)
    if (auto gid = to_global(key.first, key.second)) result.changed.push_back(*gid);
  std::sort(result.changed.begin(), result.changed.end());

  result.old_to_new.resize(g.num_vertices());
  for (std::size_t old = 0; old < g.num_vertices(); ++old) {
    const VertexRef r = g.ref(old);
    result.old_to_new[old] = to_global(r.type, r.index);
  }
  for (auto& [key, row] : labels) {
    if (auto gid = to_global(key.first, key.second))
      result.label_changes.push_back({out.ref(*gid), std::move(row)});
  }
  return result;
}

SubgraphSize induced_subgraph(const KPartiteGraph& g, std::span<const std::size_t> s) {
  std::vector<bool> in(g.num_vertices(), false);
  SubgraphSize size;
  for (std::size_t v : s) {
    if (!in[v]) ++size.vertices;
    in[v] = true;
  }
  for (std::size_t u = 0; u < g.num_vertices(); ++u) {
    if (!in[u]) continue;
    for (const Neighbor& n : g.neighbors(u))
      if (!in[n.vertex] || u < n.vertex) ++size.edges;
  }
  return size;
}

KPartiteGraph restrict_edges(const KPartiteGraph& g, std::span<const std::size_t> s) {
  std::vector<bool> in(g.num_vertices(), false);
  for (std::size_t v : s) in[v] = true;
  GraphBuilder b(g.num_types());
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (std::uint32_t i = 0; i < g.num_vertices(t); ++i) b.add_vertex(t, g.id({t, i}));
  for (TypeIndex t = 0; t < g.num_types(); ++t)
    for (TypeIndex t2 = t + 1; t2 < g.num_types(); ++t2)
      for (const Edge& e : g.edges(t, t2)) {
        const std::size_t gu = g.global({t, e.u});
        const std::size_t gv = g.global({t2, e.v});
        if (in[gu] || in[gv]) b.add_edge(t, g.id({t, e.u}), t2, g.id({t2, e.v}), e.weight);
      }
  return b.build();
}

}  // namespace kprop
