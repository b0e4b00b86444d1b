#pragma once

// Typed sparse K-partite graph: storage, text ingestion, Adamic-Adar
// similarity, and delta application.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kprop {

using TypeIndex = std::uint32_t;

struct VertexRef {
  TypeIndex type = 0;
  std::uint32_t index = 0;

  auto operator<=>(const VertexRef&) const = default;
};

/// Adjacency entry; `vertex` is a global vertex id (type offset + local index).
struct Neighbor {
  std::uint32_t vertex;
  double weight;
};

/// Edge of an unordered type pair (t, t'), t < t'. `u` is local to t, `v` to t'.
struct Edge {
  std::uint32_t u;
  std::uint32_t v;
  double weight;
};

class GraphBuilder;

/// Immutable K-partite graph. Vertices of type t occupy global ids
/// [type_offset(t), type_offset(t) + num_vertices(t)); label matrices use the
/// same row layout.
class KPartiteGraph {
 public:
  KPartiteGraph() = default;

  std::size_t num_types() const noexcept { return ids_.size(); }
  std::size_t num_vertices() const noexcept { return type_offset_.empty() ? 0 : type_offset_.back(); }
  std::size_t num_vertices(TypeIndex t) const { return ids_[t].size(); }
  std::size_t num_edges() const noexcept { return num_edges_; }
  std::vector<std::size_t> type_sizes() const;

  std::size_t type_offset(TypeIndex t) const { return type_offset_[t]; }
  std::size_t global(VertexRef r) const { return type_offset_[r.type] + r.index; }
  VertexRef ref(std::size_t global) const;
  TypeIndex type_of(std::size_t global) const { return ref(global).type; }

  std::optional<VertexRef> find(TypeIndex t, std::string_view id) const;
  const std::string& id(VertexRef r) const { return ids_[r.type][r.index]; }

  /// Sorted by global id.
  std::span<const Neighbor> neighbors(std::size_t global) const {
    return {adjacency_.data() + adj_offset_[global], adj_offset_[global + 1] - adj_offset_[global]};
  }
  std::size_t degree(std::size_t global) const {
    return adj_offset_[global + 1] - adj_offset_[global];
  }

  /// Edge list of the unordered pair; requires t < t2. Sorted by (u, v).
  std::span<const Edge> edges(TypeIndex t, TypeIndex t2) const;
  std::size_t num_pairs() const noexcept { return pair_edges_.size(); }
  std::size_t pair_index(TypeIndex t, TypeIndex t2) const;

  std::optional<double> weight(std::size_t a, std::size_t b) const;

  GraphBuilder to_builder() const;

  friend bool operator==(const KPartiteGraph& a, const KPartiteGraph& b);

 private:
  friend class GraphBuilder;

  std::vector<std::vector<std::string>> ids_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> id_index_;
  std::vector<std::size_t> type_offset_;  // size K + 1
  std::vector<std::vector<Edge>> pair_edges_;
  std::vector<std::size_t> adj_offset_;  // size n + 1
  std::vector<Neighbor> adjacency_;
  std::size_t num_edges_ = 0;
};

/// Mutable staging area. Builder indices are stable: removing a vertex marks
/// it dead and build() compacts survivors in their original order.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::size_t num_types = 0);

  std::size_t num_types() const noexcept { return types_.size(); }
  void ensure_types(std::size_t k);

  /// Throws on duplicate (type, id).
  std::uint32_t add_vertex(TypeIndex t, std::string_view id);
  void remove_vertex(TypeIndex t, std::string_view id);
  /// Accumulates weight onto an existing edge. Throws on intra-type edges,
  /// unknown endpoints and negative or non-finite weights.
  void add_edge(TypeIndex t1, std::string_view id1, TypeIndex t2, std::string_view id2,
                double weight = 1.0);
  void remove_edge(TypeIndex t1, std::string_view id1, TypeIndex t2, std::string_view id2);

  bool has_vertex(TypeIndex t, std::string_view id) const;
  std::optional<std::uint32_t> handle(TypeIndex t, std::string_view id) const;

  /// Live neighbors of a builder vertex, as (type, builder index).
  std::vector<std::pair<TypeIndex, std::uint32_t>> neighbors(TypeIndex t, std::uint32_t h) const;

  KPartiteGraph build() const;

  /// Per type, builder handle -> local index in the graph produced by build();
  /// nullopt for removed vertices.
  std::vector<std::vector<std::optional<std::uint32_t>>> compaction() const;

 private:
  using Key = std::pair<TypeIndex, std::uint32_t>;

  struct TypeSlot {
    std::vector<std::string> ids;
    std::vector<bool> alive;
    std::vector<std::map<Key, double>> adjacency;
    std::unordered_map<std::string, std::uint32_t> index;  // live vertices only
  };

  std::uint32_t require(TypeIndex t, std::string_view id) const;

  std::vector<TypeSlot> types_;
};

KPartiteGraph read_graph(std::istream& vertices, std::istream& edges);
KPartiteGraph load_graph(const std::filesystem::path& vertex_file,
                         const std::filesystem::path& edge_file);
void write_graph(const KPartiteGraph& g, std::ostream& vertices, std::ostream& edges);

/// Natural-log Adamic-Adar score: sum over common neighbors w of 1 / ln d(w).
/// Degree-1 neighbors (shared only when u == v) contribute nothing.
double adamic_adar(const KPartiteGraph& g, std::size_t u, std::size_t v);

/// Min-max rescale into [0, 1]; an all-equal batch maps to zeros.
std::vector<double> normalize_scores(std::span<const double> scores);

// --- deltas -----------------------------------------------------------------

enum class DeltaKind { AddVertex, RemoveVertex, AddEdge, RemoveEdge, SetLabel, UnsetLabel };

struct DeltaOp {
  DeltaKind kind;
  TypeIndex type = 0;
  std::string id{};
  TypeIndex type2 = 0;
  std::string id2{};
  double weight = 1.0;
  std::size_t label = 0;
  double prob = 1.0;
};

using DeltaBatch = std::vector<DeltaOp>;

DeltaBatch read_delta(std::istream& in);
DeltaBatch load_delta(const std::filesystem::path& path);
void write_delta(const DeltaBatch& batch, std::ostream& out);

/// Seed-label edits carried by a delta, already resolved against the new graph.
/// An empty `labels` list means the vertex lost its seed label.
struct LabelChange {
  VertexRef vertex;
  std::vector<std::pair<std::size_t, double>> labels;
};

struct DeltaResult {
  KPartiteGraph graph;
  /// Changed vertex set ΔV as global ids of the new graph, ascending.
  std::vector<std::size_t> changed;
  /// Old global id -> new global id; nullopt for removed vertices.
  std::vector<std::optional<std::size_t>> old_to_new;
  std::vector<LabelChange> label_changes;
};

DeltaResult apply_delta(const KPartiteGraph& g, const DeltaBatch& delta);

struct SubgraphSize {
  std::size_t vertices = 0;
  std::size_t edges = 0;

  std::size_t total() const noexcept { return vertices + edges; }
  bool operator==(const SubgraphSize&) const = default;
};

/// Vertices in `s` plus edges with at least one endpoint in `s`.
SubgraphSize induced_subgraph(const KPartiteGraph& g, std::span<const std::size_t> s);

/// Same vertex set as `g`, keeping only edges with an endpoint in `s`.
KPartiteGraph restrict_edges(const KPartiteGraph& g, std::span<const std::size_t> s);

}  // namespace kprop
