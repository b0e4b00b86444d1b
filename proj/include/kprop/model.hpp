#pragma once

// Label-assignment and propagation-matrix state, seed handling and
// initialization.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/matrix.hpp"

namespace kprop {

/// Constraint placed on the propagation matrices.
enum class BMode {
  Full,          // unconstrained
  Diagonal,      // off-diagonal entries pinned to zero
  Identity,      // every pair fixed at I/k, never updated
  SingleShared,  // one matrix shared by every type pair
};

std::string_view to_string(BMode mode) noexcept;
/// Accepts full | diag | identity | single.
std::optional<BMode> parse_b_mode(std::string_view name) noexcept;

/// n x k nonnegative label scores laid out with the graph's global vertex
/// order, so the rows of one type form a contiguous block.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::vector<std::size_t> type_sizes, std::size_t classes, double fill = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t num_types() const noexcept { return type_sizes_.size(); }
  const std::vector<std::size_t>& type_sizes() const noexcept { return type_sizes_; }
  std::size_t type_offset(std::size_t t) const { return type_offset_[t]; }

  std::span<double> row(std::size_t g) { return {data_.data() + g * classes_, classes_}; }
  std::span<const double> row(std::size_t g) const {
    return {data_.data() + g * classes_, classes_};
  }
  std::span<double> block(std::size_t t) {
    return {data_.data() + type_offset_[t] * classes_, type_sizes_[t] * classes_};
  }
  std::span<const double> block(std::size_t t) const {
    return {data_.data() + type_offset_[t] * classes_, type_sizes_[t] * classes_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const LabelMatrix& other) const noexcept {
    return classes_ == other.classes_ && type_sizes_ == other.type_sizes_;
  }
  bool operator==(const LabelMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::size_t> type_sizes_;
  std::vector<std::size_t> type_offset_;
  std::vector<double> data_;
};

/// One k x k matrix per unordered type pair. The stored matrix for t < t'
/// maps label i on a t-vertex to label j on a t'-vertex; the reverse
/// direction is its transpose.
class PropagationSet {
 public:
  PropagationSet() = default;
  PropagationSet(std::size_t num_types, std::size_t classes);

  std::size_t num_types() const noexcept { return num_types_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t num_pairs() const noexcept { return pairs_.size(); }

  /// Requires t < t2.
  Matrix& stored(std::size_t t, std::size_t t2) { return pairs_[index(t, t2)]; }
  const Matrix& stored(std::size_t t, std::size_t t2) const { return pairs_[index(t, t2)]; }
  /// B(t, t2) in the orientation used by a t-type vertex; copies.
  Matrix oriented(std::size_t t, std::size_t t2) const;

  std::span<Matrix> pairs() noexcept { return pairs_; }
  std::span<const Matrix> pairs() const noexcept { return pairs_; }

  bool operator==(const PropagationSet& other) const = default;

 private:
  std::size_t index(std::size_t t, std::size_t t2) const;

  std::size_t num_types_ = 0;
  std::size_t classes_ = 0;
  std::vector<Matrix> pairs_;
};

using LabelRows = std::map<VertexRef, std::vector<double>>;

/// Per-vertex label rows, each summing to 1. Used both for ground truth and
/// for the seed set V^L.
struct LabelTable {
  std::size_t classes = 0;
  LabelRows rows;

  const std::vector<double>* find(VertexRef r) const {
    const auto it = rows.find(r);
    return it == rows.end() ? nullptr : &it->second;
  }
  bool contains(VertexRef r) const { return rows.contains(r); }
  std::size_t size() const noexcept { return rows.size(); }
};

using SeedSet = LabelTable;

/// Reads `L<TAB>type<TAB>id<TAB>label[<TAB>prob]` lines. Repeated lines for a
/// vertex accumulate into one row which is normalized to sum 1. When
/// `classes` is unset it is max label + 1 (at least 2).
LabelTable read_labels(std::istream& in, const KPartiteGraph& g,
                       std::optional<std::size_t> classes = std::nullopt);
LabelTable load_labels(const std::filesystem::path& path, const KPartiteGraph& g,
                       std::optional<std::size_t> classes = std::nullopt);
void write_labels(const LabelTable& table, const KPartiteGraph& g, std::ostream& out);

/// Builds a normalized row from (label, mass) pairs; throws on out-of-range
/// labels or non-positive total mass.
std::vector<double> make_label_row(std::span<const std::pair<std::size_t, double>> labels,
                                   std::size_t classes);

/// Applies seed edits produced by apply_delta. Existing rows are re-keyed
/// through `old_to_new`; removed vertices drop out.
SeedSet remap_seeds(const SeedSet& seeds, const KPartiteGraph& old_graph,
                    const DeltaResult& delta);

/// Dense lookup: pointer to the seed row of every global vertex, or nullptr.
std::vector<const double*> seed_lookup(const KPartiteGraph& g, const SeedSet& seeds);

struct SeedSelection {
  SeedSet seeds;
  std::size_t skipped = 0;  // top-degree vertices without ground truth
};

/// Top ceil(fraction * n) vertices by degree, ties broken by (type, index).
SeedSelection select_seeds(const KPartiteGraph& g, const LabelTable& truth, double fraction);

/// Seed rows copied verbatim; every other row is the average over same-type
/// seeds of (normalized Adamic-Adar similarity) x (seed row). Rows without a
/// same-type seed or with all-zero similarity fall back to uniform 1/k.
LabelMatrix init_labels(const KPartiteGraph& g, const SeedSet& seeds, std::size_t workers = 1);

/// Same rule restricted to the listed global vertices; other rows untouched.
void init_label_rows(const KPartiteGraph& g, const SeedSet& seeds,
                     std::span<const std::size_t> vertices, LabelMatrix& labels,
                     std::size_t workers = 1);

/// Identity plus seed-seed edge label counts, scaled so each matrix sums to 1.
PropagationSet init_propagation(const KPartiteGraph& g, const SeedSet& seeds, BMode mode);

}  // namespace kprop
