#pragma once

// Label decisions and the two classification metrics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "kprop/graph.hpp"
#include "kprop/model.hpp"

namespace kprop {

using LabelSet = std::vector<std::size_t>;

/// Labels whose share of the (L1-normalized) row strictly exceeds 1/k; the
/// argmax (lowest index on ties) when none does. A zero row counts as uniform.
LabelSet assign_labels(std::span<const double> row);

/// A(i, j) counts vertices with true label i predicted as j, one count per
/// (true, predicted) combination.
class ContingencyMatrix {
 public:
  explicit ContingencyMatrix(std::size_t k = 0) : k_(k), counts_(k * k, 0) {}

  std::size_t classes() const noexcept { return k_; }
  std::uint64_t& operator()(std::size_t i, std::size_t j) { return counts_[i * k_ + j]; }
  std::uint64_t operator()(std::size_t i, std::size_t j) const { return counts_[i * k_ + j]; }
  std::uint64_t total() const noexcept;
  std::uint64_t row_total(std::size_t i) const noexcept;

  bool operator==(const ContingencyMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

ContingencyMatrix contingency(std::span<const LabelSet> predicted, std::span<const LabelSet> truth,
                              std::size_t k);

double accuracy(const ContingencyMatrix& a);

struct BerResult {
  double value = 0.0;
  std::size_t empty_rows = 0;  // classes without ground-truth support, left out
};

BerResult balanced_error(const ContingencyMatrix& a);
double ber(const ContingencyMatrix& a);

struct Evaluation {
  ContingencyMatrix matrix;
  double accuracy = 0.0;
  BerResult ber;
  std::size_t vertices = 0;
};

/// Scores every vertex with ground truth; seed vertices are skipped unless
/// `include_seeds`.
Evaluation evaluate(const KPartiteGraph& g, const LabelMatrix& y, const LabelTable& truth,
                    const SeedSet* seeds = nullptr, bool include_seeds = false);

/// `ACC`, `BER` lines, then the matrix as tab-separated rows.
void write_evaluation(const Evaluation& e, std::ostream& out);

}  // namespace kprop
