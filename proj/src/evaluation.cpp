#include "kprop/evaluation.hpp"

#include <numeric>
#include <ostream>

#include "kprop/error.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

LabelSet assign_labels(std::span<const double> row) {
  const std::size_t k = row.size();
  if (k == 0) return {};
  const double sum = std::accumulate(row.begin(), row.end(), 0.0);
  const double cut = 1.0 / static_cast<double>(k);
  LabelSet out;
  if (sum > 0.0)
    for (std::size_t i = 0; i < k; ++i)
      if (row[i] / sum > cut) out.push_back(i);
  if (out.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (row[i] > row[best]) best = i;
    out.push_back(best);
  }
  return out;
}

std::uint64_t ContingencyMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ContingencyMatrix::row_total(std::size_t i) const noexcept {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += counts_[i * k_ + j];
  return s;
}

ContingencyMatrix contingency(std::span<const LabelSet> predicted, std::span<const LabelSet> truth,
                              std::size_t k) {
  if (predicted.size() != truth.size())
    throw Error("contingency: prediction and truth lists differ in length");
  ContingencyMatrix a(k);
  for (std::size_t v = 0; v < truth.size(); ++v)
    for (std::size_t i : truth[v])
      for (std::size_t j : predicted[v]) {
        if (i >= k || j >= k) throw Error("contingency: label out of range");
        ++a(i, j);
      }
  return a;
}

double accuracy(const ContingencyMatrix& a) {
  const std::uint64_t total = a.total();
  if (total == 0) throw Error("accuracy: empty contingency matrix");
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < a.classes(); ++i) diag += a(i, i);
  return static_cast<double>(diag) / static_cast<double>(total);
}

BerResult balanced_error(const ContingencyMatrix& a) {
  BerResult r;
  double recall = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < a.classes(); ++i) {
    const std::uint64_t t = a.row_total(i);
    if (t == 0) {
      ++r.empty_rows;
      continue;
    }
    recall += static_cast<double>(a(i, i)) / static_cast<double>(t);
    ++rows;
  }
  if (rows == 0) throw Error("ber: every row of the contingency matrix is empty");
  r.value = 1.0 - recall / static_cast<double>(rows);
  return r;
}

double ber(const ContingencyMatrix& a) { return balanced_error(a).value; }

Evaluation evaluate(const KPartiteGraph& g, const LabelMatrix& y, const LabelTable& truth,
                    const SeedSet* seeds, bool include_seeds) {
  if (y.type_sizes() != g.type_sizes())
    throw Error("evaluate: label matrix does not match graph shape");
  const std::size_t k = y.classes();
  std::vector<LabelSet> pred, real;
  for (const auto& [ref, row] : truth.rows) {
    if (!include_seeds && seeds && seeds->contains(ref)) continue;
    LabelSet t;
    for (std::size_t l = 0; l < row.size(); ++l)
      if (row[l] > 0.0) t.push_back(l);
    real.push_back(std::move(t));
    pred.push_back(assign_labels(y.row(g.global(ref))));
  }
  Evaluation e;
  e.vertices = real.size();
  e.matrix = contingency(pred, real, std::max(k, truth.classes));
  e.accuracy = accuracy(e.matrix);
  e.ber = balanced_error(e.matrix);
  return e;
}

void write_evaluation(const Evaluation& e, std::ostream& out) {
  out << "ACC " << text::format_decimal(e.accuracy) << '\n';
  out << "BER " << text::format_decimal(e.ber.value) << '\n';
  for (std::size_t i = 0; i < e.matrix.classes(); ++i) {
    for (std::size_t j = 0; j < e.matrix.classes(); ++j)
      out << (j ? "\t" : "") << e.matrix(i, j);
    out << '\n';
  }
}

}  // namespace kprop
