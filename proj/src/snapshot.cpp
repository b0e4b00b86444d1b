#include "kprop/snapshot.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "kprop/error.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

namespace {
constexpr std::string_view kHeader = "KPROP-SNAPSHOT v1";

double parse_entry(std::string_view s, std::size_t line) {
  const double v = text::parse_double(s, line);
  if (!std::isfinite(v) || v < 0.0) throw ParseError(line, "entries must be finite and >= 0");
  return v;
}
}  // namespace

void write_snapshot(const Snapshot& s, std::ostream& out) {
  const LabelMatrix& y = s.labels;
  const std::size_t k = y.classes();
  out << kHeader << '\n';
  out << "K\t" << y.num_types() << '\n';
  out << "n";
  for (std::size_t n : y.type_sizes()) out << '\t' << n;
  out << '\n';
  out << "k\t" << k << '\n';
  out << "b_mode\t" << to_string(s.b_mode) << '\n';
  for (std::size_t t = 0; t < y.num_types(); ++t)
    for (std::size_t i = 0; i < y.type_sizes()[t]; ++i) {
      out << "Y\t" << t << '\t' << i;
      for (double v : y.row(y.type_offset(t) + i)) out << '\t' << text::format_decimal(v);
      out << '\n';
    }
  for (std::size_t t = 0; t < y.num_types(); ++t)
    for (std::size_t t2 = t + 1; t2 < y.num_types(); ++t2) {
      out << "B\t" << t << '\t' << t2;
      for (double v : s.propagation.stored(t, t2).data()) out << '\t' << text::format_decimal(v);
      out << '\n';
    }
}

Snapshot read_snapshot(std::istream& in) {
  Snapshot s;
  std::optional<std::size_t> types, classes;
  std::vector<std::size_t> sizes;
  bool have_sizes = false, have_mode = false, header = false;
  std::vector<char> seen_y, seen_b;
  std::size_t last = 0;

  auto ready = [&](std::size_t line) {
    if (!types || !classes || !have_sizes || !have_mode)
      throw ParseError(line, "snapshot header incomplete before data rows");
    if (sizes.size() != *types) throw ParseError(line, "n list does not match K");
    if (s.labels.rows() == 0 && seen_y.empty()) {
      s.labels = LabelMatrix(sizes, *classes);
      s.propagation = PropagationSet(*types, *classes);
      seen_y.assign(s.labels.rows(), 0);
      seen_b.assign(s.propagation.num_pairs(), 0);
    }
  };

  text::for_each_record(in, [&](std::size_t line, std::string_view rec) {
    last = line;
    if (!header) {
      if (rec != kHeader) throw ParseError(line, "not a snapshot file (missing header)");
      header = true;
      return;
    }
    const auto f = text::split_tabs(rec);
    if (f[0] == "K" && f.size() == 2) {
      types = text::parse_index(f[1], line);
    } else if (f[0] == "n") {
      for (std::size_t i = 1; i < f.size(); ++i) sizes.push_back(text::parse_index(f[i], line));
      have_sizes = true;
    } else if (f[0] == "k" && f.size() == 2) {
      classes = text::parse_index(f[1], line);
    } else if (f[0] == "b_mode" && f.size() == 2) {
      const auto mode = parse_b_mode(f[1]);
      if (!mode) throw ParseError(line, "unknown b_mode " + std::string(f[1]));
      s.b_mode = *mode;
      have_mode = true;
    } else if (f[0] == "Y") {
      ready(line);
      if (f.size() != 3 + *classes) throw ParseError(line, "Y row needs k values");
      const std::size_t t = text::parse_index(f[1], line);
      const std::size_t i = text::parse_index(f[2], line);
      if (t >= *types || i >= sizes[t]) throw ParseError(line, "Y row index out of range");
      const std::size_t g = s.labels.type_offset(t) + i;
      if (seen_y[g]) throw ParseError(line, "duplicate Y row");
      seen_y[g] = 1;
      auto row = s.labels.row(g);
      for (std::size_t l = 0; l < *classes; ++l) row[l] = parse_entry(f[3 + l], line);
    } else if (f[0] == "B") {
      ready(line);
      const std::size_t k = *classes;
      if (f.size() != 3 + k * k) throw ParseError(line, "B row needs k*k values");
      const std::size_t t = text::parse_index(f[1], line);
      const std::size_t t2 = text::parse_index(f[2], line);
      if (t >= t2 || t2 >= *types) throw ParseError(line, "B pair must satisfy t < t2 < K");
      const std::size_t idx = t * *types - t * (t + 1) / 2 + (t2 - t - 1);
      if (seen_b[idx]) throw ParseError(line, "duplicate B pair");
      seen_b[idx] = 1;
      auto data = s.propagation.stored(t, t2).data();
      for (std::size_t i = 0; i < k * k; ++i) data[i] = parse_entry(f[3 + i], line);
    } else {
      throw ParseError(line, "unexpected snapshot record " + std::string(f[0]));
    }
  });
  if (!header) throw ParseError(last, "empty snapshot");
  ready(last);
  for (char c : seen_y)
    if (!c) throw ParseError(last, "snapshot is missing Y rows");
  for (char c : seen_b)
    if (!c) throw ParseError(last, "snapshot is missing B pairs");
  return s;
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return read_snapshot(in);
}

void save_snapshot(const Snapshot& s, const std::filesystem::path& path) {
  std::ostringstream out;
  write_snapshot(s, out);
  text::write_file_atomic(path, out.str());
}

void write_trace(const IterationTrace& trace, std::ostream& out) {
  for (std::size_t r = 0; r < trace.objective.size(); ++r)
    out << r << '\t' << text::format_decimal(trace.objective[r]) << '\t'
        << text::format_decimal(trace.millis[r]) << '\n';
}

}  // namespace kprop
