#pragma once

// Text persistence of a fitted model (label rows + propagation matrices) and
// of iteration traces. Decimals round-trip exactly.

#include <filesystem>
#include <iosfwd>

#include "kprop/inference.hpp"
#include "kprop/model.hpp"

namespace kprop {

struct Snapshot {
  LabelMatrix labels;
  PropagationSet propagation;
  BMode b_mode = BMode::Full;

  bool operator==(const Snapshot&) const = default;
};

void write_snapshot(const Snapshot& s, std::ostream& out);
Snapshot read_snapshot(std::istream& in);
Snapshot load_snapshot(const std::filesystem::path& path);
void save_snapshot(const Snapshot& s, const std::filesystem::path& path);

/// `iter<TAB>objective<TAB>millis`, one line per recorded state.
void write_trace(const IterationTrace& trace, std::ostream& out);

}  // namespace kprop
