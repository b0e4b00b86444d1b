#include "kprop/planted.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "kprop/error.hpp"
#include "kprop/text_io.hpp"

namespace kprop {

std::size_t PlantedSpec::pair_index(std::size_t t, std::size_t t2) const {
  if (t > t2) std::swap(t, t2);
  return t * num_types - t * (t + 1) / 2 + (t2 - t - 1);
}

namespace {

std::vector<double> parse_list(std::string_view s, std::size_t line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(text::parse_double(s.substr(pos, comma - pos), line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

PlantedSpec read_planted_spec(std::istream& in) {
  PlantedSpec spec;
  struct PairEntry {
    std::size_t t, t2, line;
    std::vector<double> values;
  };
  std::vector<PairEntry> pairs;
  std::vector<std::pair<std::size_t, std::vector<double>>> dists;
  std::size_t last_line = 0;
  bool have_k = false;

  text::for_each_record(in, [&](std::size_t line, std::string_view rec) {
    last_line = line;
    const std::size_t eq = rec.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected key=value");
    const std::string_view key = trim(rec.substr(0, eq));
    const std::string_view value = trim(rec.substr(eq + 1));
    if (key == "K") {
      spec.num_types = text::parse_index(value, line);
    } else if (key == "n") {
      for (double v : parse_list(value, line)) {
        if (v < 0 || v != std::floor(v)) throw ParseError(line, "vertex counts must be whole");
        spec.sizes.push_back(static_cast<std::size_t>(v));
      }
    } else if (key == "k") {
      spec.classes = text::parse_index(value, line);
      have_k = true;
    } else if (key == "epv") {
      spec.edges_per_vertex = text::parse_double(value, line);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(text::parse_int(value, line));
    } else if (key.starts_with("B.")) {
      const std::string_view rest = key.substr(2);
      const std::size_t dot = rest.find('.');
      if (dot == std::string_view::npos) throw ParseError(line, "expected B.t.t2");
      pairs.push_back({text::parse_index(rest.substr(0, dot), line),
                       text::parse_index(rest.substr(dot + 1), line), line,
                       parse_list(value, line)});
    } else if (key.starts_with("labels.")) {
      dists.emplace_back(text::parse_index(key.substr(7), line), parse_list(value, line));
    } else {
      throw ParseError(line, "unknown key " + std::string(key));
    }
  });

  if (spec.num_types < 2) throw ParseError(last_line, "K must be at least 2");
  if (spec.sizes.size() == 1) spec.sizes.assign(spec.num_types, spec.sizes[0]);
  if (spec.sizes.size() != spec.num_types)
    throw ParseError(last_line, "n must list one size per type");
  if (!have_k || spec.classes < 2) throw ParseError(last_line, "k must be at least 2");
  if (!(spec.edges_per_vertex > 0.0)) throw ParseError(last_line, "epv must be positive");

  const std::size_t k = spec.classes;
  spec.pair_b.assign(spec.num_types * (spec.num_types - 1) / 2,
                     Matrix::identity(k, 1.0 / static_cast<double>(k)));
  for (auto& p : pairs) {
    if (p.t == p.t2 || p.t >= spec.num_types || p.t2 >= spec.num_types)
      throw ParseError(p.line, "invalid type pair");
    if (p.values.size() != k * k) throw ParseError(p.line, "B needs k*k entries");
    Matrix m(k, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k * k; ++i) {
      if (!(p.values[i] >= 0.0)) throw ParseError(p.line, "B entries must be nonnegative");
      sum += p.values[i];
    }
    if (sum <= 0.0) throw ParseError(p.line, "B has no mass");
    // Stored orientation is (lower type, higher type).
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        (p.t < p.t2 ? m(i, j) : m(j, i)) = p.values[i * k + j] / sum;
    spec.pair_b[spec.pair_index(p.t, p.t2)] = m;
  }
  spec.label_dist.assign(spec.num_types, {});
  for (auto& [t, d] : dists) {
    if (t >= spec.num_types) throw ParseError(last_line, "labels for unknown type");
    if (d.size() != k) throw ParseError(last_line, "label distribution needs k entries");
    spec.label_dist[t] = d;
  }
  return spec;
}

PlantedSpec load_planted_spec(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return read_planted_spec(in);
}

PlantedInstance generate_planted(const PlantedSpec& spec) {
  const std::size_t types = spec.num_types;
  const std::size_t k = spec.classes;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GraphBuilder builder(types);
  std::vector<std::vector<std::string>> ids(types);
  // members[t][l]: local indices of type-t vertices carrying label l.
  std::vector<std::vector<std::vector<std::uint32_t>>> members(
      types, std::vector<std::vector<std::uint32_t>>(k));
  PlantedInstance inst;
  inst.truth.classes = k;

  for (std::size_t t = 0; t < types; ++t) {
    std::vector<double> weights = spec.label_dist.size() > t && !spec.label_dist[t].empty()
                                      ? spec.label_dist[t]
                                      : std::vector<double>(k, 1.0);
    std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
    for (std::size_t i = 0; i < spec.sizes[t]; ++i) {
      ids[t].push_back("v" + std::to_string(i));
      builder.add_vertex(static_cast<TypeIndex>(t), ids[t].back());
      const std::size_t label = draw(rng);
      members[t][label].push_back(static_cast<std::uint32_t>(i));
      std::vector<double> row(k, 0.0);
      row[label] = 1.0;
      inst.truth.rows.emplace(VertexRef{static_cast<TypeIndex>(t), static_cast<std::uint32_t>(i)},
                              std::move(row));
    }
  }

  for (std::size_t t = 0; t < types; ++t)
    for (std::size_t t2 = t + 1; t2 < types; ++t2) {
      const Matrix& b = spec.pair_b[spec.pair_index(t, t2)];
      const double target = spec.edges_per_vertex / static_cast<double>(types - 1) *
                            static_cast<double>(spec.sizes[t] + spec.sizes[t2]) / 2.0;
      double mass = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          mass += static_cast<double>(members[t][i].size() * members[t2][j].size()) * b(i, j);
      if (mass <= 0.0) continue;
      const double scale = target / mass;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double p = scale * b(i, j);
          if (p > 1.0)
            throw Error("generate_planted: infeasible density for types " + std::to_string(t) +
                        "," + std::to_string(t2) + " (edge probability " +
                        text::format_decimal(p) + ")");
          const auto& left = members[t][i];
          const auto& right = members[t2][j];
          const std::size_t cells = left.size() * right.size();
          if (p <= 0.0 || cells == 0) continue;
          // Geometric skips over the block's cells, so cost follows edge count.
          const double log_q = std::log1p(-p);
          std::size_t cell = 0;
          while (true) {
            if (p < 1.0) {
              const double skip = std::floor(std::log(1.0 - unit(rng)) / log_q);
              if (skip >= static_cast<double>(cells - cell)) break;
              cell += static_cast<std::size_t>(skip);
            }
            if (cell >= cells) break;
            builder.add_edge(static_cast<TypeIndex>(t), ids[t][left[cell / right.size()]],
                             static_cast<TypeIndex>(t2), ids[t2][right[cell % right.size()]]);
            ++cell;
          }
        }
    }
  inst.graph = builder.build();
  return inst;
}

void write_planted(const PlantedInstance& inst, const std::string& prefix) {
  std::ostringstream vertices, edges, truth;
  write_graph(inst.graph, vertices, edges);
  write_labels(inst.truth, inst.graph, truth);
  text::write_file_atomic(prefix + ".vertices", vertices.str());
  text::write_file_atomic(prefix + ".edges", edges.str());
  text::write_file_atomic(prefix + ".truth", truth.str());
}

}  // namespace kprop
