#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kprop/bench.hpp"
#include "kprop/error.hpp"
#include "kprop/evaluation.hpp"
#include "kprop/graph.hpp"
#include "kprop/incremental.hpp"
#include "kprop/inference.hpp"
#include "kprop/model.hpp"
#include "kprop/planted.hpp"
#include "kprop/snapshot.hpp"
#include "kprop/text_io.hpp"

namespace kprop {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

KPartiteGraph load_prefix(const std::string& prefix) {
  return load_graph(prefix + ".vertices", prefix + ".edges");
}

void check_shape(const Snapshot& s, const KPartiteGraph& g) {
  if (s.labels.type_sizes() != g.type_sizes())
    throw Error("snapshot does not match graph (type sizes differ)");
}

UpdateRule parse_rule(const std::string& name) {
  return name == "add" ? UpdateRule::Additive : UpdateRule::Multiplicative;
}

std::string stop_name(StopReason r) {
  return r == StopReason::Converged ? "converged" : "max-iterations";
}

// --- infer ---------------------------------------------------------------------

struct InferOptions {
  std::string graph, labels, truth, aux, out, trace, seeds_out;
  std::optional<double> seed_fraction;
  std::optional<std::size_t> classes;
  std::string rule = "mult", b_mode = "full";
  InferenceConfig config;
};

int run_infer(InferOptions& o, std::ostream& out, std::ostream& err) {
  if (o.labels.empty() == (o.truth.empty() || !o.seed_fraction))
    throw UsageError("infer needs either --labels or --truth with --seed-fraction");
  o.config.rule = parse_rule(o.rule);
  o.config.b_mode = *parse_b_mode(o.b_mode);

  const KPartiteGraph g = load_prefix(o.graph);
  SeedSet seeds;
  if (!o.labels.empty()) {
    seeds = load_labels(o.labels, g, o.classes);
  } else {
    const LabelTable truth = load_labels(o.truth, g, o.classes);
    const SeedSelection sel = select_seeds(g, truth, *o.seed_fraction);
    if (sel.skipped > 0)
      err << "warning: " << sel.skipped << " top-degree vertices have no ground truth\n";
    seeds = sel.seeds;
  }
  if (seeds.size() == 0) throw Error("no seed labels");
  std::vector<AuxGraph> aux;
  if (!o.aux.empty()) aux = load_aux_graph(o.aux, g);

  const InferenceResult r = run_inference(g, seeds, o.config, aux);
  save_snapshot({r.labels, r.propagation, o.config.b_mode}, o.out);
  std::ostringstream trace;
  write_trace(r.trace, trace);
  text::write_file_atomic(o.trace.empty() ? o.out + ".trace" : o.trace, trace.str());
  if (!o.seeds_out.empty()) {
    std::ostringstream s;
    write_labels(seeds, g, s);
    text::write_file_atomic(o.seeds_out, s.str());
  }
  out << "SEEDS " << seeds.size() << '\n'
      << "ITERATIONS " << r.trace.iterations << '\n'
      << "OBJECTIVE " << text::format_decimal(r.trace.objective.back()) << '\n'
      << "STOP " << stop_name(r.trace.reason) << '\n';
  return 0;
}

// --- update / decide ---------------------------------------------------------------

struct UpdateOptions {
  std::string snapshot, graph, delta, labels, out, out_graph;
  std::string rule = "mult";
  IncrementalConfig config;
  UtilityConfig utility;
  std::size_t workers = 1;
};

struct UpdateOutcome {
  DeltaResult delta;
  IncrementalResult result;
  UtilityReport report;
  BMode b_mode;
};

UpdateOutcome perform_update(UpdateOptions& o) {
  o.config.rule = parse_rule(o.rule);
  const KPartiteGraph g = load_prefix(o.graph);
  const Snapshot snap = load_snapshot(o.snapshot);
  check_shape(snap, g);
  SeedSet seeds;
  seeds.classes = snap.labels.classes();
  if (!o.labels.empty()) seeds = load_labels(o.labels, g, snap.labels.classes());

  UpdateOutcome u{apply_delta(g, load_delta(o.delta)), {}, {}, snap.b_mode};
  const SeedSet next_seeds = remap_seeds(seeds, g, u.delta);
  o.config.b_mode = snap.b_mode;
  LabelMatrix start = carry_over_labels(snap.labels, u.delta, next_seeds, o.workers);
  u.result = run_incremental(u.delta.graph, std::move(start), snap.propagation, next_seeds,
                             u.delta.changed, o.config);
  u.report = assess_update(g, u.delta, next_seeds, u.result.candidates, o.config.theta,
                           o.utility);
  return u;
}

int run_update(UpdateOptions& o, std::ostream& out) {
  const UpdateOutcome u = perform_update(o);
  save_snapshot({u.result.labels, u.result.propagation, u.b_mode}, o.out);
  if (!o.out_graph.empty()) {
    std::ostringstream v, e;
    write_graph(u.delta.graph, v, e);
    text::write_file_atomic(o.out_graph + ".vertices", v.str());
    text::write_file_atomic(o.out_graph + ".edges", e.str());
  }
  out << "CHANGED " << u.delta.changed.size() << '\n'
      << "TOUCHED " << u.result.touched() << '\n'
      << "ROUNDS " << u.result.rounds << '\n';
  write_report(u.report, out);
  return 0;
}

int run_decide(UpdateOptions& o, std::ostream& out) {
  write_report(perform_update(o).report, out);
  return 0;
}

// --- eval / gen / bench --------------------------------------------------------------

struct EvalOptions {
  std::string snapshot, truth, graph, labels;
  bool include_seeds = false;
};

int run_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  const KPartiteGraph g = load_prefix(o.graph);
  const Snapshot snap = load_snapshot(o.snapshot);
  check_shape(snap, g);
  const std::size_t k = snap.labels.classes();
  const LabelTable truth = load_labels(o.truth, g, k);
  std::optional<SeedSet> seeds;
  if (!o.labels.empty()) seeds = load_labels(o.labels, g, k);
  const Evaluation e =
      evaluate(g, snap.labels, truth, seeds ? &*seeds : nullptr, o.include_seeds);
  if (e.ber.empty_rows > 0)
    err << "warning: " << e.ber.empty_rows << " classes have no ground-truth vertices\n";
  write_evaluation(e, out);
  return 0;
}

int run_gen(const std::string& spec, const std::string& prefix, std::ostream& out) {
  const PlantedInstance inst = generate_planted(load_planted_spec(spec));
  write_planted(inst, prefix);
  out << "VERTICES " << inst.graph.num_vertices() << '\n'
      << "EDGES " << inst.graph.num_edges() << '\n';
  return 0;
}

int run_bench(ScalingConfig& c, const std::string& rule, std::ostream& out) {
  c.rule = parse_rule(rule);
  if (c.edge_counts.empty()) throw UsageError("bench needs at least one edge count");
  const auto points = run_scaling(c);
  out << "edges\tms_per_iter\tratio\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << points[i].edges << '\t' << text::format_decimal(points[i].ms_per_iteration) << '\t';
    if (i == 0)
      out << "-";
    else
      out << text::format_decimal(points[i].ms_per_iteration / points[i - 1].ms_per_iteration);
    out << '\n';
  }
  return 0;
}

void add_update_options(CLI::App* sub, UpdateOptions& o) {
  sub->add_option("--snapshot", o.snapshot, "Snapshot of the fitted model")->required();
  sub->add_option("--graph", o.graph, "Prefix of the graph the snapshot was fitted on")
      ->required();
  sub->add_option("--delta", o.delta, "Delta file")->required();
  sub->add_option("--labels", o.labels, "Seed labels on the old graph");
  sub->add_option("--theta", o.config.theta, "Confidence level in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999999));
  sub->add_option("--rule", o.rule)->check(CLI::IsMember({"mult", "add"}));
  sub->add_option("--beta", o.config.beta)->check(CLI::NonNegativeNumber);
  sub->add_option("--tol", o.config.tol)->check(CLI::NonNegativeNumber);
  sub->add_option("--max-rounds", o.config.max_rounds)->check(CLI::PositiveNumber);
  sub->add_flag("--refresh-b", o.config.refresh_b, "One B update before the candidate rounds");
  sub->add_option("--us", o.utility.u_s)->check(CLI::NonNegativeNumber);
  sub->add_option("--ua", o.utility.u_a)->check(CLI::NonNegativeNumber);
  sub->add_option("--threshold", o.utility.threshold);
  sub->add_option("--threads", o.workers)->check(CLI::PositiveNumber);
}

}  // namespace

int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label inference on K-partite graphs", "kprop"};
  app.require_subcommand(1);

  InferOptions infer;
  auto* infer_cmd = app.add_subcommand("infer", "Fit labels and propagation matrices");
  infer_cmd->add_option("--graph", infer.graph, "Graph prefix (.vertices/.edges)")->required();
  infer_cmd->add_option("--labels", infer.labels, "Seed label file");
  infer_cmd->add_option("--truth", infer.truth, "Ground truth to draw seeds from");
  infer_cmd->add_option("--seed-fraction", infer.seed_fraction, "Share of vertices used as seeds")
      ->check(CLI::Range(0.0, 1.0));
  infer_cmd->add_option("--classes", infer.classes, "Number of labels k")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  infer_cmd->add_option("--rule", infer.rule)->check(CLI::IsMember({"mult", "add"}));
  infer_cmd->add_option("--b-mode", infer.b_mode)
      ->check(CLI::IsMember({"full", "diag", "identity", "single"}));
  infer_cmd->add_option("--beta", infer.config.beta)->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--lambda", infer.config.lambda)->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--tol", infer.config.tol)->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--max-iter", infer.config.max_iter)->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--aux-graph", infer.aux, "Same-type edges for the Laplacian term");
  infer_cmd->add_flag("--nesterov", infer.config.nesterov, "Momentum for the additive rule");
  infer_cmd->add_option("--threads", infer.config.workers)->check(CLI::PositiveNumber);
  infer_cmd->add_option("--out", infer.out, "Snapshot output path")->required();
  infer_cmd->add_option("--trace", infer.trace, "Trace output (default: <out>.trace)");
  infer_cmd->add_option("--seeds-out", infer.seeds_out, "Write the seed set used");

  UpdateOptions update;
  auto* update_cmd = app.add_subcommand("update", "Incremental update after a delta");
  add_update_options(update_cmd, update);
  update_cmd->add_option("--out", update.out, "Updated snapshot path")->required();
  update_cmd->add_option("--out-graph", update.out_graph, "Write the updated graph here");

  UpdateOptions decide;
  auto* decide_cmd = app.add_subcommand("decide", "Incremental-vs-recompute utility report");
  add_update_options(decide_cmd, decide);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and balanced error rate");
  eval_cmd->add_option("--snapshot", eval.snapshot)->required();
  eval_cmd->add_option("--truth", eval.truth)->required();
  eval_cmd->add_option("--graph", eval.graph, "Graph prefix the snapshot belongs to")->required();
  eval_cmd->add_option("--labels", eval.labels, "Seed labels, excluded from scoring");
  eval_cmd->add_flag("--include-seeds", eval.include_seeds);

  std::string spec, prefix;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a planted instance");
  gen_cmd->add_option("--spec", spec)->required();
  gen_cmd->add_option("--out-prefix", prefix)->required();

  ScalingConfig bench;
  std::string bench_rule = "mult";
  auto* bench_cmd = app.add_subcommand("bench", "Per-iteration time against edge count");
  bench_cmd->add_option("--vertices-per-type", bench.vertices_per_type)
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--edges", bench.edge_counts)->delimiter(',');
  bench_cmd->add_option("--iterations", bench.iterations)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--rule", bench_rule)->check(CLI::IsMember({"mult", "add"}));
  bench_cmd->add_option("--threads", bench.workers)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (*infer_cmd) return run_infer(infer, out, err);
    if (*update_cmd) return run_update(update, out);
    if (*decide_cmd) return run_decide(decide, out);
    if (*eval_cmd) return run_eval(eval, out, err);
    if (*gen_cmd) return run_gen(spec, prefix, out);
    if (*bench_cmd) return run_bench(bench, bench_rule, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace kprop
