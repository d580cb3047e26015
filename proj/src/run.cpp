#include "son/run.hpp"

#include "son/generators.hpp"
#include "son/io.hpp"
#include "son/problem.hpp"
#include "son/random.hpp"
#include "son/selection.hpp"
#include "son/theory.hpp"

#include <Eigen/Core>

#include <fstream>
#include <ostream>
#include <sstream>

namespace son {

std::string to_string(RunMode m) {
  switch (m) {
  case RunMode::fit: return "fit";
  case RunMode::path: return "path";
  case RunMode::select: return "select";
  case RunMode::theory: return "theory";
  case RunMode::stability: return "stability";
  }
  return "path";
}

RunMode parse_run_mode(const std::string &text) {
  for (RunMode m : {RunMode::fit, RunMode::path, RunMode::select,
                    RunMode::theory, RunMode::stability})
    if (text == to_string(m))
      return m;
  throw InvalidArgument("unknown mode '" + text + "'");
}

void RunConfig::validate() const {
  if (input_csv.has_value() == generator.has_value())
    throw InvalidArgument("give exactly one of --input and --generate");
  if (path_mode != "exact" && path_mode != "carp")
    throw InvalidArgument("path mode must be exact or carp");
  if (!(fusion_tolerance >= 0.0))
    throw InvalidArgument("fusion tolerance must be nonnegative");
  if (criterion != "ebic" && criterion != "holdout")
    throw InvalidArgument("criterion must be ebic or holdout");
  if (!(zeta >= 0.0) || zeta > 1.0)
    throw InvalidArgument("ζ must lie in [0, 1]");
  if (max_clusters && *max_clusters < 1)
    throw InvalidArgument("max clusters must be >= 1");
  if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0))
    throw InvalidArgument("hold-out fraction must lie in (0, 1)");
  if (trials < 1)
    throw InvalidArgument("trials must be >= 1");
  if (!(perturbation >= 0.0))
    throw InvalidArgument("perturbation scale must be nonnegative");
  solver.validate();
  parse_graph_method(graph);
  parse_weight_kind(weights);
  parse_grid_spec(gamma);
}

namespace {

struct Workspace {
  DataMatrix original;
  std::vector<Index> truth;        // empty when unknown
  std::optional<GeneratorSpec> generator;
  DuplicateMerge merge;
  WeightGraph graph;               // over merged nodes
  bool connected = true;
  std::vector<std::string> warnings;
  Json artifacts = Json::array();
};

std::vector<Index> read_labels(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidArgument("cannot open '" + path.string() + "'");
  std::vector<Index> labels;
  std::string token;
  long line = 1;
  char c;
  auto flush = [&] {
    if (token.empty())
      return;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(token, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != token.size())
      throw ParseError("bad label '" + token + "'", line);
    labels.push_back(static_cast<Index>(v));
    token.clear();
  };
  while (in.get(c)) {
    if (c == ',' || c == '\n' || c == ' ' || c == '\r' || c == '\t') {
      flush();
      if (c == '\n')
        ++line;
    } else {
      token += c;
    }
  }
  flush();
  return labels;
}

Workspace prepare(const RunConfig &config) {
  Workspace ws;
  if (config.generator) {
    ws.generator = parse_generator_spec(*config.generator, config.seed);
    Generated g = generate(*ws.generator);
    ws.original = std::move(g.data);
    ws.truth = std::move(g.labels);
  } else {
    ws.original = load_csv(*config.input_csv,
                           {config.columns_are_observations});
    if (config.labels_csv) {
      ws.truth = read_labels(*config.labels_csv);
      if (static_cast<Index>(ws.truth.size()) != ws.original.n())
        throw StructuralError("label file has " +
                              std::to_string(ws.truth.size()) +
                              " entries for " +
                              std::to_string(ws.original.n()) + " points");
    }
  }
  ws.merge = merge_duplicates(ws.original);
  if (ws.merge.any_merged)
    ws.warnings.push_back(std::to_string(ws.original.n() - ws.merge.reduced.n()) +
                          " duplicate observations merged");

  if (config.edges_csv) {
    if (ws.merge.any_merged)
      throw PreconditionError("custom edge lists need duplicate-free data");
    std::ifstream in(*config.edges_csv);
    if (!in)
      throw InvalidArgument("cannot open '" + config.edges_csv->string() + "'");
    ws.graph = parse_edges_csv(in, ws.original.n());
    ws.connected = is_connected(ws.graph);
  } else if (ws.merge.reduced.has_mask()) {
    // Distances are undefined with missing entries; use a complete graph
    // with the requested weights on row-mean-imputed data.
    Matrix filled = ws.merge.reduced.values();
    const Mask &mask = *ws.merge.reduced.mask();
    for (Index d = 0; d < filled.rows(); ++d) {
      double sum = 0.0;
      Index count = 0;
      for (Index i = 0; i < filled.cols(); ++i)
        if (mask(d, i)) {
          sum += filled(d, i);
          ++count;
        }
      for (Index i = 0; i < filled.cols(); ++i)
        if (!mask(d, i))
          filled(d, i) = count ? sum / static_cast<double>(count) : 0.0;
    }
    GraphSpec spec{parse_graph_method(config.graph),
                   parse_weight_kind(config.weights)};
    BuiltGraph built = build_graph(DataMatrix(std::move(filled)), spec);
    ws.graph = std::move(built.graph);
    ws.connected = built.connected;
    ws.warnings.insert(ws.warnings.end(), built.warnings.begin(),
                       built.warnings.end());
    ws.warnings.push_back("graph built on row-mean-imputed data");
  } else {
    GraphSpec spec{parse_graph_method(config.graph),
                   parse_weight_kind(config.weights)};
    BuiltGraph built = build_graph(ws.merge.reduced, spec);
    ws.graph = std::move(built.graph);
    ws.connected = built.connected;
    ws.warnings.insert(ws.warnings.end(), built.warnings.begin(),
                       built.warnings.end());
  }
  if (!ws.connected)
    ws.warnings.push_back("weight graph is disconnected; the path ends with "
                          "one cluster per component");
  return ws;
}

/// Path over merged nodes broadcast back to the original observations.
ClusterPath expand(const ClusterPath &path, const DuplicateMerge &merge) {
  if (!merge.any_merged)
    return path;
  ClusterPath out = path;
  for (auto &s : out.snapshots) {
    s.U = expand_merged(merge, s.U);
    std::vector<Index> labels(merge.node_of.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = s.partition.label(merge.node_of[i]);
    s.partition = Partition::from_labels(labels);
  }
  return out;
}

void emit(Workspace &ws, const RunConfig &config, const std::string &name,
          const std::string &text) {
  write_text(config.out / name, text);
  ws.artifacts.push_back(name);
}

template <class F> std::string render(F &&f) {
  std::ostringstream ss;
  f(ss);
  return ss.str();
}

PathOptions path_options(const RunConfig &config) {
  PathOptions o;
  o.mode = config.path_mode == "carp" ? PathMode::carp : PathMode::exact;
  o.solver = config.solver;
  o.fusion_tolerance = config.fusion_tolerance;
  o.enforce_monotone = !config.strict;
  return o;
}

ClusteringProblem base_problem(const Workspace &ws) {
  return ClusteringProblem(ws.merge.reduced, ws.graph, 0.0,
                           ws.merge.multiplicities);
}

Json path_summary(const ClusterPath &path) {
  Json j;
  j["truncated"] = path.truncated;
  if (path.truncated)
    j["error"] = path.error;
  Json rows = Json::array();
  for (const auto &s : path.snapshots)
    rows.push_back({{"gamma", s.gamma},
                    {"K", s.partition.K()},
                    {"objective", s.objective},
                    {"iterations", s.iterations},
                    {"converged", s.converged},
                    {"duality_gap", s.duality_gap}});
  j["snapshots"] = rows;
  return j;
}

void write_path_artifacts(Workspace &ws, const RunConfig &config,
                          const ClusterPath &path) {
  emit(ws, config, "path.csv",
       render([&](std::ostream &o) { write_path_csv(o, path); }));
  emit(ws, config, "labels.csv",
       render([&](std::ostream &o) { write_labels_csv(o, path); }));
}

void run_fit(Workspace &ws, const RunConfig &config, Json &summary) {
  const ClusteringProblem base = base_problem(ws);
  GridSpec grid = parse_grid_spec(config.gamma);
  grid.gammas = resolve_grid(base, grid, config.solver, config.fusion_tolerance);
  ClusterPath fits;
  fits.gammas = grid.gammas;
  for (double g : grid.gammas) {
    const auto state = solve(base.with_gamma(g), config.solver);
    PathSnapshot s;
    s.gamma = g;
    s.partition = detect_fusions(state, ws.graph, ws.merge.reduced.values(),
                                 config.fusion_tolerance);
    s.centroids = block_centroids(state.U, s.partition);
    s.U = state.U;
    s.objective = state.primal_objective;
    s.iterations = state.iterations;
    s.converged = state.converged;
    s.duality_gap = state.duality_gap;
    fits.snapshots.push_back(std::move(s));
  }
  const ClusterPath expanded = expand(fits, ws.merge);
  write_path_artifacts(ws, config, expanded);
  summary["fits"] = path_summary(expanded);
}

ClusterPath run_path_core(Workspace &ws, const RunConfig &config,
                          Json &summary) {
  const ClusterPath path = expand(
      compute_path(base_problem(ws), parse_grid_spec(config.gamma),
                   path_options(config)),
      ws.merge);
  write_path_artifacts(ws, config, path);
  summary["path"] = path_summary(path);
  return path;
}

void run_path(Workspace &ws, const RunConfig &config, Json &summary) {
  const ClusterPath path = run_path_core(ws, config, summary);
  try {
    const Dendrogram tree = extract_dendrogram(path);
    emit(ws, config, "dendrogram.json", dump_json(dendrogram_json(tree)));
    emit(ws, config, "dendrogram.nwk", to_newick(tree));
  } catch (const NonMonotoneFusion &e) {
    summary["dendrogram_error"] = e.what();
    summary["dendrogram_gamma_before"] = e.gamma_before();
    summary["dendrogram_gamma_after"] = e.gamma_after();
  }
}

void run_select(Workspace &ws, const RunConfig &config, Json &summary) {
  SelectionReport report;
  if (config.criterion == "ebic") {
    const ClusterPath path = run_path_core(ws, config, summary);
    EbicOptions options;
    options.zeta = config.zeta;
    options.max_clusters = config.max_clusters;
    report = ebic_select(path, ws.original, options);
  } else {
    const ClusteringProblem base = base_problem(ws);
    if (ws.merge.any_merged)
      throw PreconditionError("hold-out selection needs duplicate-free data");
    GridSpec grid = parse_grid_spec(config.gamma);
    grid.gammas =
        resolve_grid(base, grid, config.solver, config.fusion_tolerance);
    const HoldoutPlan plan =
        make_holdout_plan(ws.original, config.holdout_fraction, config.seed);
    report = holdout_select(ws.original, ws.graph, grid.gammas, plan,
                            config.solver, config.fusion_tolerance);
    summary["holdout_entries"] = plan.entries.size();
  }
  emit(ws, config, "selection.csv",
       render([&](std::ostream &o) { write_selection_csv(o, report); }));
  emit(ws, config, "selection.json", dump_json(to_json(report)));
  summary["chosen_gamma"] = report.chosen_gamma();
  summary["chosen_K"] = report.chosen_K();
}

void run_theory(Workspace &ws, const RunConfig &config, Json &summary) {
  if (ws.truth.empty())
    throw PreconditionError("theory mode needs ground-truth labels "
                            "(a generator or --labels)");
  if (ws.merge.any_merged)
    throw PreconditionError("theory mode needs duplicate-free data");
  const Partition truth = Partition::from_labels(ws.truth);
  const PartitionGeometry geometry = partition_geometry(ws.original, truth);
  Json reports = Json::array();

  auto check = [&](const RecoveryInterval &interval) {
    if (!interval.feasible) {
      Json j = to_json(interval);
      j["verified"] = false;
      reports.push_back(j);
      return;
    }
    const RecoveryReport r =
        verify_recovery(ws.original, truth, ws.graph, interval, config.trials,
                        config.solver, config.fusion_tolerance);
    Json j = to_json(r);
    j["verified"] = true;
    reports.push_back(j);
  };

  // The uniform-weight interval is verified on the complete uniform graph
  // it assumes; the weighted interval on the configured graph.
  {
    const RecoveryInterval panahi =
        panahi_interval(geometry, ws.original.n());
    const WeightGraph uniform =
        build_full(ws.original).graph.with_weights(
            Vector::Ones(ws.original.n() * (ws.original.n() - 1) / 2));
    if (panahi.feasible) {
      const RecoveryReport r =
          verify_recovery(ws.original, truth, uniform, panahi, config.trials,
                          config.solver, config.fusion_tolerance);
      Json j = to_json(r);
      j["verified"] = true;
      j["graph"] = "full/uniform";
      reports.push_back(j);
    } else {
      Json j = to_json(panahi);
      j["verified"] = false;
      j["graph"] = "full/uniform";
      reports.push_back(j);
    }
  }
  try {
    check(sun_interval(ws.original, ws.graph, truth));
    reports.back()["graph"] = config.graph + "/" + config.weights;
  } catch (const PreconditionError &e) {
    reports.push_back({{"family", "sun_weighted"}, {"error", e.what()}});
  }
  if (ws.generator && ws.generator->kind == GeneratorKind::two_cubes &&
      truth.K() == 2) {
    const Index p = ws.original.p();
    const RecoveryInterval zhu = zhu_two_cubes(
        Vector::Constant(p, ws.generator->get("half1", 0.5)),
        Vector::Constant(p, ws.generator->get("half2", 0.5)),
        truth.sizes()[0], truth.sizes()[1], geometry.set_distances(0, 1));
    Json j = to_json(zhu);
    j["verified"] = false;
    reports.push_back(j);
  }
  emit(ws, config, "theory.json", dump_json(reports));
  summary["intervals"] = reports.size();
}

void run_stability(Workspace &ws, const RunConfig &config, Json &summary) {
  if (ws.merge.any_merged)
    throw PreconditionError("stability mode needs duplicate-free data");
  GridSpec grid = parse_grid_spec(config.gamma);
  if (grid.gammas.empty()) {
    grid.count = std::min(grid.count, 5);
    grid.gammas = resolve_grid(base_problem(ws), grid, config.solver,
                               config.fusion_tolerance);
  }
  Json reports = Json::array();
  bool all = true;
  for (std::size_t k = 0; k < grid.gammas.size(); ++k) {
    const LipschitzReport r = lipschitz_harness(
        ws.original, ws.graph, grid.gammas[k], config.trials,
        config.perturbation, RandomStreams::mix(config.seed + k),
        config.solver);
    Json j = to_json(r);
    j["gamma"] = grid.gammas[k];
    reports.push_back(j);
    all = all && r.within_bound;
  }
  emit(ws, config, "stability.json", dump_json(reports));
  summary["within_bound"] = all;
}

Json manifest(const RunConfig &config, const Workspace &ws) {
  Json j;
  j["tool"] = "soncluster";
  j["version"] = "1.0.0";
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
               std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["mode"] = to_string(config.mode);
  if (config.input_csv)
    j["input"] = config.input_csv->string();
  if (ws.generator)
    j["generate"] = to_string(*ws.generator);
  j["columns_are_observations"] = config.columns_are_observations;
  j["seed"] = config.seed;
  j["graph"] = config.graph;
  j["weights"] = config.weights;
  if (config.edges_csv)
    j["edges"] = config.edges_csv->string();
  j["gamma"] = config.gamma;
  j["path_mode"] = config.path_mode;
  j["strict"] = config.strict;
  j["fusion_tolerance"] = config.fusion_tolerance;
  j["solver"] = {{"method", to_string(config.solver.method)},
                 {"rho", config.solver.rho},
                 {"max_iterations", config.solver.max_iterations},
                 {"gap_tolerance", config.solver.gap_tolerance},
                 {"residual_tolerance", config.solver.residual_tolerance},
                 {"polish", config.solver.polish}};
  j["criterion"] = config.criterion;
  j["zeta"] = config.zeta;
  if (config.max_clusters)
    j["max_clusters"] = *config.max_clusters;
  j["holdout_fraction"] = config.holdout_fraction;
  j["trials"] = config.trials;
  j["perturbation"] = config.perturbation;
  j["n"] = ws.original.n();
  j["p"] = ws.original.p();
  j["edges_count"] = ws.graph.edge_count();
  j["connected"] = ws.connected;
  j["warnings"] = ws.warnings;
  j["artifacts"] = ws.artifacts;
  return j;
}

std::string error_kind(const std::exception &e) {
  if (dynamic_cast<const ParseError *>(&e)) return "parse_error";
  if (dynamic_cast<const StructuralError *>(&e)) return "structural_error";
  if (dynamic_cast<const InvalidArgument *>(&e)) return "invalid_argument";
  if (dynamic_cast<const PreconditionError *>(&e)) return "precondition_error";
  if (dynamic_cast<const NumericalFailure *>(&e)) return "numerical_failure";
  if (dynamic_cast<const Error *>(&e)) return "error";
  return "internal_error";
}

} // namespace

int run(const RunConfig &config, std::ostream &log, std::ostream &err) {
  try {
    config.validate();
    Workspace ws = prepare(config);
    for (const auto &w : ws.warnings)
      log << "warning: " << w << '\n';
    emit(ws, config, "data.csv",
         render([&](std::ostream &o) { write_csv(o, ws.original); }));
    emit(ws, config, "graph.csv",
         render([&](std::ostream &o) { write_edges_csv(o, ws.graph); }));
    if (!ws.truth.empty()) {
      std::string text = "node,label\n";
      for (std::size_t i = 0; i < ws.truth.size(); ++i)
        text += std::to_string(i) + "," + std::to_string(ws.truth[i]) + "\n";
      emit(ws, config, "truth.csv", text);
    }
    Json summary;
    switch (config.mode) {
    case RunMode::fit: run_fit(ws, config, summary); break;
    case RunMode::path: run_path(ws, config, summary); break;
    case RunMode::select: run_select(ws, config, summary); break;
    case RunMode::theory: run_theory(ws, config, summary); break;
    case RunMode::stability: run_stability(ws, config, summary); break;
    }
    emit(ws, config, "summary.json", dump_json(summary));
    ws.artifacts.push_back("manifest.json");
    write_text(config.out / "manifest.json", dump_json(manifest(config, ws)));
    log << "wrote " << ws.artifacts.size() << " artifacts to "
        << config.out.string() << '\n';
    return 0;
  } catch (const std::exception &e) {
    Json j;
    j["error"] = error_kind(e);
    j["message"] = e.what();
    err << dump_json(j, 0);
    return 2;
  }
}

} // namespace son
