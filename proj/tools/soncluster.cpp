// soncluster: sum-of-norms convex clustering from the command line.

#include "son/io.hpp"
#include "son/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"Sum-of-norms convex clustering"};
  app.set_config("--config", "", "key=value configuration file");
  app.allow_config_extras(false);
  // Every option is a scalar and specs such as mix:0.5 or list:a,b contain
  // commas, so config values must not be split into arrays.
  app.get_config_formatter_base()->arrayDelimiter('\x1f');

  son::RunConfig config;
  std::string mode = "path";
  std::string input, generate, labels, edges, method = "ama_accelerated";
  std::string step = "auto";
  long long max_clusters = 0;

  app.add_option("mode", mode, "fit | path | select | theory | stability")
      ->required()
      ->check(CLI::IsMember({"fit", "path", "select", "theory", "stability"}));
  auto *in = app.add_option("--input", input, "CSV data file");
  auto *gen = app.add_option("--generate", generate,
                             "generator, e.g. half_moons:n1=20,n2=20,sigma=0.02");
  in->excludes(gen);
  app.add_flag("--columns-are-observations", config.columns_are_observations,
               "CSV columns are observations");
  app.add_option("--labels", labels, "ground-truth labels for theory mode");
  app.add_option("--edges", edges, "edge list CSV (i,j,w) replacing --graph");
  app.add_option("--graph", config.graph,
                 "mst | knn:k | mst+knn:k | dmsts:M | full")
      ->capture_default_str();
  app.add_option("--weights", config.weights,
                 "uniform | inverse | gaussian[:m] | mix:alpha[:m]")
      ->capture_default_str();
  app.add_option("--gamma", config.gamma,
                 "value, list:a,b,..., grid:N or geom:N:lo:hi")
      ->capture_default_str();
  app.add_option("--path-mode", config.path_mode, "exact | carp")
      ->capture_default_str();
  app.add_flag("--strict", config.strict,
               "do not enforce monotone fusions along the path");
  app.add_option("--fusion-tolerance", config.fusion_tolerance,
                 "relative to the median pairwise distance")
      ->capture_default_str();
  app.add_option("--solver", method, "ama | ama_accelerated | admm")
      ->capture_default_str();
  app.add_option("--rho", config.solver.rho, "ADMM penalty or fixed AMA step")
      ->capture_default_str();
  app.add_option("--step", step, "auto | fixed (AMA step rule)")
      ->capture_default_str();
  app.add_option("--max-iterations", config.solver.max_iterations)
      ->capture_default_str();
  app.add_option("--gap-tolerance", config.solver.gap_tolerance)
      ->capture_default_str();
  app.add_option("--residual-tolerance", config.solver.residual_tolerance)
      ->capture_default_str();
  bool no_polish = false;
  app.add_flag("--no-polish", no_polish, "skip Newton refinement");
  app.add_option("--criterion", config.criterion, "ebic | holdout")
      ->capture_default_str();
  app.add_option("--zeta", config.zeta, "eBIC ζ")->capture_default_str();
  app.add_option("--max-clusters", max_clusters,
                 "eBIC considers only snapshots with at most this many clusters");
  app.add_option("--holdout-fraction", config.holdout_fraction)
      ->capture_default_str();
  app.add_option("--trials", config.trials,
                 "recovery samples or perturbations per γ")
      ->capture_default_str();
  app.add_option("--perturbation", config.perturbation,
                 "perturbation scale for stability mode")
      ->capture_default_str();
  std::string out = "out";
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--seed", config.seed, "64-bit seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    config.mode = son::parse_run_mode(mode);
    if (!input.empty())
      config.input_csv = input;
    if (!generate.empty())
      config.generator = generate;
    if (!labels.empty())
      config.labels_csv = labels;
    if (!edges.empty())
      config.edges_csv = edges;
    config.solver.method = son::parse_solver_method(method);
    if (step == "fixed")
      config.solver.step_rule = son::StepRule::fixed;
    else if (step != "auto")
      throw son::InvalidArgument("step rule must be auto or fixed");
    config.solver.polish = !no_polish;
    if (max_clusters > 0)
      config.max_clusters = static_cast<son::Index>(max_clusters);
    config.out = out;
  } catch (const son::Error &e) {
    son::Json j;
    j["error"] = "invalid_argument";
    j["message"] = e.what();
    std::cerr << son::dump_json(j, 0);
    return 2;
  }
  return son::run(config, std::cout, std::cerr);
}
