#pragma once

#include "son/graph.hpp"
#include "son/path.hpp"
#include "son/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace son {

enum class RunMode { fit, path, select, theory, stability };
std::string to_string(RunMode m);
RunMode parse_run_mode(const std::string &text);

struct RunConfig {
  RunMode mode = RunMode::path;
  /// Exactly one of input_csv and generator is set.
  std::optional<std::filesystem::path> input_csv;
  std::optional<std::string> generator;
  bool columns_are_observations = false;
  /// Optional ground truth for theory mode with CSV input: one label per
  /// line or comma-separated.
  std::optional<std::filesystem::path> labels_csv;
  /// Custom edge list (`i,j,w`) replacing graph construction.
  std::optional<std::filesystem::path> edges_csv;

  std::string graph = "mst+knn:3";
  std::string weights = "gaussian";
  std::string gamma = "grid:50";
  std::string path_mode = "exact";
  bool strict = false;
  double fusion_tolerance = 1e-6;

  SolverConfig solver;

  std::string criterion = "ebic";
  double zeta = 0.5;
  std::optional<Index> max_clusters;
  double holdout_fraction = 0.1;

  int trials = 5;
  double perturbation = 0.1;

  std::filesystem::path out = "out";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Executes the configured mode and writes artifacts plus manifest.json into
/// config.out. Returns 0 on success; module errors are reported on `err`
/// as a one-line JSON object and yield a nonzero status.
int run(const RunConfig &config, std::ostream &log, std::ostream &err);

} // namespace son
