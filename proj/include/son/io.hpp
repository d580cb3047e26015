#pragma once

#include "son/core.hpp"
#include "son/path.hpp"
#include "son/selection.hpp"
#include "son/theory.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace son {

using Json = nlohmann::ordered_json;

/// Round-trip-exact rendering at 17 significant digits.
std::string format_double(double x);

/// JSON text with every floating-point number at 17 significant digits.
std::string dump_json(const Json &j, int indent = 2);

// ---------------------------------------------------------------------------
// Data CSV

struct CsvOptions {
  /// On disk rows are observations unless this is set.
  bool columns_are_observations = false;
};

/// Rectangular numeric CSV, optional header, empty cells are missing.
DataMatrix parse_csv(std::istream &in, const CsvOptions &options = {});
DataMatrix load_csv(const std::filesystem::path &path,
                    const CsvOptions &options = {});

void write_csv(std::ostream &out, const DataMatrix &data,
               const CsvOptions &options = {});
void save_csv(const std::filesystem::path &path, const DataMatrix &data,
              const CsvOptions &options = {});

// ---------------------------------------------------------------------------
// Graphs

/// Edge list with header `i,j,w` and 0-based indices.
void write_edges_csv(std::ostream &out, const WeightGraph &graph);
WeightGraph parse_edges_csv(std::istream &in, Index n);

// ---------------------------------------------------------------------------
// Paths, trees, reports

/// Long format `gamma,node,dim,value`.
void write_path_csv(std::ostream &out, const ClusterPath &path);
/// `gamma,node,cluster`.
void write_labels_csv(std::ostream &out, const ClusterPath &path);

/// Nested {node, height, children[]}; a forest becomes an array of trees.
Json dendrogram_json(const Dendrogram &tree);

Json to_json(const RecoveryInterval &interval);
Json to_json(const RecoveryReport &report);
Json to_json(const LipschitzReport &report);
Json to_json(const SelectionReport &report);

/// `gamma,score,K`.
void write_selection_csv(std::ostream &out, const SelectionReport &report);

/// Write `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace son
