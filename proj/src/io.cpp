#include "son/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace son {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

void escape(std::string &out, const std::string &s) {
  out += '"';
  for (char c : s) {
    switch (c) {
    case '"': out += "\\\""; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\t': out += "\\t"; break;
    case '\r': out += "\\r"; break;
    default:
      if (static_cast<unsigned char>(c) < 0x20) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\u%04x", c);
        out += buf;
      } else {
        out += c;
      }
    }
  }
  out += '"';
}

void dump(std::string &out, const Json &j, int indent, int depth) {
  const std::string pad =
      indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ')
                 : "";
  const std::string close =
      indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ')
                 : "";
  switch (j.type()) {
  case Json::value_t::object: {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first)
        out += ',';
      first = false;
      out += pad;
      escape(out, it.key());
      out += indent > 0 ? ": " : ":";
      dump(out, it.value(), indent, depth + 1);
    }
    out += close;
    out += '}';
    return;
  }
  case Json::value_t::array: {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += '[';
    bool first = true;
    for (const auto &v : j) {
      if (!first)
        out += ',';
      first = false;
      out += pad;
      dump(out, v, indent, depth + 1);
    }
    out += close;
    out += ']';
    return;
  }
  case Json::value_t::number_float: {
    const double x = j.get<double>();
    out += std::isfinite(x) ? format_double(x) : "null";
    return;
  }
  case Json::value_t::string:
    escape(out, j.get<std::string>());
    return;
  default:
    out += j.dump();
  }
}

std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string &s, double &value) {
  if (s.empty())
    return false;
  const char *begin = s.c_str();
  char *end = nullptr;
  value = std::strtod(begin, &end);
  return end == begin + s.size();
}

} // namespace

std::string dump_json(const Json &j, int indent) {
  std::string out;
  dump(out, j, indent, 0);
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------

DataMatrix parse_csv(std::istream &in, const CsvOptions &options) {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> present;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  bool any_missing = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split_line(line);
    std::vector<double> values(cells.size());
    std::vector<bool> seen(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (cell.empty()) {
        values[c] = std::numeric_limits<double>::quiet_NaN();
        seen[c] = false;
        continue;
      }
      if (!parse_number(cell, values[c])) {
        numeric = false;
        break;
      }
      if (!std::isfinite(values[c]))
        throw ParseError("non-finite value '" + cell + "'", line_no);
      seen[c] = true;
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        // Header row.
        width = cells.size();
        continue;
      }
      throw ParseError("non-numeric cell", line_no);
    }
    if (width == 0)
      width = cells.size();
    if (cells.size() != width)
      throw ParseError("expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    for (bool s : seen)
      any_missing = any_missing || !s;
    rows.push_back(std::move(values));
    present.push_back(std::move(seen));
  }
  if (rows.empty())
    throw ParseError("no data rows", line_no);

  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(width);
  Matrix M(r, c);
  Mask mask(r, c);
  for (Index a = 0; a < r; ++a)
    for (Index b = 0; b < c; ++b) {
      M(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      mask(a, b) = present[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
  if (!options.columns_are_observations) {
    M.transposeInPlace();
    mask.transposeInPlace();
  }
  if (any_missing)
    return DataMatrix(std::move(M), std::move(mask));
  return DataMatrix(std::move(M));
}

DataMatrix load_csv(const std::filesystem::path &path,
                    const CsvOptions &options) {
  std::ifstream in(path);
  if (!in)
    throw InvalidArgument("cannot open '" + path.string() + "'");
  return parse_csv(in, options);
}

void write_csv(std::ostream &out, const DataMatrix &data,
               const CsvOptions &options) {
  const bool rows_are_obs = !options.columns_are_observations;
  const Index R = rows_are_obs ? data.n() : data.p();
  const Index C = rows_are_obs ? data.p() : data.n();
  for (Index a = 0; a < R; ++a) {
    for (Index b = 0; b < C; ++b) {
      const Index d = rows_are_obs ? b : a, i = rows_are_obs ? a : b;
      if (b > 0)
        out << ',';
      if (data.observed(d, i))
        out << format_double(data.values()(d, i));
    }
    out << '\n';
  }
}

void save_csv(const std::filesystem::path &path, const DataMatrix &data,
              const CsvOptions &options) {
  std::ostringstream ss;
  write_csv(ss, data, options);
  write_text(path, ss.str());
}

// ---------------------------------------------------------------------------

void write_edges_csv(std::ostream &out, const WeightGraph &graph) {
  out << "i,j,w\n";
  for (const auto &e : graph.edges())
    out << e.i << ',' << e.j << ',' << format_double(e.w) << '\n';
}

WeightGraph parse_edges_csv(std::istream &in, Index n) {
  std::string line;
  long line_no = 0;
  std::vector<Edge> edges;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split_line(line);
    if (!header) {
      header = true;
      if (cells.size() == 3 && trim(cells[0]) == "i")
        continue;
    }
    if (cells.size() != 3)
      throw ParseError("expected i,j,w", line_no);
    double i = 0, j = 0, w = 0;
    if (!parse_number(trim(cells[0]), i) || !parse_number(trim(cells[1]), j) ||
        !parse_number(trim(cells[2]), w))
      throw ParseError("non-numeric cell", line_no);
    if (i != std::floor(i) || j != std::floor(j))
      throw ParseError("node indices must be integers", line_no);
    edges.push_back({static_cast<Index>(i), static_cast<Index>(j), w});
  }
  return WeightGraph(n, std::move(edges), GraphProvenance::custom);
}

// ---------------------------------------------------------------------------

void write_path_csv(std::ostream &out, const ClusterPath &path) {
  out << "gamma,node,dim,value\n";
  for (const auto &s : path.snapshots) {
    const std::string g = format_double(s.gamma);
    for (Index i = 0; i < s.U.cols(); ++i)
      for (Index d = 0; d < s.U.rows(); ++d)
        out << g << ',' << i << ',' << d << ',' << format_double(s.U(d, i))
            << '\n';
  }
}

void write_labels_csv(std::ostream &out, const ClusterPath &path) {
  out << "gamma,node,cluster\n";
  for (const auto &s : path.snapshots) {
    const std::string g = format_double(s.gamma);
    for (Index i = 0; i < s.partition.n(); ++i)
      out << g << ',' << i << ',' << s.partition.label(i) << '\n';
  }
}

namespace {
Json tree_json(const Dendrogram &tree, Index id) {
  const auto &node = tree.nodes[static_cast<std::size_t>(id)];
  Json j;
  j["node"] = id;
  j["height"] = node.height;
  j["children"] = Json::array();
  if (node.left >= 0) {
    j["children"].push_back(tree_json(tree, node.left));
    j["children"].push_back(tree_json(tree, node.right));
  }
  return j;
}
} // namespace

Json dendrogram_json(const Dendrogram &tree) {
  const auto roots = tree.roots();
  if (roots.size() == 1)
    return tree_json(tree, roots[0]);
  Json forest = Json::array();
  for (Index r : roots)
    forest.push_back(tree_json(tree, r));
  return forest;
}

Json to_json(const RecoveryInterval &interval) {
  Json j;
  j["family"] = to_string(interval.family);
  j["lower"] = interval.lower;
  if (interval.upper)
    j["upper"] = *interval.upper;
  else
    j["upper"] = "unbounded";
  j["feasible"] = interval.feasible;
  return j;
}

Json to_json(const RecoveryReport &report) {
  Json j = to_json(report.interval);
  j["gammas"] = report.gammas;
  Json rec = Json::array();
  for (bool b : report.recovered)
    rec.push_back(b);
  j["recovered"] = rec;
  j["pass_rate"] = report.pass_rate;
  j["empirical_lower"] = report.empirical_lower;
  if (report.empirical_upper)
    j["empirical_upper"] = *report.empirical_upper;
  else
    j["empirical_upper"] = "unbounded";
  return j;
}

Json to_json(const LipschitzReport &report) {
  Json j;
  j["trials"] = report.ratios.size();
  j["max_ratio"] = report.max_ratio;
  j["within_bound"] = report.within_bound;
  j["ratios"] = report.ratios;
  return j;
}

Json to_json(const SelectionReport &report) {
  Json j;
  j["criterion"] = report.criterion;
  j["chosen_gamma"] = report.chosen_gamma();
  j["chosen_K"] = report.chosen_K();
  bool any_floor = false;
  for (bool b : report.floored)
    any_floor = any_floor || b;
  j["rss_floored"] = any_floor;
  Json rows = Json::array();
  for (std::size_t k = 0; k < report.gammas.size(); ++k)
    rows.push_back({{"gamma", report.gammas[k]},
                    {"score", report.scores[k]},
                    {"K", report.clusters[k]}});
  j["scores"] = rows;
  return j;
}

void write_selection_csv(std::ostream &out, const SelectionReport &report) {
  out << "gamma,score,K\n";
  for (std::size_t k = 0; k < report.gammas.size(); ++k)
    out << format_double(report.gammas[k]) << ','
        << format_double(report.scores[k]) << ',' << report.clusters[k] << '\n';
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
  if (!out)
    throw InvalidArgument("write to '" + path.string() + "' failed");
}

} // namespace son
