#pragma once

// File formats: matrix and data CSV, JSON-lines posterior archives with a
// metadata sidecar, and likelihood trace CSV.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "archive.hpp"
#include "errors.hpp"
#include "newick.hpp"
#include "tree.hpp"

namespace ultratree {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  return out;
}

// Comma-separated numeric rows. Blank lines and '#' comments are skipped;
// a first row that does not parse as numbers is taken as a header.
inline std::vector<std::vector<double>> read_numeric_rows(std::istream& in, const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  bool header_ok = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(t);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      double x;
      if (!parse_double(cell, x)) {
        numeric = false;
        break;
      }
      row.push_back(x);
    }
    if (!t.empty() && t.back() == ',') numeric = false;
    if (!numeric) {
      if (header_ok && rows.empty()) {
        header_ok = false;
        continue;
      }
      throw ParseError(what + ": line " + std::to_string(lineno) + " is not a row of numbers");
    }
    header_ok = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(what + ": line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                       " fields, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(what + ": no rows");
  return rows;
}

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace detail

inline Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  const auto m = detail::to_matrix(detail::read_numeric_rows(in, "matrix csv"));
  if (m.rows() != m.cols()) {
    throw ParseError("matrix csv: " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " is not square");
  }
  return m;
}

inline Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_csv(in);
}

// n rows of p observations.
inline Eigen::MatrixXd read_data_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return detail::to_matrix(detail::read_numeric_rows(in, "data csv"));
}

inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_length(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = detail::open_out(path);
  write_matrix_csv(out, m);
}

inline nlohmann::ordered_json record_to_json(const ArchiveRecord& r) {
  nlohmann::ordered_json j;
  j["iter"] = r.iter;
  j["log_prior"] = r.log_prior;
  j["log_lik"] = r.log_lik;
  auto splits = nlohmann::ordered_json::array();
  auto lengths = nlohmann::ordered_json::object();
  for (const auto& e : r.tree.internal_edges()) {
    splits.push_back(e.split.leaves());
    lengths[e.split.key()] = e.length;
  }
  j["splits"] = std::move(splits);
  j["lengths"] = std::move(lengths);
  j["leaf_lengths"] = r.tree.leaf_lengths();
  j["root_length"] = r.tree.root_length();
  return j;
}

inline ArchiveRecord record_from_json(const nlohmann::json& j, int p) {
  try {
    ArchiveRecord r;
    r.iter = j.at("iter").get<long>();
    r.log_prior = j.at("log_prior").get<double>();
    r.log_lik = j.at("log_lik").get<double>();
    std::vector<Edge> internal;
    const auto& lengths = j.at("lengths");
    for (const auto& leaves : j.at("splits")) {
      const Split s = Split::from_leaves(leaves.get<std::vector<int>>(), p);
      internal.push_back({s, lengths.at(s.key()).get<double>(), EdgeKind::internal});
    }
    r.tree = Tree(p, std::move(internal), j.at("leaf_lengths").get<std::vector<double>>(),
                  j.at("root_length").get<double>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("archive record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("archive record: ") + e.what());
  }
}

inline std::string meta_path(const std::string& archive_path) { return archive_path + ".meta.json"; }

inline void write_archive(const std::string& path, const PosteriorArchive& a) {
  {
    auto out = detail::open_out(path);
    for (const auto& r : a.records) out << record_to_json(r).dump() << '\n';
  }
  nlohmann::ordered_json meta;
  meta["p"] = a.p;
  meta["records"] = a.records.size();
  meta["algo"] = a.provenance.algo;
  meta["config_hash"] = a.provenance.config_hash;
  meta["seed"] = a.provenance.seed;
  auto out = detail::open_out(meta_path(path));
  out << meta.dump(2) << '\n';
}

inline PosteriorArchive read_archive(const std::string& path) {
  PosteriorArchive a;
  {
    auto in = detail::open_in(meta_path(path));
    try {
      const auto meta = nlohmann::json::parse(in);
      a.p = meta.at("p").get<int>();
      a.provenance.algo = meta.value("algo", "");
      a.provenance.config_hash = meta.value("config_hash", "");
      a.provenance.seed = meta.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("archive metadata: ") + e.what());
    }
  }
  check_leaf_count(a.p);
  auto in = detail::open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("archive: ") + e.what());
    }
    auto r = record_from_json(j, a.p);
    if (!a.records.empty() && r.iter <= a.records.back().iter) {
      throw ParseError("archive: iteration " + std::to_string(r.iter) + " is not increasing");
    }
    a.records.push_back(std::move(r));
  }
  return a;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "iter,log_lik\n";
  for (const auto& t : trace) out << t.iter << ',' << format_length(t.log_lik) << '\n';
}

inline void write_trace_csv(const std::string& path, const std::vector<TracePoint>& trace) {
  auto out = detail::open_out(path);
  write_trace_csv(out, trace);
}

inline std::vector<TracePoint> read_trace_csv(const std::string& path) {
  auto in = detail::open_in(path);
  const auto rows = detail::read_numeric_rows(in, "trace csv");
  if (rows.front().size() != 2) throw ParseError("trace csv: expected two columns");
  std::vector<TracePoint> out;
  for (const auto& r : rows) out.push_back({static_cast<long>(r[0]), r[1], 0.0});
  return out;
}

// A list of trees, one Newick string per non-empty line.
inline std::vector<Tree> read_newick_list(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<Tree> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(parse_newick(t));
  }
  if (out.empty()) throw ParseError("newick list: no trees in " + path);
  return out;
}

inline Tree read_newick_file(const std::string& path) {
  const auto trees = read_newick_list(path);
  if (trees.size() != 1) throw ParseError("newick file " + path + " holds more than one tree");
  return trees.front();
}

}  // namespace ultratree
