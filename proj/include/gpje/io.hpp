#pragma once

// Artifact files: nodal fields and traces as CSV, reports as JSON.

#include "gpje/domains.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gpje {

using Json = nlohmann::ordered_json;

struct FieldColumns {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;

  void add(std::string name, std::vector<double> v) {
    names.push_back(std::move(name));
    values.push_back(std::move(v));
  }
  void add(const std::string& name, const std::vector<Vec2>& v) {
    std::vector<double> a(v.size()), b(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      a[k] = v[k].x();
      b[k] = v[k].y();
    }
    add(name + "_x", std::move(a));
    add(name + "_y", std::move(b));
  }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == name) return values[c];
    throw Error("field file has no column '" + name + "'");
  }
};

/// Header "node,i,j,x,y,<columns>" and one row per grid node.
inline void write_field_csv(const std::filesystem::path& path, const Grid& g, const FieldColumns& cols) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "node,i,j,x,y";
  for (const auto& n : cols.names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (int k = 0; k < g.size(); ++k) {
    out << k << ',' << g.ring(k) << ',' << g.column(k) << ',' << g.nodes[k].x() << ',' << g.nodes[k].y();
    for (const auto& v : cols.values) out << ',' << v.at(k);
    out << '\n';
  }
}

/// Reads a field file written for the same grid; node coordinates must match.
inline FieldColumns read_field_csv(const std::filesystem::path& path, const Grid& g) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 5 || header[0] != "node" || header[3] != "x" || header[4] != "y")
    throw Error(path.string() + ": unexpected header");
  FieldColumns cols;
  for (std::size_t c = 5; c < header.size(); ++c) cols.add(header[c], std::vector<double>(g.size()));
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= g.size()) throw Error(path.string() + ": more rows than grid nodes");
    std::stringstream s(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(s, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != header.size()) throw Error(path.string() + ": row " + std::to_string(row + 2) + " has wrong width");
    if (static_cast<int>(v[0]) != row || std::abs(v[3] - g.nodes[row].x()) > 1e-12 ||
        std::abs(v[4] - g.nodes[row].y()) > 1e-12)
      throw Error(path.string() + ": node " + std::to_string(row) + " does not match the configured grid");
    for (std::size_t c = 5; c < v.size(); ++c) cols.values[c - 5][row] = v[c];
    ++row;
  }
  if (row != g.size()) throw Error(path.string() + ": fewer rows than grid nodes");
  return cols;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string());
  return Json::parse(in);
}

/// JSON has no infinities; they are written as strings.
inline Json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline Json json_vec(const Vec2& v) { return Json::array({json_number(v.x()), json_number(v.y())}); }

}  // namespace gpje
