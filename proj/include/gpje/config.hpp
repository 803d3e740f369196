#pragma once

// Run configuration: a sectioned key = value text file (a TOML subset) with
// line-numbered parse errors and a lossless emitter.
//
// Values: numbers, inf / -inf, true / false, "strings", [a, b] vectors and
// [[a, b], [c, d]] matrices. The string "auto" marks a quantity chosen at run
// time (stored as NaN).

#include "gpje/core.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace gpje {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DomainBlock {
  std::string shape = "disc";  // disc | ellipse | superellipse | lobed | manufactured
  Vec2 center = Vec2::Zero();
  Vec2 radii = Vec2::Ones();
  int exponent = 4;
  double lobe_amplitude = 0.0;
  int lobe_count = 4;
};

struct DensityBlock {
  std::string kind = "constant";  // constant | polynomial | radial | manufactured
  double a = 1.0;
  Vec2 b = Vec2::Zero();
  Mat2 C = Mat2::Zero();
  double h = 0.0;
  Vec2 m = Vec2::Zero();
  double s = 1.0;
};

struct ProfileBlock {
  std::string kind = "constant";  // constant | quadratic | bump
  double c = 0.0;
  Vec2 b = Vec2::Zero();
  Mat2 Q = Mat2::Zero();
  double height = 0.0;
  Vec2 mean = Vec2::Zero();
  double width = 1.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  struct {
    std::string variant = "quadratic_ot";
    double kappa = 2.0;
    double delta = 0.5;
    double z_lo = -std::numeric_limits<double>::infinity();
    double z_hi = std::numeric_limits<double>::infinity();
  } model;
  ProfileBlock phi;

  DomainBlock omega, omega_star;
  DensityBlock f, fstar;

  struct {
    bool enabled = false;
    Vec2 center = Vec2::Zero();
    double a0 = 3.0, a2 = 0.05, a4 = 0.02;
  } manufactured;

  struct {
    int n_r = 32;
    int n_theta = 64;
  } grid;

  struct {
    Vec2 y0 = Vec2::Constant(NAN);
    double z0 = NAN;
    double rho = NAN;
    bool envelope = true;
    double delta_cells = 10.0;
    double eps_fraction = 0.45;
    double t_adj = 1.0;
    int n_boundary = 256;
  } gconvex;

  struct {
    double tau = NAN;
    double eps0 = 1e-2;
    double eps_factor = 0.25;
    double eps_min = 1e-6;
    bool limit_solve = true;
    double dt0 = 0.1;
    double dt_min = 1e-6;
    double dt_max = 0.5;
    double newton_tol = 1e-9;
    double step_tol = 1e-11;
    int max_newton = 25;
    int probes = 2;
  } homotopy;

  struct {
    int n_samples = 2000;
    int n_directions = 32;
    double tol = 1e-6;
  } check;

  struct {
    int ray_samples = 10000;
    double ray_tol = 1e-4;
    long mass_samples = 1000000;
    int bin_rings = 2;
    int bin_sectors = 8;
    double mismatch_tol = 0.02;
    double map_tol = 1e-2;
    std::string field = "solution";
  } verify;
};

namespace detail {

using ConfigValue = std::variant<double, std::int64_t, std::uint64_t, bool, std::string, std::vector<double>,
                                 std::vector<std::vector<double>>>;

struct RawEntry {
  ConfigValue value;
  int line = 0;
  bool used = false;
};

using RawConfig = std::map<std::string, std::map<std::string, RawEntry>>;

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  ConfigValue parse() {
    ConfigValue v = value();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& m) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + m);
  }
  void skip() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  ConfigValue value() {
    skip();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    return scalar();
  }

  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string token() {
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
    return s_.substr(start, pos_ - start);
  }

  ConfigValue scalar() {
    const std::string t = token();
    if (t == "true") return true;
    if (t == "false") return false;
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    if (t.empty()) fail("missing value");
    const bool integral = t.find_first_of(".eE") == std::string::npos;
    std::size_t used = 0;
    try {
      if (integral && t.front() != '-' && t.size() >= 19) {
        const unsigned long long v = std::stoull(t, &used);
        if (used == t.size())
          return v <= static_cast<unsigned long long>(std::numeric_limits<std::int64_t>::max())
                     ? ConfigValue(static_cast<std::int64_t>(v))
                     : ConfigValue(static_cast<std::uint64_t>(v));
      } else if (integral) {
        const long long v = std::stoll(t, &used);
        if (used == t.size()) return static_cast<std::int64_t>(v);
      } else {
        const double v = std::stod(t, &used);
        if (used == t.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + t + "'");
  }

  double number() {
    const ConfigValue v = scalar();
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* i = std::get_if<std::uint64_t>(&v)) return static_cast<double>(*i);
    fail("array elements must be numbers");
  }

  ConfigValue array() {
    ++pos_;
    skip();
    if (pos_ < s_.size() && s_[pos_] == '[') {
      std::vector<std::vector<double>> rows;
      for (;;) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] != '[') fail("expected '[' in matrix");
        ++pos_;
        rows.push_back(list());
        skip();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return rows;
        }
        fail("expected ',' or ']' in matrix");
      }
    }
    return list();
  }

  std::vector<double> list() {
    std::vector<double> out;
    skip();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    for (;;) {
      skip();
      out.push_back(number());
      skip();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

/// Strips a trailing comment, ignoring '#' inside strings.
inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline RawConfig parse_raw(std::istream& in) {
  RawConfig raw;
  std::string section, line;
  std::set<std::string> headers;
  int n = 0;
  raw[section];
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ConfigError("line " + std::to_string(n) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!headers.insert(section).second)
        throw ConfigError("line " + std::to_string(n) + ": duplicate section [" + section + "]");
      raw[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (raw[section].count(key))
      throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + key + "'");
    raw[section][key] = {ValueParser(trim(t.substr(eq + 1)), n).parse(), n};
  }
  return raw;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "\"auto\"";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string r(buf, res.ptr);
  if (r.find_first_of(".eE") == std::string::npos) r += ".0";
  return r;
}

inline std::string format_vec(const Vec2& v) {
  return "[" + format_double(v.x()) + ", " + format_double(v.y()) + "]";
}

/// Either reads entries from a raw table into the config or writes them out;
/// the same field list drives both directions.
class Binder {
 public:
  explicit Binder(RawConfig* raw) : raw_(raw) {}
  explicit Binder(std::ostream* out) : out_(out) {}

  void section(const std::string& name, const std::string& comment = "") {
    sec_ = name;
    if (out_) {
      if (!first_) *out_ << '\n';
      first_ = false;
      if (!comment.empty()) *out_ << "# " << comment << '\n';
      *out_ << '[' << name << "]\n";
    }
  }

  void bind(const std::string& key, double& v, const std::string& unit, bool allow_auto = false) {
    if (out_) return emit(key, format_double(v), unit);
    if (RawEntry* e = find(key)) {
      if (const auto* s = std::get_if<std::string>(&e->value); s && allow_auto && *s == "auto") {
        v = NAN;
      } else if (const auto* d = std::get_if<double>(&e->value)) {
        v = *d;
      } else if (const auto* i = std::get_if<std::int64_t>(&e->value)) {
        v = static_cast<double>(*i);
      } else {
        bad(*e, allow_auto ? "a number or \"auto\"" : "a number");
      }
    }
  }

  template <class Int>
    requires std::is_integral_v<Int>
  void bind(const std::string& key, Int& v, const std::string& unit) {
    if (out_) return emit(key, std::to_string(v), unit);
    if (RawEntry* e = find(key)) {
      if (const auto* u = std::get_if<std::uint64_t>(&e->value)) {
        if (!std::is_same_v<Int, std::uint64_t>) bad(*e, "a smaller integer");
        v = static_cast<Int>(*u);
        return;
      }
      const auto* i = std::get_if<std::int64_t>(&e->value);
      if (!i) bad(*e, "an integer");
      if (*i < 0 && std::is_unsigned_v<Int>) bad(*e, "a nonnegative integer");
      v = static_cast<Int>(*i);
    }
  }

  void bind(const std::string& key, bool& v, const std::string& unit) {
    if (out_) return emit(key, v ? "true" : "false", unit);
    if (RawEntry* e = find(key)) {
      const auto* b = std::get_if<bool>(&e->value);
      if (!b) bad(*e, "true or false");
      v = *b;
    }
  }

  void bind(const std::string& key, std::string& v, const std::string& unit) {
    if (out_) return emit(key, "\"" + v + "\"", unit);
    if (RawEntry* e = find(key)) {
      const auto* s = std::get_if<std::string>(&e->value);
      if (!s) bad(*e, "a string");
      v = *s;
    }
  }

  void bind(const std::string& key, Vec2& v, const std::string& unit, bool allow_auto = false) {
    if (out_) return emit(key, std::isnan(v.x()) ? "\"auto\"" : format_vec(v), unit);
    if (RawEntry* e = find(key)) {
      if (const auto* s = std::get_if<std::string>(&e->value); s && allow_auto && *s == "auto") {
        v = Vec2::Constant(NAN);
        return;
      }
      const auto* a = std::get_if<std::vector<double>>(&e->value);
      if (!a || a->size() != 2) bad(*e, "a 2-vector [a, b]");
      v = Vec2((*a)[0], (*a)[1]);
    }
  }

  void bind(const std::string& key, Mat2& v, const std::string& unit) {
    if (out_)
      return emit(key,
                  "[" + format_vec(v.row(0).transpose()) + ", " + format_vec(v.row(1).transpose()) + "]", unit);
    if (RawEntry* e = find(key)) {
      const auto* m = std::get_if<std::vector<std::vector<double>>>(&e->value);
      if (!m || m->size() != 2 || (*m)[0].size() != 2 || (*m)[1].size() != 2) bad(*e, "a 2x2 matrix [[a, b], [c, d]]");
      v << (*m)[0][0], (*m)[0][1], (*m)[1][0], (*m)[1][1];
    }
  }

 private:
  RawEntry* find(const std::string& key) {
    auto s = raw_->find(sec_);
    if (s == raw_->end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  [[noreturn]] void bad(const RawEntry& e, const std::string& what) const {
    throw ConfigError("line " + std::to_string(e.line) + ": [" + sec_ + "] value must be " + what);
  }

  void emit(const std::string& key, const std::string& value, const std::string& unit) {
    std::string line = key + " = " + value;
    if (!unit.empty()) {
      if (line.size() < 32) line.resize(32, ' ');
      line += "  # " + unit;
    }
    *out_ << line << '\n';
  }

  RawConfig* raw_ = nullptr;
  std::ostream* out_ = nullptr;
  std::string sec_;
  bool first_ = true;
};

inline void bind_domain(Binder& b, DomainBlock& d) {
  b.bind("shape", d.shape, "disc | ellipse | superellipse | lobed | manufactured");
  b.bind("center", d.center, "length");
  b.bind("radii", d.radii, "length (semi-axes; lobed uses the first as R0)");
  b.bind("exponent", d.exponent, "dimensionless, superellipse only");
  b.bind("lobe_amplitude", d.lobe_amplitude, "dimensionless, lobed only");
  b.bind("lobe_count", d.lobe_count, "dimensionless, lobed only (even)");
}

inline void bind_density(Binder& b, DensityBlock& d) {
  b.bind("kind", d.kind, "constant | polynomial | radial | manufactured");
  b.bind("a", d.a, "intensity");
  b.bind("b", d.b, "intensity / length");
  b.bind("C", d.C, "intensity / length^2");
  b.bind("h", d.h, "intensity");
  b.bind("m", d.m, "length");
  b.bind("s", d.s, "length");
}

inline void bind_all(Binder& b, RunConfig& c) {
  b.section("run");
  b.bind("seed", c.seed, "64-bit seed for every randomized step");
  b.bind("output_dir", c.output_dir, "path, relative to the config file");

  b.section("model");
  b.bind("variant", c.model.variant, "quadratic_ot | reflection | refraction");
  b.bind("kappa", c.model.kappa, "dimensionless, n1 / n2 (refraction)");
  b.bind("delta", c.model.delta, "dimensionless slack for kappa < 1");
  b.bind("z_lo", c.model.z_lo, "length, lower end of the z-window");
  b.bind("z_hi", c.model.z_hi, "length, upper end of the z-window");

  b.section("model.phi", "target height profile");
  b.bind("kind", c.phi.kind, "constant | quadratic | bump");
  b.bind("c", c.phi.c, "length");
  b.bind("b", c.phi.b, "dimensionless slope");
  b.bind("Q", c.phi.Q, "1 / length");
  b.bind("height", c.phi.height, "length");
  b.bind("mean", c.phi.mean, "length");
  b.bind("width", c.phi.width, "length");

  b.section("omega", "source domain");
  bind_domain(b, c.omega);
  b.section("omega_star", "target domain");
  bind_domain(b, c.omega_star);

  b.section("density.f", "source intensity");
  bind_density(b, c.f);
  b.section("density.fstar", "target intensity");
  bind_density(b, c.fstar);

  b.section("manufactured", "radial reference solution u = a0 + a2 r^2 + a4 r^4");
  b.bind("enabled", c.manufactured.enabled, "");
  b.bind("center", c.manufactured.center, "length");
  b.bind("a0", c.manufactured.a0, "length");
  b.bind("a2", c.manufactured.a2, "1 / length");
  b.bind("a4", c.manufactured.a4, "1 / length^3");

  b.section("grid");
  b.bind("n_r", c.grid.n_r, "rings");
  b.bind("n_theta", c.grid.n_theta, "columns (even)");

  b.section("gconvex", "initial field");
  b.bind("y0", c.gconvex.y0, "length", true);
  b.bind("z0", c.gconvex.z0, "length", true);
  b.bind("rho", c.gconvex.rho, "length", true);
  b.bind("envelope", c.gconvex.envelope, "mollified envelope (false: bare g_rho)");
  b.bind("delta_cells", c.gconvex.delta_cells, "collar width in radial grid cells");
  b.bind("eps_fraction", c.gconvex.eps_fraction, "mollifier radius / collar width");
  b.bind("t_adj", c.gconvex.t_adj, "1 / length");
  b.bind("n_boundary", c.gconvex.n_boundary, "boundary samples");

  b.section("homotopy");
  b.bind("tau", c.homotopy.tau, "1 / length", true);
  b.bind("eps0", c.homotopy.eps0, "1 / length");
  b.bind("eps_factor", c.homotopy.eps_factor, "dimensionless");
  b.bind("eps_min", c.homotopy.eps_min, "1 / length");
  b.bind("limit_solve", c.homotopy.limit_solve, "final solve at eps = 0");
  b.bind("dt0", c.homotopy.dt0, "dimensionless");
  b.bind("dt_min", c.homotopy.dt_min, "dimensionless");
  b.bind("dt_max", c.homotopy.dt_max, "dimensionless");
  b.bind("newton_tol", c.homotopy.newton_tol, "residual units");
  b.bind("step_tol", c.homotopy.step_tol, "relative");
  b.bind("max_newton", c.homotopy.max_newton, "iterations");
  b.bind("probes", c.homotopy.probes, "perturbed restarts at t = 0");

  b.section("check");
  b.bind("n_samples", c.check.n_samples, "jets");
  b.bind("n_directions", c.check.n_directions, "angles");
  b.bind("tol", c.check.tol, "dimensionless");

  b.section("verify");
  b.bind("ray_samples", c.verify.ray_samples, "rays");
  b.bind("ray_tol", c.verify.ray_tol, "length");
  b.bind("mass_samples", c.verify.mass_samples, "samples");
  b.bind("bin_rings", c.verify.bin_rings, "bins");
  b.bind("bin_sectors", c.verify.bin_sectors, "bins");
  b.bind("mismatch_tol", c.verify.mismatch_tol, "relative");
  b.bind("map_tol", c.verify.map_tol, "length");
  b.bind("field", c.verify.field, "solution | initial");
}

}  // namespace detail

/// Parses a configuration; unknown sections or keys are errors.
inline RunConfig parse_config(std::istream& in) {
  detail::RawConfig raw = detail::parse_raw(in);
  RunConfig c;
  detail::Binder b(&raw);
  detail::bind_all(b, c);
  for (const auto& [sec, entries] : raw)
    for (const auto& [key, e] : entries)
      if (!e.used)
        throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "' in [" +
                          (sec.empty() ? std::string("top level") : sec) + "]");
  return c;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string emit_config(const RunConfig& c) {
  std::ostringstream out;
  detail::Binder b(&out);
  RunConfig copy = c;
  detail::bind_all(b, copy);
  return out.str();
}

/// Field-by-field equality (NaN equals NaN), via the canonical emitted form.
inline bool same_config(const RunConfig& a, const RunConfig& b) { return emit_config(a) == emit_config(b); }

/// FNV-1a hash of the canonical text, as 16 hex digits.
inline std::string content_hash(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : emit_config(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

}  // namespace gpje
