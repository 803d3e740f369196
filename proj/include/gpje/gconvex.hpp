#pragma once

// g-affine functions, the g_rho initial solution, envelope extension past the
// source boundary, mollification, and the boundary positivity test.

#include "gpje/conditions.hpp"
#include "gpje/fields.hpp"
#include "gpje/quadrature.hpp"

namespace gpje {

struct GAffine {
  Vec2 y0;
  double z0;
  double operator()(const GeneratingFunction& gf, const Vec2& x) const { return gf.eval(x, y0, z0).g; }
};

struct GRhoValue {
  double value;
  Vec2 y;     // maximizer
  double z;   // v_rho(y)
  Vec2 grad;  // g_x(x, y, z)
};

/// g_rho(x) = sup over |y - y0| <= rho of g(x, y, z0 - sqrt(rho^2 - |y - y0|^2)).
/// Coarse polar sampling, then the stationarity fixed point
///   w = rho Q / sqrt(1 + |Q|^2),  Q = -g_y / g_z at (x, y0 + w, v_rho(y0 + w)).
inline GRhoValue g_rho(const GeneratingFunction& gf, const Vec2& y0, double z0, double rho, const Vec2& x) {
  if (!(rho > 0.0)) {
    const GValue v = gf.eval(x, y0, z0);
    return {v.g, y0, z0, v.gx};
  }
  auto zv = [&](const Vec2& w) { return z0 - std::sqrt(std::max(0.0, rho * rho - w.squaredNorm())); };
  auto value = [&](const Vec2& w) { return gf.eval(x, y0 + w, zv(w)).g; };
  Vec2 w = Vec2::Zero();
  double best = value(w);
  for (int i = 1; i <= 4; ++i)
    for (int j = 0; j < 16; ++j) {
      const double a = 2 * pi * j / 16, r = rho * i / 5.0;
      const Vec2 c(r * std::cos(a), r * std::sin(a));
      const double v = value(c);
      if (v > best) {
        best = v;
        w = c;
      }
    }
  for (int it = 0; it < 500; ++it) {
    const GValue v = gf.eval(x, y0 + w, zv(w));
    const Vec2 Q = -v.gy / v.gz;
    const Vec2 wn = rho * Q / std::sqrt(1.0 + Q.squaredNorm());
    const double step = (wn - w).norm();
    w = it < 50 ? wn : 0.5 * (w + wn);
    if (step <= 1e-15 * (rho + w.norm())) break;
  }
  const double z = zv(w);
  const GValue v = gf.eval(x, y0 + w, z);
  return {v.g, y0 + w, z, v.gx};
}

/// Distance from an interior point to the boundary of d.
inline double inner_distance(const DomainSpec& d, const Vec2& y) {
  if (!contains(d, y)) return 0.0;
  if (d.shape == Shape::disc) return d.radii.x() - (y - d.center).norm();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1440; ++k) best = std::min(best, (boundary_point(d, 2 * pi * k / 1440).position - y).norm());
  return best;
}

/// Sampled test that closure(Omega) x closure(B_rho(y0)) x [z0 - rho, z0] lies in Gamma.
inline bool gamma0_admissible(const GeneratingFunction& gf, const DomainSpec& omega, const Vec2& y0, double z0,
                              double rho) {
  std::vector<Vec2> xs = detail::boundary_samples(omega, 64);
  const Grid g = build_grid(omega, 8, 16);
  xs.insert(xs.end(), g.nodes.begin(), g.nodes.end());
  std::vector<Vec2> ys{y0};
  for (double f : {0.5, 1.0})
    for (int j = 0; j < 12; ++j) ys.push_back(y0 + f * rho * Vec2(std::cos(pi * j / 6), std::sin(pi * j / 6)));
  for (const auto& x : xs)
    for (const auto& y : ys)
      for (double z : {z0 - rho, z0 - 0.5 * rho, z0})
        if (!gf.in_gamma(x, y, z)) return false;
  return true;
}

/// A z0 inside I(x, y0) for every x in closure(Omega), `offset` from the binding edge.
inline double default_z0(const GeneratingFunction& gf, const DomainSpec& omega, const Vec2& y0, double offset = 1.0) {
  Interval r;
  for (const auto& x : detail::boundary_samples(omega, 256)) r = r.intersect(gf.I(x, y0));
  r = r.intersect(gf.I(omega.center, y0));
  if (r.empty()) throw ConstructionError("default_z0: no z is admissible for every x in the source");
  if (std::isfinite(r.lo) && std::isfinite(r.hi)) return 0.5 * (r.lo + r.hi);
  if (std::isfinite(r.hi)) return r.hi - offset;
  if (std::isfinite(r.lo)) return r.lo + offset;
  return 0.0;
}

/// Half of the largest rho on a geometric scan with B_rho(y0) inside the
/// target and the Gamma_0 box admissible.
inline double default_rho(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                          const Vec2& y0, double z0) {
  const double top = inner_distance(omega_star, y0);
  if (!(top > 0.0)) throw ConstructionError("default_rho: y0 is not inside the target");
  for (double rho = 0.999 * top; rho > 1e-6 * top; rho *= 0.8)
    if (gamma0_admissible(gf, omega, y0, z0, rho)) return 0.5 * rho;
  throw ConstructionError("default_rho: no admissible rho for this (y0, z0)");
}

struct GConvexField {
  std::vector<double> u;
  std::vector<Vec2> Du;      // exact gradient where available
  std::vector<Vec2> image;   // Tu at the nodes
  std::vector<double> lambda;
};

struct InitialReport {
  double min_lambda = 0.0;
  double max_image_offset = 0.0;  // max |Tu - y0|
  int image_violations = 0;
  Interval range;                 // [inf u - K0 d, sup u + K0 d]
  bool range_ok = true;
  std::vector<Vec2> image_boundary;  // Tu on the boundary ring
};

struct InitialOptions {
  bool check_range = true;
};

/// u0 = g_rho on the grid nodes, with the image and ellipticity checks.
inline std::pair<GConvexField, InitialReport> build_initial(const GeneratingFunction& gf, const DomainSpec& omega,
                                                            const DomainSpec& omega_star, const Vec2& y0, double z0,
                                                            double rho, const GridOperators& ops,
                                                            const A5Constants& a5, InitialOptions opt = {}) {
  if (!contains(omega_star, y0)) throw ConstructionError("build_initial: y0 is not inside the target");
  const double room = inner_distance(omega_star, y0);
  if (!(rho < room)) {
    std::ostringstream s;
    s << "build_initial: B_rho(y0) is not inside the target (rho = " << rho << ", room = " << room << ")";
    throw ConstructionError(s.str());
  }
  if (!gamma0_admissible(gf, omega, y0, z0, rho))
    throw ConstructionError("build_initial: Gamma_0 box is not admissible; decrease rho or move z0");
  const Grid& g = ops.grid();
  const int n = g.size();
  GConvexField f;
  f.u.resize(n);
  f.Du.resize(n);
  f.image.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const GRhoValue v = g_rho(gf, y0, z0, rho, g.nodes[k]);
    f.u[k] = v.value;
    f.Du[k] = v.grad;
    f.image[k] = v.y;
  });
  const TMapField t = map_T(gf, ops, f.u);
  f.lambda = t.lambda;
  InitialReport r;
  r.min_lambda = t.min_lambda;
  for (int k = 0; k < n; ++k) {
    const double off = (f.image[k] - y0).norm();
    r.max_image_offset = std::max(r.max_image_offset, off);
    if (!(off < rho)) ++r.image_violations;
    if (g.is_boundary(k)) r.image_boundary.push_back(f.image[k]);
  }
  const auto [lo, hi] = std::minmax_element(f.u.begin(), f.u.end());
  const double d = detail::max_distance(omega, omega);
  r.range = {*lo - a5.K0 * d, *hi + a5.K0 * d};
  r.range_ok = r.range.lo >= a5.J0.lo && r.range.hi <= a5.J0.hi;
  if (!(r.min_lambda > 0.0)) {
    std::ostringstream s;
    s << "build_initial: ellipticity failure, min lambda = " << r.min_lambda;
    throw ConstructionError(s.str());
  }
  if (r.image_violations > 0) throw ConstructionError("build_initial: image escapes B_rho(y0)");
  if (opt.check_range && !r.range_ok) {
    std::ostringstream s;
    s << "build_initial: range condition violated, [" << r.range.lo << ", " << r.range.hi << "] not inside J0 = ("
      << a5.J0.lo << ", " << a5.J0.hi << ")";
    throw ConstructionError(s.str());
  }
  return {f, r};
}

/// Same shape with every radius grown by delta (the collar domain).
inline DomainSpec enlarged(const DomainSpec& d, double delta) {
  DomainSpec e = d;
  e.radii = d.radii + Vec2::Constant(delta);
  if (d.shape == Shape::lobed) e.radii = d.radii * (1.0 + delta / d.max_radius());
  return e;
}

struct BoundaryPlane {
  Vec2 x;  // boundary point
  Vec2 y;
  double z;
  double s;  // ray parameter of the root
};

/// u1 = max(u0, max_b g(., y_b, z_b)) with g-affine supports attached at
/// boundary samples; on closure(Omega) u1 = u0.
struct EnvelopeExtension {
  GeneratingFunction gf;
  DomainSpec omega;
  Vec2 y0;
  double z0 = 0.0, rho = 0.0;
  std::vector<BoundaryPlane> planes;
  double max_excess = -std::numeric_limits<double>::infinity();  // max of planes - u0 on the boundary samples

  double u0(const Vec2& x) const { return g_rho(gf, y0, z0, rho, x).value; }

  double planes_max(const Vec2& x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : planes) {
      if (!gf.in_formula_range(x, b.y, b.z)) continue;
      best = std::max(best, gf.eval_unchecked(x, b.y, b.z).g);
    }
    return best;
  }

  double operator()(const Vec2& x) const {
    if (contains(omega, x) || defining_function(omega, x).phi <= 0.0) return u0(x);
    return std::max(u0(x), planes_max(x));
  }
};

inline EnvelopeExtension envelope_extend(const GeneratingFunction& gf, const DomainSpec& omega,
                                         const DomainSpec& omega_star, const Vec2& y0, double z0, double rho,
                                         int n_boundary = 256) {
  EnvelopeExtension e{gf, omega, y0, z0, rho};
  e.planes.resize(n_boundary);
  std::vector<std::string> errors(n_boundary);
  parallel_for(n_boundary, [&](std::size_t b) {
    const BoundaryPoint bp = boundary_point(omega, 2 * pi * b / n_boundary);
    const GRhoValue v = g_rho(gf, y0, z0, rho, bp.position);
    auto G = [&](double s) {
      try {
        const DualEval d = solve_duals(gf, {bp.position, v.value, v.grad + s * bp.normal});
        return defining_function(omega_star, d.Y).phi;
      } catch (const DualMapError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    std::ostringstream where;
    where << "envelope_extend: ray at x_b = (" << bp.position.x() << ", " << bp.position.y() << ")";
    double a = 0.0, s = 1e-3, ga = G(0.0);
    int changes = 0;
    double root_lo = NAN, root_hi = NAN;
    for (int k = 0; k < 120 && std::isfinite(ga); ++k, s *= 1.25) {
      const double gs = G(s);
      if (!std::isfinite(gs)) break;
      if ((gs > 0) != (ga > 0)) {
        if (changes++ == 0) {
          root_lo = a;
          root_hi = s;
        }
      }
      if (changes > 0 && s > 4.0 * root_hi) break;
      a = s;
      ga = gs;
    }
    if (changes == 0) {
      errors[b] = where.str() + " never reaches the target boundary";
      return;
    }
    if (changes > 1) {
      errors[b] = where.str() + " crosses the target boundary more than once";
      return;
    }
    const double sr = find_root(G, root_lo, root_hi, 1e-15);
    const DualEval d = solve_duals(gf, {bp.position, v.value, v.grad + sr * bp.normal});
    e.planes[b] = {bp.position, d.Y, dual_gstar(gf, bp.position, d.Y, v.value), sr};
  });
  for (const auto& m : errors)
    if (!m.empty()) throw ConstructionError(m);
  for (const auto& b : e.planes) e.max_excess = std::max(e.max_excess, e.planes_max(b.x) - e.u0(b.x));
  return e;
}

/// u_eps = bump_eps * (u1 + t_adj d^2), d the distance to Omega, by a
/// polar Gauss rule normalized to unit discrete mass.
struct MollifiedField {
  const EnvelopeExtension* u1 = nullptr;
  double t_adj = 1.0;
  double eps = 0.0;
  std::vector<Vec2> offsets;
  std::vector<double> weights;
  double raw_mass = 0.0;  // unnormalized rule applied to the normalized bump

  double adjusted(const Vec2& x) const {
    const double d = distance_to(u1->omega, x);
    return (*u1)(x) + t_adj * d * d;
  }

  double operator()(const Vec2& x) const {
    double s = 0.0;
    for (std::size_t q = 0; q < offsets.size(); ++q) s += weights[q] * adjusted(x - offsets[q]);
    return s;
  }
};

inline double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

/// Integral of the unit bump over the plane.
inline double bump_mass() {
  const auto [x, w] = gauss_legendre01(200);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * 2 * pi * x[i] * bump(x[i] * x[i]);
  return s;
}

inline MollifiedField mollify_adjust(const EnvelopeExtension& u1, double t_adj, double eps, int n_radial = 12,
                                     int n_angular = 16) {
  if (!(eps > 0.0)) throw ConstructionError("mollify_adjust: eps must be positive");
  MollifiedField m{&u1, t_adj, eps};
  const auto [x, w] = gauss_legendre01(n_radial);
  const double c = 1.0 / bump_mass();
  for (int i = 0; i < n_radial; ++i)
    for (int j = 0; j < n_angular; ++j) {
      const double a = 2 * pi * (j + 0.5 * (i % 2)) / n_angular;
      m.offsets.push_back(eps * x[i] * Vec2(std::cos(a), std::sin(a)));
      m.weights.push_back(c * bump(x[i] * x[i]) * w[i] * x[i] * 2 * pi / n_angular);
    }
  for (double v : m.weights) m.raw_mass += v;
  for (double& v : m.weights) v /= m.raw_mass;
  return m;
}

struct StartPoint {
  double z0, rho;
  Interval range;  // heights of g_rho widened by K0 diam(Omega)
};

/// Walks z0 away from the binding edge of I until the height range of g_rho
/// widened by K0 diam(Omega) fits inside J0; rho follows default_rho.
inline StartPoint choose_start(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                               const Vec2& y0, const A5Constants& a5, double z0 = NAN, double rho = NAN) {
  const bool fixed_z = std::isfinite(z0);
  const auto pts = detail::boundary_samples(omega, 64);
  const double d = detail::max_distance(omega, omega);
  std::string last;
  for (double offset = 1.0; offset <= 4096.0; offset *= 2.0) {
    const double z = fixed_z ? z0 : default_z0(gf, omega, y0, offset);
    const double r = std::isfinite(rho) ? rho : default_rho(gf, omega, omega_star, y0, z);
    double lo = g_rho(gf, y0, z, r, omega.center).value, hi = lo;
    for (const auto& x : pts) {
      const double v = g_rho(gf, y0, z, r, x).value;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo - a5.K0 * d > a5.J0.lo && hi + a5.K0 * d < a5.J0.hi) return {z, r, {lo - a5.K0 * d, hi + a5.K0 * d}};
    std::ostringstream m;
    m << "choose_start: heights [" << lo << ", " << hi << "] widened by K0 d = " << a5.K0 * d
      << " leave J0 = (" << a5.J0.lo << ", " << a5.J0.hi << ") at z0 = " << z;
    last = m.str();
    if (fixed_z) break;
  }
  throw ConstructionError(last);
}

struct EnvelopeOptions {
  bool enabled = true;
  double delta_cells = 10.0;   // collar width in radial grid cells
  double eps_fraction = 0.45;  // mollifier radius as a fraction of the collar
  double t_adj = 1.0;
  int n_boundary = 256;
};

struct InitialField {
  GConvexField field;
  InitialReport report;
  std::string path;  // "envelope" or "g_rho"
  double delta = 0.0, eps = 0.0;
  double max_excess = 0.0;
  double max_target_excursion = 0.0;  // largest distance of Tu outside the target
};

/// Initial field on the grid. The bare g_rho construction is always built and
/// checked; with the envelope enabled it is then replaced by the mollified
/// envelope, whose image reaches the target boundary.
inline InitialField initial_field(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                                  const Vec2& y0, double z0, double rho, const GridOperators& ops,
                                  const A5Constants& a5, const EnvelopeOptions& env = {}, InitialOptions opt = {}) {
  InitialField out;
  auto [field, report] = build_initial(gf, omega, omega_star, y0, z0, rho, ops, a5, opt);
  out.field = std::move(field);
  out.report = std::move(report);
  out.path = "g_rho";
  if (!env.enabled) return out;
  out.path = "envelope";

  const Grid& g = ops.grid();
  out.delta = env.delta_cells * g.dr * omega.max_radius();
  out.eps = env.eps_fraction * out.delta;
  const EnvelopeExtension u1 = envelope_extend(gf, omega, omega_star, y0, z0, rho, env.n_boundary);
  const MollifiedField ue = mollify_adjust(u1, env.t_adj, out.eps);
  out.max_excess = u1.max_excess;
  GConvexField& f = out.field;
  parallel_for(g.size(), [&](std::size_t k) { f.u[k] = ue(g.nodes[k]); });
  const TMapField t = map_T(gf, ops, f.u);
  f.lambda = t.lambda;
  f.image = t.Tu;
  for (int k = 0; k < g.size(); ++k) f.Du[k] = ops.gradient(f.u, k);
  InitialReport& r = out.report;
  r.min_lambda = t.min_lambda;
  r.max_image_offset = 0.0;
  r.image_violations = 0;
  r.image_boundary.clear();
  for (int k = 0; k < g.size(); ++k) {
    r.max_image_offset = std::max(r.max_image_offset, (f.image[k] - y0).norm());
    out.max_target_excursion = std::max(out.max_target_excursion, distance_to(omega_star, f.image[k]));
    if (g.is_boundary(k)) r.image_boundary.push_back(f.image[k]);
  }
  const auto [lo, hi] = std::minmax_element(f.u.begin(), f.u.end());
  const double d = detail::max_distance(omega, omega);
  r.range = {*lo - a5.K0 * d, *hi + a5.K0 * d};
  r.range_ok = r.range.lo >= a5.J0.lo && r.range.hi <= a5.J0.hi;
  if (!(r.min_lambda > 0.0)) {
    std::ostringstream s;
    s << "initial_field: mollified envelope is not elliptic on the grid (min lambda = " << r.min_lambda << " at "
      << t.non_elliptic.size() << " nodes); widen the collar (delta_cells) or use the bare g_rho path";
    throw ConstructionError(s.str());
  }
  if (opt.check_range && !r.range_ok) {
    std::ostringstream s;
    s << "initial_field: range condition violated by the mollified envelope, [" << r.range.lo << ", " << r.range.hi
      << "] not inside J0";
    throw ConstructionError(s.str());
  }
  return out;
}

/// Smallest eigenvalue of D2u - A(x, u, Du) from centered differences with step h.
template <class F>
double ellipticity_at(const GeneratingFunction& gf, const F& u, const Vec2& x, double h) {
  const double c = u(x);
  const Vec2 ex(h, 0), ey(0, h);
  const double px = u(x + ex), mx = u(x - ex), py = u(x + ey), my = u(x - ey);
  Mat2 H;
  H(0, 0) = (px - 2 * c + mx) / (h * h);
  H(1, 1) = (py - 2 * c + my) / (h * h);
  H(0, 1) = H(1, 0) = (u(x + ex + ey) - u(x + ex - ey) - u(x - ex + ey) + u(x - ex - ey)) / (4 * h * h);
  const Vec2 p((px - mx) / (2 * h), (py - my) / (2 * h));
  return min_eigenvalue(H - solve_duals(gf, {x, c, p}).A);
}

struct PositivityCase {
  Vec2 x0;
  double s;
  double min_h;
  double construction_error;
};

struct PositivityReport {
  int cases = 0;
  int failures = 0;
  double worst_min_h = std::numeric_limits<double>::infinity();
  double worst_construction = 0.0;
  std::vector<PositivityCase> details;
};

/// For random (y0, rho, boundary node x0, s): u = g_rho, g0 the g-affine
/// function with g0(x0) = u(x0) and Dg0(x0) = Du(x0) + s gamma0. Checks
/// h = u - g0 > 0 at every other node.
inline PositivityReport boundary_positivity_test(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                                  int n_cases, std::uint64_t seed = 11, int n_r = 24, int n_theta = 48) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const Grid g = build_grid(omega, n_r, n_theta);
  const double R = inner_distance(omega_star, omega_star.center);
  PositivityReport rep;
  for (int c = 0; c < n_cases; ++c) {
    const double a = 2 * pi * U(rng), r = 0.3 * R * std::sqrt(U(rng));
    const Vec2 y0 = omega_star.center + r * Vec2(std::cos(a), std::sin(a));
    const double z0 = default_z0(gf, omega, y0);
    const double rho = default_rho(gf, omega, omega_star, y0, z0) * (0.25 + 0.75 * U(rng));
    const int j = static_cast<int>(U(rng) * n_theta) % n_theta;
    const int k0 = g.index(n_r - 1, j);
    const Vec2 x0 = g.nodes[k0];
    const Vec2 gamma = boundary_point(omega, g.theta_of(j)).normal;
    const double s = 0.01 + 0.49 * U(rng);
    const GRhoValue v = g_rho(gf, y0, z0, rho, x0);
    const DualEval d = solve_duals(gf, {x0, v.value, v.grad + s * gamma});
    const double z1 = dual_gstar(gf, x0, d.Y, v.value);
    const GValue at = gf.eval(x0, d.Y, z1);
    const double err = std::max(std::abs(at.g - v.value), (at.gx - v.grad - s * gamma).norm());
    double min_h = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.size(); ++k) {
      if (k == k0) continue;
      const Vec2& x = g.nodes[k];
      const double hk = gf.in_formula_range(x, d.Y, z1)
                            ? g_rho(gf, y0, z0, rho, x).value - gf.eval_unchecked(x, d.Y, z1).g
                            : std::numeric_limits<double>::infinity();
      min_h = std::min(min_h, hk);
    }
    ++rep.cases;
    if (!(min_h > 0.0) || !(err <= 1e-8)) ++rep.failures;
    rep.worst_min_h = std::min(rep.worst_min_h, min_h);
    rep.worst_construction = std::max(rep.worst_construction, err);
    rep.details.push_back({x0, s, min_h, err});
  }
  return rep;
}

}  // namespace gpje
