#pragma once

// Physics-level checks that do not touch the PDE: ray tracing with the
// specular and Snell laws against the generated map, and pushforward mass
// bookkeeping on a histogram of target bins.

#include "gpje/dualmaps.hpp"
#include "gpje/quadrature.hpp"
#include "gpje/sampling.hpp"

#include <Eigen/Dense>

#include <random>

namespace gpje {

/// Cubic interpolation of a nodal field in the logical (r, theta) coordinates
/// of a polar grid. Rings below the pole are reached through the opposite
/// column.
class FieldInterpolant {
 public:
  FieldInterpolant(Grid grid, std::vector<double> u) : g_(std::move(grid)), u_(std::move(u)) {
    if (static_cast<int>(u_.size()) != g_.size()) throw Error("FieldInterpolant: field size does not match grid");
  }

  const Grid& grid() const { return g_; }
  const std::vector<double>& values() const { return u_; }

  double value(const Vec2& x) const {
    double v, vr, vt, r, th;
    eval(x, v, vr, vt, r, th);
    return v;
  }

  /// Value and gradient. Within one ring of the pole the gradient comes from
  /// centered differences of the interpolant.
  Jet jet(const Vec2& x) const {
    double v, vr, vt, r, th;
    eval(x, v, vr, vt, r, th);
    const RadiusJet R = radius_jet(g_.domain, th);
    if (r < g_.dr) {
      const double h = 0.5 * g_.dr * R.r0;
      const Vec2 ex(h, 0), ey(0, h);
      return {x, v, Vec2(value(x + ex) - value(x - ex), value(x + ey) - value(x - ey)) / (2 * h)};
    }
    const Vec2 e(std::cos(th), std::sin(th)), et = perp(e);
    Mat2 M;
    M.row(0) = (R.r0 * e).transpose();
    M.row(1) = (r * (R.r1 * e + R.r0 * et)).transpose();
    return {x, v, M.inverse() * Vec2(vr, vt)};
  }

 private:
  void eval(const Vec2& x, double& v, double& vr, double& vt, double& r, double& th) const {
    const Vec2 rt = relative_polar(g_.domain, x);
    r = std::min(rt.x(), 1.0);
    th = rt.y();
    if (th < 0) th += 2 * pi;
    const double s = r / g_.dr - 0.5;
    const int i0 = std::min(static_cast<int>(std::floor(s)) - 1, g_.n_r - 4);
    double wr[4], dr[4];
    lagrange(s - i0, wr, dr);
    const double t = th / g_.dtheta;
    const int j0 = static_cast<int>(std::floor(t)) - 1;
    double wt[4], dt[4];
    lagrange(t - j0, wt, dt);
    v = vr = vt = 0;
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const double val = node(i0 + a, j0 + b);
        v += wr[a] * wt[b] * val;
        vr += dr[a] * wt[b] * val;
        vt += wr[a] * dt[b] * val;
      }
    }
    vr /= g_.dr;
    vt /= g_.dtheta;
  }

  static void lagrange(double s, double* w, double* d) {
    const double x[4] = {0, 1, 2, 3};
    for (int a = 0; a < 4; ++a) {
      double den = 1, num = 1, der = 0;
      for (int b = 0; b < 4; ++b) {
        if (b == a) continue;
        den *= x[a] - x[b];
        num *= s - x[b];
        double prod = 1;
        for (int c = 0; c < 4; ++c)
          if (c != a && c != b) prod *= s - x[c];
        der += prod;
      }
      w[a] = num / den;
      d[a] = der / den;
    }
  }

  double node(int i, int j) const {
    if (i < 0) {
      i = -i - 1;
      j += g_.n_theta / 2;
    }
    return u_[g_.index(i, j)];
  }

  Grid g_;
  std::vector<double> u_;
};

struct RayHit {
  bool hit = false;
  Vec2 y = Vec2::Zero();
  std::string why;
};

struct RaySample {
  Jet jet;
  Vec2 y_hit, y_map;
  double deviation;
};

struct RayReport {
  std::vector<RaySample> samples;  // hits only
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  int requested = 0;
  int misses = 0;
  std::vector<std::string> miss_reasons;  // first few

  bool ok(double tol) const { return misses == 0 && max_deviation < tol; }
};

namespace detail {

inline double trace_slab(const GeneratingFunction& gf, const Jet& j, double diameter) {
  return 10.0 * std::max({diameter, 1.0, std::abs(j.u - gf.phi.value(j.x))});
}

}  // namespace detail

/// Follows the vertical ray through (x, u) after it meets the surface with
/// gradient p: specular reflection for the reflector (target below), vector
/// Snell law with index ratio kappa for the refractor (target above). Returns
/// the point where the outgoing ray meets the target graph {(y, Phi(y))}.
inline RayHit trace_jet(const GeneratingFunction& gf, const Jet& j, double slab) {
  using V3 = Eigen::Vector3d;
  RayHit h;
  if (gf.model == Model::quadratic_ot) {
    h.why = "quadratic OT has no optical ray model";
    return h;
  }
  const V3 d(0, 0, 1);
  const V3 nu = V3(j.p.x(), j.p.y(), -1.0) / std::sqrt(1.0 + j.p.squaredNorm());
  V3 out;
  if (gf.model == Model::reflection) {
    out = d - 2.0 * d.dot(nu) * nu;
  } else {
    const double k = gf.kappa;
    const double c1 = -d.dot(nu);
    const double disc = 1.0 - k * k * (1.0 - c1 * c1);
    if (disc < 0) {
      h.why = "total internal reflection";
      return h;
    }
    out = k * d + (k * c1 - std::sqrt(disc)) * nu;
  }
  out.normalize();
  const V3 P(j.x.x(), j.x.y(), j.u);
  auto F = [&](double s) {
    const V3 q = P + s * out;
    return gf.phi.value(Vec2(q.x(), q.y())) - q.z();
  };
  if (gf.phi.is_flat()) {
    if (std::abs(out.z()) < 1e-14) {
      h.why = "ray parallel to target graph";
      return h;
    }
    const double s = (gf.phi.c - P.z()) / out.z();
    if (!(s > 0) || s > slab) {
      h.why = "ray exits the search slab";
      return h;
    }
    const V3 q = P + s * out;
    h.y = Vec2(q.x(), q.y());
    h.hit = true;
    return h;
  }
  constexpr int steps = 4096;
  double a = 0.0, fa = F(0.0);
  for (int k = 1; k <= steps; ++k) {
    const double b = slab * k / steps, fb = F(b);
    if ((fa > 0) != (fb > 0) || fb == 0.0) {
      const double s = find_root(F, a, b);
      const V3 q = P + s * out;
      h.y = Vec2(q.x(), q.y());
      h.hit = true;
      return h;
    }
    a = b;
    fa = fb;
  }
  h.why = "ray exits the search slab";
  return h;
}

/// Traces every jet and compares the hit point with Y(x, u, p).
inline RayReport trace_jets(const GeneratingFunction& gf, const std::vector<Jet>& jets, double diameter) {
  const std::size_t n = jets.size();
  std::vector<RaySample> rows(n);
  std::vector<std::string> why(n);
  parallel_for(n, [&](std::size_t k) {
    const Jet& j = jets[k];
    const RayHit h = trace_jet(gf, j, detail::trace_slab(gf, j, diameter));
    if (!h.hit) {
      why[k] = h.why;
      return;
    }
    try {
      const Vec2 Y = solve_duals(gf, j).Y;
      rows[k] = {j, h.y, Y, (h.y - Y).norm()};
    } catch (const Error& e) {
      why[k] = e.what();
    }
  });
  RayReport r;
  r.requested = static_cast<int>(n);
  double sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!why[k].empty()) {
      ++r.misses;
      if (r.miss_reasons.size() < 8) r.miss_reasons.push_back(why[k]);
      continue;
    }
    r.samples.push_back(rows[k]);
    r.max_deviation = std::max(r.max_deviation, rows[k].deviation);
    sum += rows[k].deviation;
  }
  if (!r.samples.empty()) r.mean_deviation = sum / r.samples.size();
  return r;
}

/// Uniform points in the domain; point k depends only on (seed, k).
inline std::vector<Vec2> sample_points(const DomainSpec& d, int n, std::uint64_t seed) {
  std::vector<Vec2> pts(n);
  parallel_for(n, [&](std::size_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    pts[k] = sample_in_domain(d, rng);
  });
  return pts;
}

namespace detail {

inline RayReport trace_field(const GeneratingFunction& gf, const FieldInterpolant& u, int samples,
                             std::uint64_t seed) {
  const auto pts = sample_points(u.grid().domain, samples, seed);
  std::vector<Jet> jets(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) { jets[k] = u.jet(pts[k]); });
  return trace_jets(gf, jets, u.grid().domain.diameter());
}

}  // namespace detail

inline RayReport trace_reflection(const GeneratingFunction& gf, const FieldInterpolant& u, int samples,
                                  std::uint64_t seed = 1) {
  if (gf.model != Model::reflection) throw Error("trace_reflection: model is " + to_string(gf.model));
  return detail::trace_field(gf, u, samples, seed);
}

inline RayReport trace_refraction(const GeneratingFunction& gf, const FieldInterpolant& u, int samples,
                                  std::uint64_t seed = 1) {
  if (gf.model != Model::refraction) throw Error("trace_refraction: model is " + to_string(gf.model));
  return detail::trace_field(gf, u, samples, seed);
}

/// Target bins: equal-area rings times equal sectors in the polar coordinates
/// of the target domain.
struct BinLayout {
  DomainSpec target;
  int rings = 2, sectors = 8;

  int size() const { return rings * sectors; }
  double ring_edge(int i) const { return std::sqrt(double(i) / rings); }
  int index(int i, int j) const { return i * sectors + j; }

  /// Bin of y, clamping points just outside onto the outer ring.
  int locate(const Vec2& y) const {
    const Vec2 rt = relative_polar(target, y);
    const double s = std::min(rt.x(), 1.0);
    double th = rt.y();
    if (th < 0) th += 2 * pi;
    const int i = std::min(rings - 1, static_cast<int>(std::floor(s * s * rings)));
    const int j = std::min(sectors - 1, static_cast<int>(std::floor(th / (2 * pi) * sectors)));
    return index(i, j);
  }

  /// Smallest physical width of a bin, used as the containment tolerance.
  double width() const {
    double rmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 256; ++k) rmin = std::min(rmin, polar_radius(target, 2 * pi * k / 256));
    double w = rmin * 2 * pi / sectors * ring_edge(1);
    for (int i = 0; i < rings; ++i) w = std::min(w, rmin * (ring_edge(i + 1) - ring_edge(i)));
    return w;
  }

  template <class F>
  double integrate_bin(int b, F&& fn, int sub = 8) const {
    const int i = b / sectors, j = b % sectors;
    const double r0 = ring_edge(i), r1 = ring_edge(i + 1);
    const double t0 = 2 * pi * j / sectors, t1 = 2 * pi * (j + 1) / sectors;
    double s = 0;
    for (int a = 0; a < sub; ++a)
      for (int c = 0; c < sub; ++c)
        s += integrate_cell(target, r0 + (r1 - r0) * a / sub, r0 + (r1 - r0) * (a + 1) / sub,
                            t0 + (t1 - t0) * c / sub, t0 + (t1 - t0) * (c + 1) / sub, fn, 8);
    return s;
  }
};

struct MassReport {
  std::vector<double> pushforward, expected, mismatch;
  double max_mismatch = 0.0;
  double source_mass = 0.0;    // quadrature of f over the source
  double target_mass = 0.0;    // quadrature of the rescaled f* over the bins
  double fstar_scale = 1.0;
  double binned_mass = 0.0;
  double outside_mass = 0.0;   // samples beyond the containment tolerance
  double mass_identity_error = 0.0;
  long samples = 0;
  long clamped = 0;            // outside the target but within tolerance
  long containment_failures = 0;
  double tolerance = 0.0;
  double boundary_gap = 0.0;   // worst distance from T(boundary) to the target boundary

  bool ok(double max_mismatch_allowed) const {
    return containment_failures == 0 && max_mismatch < max_mismatch_allowed && boundary_gap <= tolerance &&
           mass_identity_error < 1e-10;
  }
};

/// Distance from y to the boundary of d (inside or outside).
inline double boundary_distance(const DomainSpec& d, const Vec2& y) {
  if (!contains(d, y)) return distance_to(d, y);
  if (d.shape == Shape::disc) return d.radii.x() - (y - d.center).norm();
  constexpr int n = 1024;
  double best = std::numeric_limits<double>::infinity(), tb = 0;
  for (int k = 0; k < n; ++k) {
    const double t = 2 * pi * k / n;
    const double v = (boundary_point(d, t).position - y).norm();
    if (v < best) best = v, tb = t;
  }
  double h = 2 * pi / n;
  for (int it = 0; it < 40; ++it) {
    const double a = (boundary_point(d, tb - h).position - y).norm();
    const double b = (boundary_point(d, tb + h).position - y).norm();
    if (a < best) best = a, tb -= h;
    else if (b < best) best = b, tb += h;
    else h *= 0.5;
  }
  return best;
}

/// Pushes the source intensity forward through Tu and bins it on the target.
/// The source is integrated cell by cell with a tensor Gauss rule (each node
/// is one sample weighted by f times its share of the cell measure); f* is
/// rescaled so both sides carry the same quadrature mass.
inline MassReport pushforward_histogram(const GeneratingFunction& gf, const FieldInterpolant& u, const Density& f,
                                        const Density& fstar, const BinLayout& bins, long n_samples,
                                        int boundary_points = 256) {
  const Grid& g = u.grid();
  const DomainSpec& omega = g.domain;
  const int cr = g.n_r, ct = g.n_theta;
  const int m = std::max(1, static_cast<int>(std::ceil(std::sqrt(double(n_samples) / (double(cr) * ct)))));
  const auto [gx, gw] = gauss_legendre01(m);

  MassReport rep;
  rep.tolerance = bins.width();
  const int nb = bins.size();
  const int rows = cr * ct;
  std::vector<std::vector<double>> local(rows);
  std::vector<double> out_mass(rows, 0.0), src_mass(rows, 0.0);
  std::vector<long> clamped(rows, 0), failures(rows, 0);
  std::vector<std::string> errors(rows);

  parallel_for(rows, [&](std::size_t cell) {
    const int i = static_cast<int>(cell) / ct, j = static_cast<int>(cell) % ct;
    const double r0 = double(i) / cr, r1 = double(i + 1) / cr;
    const double t0 = 2 * pi * j / ct, t1 = 2 * pi * (j + 1) / ct;
    std::vector<double>& acc = local[cell];
    acc.assign(nb, 0.0);
    try {
      for (int b = 0; b < m; ++b) {
        const double th = t0 + (t1 - t0) * gx[b];
        const double R = polar_radius(omega, th);
        const Vec2 e(std::cos(th), std::sin(th));
        for (int a = 0; a < m; ++a) {
          const double r = r0 + (r1 - r0) * gx[a];
          const Vec2 x = omega.center + r * R * e;
          const double w = gw[a] * gw[b] * r * R * R * (r1 - r0) * (t1 - t0) * f(x);
          src_mass[cell] += w;
          const Vec2 y = solve_duals(gf, u.jet(x)).Y;
          if (!contains(bins.target, y)) {
            if (distance_to(bins.target, y) > rep.tolerance) {
              ++failures[cell];
              out_mass[cell] += w;
              continue;
            }
            ++clamped[cell];
          }
          acc[bins.locate(y)] += w;
        }
      }
    } catch (const Error& e) {
      errors[cell] = e.what();
    }
  });
  for (int c = 0; c < rows; ++c)
    if (!errors[c].empty()) throw Error("pushforward_histogram: cell " + std::to_string(c) + ": " + errors[c]);

  rep.pushforward.assign(nb, 0.0);
  for (int c = 0; c < rows; ++c) {
    for (int b = 0; b < nb; ++b) rep.pushforward[b] += local[c][b];
    rep.source_mass += src_mass[c];
    rep.outside_mass += out_mass[c];
    rep.clamped += clamped[c];
    rep.containment_failures += failures[c];
  }
  rep.samples = static_cast<long>(rows) * m * m;

  rep.expected.assign(nb, 0.0);
  parallel_for(nb, [&](std::size_t b) { rep.expected[b] = bins.integrate_bin(static_cast<int>(b), fstar); });
  double raw = 0;
  for (double v : rep.expected) raw += v;
  if (!(raw > 0)) throw Error("pushforward_histogram: target intensity has no mass");
  rep.fstar_scale = rep.source_mass / raw;
  rep.mismatch.assign(nb, 0.0);
  for (int b = 0; b < nb; ++b) {
    rep.expected[b] *= rep.fstar_scale;
    rep.target_mass += rep.expected[b];
    rep.binned_mass += rep.pushforward[b];
    rep.mismatch[b] = std::abs(rep.pushforward[b] - rep.expected[b]) / rep.expected[b];
    rep.max_mismatch = std::max(rep.max_mismatch, rep.mismatch[b]);
  }
  rep.mass_identity_error = std::abs(rep.binned_mass + rep.outside_mass - rep.target_mass) / rep.source_mass;

  std::vector<double> gap(boundary_points);
  parallel_for(boundary_points, [&](std::size_t k) {
    const Vec2 xb = boundary_point(omega, 2 * pi * k / boundary_points).position;
    gap[k] = boundary_distance(bins.target, solve_duals(gf, u.jet(xb)).Y);
  });
  for (double v : gap) rep.boundary_gap = std::max(rep.boundary_gap, v);
  return rep;
}

}  // namespace gpje
