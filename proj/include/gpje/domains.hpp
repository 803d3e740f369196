#pragma once

// Smooth star-shaped planar domains described in polar form around a center:
//   boundary(theta) = center + R(theta) * (cos theta, sin theta).
// Every built-in shape is centrally symmetric, R(theta + pi) = R(theta), which
// the curvilinear grid relies on to difference across the pole.

#include "gpje/core.hpp"
#include "gpje/taylor.hpp"

#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

namespace gpje {

enum class Shape { disc, ellipse, superellipse, lobed };

inline std::string to_string(Shape s) {
  switch (s) {
    case Shape::disc: return "disc";
    case Shape::ellipse: return "ellipse";
    case Shape::superellipse: return "superellipse";
    case Shape::lobed: return "lobed";
  }
  return "?";
}

inline Shape shape_from_string(const std::string& s) {
  if (s == "disc") return Shape::disc;
  if (s == "ellipse") return Shape::ellipse;
  if (s == "superellipse") return Shape::superellipse;
  if (s == "lobed") return Shape::lobed;
  throw DomainError("unknown shape kind '" + s + "'");
}

/// A domain. `radii` are the semi-axes (disc: both equal). `exponent` is the
/// superellipse power q (even, >= 4). The lobed shape R0 (1 + a cos(k theta))
/// is nonconvex for large enough a and exists for negative controls.
struct DomainSpec {
  Shape shape = Shape::disc;
  Vec2 center = Vec2::Zero();
  Vec2 radii = Vec2::Ones();
  int exponent = 2;
  double lobe_amplitude = 0.0;
  int lobe_count = 4;

  static DomainSpec disc(Vec2 c, double r) { return {Shape::disc, c, {r, r}, 2, 0.0, 4}; }
  static DomainSpec ellipse(Vec2 c, Vec2 ab) { return {Shape::ellipse, c, ab, 2, 0.0, 4}; }
  static DomainSpec superellipse(Vec2 c, Vec2 ab, int q) {
    if (q < 4 || q % 2 != 0) throw DomainError("superellipse exponent must be even and >= 4");
    return {Shape::superellipse, c, ab, q, 0.0, 4};
  }
  static DomainSpec lobed(Vec2 c, double r0, double amp, int k) {
    if (k % 2 != 0) throw DomainError("lobed shape needs an even lobe count");
    return {Shape::lobed, c, {r0, r0}, 2, amp, k};
  }

  double max_radius() const {
    const double r = std::max(radii.x(), radii.y());
    return shape == Shape::lobed ? r * (1.0 + std::abs(lobe_amplitude)) : r;
  }
  double diameter() const { return 2.0 * max_radius(); }
};

/// Boundary radius R(theta), generic over double and Taylor series.
template <class T>
T polar_radius(const DomainSpec& d, const T& theta) {
  switch (d.shape) {
    case Shape::disc:
      return T(d.radii.x());
    case Shape::lobed:
      return T(d.radii.x()) * (T(1.0) + T(d.lobe_amplitude) * cos(T(double(d.lobe_count)) * theta));
    case Shape::ellipse:
    case Shape::superellipse: {
      using std::cos;
      using std::sin;
      const int q = d.shape == Shape::ellipse ? 2 : d.exponent;
      const T s = ipow(cos(theta), q) * T(1.0 / ipow(d.radii.x(), q)) +
                  ipow(sin(theta), q) * T(1.0 / ipow(d.radii.y(), q));
      using std::pow;
      return pow(s, -1.0 / q);
    }
  }
  return T(1.0);
}

/// R and its first three theta-derivatives.
struct RadiusJet {
  double r0, r1, r2, r3;
};

inline RadiusJet radius_jet(const DomainSpec& d, double theta) {
  const auto t = polar_radius(d, Taylor<3>::variable(theta));
  return {t.derivative(0), t.derivative(1), t.derivative(2), t.derivative(3)};
}

inline double polar_radius(const DomainSpec& d, double theta) {
  if (d.shape == Shape::disc) return d.radii.x();
  return polar_radius<Taylor<0>>(d, Taylor<0>(theta)).value();
}

struct DefiningValue {
  double phi;
  Vec2 grad;
  Mat2 hess;
};

/// Defining function phi = (r^2 - R(theta)^2) / (2 sqrt(R^2 + R'^2)) in polar
/// coordinates about the center. For a disc of radius R this is
/// (|x - c|^2 - R^2) / (2R); on the boundary |D phi| = 1 for every shape.
/// For non-circular shapes D^2 phi is discontinuous at the center itself.
inline DefiningValue defining_function(const DomainSpec& d, const Vec2& x) {
  const Vec2 xi = x - d.center;
  if (d.shape == Shape::disc) {
    const double R = d.radii.x();
    return {(xi.squaredNorm() - R * R) / (2.0 * R), xi / R, Mat2::Identity() / R};
  }
  const double r = xi.norm();
  const double theta = r > 0 ? std::atan2(xi.y(), xi.x()) : 0.0;
  const auto R3 = polar_radius(d, Taylor<3>::variable(theta));
  Taylor<2> R;
  for (int k = 0; k <= 2; ++k) R.c[k] = R3.c[k];
  const Taylor<2> Rp = derivative_series(R3);
  const Taylor<2> W = sqrt(R * R + Rp * Rp);
  const Taylor<2> a = Taylor<2>(0.5) / W;
  const Taylor<2> b = R * R * Taylor<2>(0.5) / W;
  const double a0 = a.derivative(0), a1 = a.derivative(1), a2 = a.derivative(2);
  const double b1 = b.derivative(1), b2 = b.derivative(2);

  DefiningValue out;
  out.phi = r * r * a0 - b.derivative(0);
  if (r < 1e-300) {
    out.grad = Vec2::Zero();
    out.hess = 2.0 * a0 * Mat2::Identity();
    return out;
  }
  const Vec2 e = xi / r, et = perp(e);
  const double phi_r = 2.0 * r * a0, phi_rr = 2.0 * a0;
  const double phi_t = r * r * a1 - b1, phi_tt = r * r * a2 - b2, phi_rt = 2.0 * r * a1;
  out.grad = phi_r * e + (phi_t / r) * et;
  const double ctt = phi_r / r + phi_tt / (r * r);
  const double crt = phi_rt / r - phi_t / (r * r);
  out.hess = phi_rr * e * e.transpose() + ctt * et * et.transpose() +
             crt * (e * et.transpose() + et * e.transpose());
  return out;
}

inline bool contains(const DomainSpec& d, const Vec2& x) { return defining_function(d, x).phi < 0.0; }

struct BoundaryPoint {
  double theta;
  Vec2 position;
  Vec2 normal;   // unit outer normal
  Vec2 tangent;  // unit tangent, counter-clockwise
  double curvature;
};

inline BoundaryPoint boundary_point(const DomainSpec& d, double theta) {
  const RadiusJet j = radius_jet(d, theta);
  const Vec2 e(std::cos(theta), std::sin(theta));
  const Vec2 et = perp(e);
  const double W = std::hypot(j.r0, j.r1);
  BoundaryPoint b;
  b.theta = theta;
  b.position = d.center + j.r0 * e;
  b.tangent = (j.r1 * e + j.r0 * et) / W;
  b.normal = Vec2(b.tangent.y(), -b.tangent.x());
  b.curvature = (j.r0 * j.r0 + 2.0 * j.r1 * j.r1 - j.r0 * j.r2) / (W * W * W);
  return b;
}

/// Polar coordinates (r relative to the boundary radius, theta) of a point.
inline Vec2 relative_polar(const DomainSpec& d, const Vec2& x) {
  const Vec2 xi = x - d.center;
  const double theta = std::atan2(xi.y(), xi.x());
  return {xi.norm() / polar_radius(d, theta), theta};
}

/// Distance from x to the closed domain (0 inside).
inline double distance_to(const DomainSpec& d, const Vec2& x) {
  if (contains(d, x)) return 0.0;
  if (d.shape == Shape::disc) return (x - d.center).norm() - d.radii.x();
  auto dist2 = [&](double t) { return (boundary_point(d, t).position - x).squaredNorm(); };
  constexpr int n = 720;
  int best = 0;
  double bv = dist2(0.0);
  for (int k = 1; k < n; ++k) {
    const double v = dist2(2.0 * pi * k / n);
    if (v < bv) {
      bv = v;
      best = k;
    }
  }
  // golden-section refinement on the bracketing sample interval
  double a = 2.0 * pi * (best - 1) / n, b = 2.0 * pi * (best + 1) / n;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - g * (b - a), c2 = a + g * (b - a);
  double f1 = dist2(c1), f2 = dist2(c2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      b = c2; c2 = c1; f2 = f1; c1 = b - g * (b - a); f1 = dist2(c1);
    } else {
      a = c1; c1 = c2; f1 = f2; c2 = a + g * (b - a); f2 = dist2(c2);
    }
  }
  return std::sqrt(std::min(f1, f2));
}

/// Area by the periodic trapezoid rule on R^2 / 2 (spectrally accurate).
inline double area(const DomainSpec& d) {
  if (d.shape == Shape::disc) return pi * d.radii.x() * d.radii.x();
  if (d.shape == Shape::ellipse) return pi * d.radii.x() * d.radii.y();
  constexpr int n = 4096;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double R = polar_radius(d, 2.0 * pi * k / n);
    s += R * R;
  }
  return 0.5 * s * 2.0 * pi / n;
}

/// Structured polar-type grid x(r, theta) = c + r R(theta) e(theta) with
/// r_i = (i + 1/2) dr, i = 0..n_r-1, the last ring on the boundary (r = 1),
/// and theta_j = j dtheta. Node k = i * n_theta + j.
struct Grid {
  DomainSpec domain;
  int n_r = 0;
  int n_theta = 0;
  double dr = 0.0;
  double dtheta = 0.0;
  std::vector<Vec2> nodes;
  std::vector<double> measure;
  // Metric terms of the mapping; x_rr vanishes identically.
  std::vector<Vec2> x_r, x_t, x_rt, x_tt;

  int size() const { return n_r * n_theta; }
  int index(int i, int j) const { return i * n_theta + ((j % n_theta) + n_theta) % n_theta; }
  int ring(int k) const { return k / n_theta; }
  int column(int k) const { return k % n_theta; }
  bool is_boundary(int k) const { return ring(k) == n_r - 1; }
  double r_of(int i) const { return (i + 0.5) * dr; }
  double theta_of(int j) const { return j * dtheta; }

  double total_measure() const {
    double s = 0.0;
    for (double m : measure) s += m;
    return s;
  }
};

inline Grid build_grid(const DomainSpec& d, int n_r, int n_theta) {
  if (n_r < 8 || n_theta < 8) throw DomainError("build_grid: N_r and N_theta must be at least 8");
  if (n_theta % 2 != 0) throw DomainError("build_grid: N_theta must be even");
  Grid g;
  g.domain = d;
  g.n_r = n_r;
  g.n_theta = n_theta;
  g.dr = 1.0 / (n_r - 0.5);
  g.dtheta = 2.0 * pi / n_theta;
  const int n = n_r * n_theta;
  g.nodes.resize(n);
  g.measure.resize(n);
  g.x_r.resize(n);
  g.x_t.resize(n);
  g.x_rt.resize(n);
  g.x_tt.resize(n);
  for (int j = 0; j < n_theta; ++j) {
    const double th = g.theta_of(j);
    const RadiusJet R = radius_jet(d, th);
    const Vec2 e(std::cos(th), std::sin(th)), et = perp(e);
    for (int i = 0; i < n_r; ++i) {
      const int k = g.index(i, j);
      const double r = (i == n_r - 1) ? 1.0 : g.r_of(i);
      g.nodes[k] = d.center + r * R.r0 * e;
      g.x_r[k] = R.r0 * e;
      g.x_rt[k] = R.r1 * e + R.r0 * et;
      g.x_t[k] = r * g.x_rt[k];
      g.x_tt[k] = r * (R.r2 * e + 2.0 * R.r1 * et - R.r0 * e);
      const double lo = std::max(0.0, r - 0.5 * g.dr), hi = std::min(1.0, r + 0.5 * g.dr);
      g.measure[k] = R.r0 * R.r0 * g.dtheta * 0.5 * (hi * hi - lo * lo);
    }
  }
  return g;
}

/// CSV export: node index, ring, column, x, y, boundary flag, cell measure.
inline void write_grid_csv(const Grid& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "node,i,j,x,y,boundary,measure\n" << std::setprecision(17);
  for (int k = 0; k < g.size(); ++k)
    out << k << ',' << g.ring(k) << ',' << g.column(k) << ',' << g.nodes[k].x() << ','
        << g.nodes[k].y() << ',' << (g.is_boundary(k) ? 1 : 0) << ',' << g.measure[k] << '\n';
}

}  // namespace gpje
