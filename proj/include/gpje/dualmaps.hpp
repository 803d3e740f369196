#pragma once

// Dual quantities of a generating function: for a one-jet (x, u, p) the point
// (Y, Z) solving g(x, Y, Z) = u, g_x(x, Y, Z) = p, together with
// E = g_xy - g_xz (x) g_y / g_z, A = g_xx(x, Y, Z), Q = -g_y / g_z.

#include "gpje/densities.hpp"
#include "gpje/genfun.hpp"

#include <sstream>

namespace gpje {

struct Jet {
  Vec2 x;
  double u;
  Vec2 p;
};

struct EMatrix {
  Mat2 E;
  Mat2 Einv;
  double det;
};

struct DualEval {
  Vec2 Y;
  double Z;
  Mat2 E, Einv;
  double detE;
  Mat2 A;
  Vec2 Q;
  double residual;  // max of |g - u| and |g_x - p| at (x, Y, Z)
};

enum class DualMethod { automatic, newton };

inline EMatrix matrix_E(const GValue& v) {
  EMatrix e;
  e.E = v.gxy - v.gxz * v.gy.transpose() / v.gz;
  e.det = e.E.determinant();
  if (!(std::abs(e.det) > 1e-12)) throw DualMapError("matrix_E: |det E| below 1e-12");
  e.Einv = e.E.inverse();
  return e;
}

inline EMatrix matrix_E(const GeneratingFunction& gf, const Vec2& x, const Vec2& y, double z) {
  return matrix_E(gf.eval(x, y, z));
}

inline Vec2 map_Q(const GeneratingFunction& gf, const Vec2& x, const Vec2& y, double z) {
  const GValue v = gf.eval(x, y, z);
  return -v.gy / v.gz;
}

namespace detail {

inline std::string jet_str(const Jet& j) {
  std::ostringstream s;
  s << "(x=(" << j.x.x() << "," << j.x.y() << "), u=" << j.u << ", p=(" << j.p.x() << "," << j.p.y() << "))";
  return s.str();
}

/// Closed-form duals for flat targets with Phi frozen at `level`.
inline bool flat_duals(const GeneratingFunction& gf, const Jet& jet, double level, Vec2& Y, double& Z) {
  const double p2 = jet.p.squaredNorm();
  switch (gf.model) {
    case Model::quadratic_ot:
      Y = jet.p;
      Z = jet.x.dot(jet.p) - jet.u;
      return true;
    case Model::reflection:
      if (!(p2 < 1.0) || !(jet.u > level)) return false;
      Z = 2.0 * (level - jet.u) / (1.0 - p2);
      Y = jet.x - Z * jet.p;
      return true;
    case Model::refraction: {
      const double k = gf.kappa, a = 1.0 - k * k;
      const double w2 = 1.0 + a * p2;
      if (!(w2 > 0.0) || !(jet.u < level)) return false;
      const double w = std::sqrt(w2);
      Z = std::abs(a) * (level - jet.u) * w / (1.0 + k * w);
      const double sgn = k * k - 1.0 > 0 ? 1.0 : -1.0;
      Y = jet.x + sgn * Z * jet.p / w;
      return true;
    }
  }
  return false;
}

/// g_x does not involve Phi, so for a given Z the equation g_x = p fixes Y:
///   reflection  Y = x - Z p,   refraction  Y = x + sign(kappa^2 - 1) Z p / w.
/// What remains is the scalar equation g(x, Y(Z), Z) = u, solved by a
/// geometric scan for sign changes followed by Brent. Returns the first
/// root with (x, Y, Z) in Gamma.
inline bool reduced_duals(const GeneratingFunction& gf, const Jet& jet, Vec2& Y, double& Z) {
  const double p2 = jet.p.squaredNorm();
  std::function<Vec2(double)> y_of;
  double sign_z = 1.0;
  if (gf.model == Model::reflection) {
    sign_z = -1.0;
    y_of = [&](double z) -> Vec2 { return jet.x - z * jet.p; };
  } else if (gf.model == Model::refraction) {
    const double a = 1.0 - gf.kappa * gf.kappa;
    if (!(1.0 + a * p2 > 0.0)) return false;
    const double w = std::sqrt(1.0 + a * p2);
    const double sgn = a < 0 ? 1.0 : -1.0;
    y_of = [&, w, sgn](double z) -> Vec2 { return jet.x + sgn * z * jet.p / w; };
  } else {
    return false;
  }
  auto F = [&](double zeta) {
    const double z = sign_z * zeta;
    return gf.eval_unchecked(jet.x, y_of(z), z).g - jet.u;
  };
  double prev_zeta = 1e-9, prev = F(prev_zeta);
  for (int k = 1; k < 400; ++k) {
    const double zeta = 1e-9 * std::pow(1.15, k);
    const double cur = F(zeta);
    if (std::isfinite(prev) && std::isfinite(cur) && (prev > 0) != (cur > 0)) {
      const double zr = find_root(F, prev_zeta, zeta, 1e-15);
      const double z = sign_z * zr;
      const Vec2 y = y_of(z);
      if (gf.in_gamma(jet.x, y, z)) {
        Y = y;
        Z = z;
        return true;
      }
    }
    prev_zeta = zeta;
    prev = cur;
    if (zeta > 1e9) break;
  }
  return false;
}

}  // namespace detail

/// Completes a DualEval from (Y, Z): E, A, Q and the generating-equation residual.
inline DualEval finish_duals(const GeneratingFunction& gf, const Jet& jet, const Vec2& Y, double Z) {
  const GValue v = gf.eval(jet.x, Y, Z);
  DualEval d;
  d.Y = Y;
  d.Z = Z;
  d.residual = std::max(std::abs(v.g - jet.u), (v.gx - jet.p).cwiseAbs().maxCoeff());
  const EMatrix e = matrix_E(v);
  d.E = e.E;
  d.Einv = e.Einv;
  d.detE = e.det;
  d.Q = -v.gy / v.gz;
  switch (gf.model) {
    case Model::quadratic_ot:
      d.A = Mat2::Zero();
      break;
    case Model::reflection:
      d.A = Mat2::Identity() / Z;
      break;
    case Model::refraction: {
      const double a = 1.0 - gf.kappa * gf.kappa;
      const double w = std::sqrt(1.0 + a * jet.p.squaredNorm());
      d.A = (a > 0 ? 1.0 : -1.0) * w / Z * (Mat2::Identity() + a * jet.p * jet.p.transpose());
      break;
    }
  }
  return d;
}

namespace detail {

/// Damped Newton on (g_x - p, g - u) = 0 from (Y, Z). Returns false on stagnation.
inline bool newton_duals(const GeneratingFunction& gf, const Jet& jet, Vec2& Y, double& Z) {
  auto residual_of = [&](const Vec2& y, double z, Eigen::Vector3d& F, GValue& v) {
    if (!gf.in_formula_range(jet.x, y, z)) return false;
    v = gf.eval_unchecked(jet.x, y, z);
    F << v.gx - jet.p, v.g - jet.u;
    return F.allFinite();
  };
  Eigen::Vector3d F;
  GValue v;
  if (!residual_of(Y, Z, F, v)) return false;
  const double scale = 1.0 + std::abs(jet.u) + jet.p.norm();
  for (int it = 0; it < 100 && F.cwiseAbs().maxCoeff() > 1e-14 * scale; ++it) {
    Eigen::Matrix3d Jm;
    Jm.block<2, 2>(0, 0) = v.gxy;
    Jm.block<2, 1>(0, 2) = v.gxz;
    Jm.block<1, 2>(2, 0) = v.gy.transpose();
    Jm(2, 2) = v.gz;
    const Eigen::Vector3d step = Jm.partialPivLu().solve(-F);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Vec2 y1 = Y + alpha * step.head<2>();
      const double z1 = Z + alpha * step(2);
      Eigen::Vector3d F1;
      GValue v1;
      if (residual_of(y1, z1, F1, v1) && F1.norm() < (1.0 - 1e-4 * alpha) * F.norm()) {
        Y = y1;
        Z = z1;
        F = F1;
        v = v1;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return F.cwiseAbs().maxCoeff() <= 1e-10 * scale && gf.in_gamma(jet.x, Y, Z);
}

}  // namespace detail

/// Solves the generating equations for (Y, Z). Flat targets and quadratic OT use
/// closed forms; otherwise (or with DualMethod::newton) damped Newton on the
/// three-dimensional system, seeded from the flat closed form with Phi frozen
/// at Phi(x). When that seed is inadmissible or Newton stalls, the seed comes
/// from the scalar reduction instead.
inline DualEval solve_duals(const GeneratingFunction& gf, const Jet& jet,
                            DualMethod method = DualMethod::automatic) {
  if (!std::isfinite(jet.u) || !jet.p.allFinite() || !jet.x.allFinite())
    throw DualMapError("solve_duals: non-finite jet");
  Vec2 Y;
  double Z;
  const double level = gf.model == Model::quadratic_ot ? 0.0 : gf.phi.value(jet.x);
  const bool seeded = detail::flat_duals(gf, jet, level, Y, Z);
  const bool closed = gf.model == Model::quadratic_ot || (gf.phi.is_flat() && method == DualMethod::automatic);
  if (closed && !seeded)
    throw DualMapError("solve_duals: jet outside the admissible set " + detail::jet_str(jet));
  if (!closed) {
    bool ok = seeded && detail::newton_duals(gf, jet, Y, Z);
    if (!ok) {
      ok = detail::reduced_duals(gf, jet, Y, Z) && detail::newton_duals(gf, jet, Y, Z);
      if (!ok) throw DualMapError("solve_duals: no admissible solution (jet outside U?) " + detail::jet_str(jet));
    }
  }
  if (!gf.in_gamma(jet.x, Y, Z))
    throw DualMapError("solve_duals: (x, Y, Z) not admissible for " + detail::jet_str(jet));
  return finish_duals(gf, jet, Y, Z);
}

inline Mat2 matrix_A(const GeneratingFunction& gf, const Jet& jet) { return solve_duals(gf, jet).A; }

inline constexpr double density_floor = 1e-8;

/// B = |det E| f(x) / f*(Y).
inline double scalar_B(const GeneratingFunction& gf, const Jet& jet, const Density& f, const Density& fstar) {
  const DualEval d = solve_duals(gf, jet);
  const double fs = fstar(d.Y);
  if (!(fs > density_floor)) throw DualMapError("scalar_B: f*(Y) below the positive floor");
  return std::abs(d.detE) * f(jet.x) / fs;
}

/// z = g*(x, y, u), the root of g(x, y, z) = u. Bracketing by geometric steps
/// inside the formula range, Brent, then one Newton polish.
inline double dual_gstar(const GeneratingFunction& gf, const Vec2& x, const Vec2& y, double u) {
  if (!gf.J(x, y).contains(u)) {
    std::ostringstream s;
    s << "dual_gstar: u = " << u << " outside J(x, y)";
    throw DualMapError(s.str());
  }
  const Interval r = gf.I(x, y);
  auto f = [&](double z) { return gf.eval_unchecked(x, y, z).g - u; };
  double z0;
  if (std::isfinite(r.lo) && std::isfinite(r.hi)) z0 = 0.5 * (r.lo + r.hi);
  else if (std::isfinite(r.hi)) z0 = r.hi - 1.0;
  else if (std::isfinite(r.lo)) z0 = r.lo + 1.0;
  else z0 = 0.0;
  const double f0 = f(z0);
  if (f0 == 0.0) return z0;
  // g decreases in z: f0 > 0 means the root lies above z0
  const double edge = f0 > 0 ? r.hi : r.lo;
  double a = z0, b = z0;
  bool bracketed = false;
  for (int k = 0; k < 200; ++k) {
    if (std::isfinite(edge)) b = edge - (edge - z0) * std::ldexp(1.0, -(k + 1));
    else b = z0 + (f0 > 0 ? 1.0 : -1.0) * std::ldexp(1.0, k);
    if ((f(b) > 0) != (f0 > 0)) {
      bracketed = true;
      break;
    }
    a = b;
  }
  if (!bracketed) throw DualMapError("dual_gstar: no sign change inside I(x, y)");
  double z = find_root(f, a, b, 1e-15);
  const GValue v = gf.eval_unchecked(x, y, z);
  const double zn = z - (v.g - u) / v.gz;
  if (r.contains(zn) && std::abs(f(zn)) <= std::abs(v.g - u)) z = zn;
  return z;
}

}  // namespace gpje
