#pragma once

// Generating functions g(x, y, z) for the three supported models, with exact
// first and second partials. Sign convention: g_z < 0 on the admissible set.
//
//   quadratic OT  g = x.y - z
//   reflection    g = Phi(y) - z/2 + |x - y|^2 / (2z),                  z < 0
//   refraction    g = Phi(y) - (k z + sqrt(z^2 + (k^2 - 1)|x - y|^2)) / |k^2 - 1|
//                 with z > k'|x - y| (k < 1) or z > 0 (k > 1), k' = sqrt|k^2 - 1|

#include "gpje/core.hpp"

#include <random>
#include <sstream>
#include <tuple>

namespace gpje {

enum class ProfileKind { constant, quadratic, bump };

/// Target height profile Phi on R^2. Built-ins are closed-form C^2 functions:
///   constant   Phi = c
///   quadratic  Phi = c + b.y + y^T Q y / 2
///   bump       Phi = c + h exp(-|y - m|^2 / (2 s^2))
struct TargetProfile {
  ProfileKind kind = ProfileKind::constant;
  double c = 0.0;
  Vec2 b = Vec2::Zero();
  Mat2 Q = Mat2::Zero();
  double height = 0.0;
  Vec2 mean = Vec2::Zero();
  double width = 1.0;

  static TargetProfile constant(double c) { return {ProfileKind::constant, c}; }
  static TargetProfile quadratic(double c, Vec2 b, Mat2 Q) {
    return {ProfileKind::quadratic, c, b, 0.5 * (Q + Q.transpose())};
  }
  static TargetProfile bump(double c, double h, Vec2 m, double s) {
    return {ProfileKind::bump, c, Vec2::Zero(), Mat2::Zero(), h, m, s};
  }

  bool is_flat() const { return kind == ProfileKind::constant; }

  double value(const Vec2& y) const {
    switch (kind) {
      case ProfileKind::constant: return c;
      case ProfileKind::quadratic: return c + b.dot(y) + 0.5 * y.dot(Q * y);
      case ProfileKind::bump: return c + height * std::exp(-(y - mean).squaredNorm() / (2 * width * width));
    }
    return c;
  }
  Vec2 grad(const Vec2& y) const {
    switch (kind) {
      case ProfileKind::constant: return Vec2::Zero();
      case ProfileKind::quadratic: return b + Q * y;
      case ProfileKind::bump: {
        const double e = height * std::exp(-(y - mean).squaredNorm() / (2 * width * width));
        return -e * (y - mean) / (width * width);
      }
    }
    return Vec2::Zero();
  }
  Mat2 hess(const Vec2& y) const {
    switch (kind) {
      case ProfileKind::constant: return Mat2::Zero();
      case ProfileKind::quadratic: return Q;
      case ProfileKind::bump: {
        const double s2 = width * width;
        const Vec2 d = y - mean;
        const double e = height * std::exp(-d.squaredNorm() / (2 * s2));
        return e * (d * d.transpose() / (s2 * s2) - Mat2::Identity() / s2);
      }
    }
    return Mat2::Zero();
  }
};

enum class Model { quadratic_ot, reflection, refraction };

inline std::string to_string(Model m) {
  switch (m) {
    case Model::quadratic_ot: return "quadratic_ot";
    case Model::reflection: return "reflection";
    case Model::refraction: return "refraction";
  }
  return "?";
}

inline Model model_from_string(const std::string& s) {
  if (s == "quadratic_ot") return Model::quadratic_ot;
  if (s == "reflection") return Model::reflection;
  if (s == "refraction") return Model::refraction;
  throw DomainError("unknown model '" + s + "'");
}

/// Value and partials of g at one triple. gxy(i, j) = d^2 g / dx_i dy_j.
struct GValue {
  double g;
  Vec2 gx, gy;
  double gz;
  Mat2 gxx, gxy;
  Vec2 gxz;
};

struct GeneratingFunction {
  Model model = Model::quadratic_ot;
  double kappa = 2.0;          // refraction index ratio n1 / n2
  TargetProfile phi;           // target height profile (reflection, refraction)
  Interval z_window;           // user window intersected with the model's z-range

  static GeneratingFunction quadratic_ot() { return {Model::quadratic_ot}; }
  static GeneratingFunction reflection(TargetProfile p = TargetProfile::constant(0.0)) {
    return {Model::reflection, 2.0, p};
  }
  static GeneratingFunction refraction(double kappa, TargetProfile p = TargetProfile::constant(0.0)) {
    if (!(kappa > 0.0) || kappa == 1.0) throw DomainError("refraction needs kappa > 0, kappa != 1");
    return {Model::refraction, kappa, p};
  }

  double kappa_prime() const { return std::sqrt(std::abs(kappa * kappa - 1.0)); }
  bool flat_target() const { return model == Model::quadratic_ot || phi.is_flat(); }

  /// Open z-interval on which the closed form is defined (before the J(x,y)
  /// restriction), intersected with the user window.
  Interval formula_z_range(const Vec2& x, const Vec2& y) const {
    Interval r;
    switch (model) {
      case Model::quadratic_ot: break;
      case Model::reflection: r.hi = 0.0; break;
      case Model::refraction:
        r.lo = kappa < 1.0 ? kappa_prime() * (x - y).norm() : 0.0;
        break;
    }
    return r.intersect(z_window);
  }

  /// I(x, y): z-values with (x, y, z) in Gamma, i.e. the formula range further
  /// restricted so that g(x, y, z) lies in J(x, y).
  Interval I(const Vec2& x, const Vec2& y) const {
    Interval r = formula_z_range(x, y);
    const Vec2 d = x - y;
    switch (model) {
      case Model::quadratic_ot: break;
      case Model::reflection: {
        // g - (Phi + d.DPhi) = -z/2 + |d|^2/(2z) - d.DPhi > 0 for z < 0
        const double a = d.dot(phi.grad(y));
        r.hi = std::min(r.hi, -a - std::sqrt(a * a + d.squaredNorm()));
        break;
      }
      case Model::refraction: {
        // g < Phi + d.DPhi  <=>  k z + R > -|s| d.DPhi, the left side increasing in z
        const double s = kappa * kappa - 1.0;
        const double target = -std::abs(s) * d.dot(phi.grad(y));
        auto lhs = [&](double z) { return kappa * z + std::sqrt(z * z + s * d.squaredNorm()); };
        const double lo = std::max(r.lo, kappa < 1.0 ? kappa_prime() * d.norm() : 0.0);
        if (lhs(lo) < target) {
          double hi = std::max(1.0, 2.0 * lo);
          while (lhs(hi) < target) hi *= 2.0;
          r.lo = std::max(r.lo, find_root([&](double z) { return lhs(z) - target; }, lo, hi));
        }
        break;
      }
    }
    return r;
  }

  /// J(x, y) = g(x, y, I(x, y)).
  Interval J(const Vec2& x, const Vec2& y) const {
    const Vec2 d = x - y;
    Interval j;
    switch (model) {
      case Model::quadratic_ot: break;
      case Model::reflection:
        j.lo = phi.value(y) + d.dot(phi.grad(y));
        break;
      case Model::refraction:
        j.hi = std::min(phi.value(y) + d.dot(phi.grad(y)),
                        phi.value(y) - std::min(kappa, 1.0) / kappa_prime() * d.norm());
        break;
    }
    if (std::isfinite(z_window.hi)) j.lo = std::max(j.lo, eval_unchecked(x, y, z_window.hi).g);
    if (std::isfinite(z_window.lo)) j.hi = std::min(j.hi, eval_unchecked(x, y, z_window.lo).g);
    return j;
  }

  bool in_formula_range(const Vec2& x, const Vec2& y, double z) const {
    return formula_z_range(x, y).contains(z);
  }

  bool in_gamma(const Vec2& x, const Vec2& y, double z) const {
    if (!in_formula_range(x, y, z)) return false;
    return J(x, y).contains(eval_unchecked(x, y, z).g);
  }

  /// Value and partials. Throws DomainError naming the violated constraint
  /// when z is outside the model's formula range.
  GValue eval(const Vec2& x, const Vec2& y, double z) const {
    if (!std::isfinite(z)) throw DomainError("eval_g: z is not finite");
    const Interval r = formula_z_range(x, y);
    if (!r.contains(z)) {
      std::ostringstream msg;
      msg << "eval_g(" << to_string(model) << "): z = " << z << " violates ";
      if (z_window.contains(z)) {
        switch (model) {
          case Model::reflection: msg << "z < 0"; break;
          case Model::refraction:
            msg << (kappa < 1.0 ? "z > kappa'|x - y|" : "z > 0");
            break;
          default: msg << "the z-range"; break;
        }
      } else {
        msg << "the user z-window (" << z_window.lo << ", " << z_window.hi << ")";
      }
      throw DomainError(msg.str());
    }
    return eval_unchecked(x, y, z);
  }

  GValue eval_unchecked(const Vec2& x, const Vec2& y, double z) const {
    GValue v;
    const Vec2 d = x - y;
    const Mat2 I2 = Mat2::Identity();
    switch (model) {
      case Model::quadratic_ot:
        v.g = x.dot(y) - z;
        v.gx = y;
        v.gy = x;
        v.gz = -1.0;
        v.gxx = Mat2::Zero();
        v.gxy = I2;
        v.gxz = Vec2::Zero();
        break;
      case Model::reflection: {
        v.g = phi.value(y) - 0.5 * z + d.squaredNorm() / (2.0 * z);
        v.gx = d / z;
        v.gy = phi.grad(y) - d / z;
        v.gz = -0.5 - d.squaredNorm() / (2.0 * z * z);
        v.gxx = I2 / z;
        v.gxy = -I2 / z;
        v.gxz = -d / (z * z);
        break;
      }
      case Model::refraction: {
        const double s = kappa * kappa - 1.0;
        const double c = 1.0 / std::abs(s);
        const double R = std::sqrt(std::max(0.0, z * z + s * d.squaredNorm()));
        v.g = phi.value(y) - c * (kappa * z + R);
        v.gx = -c * s * d / R;
        v.gy = phi.grad(y) + c * s * d / R;
        v.gz = -c * (kappa + z / R);
        v.gxx = -c * s * (I2 / R - s * d * d.transpose() / (R * R * R));
        v.gxy = -v.gxx;
        v.gxz = c * s * z * d / (R * R * R);
        break;
      }
    }
    return v;
  }
};

inline GValue eval_g(const GeneratingFunction& gf, const Vec2& x, const Vec2& y, double z) {
  return gf.eval(x, y, z);
}

inline Interval interval_J(const GeneratingFunction& gf, const Vec2& x, const Vec2& y) { return gf.J(x, y); }

/// Random triple inside Gamma with x, y in the box [-box, box]^2.
template <class Rng>
std::tuple<Vec2, Vec2, double> sample_triple(const GeneratingFunction& gf, Rng& rng, double box = 1.0) {
  std::uniform_real_distribution<double> U(-box, box), W(0.2, 2.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Vec2 x(U(rng), U(rng)), y(U(rng), U(rng));
    const Interval I = gf.I(x, y);
    if (I.empty()) continue;
    double z;
    if (std::isfinite(I.lo) && std::isfinite(I.hi)) {
      z = I.lo + (I.hi - I.lo) * std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    } else if (std::isfinite(I.hi)) {
      z = I.hi - W(rng);
    } else if (std::isfinite(I.lo)) {
      z = I.lo + W(rng);
    } else {
      z = U(rng) * 2.0;
    }
    if (gf.in_gamma(x, y, z)) return {x, y, z};
  }
  throw Error("sample_triple: could not draw an admissible triple");
}

/// Largest relative discrepancy between closed-form partials and centered
/// finite differences, over random admissible samples.
inline double fd_check(const GeneratingFunction& gf, int samples, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const double h = 1e-5;
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (int s = 0; s < samples; ++s) {
    const auto [x, y, z] = sample_triple(gf, rng);
    const GValue v = gf.eval(x, y, z);
    for (int i = 0; i < 2; ++i) {
      const Vec2 ei = Vec2::Unit(i) * h;
      const GValue xp = gf.eval(x + ei, y, z), xm = gf.eval(x - ei, y, z);
      const GValue yp = gf.eval(x, y + ei, z), ym = gf.eval(x, y - ei, z);
      worst = std::max(worst, rel(v.gx(i), (xp.g - xm.g) / (2 * h)));
      worst = std::max(worst, rel(v.gy(i), (yp.g - ym.g) / (2 * h)));
      for (int k = 0; k < 2; ++k) {
        worst = std::max(worst, rel(v.gxx(k, i), (xp.gx(k) - xm.gx(k)) / (2 * h)));
        worst = std::max(worst, rel(v.gxy(k, i), (yp.gx(k) - ym.gx(k)) / (2 * h)));
      }
    }
    const GValue zp = gf.eval(x, y, z + h), zm = gf.eval(x, y, z - h);
    worst = std::max(worst, rel(v.gz, (zp.g - zm.g) / (2 * h)));
    for (int k = 0; k < 2; ++k) worst = std::max(worst, rel(v.gxz(k), (zp.gx(k) - zm.gx(k)) / (2 * h)));
  }
  return worst;
}

}  // namespace gpje
