#pragma once

// Radial manufactured solutions u(x) = a0 + a2 r^2 + a4 r^4, r = |x - c|,
// for flat-target models: the target is Tu(Omega) and the source intensity
// f = f*(Tu) |det DTu| with f* = 1.

#include "gpje/domains.hpp"
#include "gpje/dualmaps.hpp"

namespace gpje {

struct RadialManufactured {
  Vec2 center = Vec2::Zero();
  double a0 = 3.0, a2 = 0.05, a4 = 0.02;

  double value(const Vec2& x) const {
    const double r2 = (x - center).squaredNorm();
    return a0 + a2 * r2 + a4 * r2 * r2;
  }
  Vec2 grad(const Vec2& x) const {
    const Vec2 d = x - center;
    return (2 * a2 + 4 * a4 * d.squaredNorm()) * d;
  }
  Mat2 hess(const Vec2& x) const {
    const Vec2 d = x - center;
    return (2 * a2 + 4 * a4 * d.squaredNorm()) * Mat2::Identity() + 8 * a4 * d * d.transpose();
  }
  Jet jet(const Vec2& x) const { return {x, value(x), grad(x)}; }

  Vec2 map(const GeneratingFunction& gf, const Vec2& x) const { return solve_duals(gf, jet(x)).Y; }

  /// det(D2u - A) / |det E|, the Jacobian of the generated map.
  double jacobian(const GeneratingFunction& gf, const Vec2& x) const {
    const DualEval d = solve_duals(gf, jet(x));
    return (hess(x) - d.A).determinant() / std::abs(d.detE);
  }

  /// Image of a disc of radius R about `center`: a disc about the image of the center.
  DomainSpec target(const GeneratingFunction& gf, double R) const {
    const Vec2 c = map(gf, center);
    return DomainSpec::disc(c, (map(gf, center + Vec2(R, 0)) - c).norm());
  }
};

}  // namespace gpje
