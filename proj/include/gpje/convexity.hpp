#pragma once

// Sampled Y-convexity of the source and Y*-convexity of the target.

#include "gpje/conditions.hpp"

namespace gpje {

struct YConvexityReport {
  double margin = std::numeric_limits<double>::infinity();  // min of the boundary form
  std::string worst;
  int samples = 0;
  bool uniformly_convex(double tol = 1e-6) const { return margin >= tol; }
};

/// min over boundary points x, heights u in J and Y in the target of
///   [D_i gamma_j - D_{p_k} A_ij gamma_k] tau_i tau_j,
/// where the first term is the boundary curvature and D_p A is a centered
/// difference in p along gamma.
inline YConvexityReport check_Y_convexity(const DomainSpec& omega, const DomainSpec& omega_star, const Interval& J,
                                          const GeneratingFunction& gf, int n_boundary = 256, int per_point = 4,
                                          std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  YConvexityReport r;
  for (int k = 0; k < n_boundary; ++k) {
    const BoundaryPoint b = boundary_point(omega, 2.0 * pi * k / n_boundary);
    for (int s = 0; s < per_point; ++s) {
      SampledJet sj;
      if (!sample_jet_at(gf, b.position, omega_star, J, rng, sj)) continue;
      const Jet& j = sj.jet;
      const double h = 1e-4 * (1.0 + j.p.norm());
      double form = b.curvature;
      if (gf.model != Model::quadratic_ot) {
        try {
          const Mat2 DA = (solve_duals(gf, {j.x, j.u, j.p + h * b.normal}).A -
                           solve_duals(gf, {j.x, j.u, j.p - h * b.normal}).A) / (2 * h);
          form -= b.tangent.dot(DA * b.tangent);
        } catch (const DualMapError&) {
          continue;
        }
      }
      ++r.samples;
      if (form < r.margin) {
        r.margin = form;
        r.worst = detail::describe(j);
      }
    }
  }
  if (r.samples == 0) throw Error("check_Y_convexity: empty admissible sample set");
  return r;
}

struct YStarConvexityReport {
  bool convex = true;
  double margin = std::numeric_limits<double>::infinity();  // min signed discrete curvature of the traced boundary
  std::string worst;
  int samples = 0;
};

/// Traces the boundary of P(x, u, target) = {p : Y(x, u, p) in target} along
/// rays in p from the jet whose image is the target center, and checks the
/// sign of the discrete (Menger) curvature of the traced closed curve.
inline std::vector<Vec2> trace_p_boundary(const GeneratingFunction& gf, const Vec2& x, double u,
                                          const DomainSpec& omega_star, int n_rays = 128) {
  const Vec2 c = omega_star.center;
  const double zc = dual_gstar(gf, x, c, u);
  const Vec2 p0 = gf.eval(x, c, zc).gx;
  auto inside = [&](const Vec2& p) {
    try {
      const DualEval d = solve_duals(gf, {x, u, p});
      return defining_function(omega_star, d.Y).phi < 0.0;
    } catch (const DualMapError&) {
      return false;
    }
  };
  std::vector<Vec2> pts(n_rays);
  for (int k = 0; k < n_rays; ++k) {
    const Vec2 e(std::cos(2 * pi * k / n_rays), std::sin(2 * pi * k / n_rays));
    double a = 0.0, b = 1e-3;
    while (inside(p0 + b * e)) {
      a = b;
      b *= 1.5;
      if (b > 1e6) throw Error("check_Ystar_convexity: ray in p-space never leaves the target preimage");
    }
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b);
      (inside(p0 + m * e) ? a : b) = m;
    }
    pts[k] = p0 + 0.5 * (a + b) * e;
  }
  return pts;
}

inline double min_menger_curvature(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const Vec2 a = pts[k] - pts[(k + n - 1) % n], b = pts[(k + 1) % n] - pts[k];
    const double kappa = 2.0 * cross(a, b) / (a.norm() * b.norm() * (a + b).norm());
    best = std::min(best, kappa);
  }
  return best;
}

inline YStarConvexityReport check_Ystar_convexity(const DomainSpec& omega_star, const DomainSpec& omega,
                                                  const Interval& J, const GeneratingFunction& gf, int n_samples = 24,
                                                  double tol = 1e-6, std::uint64_t seed = 4, int n_rays = 128) {
  std::mt19937_64 rng(seed);
  const Interval w = finite_window(J);
  std::uniform_real_distribution<double> U(w.lo, w.hi);
  YStarConvexityReport r;
  for (int s = 0, tries = 0; s < n_samples && tries < 50 * n_samples; ++tries) {
    const Vec2 x = s == 0 ? omega.center : sample_in_domain(omega, rng);
    const double u = s == 0 ? 0.5 * (w.lo + w.hi) : U(rng);
    if (!gf.J(x, omega_star.center).contains(u)) continue;
    const auto pts = trace_p_boundary(gf, x, u, omega_star, n_rays);
    const double k = min_menger_curvature(pts);
    if (k < r.margin) {
      r.margin = k;
      std::ostringstream d;
      d << "x=(" << x.x() << ", " << x.y() << ") u=" << u;
      r.worst = d.str();
    }
    ++s;
    ++r.samples;
  }
  if (r.samples == 0) throw Error("check_Ystar_convexity: P is empty for every sample");
  r.convex = r.margin >= -tol;
  return r;
}

}  // namespace gpje
