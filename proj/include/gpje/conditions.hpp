#pragma once

// Sampled verification of the structural conditions on a generating function
// and the gradient-bound constants.

#include "gpje/sampling.hpp"

#include <sstream>

namespace gpje {

enum class Status { holds, holds_strictly, fails, inconclusive };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::holds: return "holds";
    case Status::holds_strictly: return "holds strictly";
    case Status::fails: return "fails";
    case Status::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConditionEntry {
  std::string name;
  Status status = Status::inconclusive;
  double margin = 0.0;
  std::string worst;  // description of the worst sample
  int samples = 0;
  int excluded = 0;

  bool ok() const { return status == Status::holds || status == Status::holds_strictly; }
};

struct A5Constants {
  Interval J0;
  double K0 = 0.0;
  double m0 = NAN;  // reflection: sup of Phi(y) + (x - y).DPhi(y)
  double M0 = NAN;  // refraction: inf of the two bounds
  double kappa_prime = NAN;
  double delta = 0.0;
};

struct CheckOptions {
  int n_samples = 2000;
  int n_directions = 32;
  double tol = 1e-6;
  double fd_scale = 1e-3;  // p-step relative to 1 + |p|
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string describe(const Jet& j) {
  std::ostringstream s;
  s << "x=(" << j.x.x() << ", " << j.x.y() << ") u=" << j.u << " p=(" << j.p.x() << ", " << j.p.y() << ")";
  return s.str();
}

inline Status classify(double margin, double tol, int samples, int excluded, bool strict_possible = true) {
  if (samples == 0 || excluded * 10 > samples + excluded) return Status::inconclusive;
  if (margin > tol && strict_possible) return Status::holds_strictly;
  if (margin >= -tol) return Status::holds;
  return Status::fails;
}

}  // namespace detail

/// Fourth-order form A_ij,kl xi_i xi_j eta_k eta_l = d^2/ds^2 [xi^T A(x, u, p + s eta) xi]
/// minimized over sampled jets and orthogonal unit pairs (xi, eta).
/// "holds strictly" is the strict form A3.
inline ConditionEntry check_A3w(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                                const Interval& J, const CheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  const auto jets = sample_jets(gf, omega, omega_star, J, opt.n_samples, rng);
  ConditionEntry e{"A3w"};
  e.margin = std::numeric_limits<double>::infinity();
  const int nd = std::max(opt.n_directions, 32);
  for (const auto& s : jets) {
    const Jet& j = s.jet;
    const double h = opt.fd_scale * (1.0 + j.p.norm());
    try {
      const Mat2 A0 = solve_duals(gf, j).A;
      for (int k = 0; k < nd; ++k) {
        const double th = pi * k / nd;
        const Vec2 xi(std::cos(th), std::sin(th)), eta = perp(xi);
        const Mat2 Ap = solve_duals(gf, {j.x, j.u, j.p + h * eta}).A;
        const Mat2 Am = solve_duals(gf, {j.x, j.u, j.p - h * eta}).A;
        const double form = xi.dot((Ap - 2.0 * A0 + Am) * xi) / (h * h);
        if (form < e.margin) {
          e.margin = form;
          e.worst = detail::describe(j);
        }
      }
      ++e.samples;
    } catch (const DualMapError&) {
      ++e.excluded;
    }
  }
  e.status = detail::classify(e.margin, opt.tol, e.samples, e.excluded);
  if (e.status == Status::holds_strictly) e.name = "A3";
  return e;
}

/// Sign of D_u A: A4w when nondecreasing in u, A4*w when nonincreasing.
inline std::pair<ConditionEntry, ConditionEntry> check_A4(const GeneratingFunction& gf, const DomainSpec& omega,
                                                         const DomainSpec& omega_star, const Interval& J,
                                                         const CheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed + 1);
  const auto jets = sample_jets(gf, omega, omega_star, J, opt.n_samples, rng);
  ConditionEntry inc{"A4w"}, dec{"A4*w"};
  inc.margin = std::numeric_limits<double>::infinity();
  dec.margin = std::numeric_limits<double>::infinity();
  for (const auto& s : jets) {
    const Jet& j = s.jet;
    const double h = 1e-5 * (1.0 + std::abs(j.u));
    try {
      const Mat2 Du = (solve_duals(gf, {j.x, j.u + h, j.p}).A - solve_duals(gf, {j.x, j.u - h, j.p}).A) / (2 * h);
      const Vec2 ev = sym_eigenvalues(0.5 * (Du + Du.transpose()));
      if (ev(0) < inc.margin) {
        inc.margin = ev(0);
        inc.worst = detail::describe(j);
      }
      if (-ev(1) < dec.margin) {
        dec.margin = -ev(1);
        dec.worst = detail::describe(j);
      }
      ++inc.samples;
      ++dec.samples;
    } catch (const DualMapError&) {
      ++inc.excluded;
      ++dec.excluded;
    }
  }
  inc.status = detail::classify(inc.margin, opt.tol, inc.samples, inc.excluded);
  dec.status = detail::classify(dec.margin, opt.tol, dec.samples, dec.excluded);
  return {inc, dec};
}

/// A2 (g_z < 0 and det E != 0) by direct evaluation, A1 by round-trip
/// residuals, A1* by collision tests on Q(., y, z) over a point cloud in the source.
inline std::vector<ConditionEntry> check_A1_A2_A1star(const GeneratingFunction& gf, const DomainSpec& omega,
                                                      const DomainSpec& omega_star, const Interval& J,
                                                      const CheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed + 2);
  const auto jets = sample_jets(gf, omega, omega_star, J, opt.n_samples, rng);
  ConditionEntry a1{"A1"}, gz{"A2 (g_z < 0)"}, de{"A2 (det E != 0)"}, a1s{"A1*"};
  double worst_res = 0.0;
  gz.margin = de.margin = a1s.margin = std::numeric_limits<double>::infinity();
  for (const auto& s : jets) {
    const GValue v = gf.eval(s.jet.x, s.y, s.z);
    if (-v.gz < gz.margin) {
      gz.margin = -v.gz;
      gz.worst = detail::describe(s.jet);
    }
    ++gz.samples;
    const Mat2 E = v.gxy - v.gxz * v.gy.transpose() / v.gz;
    if (std::abs(E.determinant()) < de.margin) {
      de.margin = std::abs(E.determinant());
      de.worst = detail::describe(s.jet);
    }
    ++de.samples;
    try {
      const auto d = solve_duals(gf, s.jet);
      const double r = std::max((d.Y - s.y).norm(), std::abs(d.Z - s.z) / (1.0 + std::abs(s.z)));
      if (r > worst_res) {
        worst_res = r;
        a1.worst = detail::describe(s.jet);
      }
      ++a1.samples;
    } catch (const DualMapError&) {
      ++a1.excluded;
    }
  }
  a1.margin = 1e-9 - worst_res;
  a1.status = a1.excluded == 0 && worst_res <= 1e-9 ? Status::holds : Status::fails;
  gz.status = gz.margin > 0 ? Status::holds : Status::fails;
  de.status = de.margin > 1e-12 ? Status::holds : Status::fails;

  // Q(., y, z) is one-to-one: no two distinct x with equal images, and the
  // Jacobian -E^T / g_z never degenerates.
  std::vector<Vec2> xs;
  for (int k = 0; k < 150; ++k) xs.push_back(sample_in_domain(omega, rng));
  const int probes = std::min<int>(40, static_cast<int>(jets.size()));
  int collisions = 0;
  for (int q = 0; q < probes; ++q) {
    const auto& s = jets[q];
    std::vector<Vec2> Qs;
    std::vector<Vec2> used;
    for (const Vec2& x : xs) {
      if (!gf.in_formula_range(x, s.y, s.z)) continue;
      const GValue v = gf.eval(x, s.y, s.z);
      Qs.push_back(-v.gy / v.gz);
      used.push_back(x);
      const Mat2 E = v.gxy - v.gxz * v.gy.transpose() / v.gz;
      a1s.margin = std::min(a1s.margin, std::abs(E.determinant() / (v.gz * v.gz)));
    }
    for (std::size_t a = 0; a < Qs.size(); ++a)
      for (std::size_t b = a + 1; b < Qs.size(); ++b)
        if ((Qs[a] - Qs[b]).norm() < 1e-8 && (used[a] - used[b]).norm() > 1e-6) ++collisions;
    ++a1s.samples;
  }
  a1s.status = collisions == 0 && a1s.margin > 1e-12 ? Status::holds : Status::fails;
  if (collisions > 0) a1s.worst = std::to_string(collisions) + " collisions";
  return {a1, gz, de, a1s};
}

namespace detail {

/// Boundary samples of a domain.
inline std::vector<Vec2> boundary_samples(const DomainSpec& d, int n) {
  std::vector<Vec2> out(n);
  for (int k = 0; k < n; ++k) out[k] = boundary_point(d, 2.0 * pi * k / n).position;
  return out;
}

/// max |x - y| over the two closed domains.
inline double max_distance(const DomainSpec& a, const DomainSpec& b) {
  if (a.shape == Shape::disc && b.shape == Shape::disc)
    return (a.center - b.center).norm() + a.radii.x() + b.radii.x();
  const auto xa = boundary_samples(a, 720), xb = boundary_samples(b, 720);
  double best = 0.0;
  for (const auto& p : xa)
    for (const auto& q : xb) best = std::max(best, (p - q).norm());
  return best;
}

/// Dense sample of a closed domain: grid nodes plus boundary points.
inline std::vector<Vec2> dense_samples(const DomainSpec& d) {
  const Grid g = build_grid(d, 48, 96);
  std::vector<Vec2> out = g.nodes;
  const auto b = boundary_samples(d, 720);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Support function max_{x in domain} x.v from boundary samples.
inline double support(const std::vector<Vec2>& boundary, const Vec2& v) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : boundary) best = std::max(best, x.dot(v));
  return best;
}

}  // namespace detail

/// J0 and K0. Constant targets use closed forms; otherwise dense sampling of
/// the target with the x-extremum taken through the source support function.
inline A5Constants constants_A5(const GeneratingFunction& gf, const DomainSpec& omega, const DomainSpec& omega_star,
                                double delta = 0.5) {
  A5Constants c;
  switch (gf.model) {
    case Model::quadratic_ot: {
      c.J0 = {};
      c.K0 = omega_star.center.norm() + omega_star.max_radius();
      if (omega_star.shape != Shape::disc) {
        for (const auto& y : detail::boundary_samples(omega_star, 720)) c.K0 = std::max(c.K0, y.norm());
      }
      break;
    }
    case Model::reflection: {
      if (gf.phi.is_flat()) {
        c.m0 = gf.phi.c;
        c.K0 = 1.0;
      } else {
        const auto bx = detail::boundary_samples(omega, 720);
        c.m0 = -std::numeric_limits<double>::infinity();
        c.K0 = 0.0;
        for (const auto& y : detail::dense_samples(omega_star)) {
          const Vec2 D = gf.phi.grad(y);
          c.m0 = std::max(c.m0, gf.phi.value(y) - y.dot(D) + detail::support(bx, D));
          c.K0 = std::max(c.K0, std::sqrt(1.0 + D.squaredNorm()) + D.norm());
        }
      }
      c.J0 = {c.m0, std::numeric_limits<double>::infinity()};
      break;
    }
    case Model::refraction: {
      const double k = gf.kappa, kp = gf.kappa_prime();
      c.kappa_prime = kp;
      c.delta = k < 1.0 ? delta : 0.0;
      if (k < 1.0 && !(delta > 0.0)) throw Error("constants_A5: refraction with kappa < 1 needs delta > 0");
      c.K0 = k < 1.0 ? 2.0 / (k * kp * delta) : 1.0 / kp;
      const double slope = std::min(k, 1.0) / kp * (1.0 + c.delta);
      if (gf.phi.is_flat()) {
        c.M0 = gf.phi.c - slope * detail::max_distance(omega, omega_star);
      } else {
        const auto bx = detail::boundary_samples(omega, 720);
        double first = std::numeric_limits<double>::infinity(), second = first;
        for (const auto& y : detail::dense_samples(omega_star)) {
          const Vec2 D = gf.phi.grad(y);
          first = std::min(first, gf.phi.value(y) - y.dot(D) - detail::support(bx, -D));
          double far = 0.0;
          for (const auto& x : bx) far = std::max(far, (x - y).norm());
          second = std::min(second, gf.phi.value(y) - slope * far);
        }
        c.M0 = std::min(first, second);
      }
      c.J0 = {-std::numeric_limits<double>::infinity(), c.M0};
      break;
    }
  }
  return c;
}

}  // namespace gpje
