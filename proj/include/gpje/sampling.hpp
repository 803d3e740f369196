#pragma once

#include "gpje/domains.hpp"
#include "gpje/dualmaps.hpp"

#include <random>

namespace gpje {

/// Uniform point in the closed domain, by rejection from the bounding box.
template <class Rng>
Vec2 sample_in_domain(const DomainSpec& d, Rng& rng) {
  const double R = d.max_radius();
  std::uniform_real_distribution<double> U(-R, R);
  for (;;) {
    const Vec2 x = d.center + Vec2(U(rng), U(rng));
    if (defining_function(d, x).phi <= 0.0) return x;
  }
}

/// Finite window used to draw heights from a possibly unbounded interval.
inline Interval finite_window(const Interval& J, double width = 2.0) {
  Interval w = J;
  if (!std::isfinite(w.lo) && !std::isfinite(w.hi)) return {-0.5 * width, 0.5 * width};
  if (!std::isfinite(w.lo)) w.lo = w.hi - width;
  if (!std::isfinite(w.hi)) w.hi = w.lo + width;
  return w;
}

struct SampledJet {
  Jet jet;
  Vec2 y;
  double z;
};

/// Jet (x, u, p) with x in `source` (or the given point), u in J and Y in the
/// target: draws y in the target and u in J, then z = g*(x, y, u), p = g_x.
template <class Rng>
bool sample_jet_at(const GeneratingFunction& gf, const Vec2& x, const DomainSpec& target, const Interval& J,
                   Rng& rng, SampledJet& out, int attempts = 200) {
  const Interval w = finite_window(J);
  std::uniform_real_distribution<double> U(w.lo, w.hi);
  for (int a = 0; a < attempts; ++a) {
    const Vec2 y = sample_in_domain(target, rng);
    const double u = U(rng);
    if (!gf.J(x, y).contains(u)) continue;
    try {
      const double z = dual_gstar(gf, x, y, u);
      if (!gf.in_gamma(x, y, z)) continue;
      out = {{x, u, gf.eval(x, y, z).gx}, y, z};
      return true;
    } catch (const Error&) {
      continue;
    }
  }
  return false;
}

template <class Rng>
std::vector<SampledJet> sample_jets(const GeneratingFunction& gf, const DomainSpec& source, const DomainSpec& target,
                                    const Interval& J, int n, Rng& rng) {
  std::vector<SampledJet> out;
  out.reserve(n);
  for (int tries = 0; static_cast<int>(out.size()) < n && tries < 20 * n; ++tries) {
    SampledJet s;
    if (sample_jet_at(gf, sample_in_domain(source, rng), target, J, rng, s, 20)) out.push_back(s);
  }
  if (out.empty()) throw Error("no admissible jets with Y in the target and u in J");
  return out;
}

}  // namespace gpje
