#pragma once

#include "gpje/domains.hpp"

namespace gpje {

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - t);
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

/// Integral over the polar cell [r0, r1] x [t0, t1] (relative radius, angle)
/// of a star-shaped domain, with the area element r R(theta)^2 dr dtheta.
template <class F>
double integrate_cell(const DomainSpec& d, double r0, double r1, double t0, double t1, F&& fn, int order = 6) {
  static thread_local std::pair<std::vector<double>, std::vector<double>> gl;
  if (static_cast<int>(gl.first.size()) != order) gl = gauss_legendre01(order);
  double s = 0.0;
  for (int b = 0; b < order; ++b) {
    const double th = t0 + (t1 - t0) * gl.first[b];
    const double R = polar_radius(d, th);
    const Vec2 e(std::cos(th), std::sin(th));
    double inner = 0.0;
    for (int a = 0; a < order; ++a) {
      const double r = r0 + (r1 - r0) * gl.first[a];
      inner += gl.second[a] * r * fn(Vec2(d.center + r * R * e));
    }
    s += gl.second[b] * inner * R * R * (r1 - r0);
  }
  return s * (t1 - t0);
}

/// Integral over the whole domain on n_r x n_t polar cells.
template <class F>
double integrate(const DomainSpec& d, F&& fn, int n_r = 32, int n_t = 64, int order = 6) {
  double s = 0.0;
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_t; ++j)
      s += integrate_cell(d, double(i) / n_r, double(i + 1) / n_r, 2 * pi * j / n_t, 2 * pi * (j + 1) / n_t, fn, order);
  return s;
}

}  // namespace gpje
