#pragma once

// Truncated univariate Taylor series. Coefficient k holds f^(k)(t0)/k!.
// Used to differentiate boundary radius functions R(theta) to third order.

#include <array>
#include <cmath>

namespace gpje {

template <int N>
struct Taylor {
  std::array<double, N + 1> c{};

  Taylor() = default;
  Taylor(double v) { c[0] = v; }  // NOLINT: implicit constant promotion

  static Taylor variable(double t0) {
    Taylor t(t0);
    if constexpr (N >= 1) t.c[1] = 1.0;
    return t;
  }

  double value() const { return c[0]; }

  /// k-th derivative at the expansion point.
  double derivative(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return c[k] * f;
  }

  Taylor operator-() const {
    Taylor r;
    for (int i = 0; i <= N; ++i) r.c[i] = -c[i];
    return r;
  }
  Taylor& operator+=(const Taylor& o) {
    for (int i = 0; i <= N; ++i) c[i] += o.c[i];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (int i = 0; i <= N; ++i) c[i] -= o.c[i];
    return *this;
  }
  Taylor& operator*=(const Taylor& o) { return *this = *this * o; }
  Taylor& operator/=(const Taylor& o) { return *this = *this / o; }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    Taylor r;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; i + j <= N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
  }
  friend Taylor operator/(const Taylor& a, const Taylor& b) {
    Taylor r;
    for (int k = 0; k <= N; ++k) {
      double s = a.c[k];
      for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
      r.c[k] = s / b.c[0];
    }
    return r;
  }
};

template <int N>
Taylor<N> exp(const Taylor<N>& a) {
  Taylor<N> r;
  r.c[0] = std::exp(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
    r.c[k] = s / k;
  }
  return r;
}

template <int N>
Taylor<N> log(const Taylor<N>& a) {
  Taylor<N> r;
  r.c[0] = std::log(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    double s = k * a.c[k];
    for (int j = 1; j < k; ++j) s -= j * r.c[j] * a.c[k - j];
    r.c[k] = s / (k * a.c[0]);
  }
  return r;
}

template <int N>
Taylor<N> pow(const Taylor<N>& a, double e) {
  return exp(log(a) * Taylor<N>(e));
}

template <int N>
Taylor<N> sqrt(const Taylor<N>& a) {
  Taylor<N> r;
  r.c[0] = std::sqrt(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    double s = a.c[k];
    for (int j = 1; j < k; ++j) s -= r.c[j] * r.c[k - j];
    r.c[k] = s / (2.0 * r.c[0]);
  }
  return r;
}

namespace detail {
template <int N>
void sincos(const Taylor<N>& a, Taylor<N>& s, Taylor<N>& co) {
  s = Taylor<N>();
  co = Taylor<N>();
  s.c[0] = std::sin(a.c[0]);
  co.c[0] = std::cos(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    double ss = 0.0, cc = 0.0;
    for (int j = 1; j <= k; ++j) {
      ss += j * a.c[j] * co.c[k - j];
      cc -= j * a.c[j] * s.c[k - j];
    }
    s.c[k] = ss / k;
    co.c[k] = cc / k;
  }
}
}  // namespace detail

template <int N>
Taylor<N> sin(const Taylor<N>& a) {
  Taylor<N> s, c;
  detail::sincos(a, s, c);
  return s;
}

template <int N>
Taylor<N> cos(const Taylor<N>& a) {
  Taylor<N> s, c;
  detail::sincos(a, s, c);
  return c;
}

/// Integer power by repeated multiplication; valid for negative bases.
template <int N>
Taylor<N> ipow(const Taylor<N>& a, int e) {
  Taylor<N> r(1.0);
  for (int i = 0; i < e; ++i) r = r * a;
  return r;
}

inline double ipow(double a, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= a;
  return r;
}

/// Derivative series: coefficients of f' truncated to order N-1.
template <int N>
Taylor<N - 1> derivative_series(const Taylor<N>& a) {
  Taylor<N - 1> r;
  for (int k = 0; k < N; ++k) r.c[k] = (k + 1) * a.c[k + 1];
  return r;
}

}  // namespace gpje
