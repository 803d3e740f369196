#pragma once

#include "gpje/core.hpp"

#include <functional>
#include <string>

namespace gpje {

/// Positive intensity on R^2.
///   constant    a
///   polynomial  a + b.x + x^T C x / 2
///   radial      a + h exp(-|x - m|^2 / (2 s^2))
/// `custom` wraps an arbitrary callable (used for manufactured data).
struct Density {
  enum class Kind { constant, polynomial, radial, custom } kind = Kind::constant;
  double a = 1.0;
  Vec2 b = Vec2::Zero();
  Mat2 C = Mat2::Zero();
  double h = 0.0;
  Vec2 m = Vec2::Zero();
  double s = 1.0;
  double scale = 1.0;  // multiplicative rescaling (energy balance)
  std::function<double(const Vec2&)> fn;

  static Density constant(double a) {
    Density d;
    d.a = a;
    return d;
  }
  static Density polynomial(double a, Vec2 b, Mat2 C) {
    Density d;
    d.kind = Kind::polynomial;
    d.a = a;
    d.b = b;
    d.C = C;
    return d;
  }
  static Density radial(double a, double h, Vec2 m, double s) {
    Density d;
    d.kind = Kind::radial;
    d.a = a;
    d.h = h;
    d.m = m;
    d.s = s;
    return d;
  }
  static Density custom(std::function<double(const Vec2&)> f) {
    Density d;
    d.kind = Kind::custom;
    d.fn = std::move(f);
    return d;
  }

  double operator()(const Vec2& x) const {
    double v = a;
    switch (kind) {
      case Kind::constant: break;
      case Kind::polynomial: v = a + b.dot(x) + 0.5 * x.dot(C * x); break;
      case Kind::radial: v = a + h * std::exp(-(x - m).squaredNorm() / (2 * s * s)); break;
      case Kind::custom: v = fn(x); break;
    }
    return scale * v;
  }
};

inline std::string to_string(Density::Kind k) {
  switch (k) {
    case Density::Kind::constant: return "constant";
    case Density::Kind::polynomial: return "polynomial";
    case Density::Kind::radial: return "radial";
    case Density::Kind::custom: return "custom";
  }
  return "?";
}

}  // namespace gpje
