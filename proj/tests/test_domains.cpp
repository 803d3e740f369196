#include "gpje/domains.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gpje;

TEST(Domains, UnitDiscDefiningFunction) {
  const auto d = DomainSpec::disc({0, 0}, 1.0);
  auto c = defining_function(d, {0, 0});
  EXPECT_DOUBLE_EQ(c.phi, -0.5);
  EXPECT_DOUBLE_EQ(c.grad.norm(), 0.0);
  auto b = defining_function(d, {1, 0});
  EXPECT_DOUBLE_EQ(b.phi, 0.0);
  EXPECT_NEAR((b.grad - Vec2(1, 0)).norm(), 0.0, 1e-15);
}

TEST(Domains, EllipseBoundaryZero) {
  const auto d = DomainSpec::ellipse({0, 0}, {2, 1});
  EXPECT_NEAR(defining_function(d, {2, 0}).phi, 0.0, 1e-14);
  EXPECT_NEAR(defining_function(d, {0, 1}).phi, 0.0, 1e-14);
  EXPECT_LT(defining_function(d, {1.9, 0}).phi, 0.0);
  EXPECT_GT(defining_function(d, {0, 1.1}).phi, 0.0);
}

TEST(Domains, DefiningFunctionDerivativesMatchFiniteDifferences) {
  const DomainSpec shapes[] = {DomainSpec::ellipse({0.1, -0.2}, {1.5, 0.8}),
                               DomainSpec::superellipse({0, 0}, {1, 1.2}, 4),
                               DomainSpec::lobed({0, 0}, 1.0, 0.2, 4)};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.4, 1.4);
  const double h = 1e-5;
  for (const auto& d : shapes) {
    for (int s = 0; s < 200; ++s) {
      const Vec2 x(U(rng), U(rng));
      if ((x - d.center).norm() < 0.4) continue;
      const auto v = defining_function(d, x);
      for (int a = 0; a < 2; ++a) {
        Vec2 e = Vec2::Zero();
        e(a) = h;
        const auto p = defining_function(d, x + e), m = defining_function(d, x - e);
        EXPECT_NEAR(v.grad(a), (p.phi - m.phi) / (2 * h), 1e-7);
        EXPECT_NEAR((v.hess.col(a) - (p.grad - m.grad) / (2 * h)).norm(), 0.0, 1e-6);
      }
    }
  }
}

TEST(Domains, UnitGradientOnBoundary) {
  const DomainSpec shapes[] = {DomainSpec::ellipse({0, 0}, {2, 1}),
                               DomainSpec::superellipse({0.3, 0}, {1, 1}, 6),
                               DomainSpec::lobed({0, 0}, 1.0, 0.3, 6)};
  for (const auto& d : shapes) {
    for (int k = 0; k < 64; ++k) {
      const auto b = boundary_point(d, 2 * pi * k / 64 + 0.01);
      const auto v = defining_function(d, b.position);
      EXPECT_NEAR(v.phi, 0.0, 1e-12);
      EXPECT_NEAR(v.grad.norm(), 1.0, 1e-12);
      EXPECT_NEAR((v.grad - b.normal).norm(), 0.0, 1e-12);
      EXPECT_NEAR(b.normal.dot(b.tangent), 0.0, 1e-14);
    }
  }
}

TEST(Domains, StarShapedSignChange) {
  const auto d = DomainSpec::superellipse({0, 0}, {1, 0.7}, 4);
  for (int k = 0; k < 90; ++k) {
    const Vec2 e(std::cos(0.07 * k), std::sin(0.07 * k));
    int changes = 0;
    double prev = defining_function(d, 0.001 * e).phi;
    for (int s = 1; s <= 400; ++s) {
      const double v = defining_function(d, 0.005 * s * e).phi;
      if ((v > 0) != (prev > 0)) ++changes;
      prev = v;
    }
    EXPECT_EQ(changes, 1);
  }
}

TEST(Domains, Curvature) {
  const auto disc = DomainSpec::disc({1, 1}, 2.0);
  EXPECT_NEAR(boundary_point(disc, 0.3).curvature, 0.5, 1e-14);
  const auto e = DomainSpec::ellipse({0, 0}, {2, 1});
  EXPECT_NEAR(boundary_point(e, 0.0).curvature, 2.0, 1e-12);  // a / b^2
  EXPECT_NEAR(boundary_point(e, pi / 2).curvature, 0.25, 1e-12);
  const auto lobed = DomainSpec::lobed({0, 0}, 1.0, 0.3, 4);
  double kmin = 1e9;
  for (int k = 0; k < 400; ++k) kmin = std::min(kmin, boundary_point(lobed, 2 * pi * k / 400).curvature);
  EXPECT_LT(kmin, 0.0);
}

TEST(Domains, GridSmall) {
  const auto g = build_grid(DomainSpec::disc({0, 0}, 1.0), 8, 8);
  EXPECT_EQ(g.size(), 64);
  for (int k = 0; k < g.size(); ++k)
    if (g.is_boundary(k)) EXPECT_NEAR(g.nodes[k].norm(), 1.0, 1e-15);
}

TEST(Domains, GridMeasure) {
  const auto g = build_grid(DomainSpec::disc({0, 0}, 1.0), 64, 64);
  EXPECT_NEAR(g.total_measure(), pi, 1e-3 * pi);
  const auto e = build_grid(DomainSpec::ellipse({0, 0}, {2, 1}), 64, 64);
  EXPECT_NEAR(e.total_measure(), area(e.domain), 1e-3 * area(e.domain));
}

TEST(Domains, SuperellipseBoundaryResidual) {
  const auto d = DomainSpec::superellipse({0, 0}, {1, 1}, 4);
  const auto g = build_grid(d, 16, 32);
  for (int k = 0; k < g.size(); ++k) {
    if (!g.is_boundary(k)) continue;
    const Vec2 x = g.nodes[k];
    EXPECT_NEAR(std::pow(x.x(), 4) + std::pow(x.y(), 4) - 1.0, 0.0, 1e-10);
    EXPECT_NEAR(defining_function(d, x).phi, 0.0, 1e-12);
  }
}

TEST(Domains, GridRejectsBadSizes) {
  const auto d = DomainSpec::disc({0, 0}, 1.0);
  EXPECT_THROW(build_grid(d, 7, 8), DomainError);
  EXPECT_THROW(build_grid(d, 8, 9), DomainError);
  EXPECT_THROW(DomainSpec::superellipse({0, 0}, {1, 1}, 3), DomainError);
}

TEST(Domains, DistanceAndArea) {
  const auto e = DomainSpec::ellipse({0, 0}, {2, 1});
  EXPECT_NEAR(distance_to(e, {3, 0}), 1.0, 1e-9);
  EXPECT_NEAR(distance_to(e, {0, 2}), 1.0, 1e-9);
  EXPECT_EQ(distance_to(e, {0.5, 0.5}), 0.0);
  const auto s = DomainSpec::superellipse({0, 0}, {1, 1}, 4);
  double tr = 0;
  for (int k = 0; k < 20000; ++k) {
    const double R = polar_radius(s, 2 * pi * (k + 0.5) / 20000);
    tr += R * R;
  }
  EXPECT_NEAR(area(s), 0.5 * tr * 2 * pi / 20000, 1e-10);
}
