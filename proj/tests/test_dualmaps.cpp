#include "gpje/dualmaps.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gpje;

namespace {

std::vector<GeneratingFunction> variants() {
  const auto tilt = TargetProfile::quadratic(0.1, {0.05, -0.1}, Mat2{{0.2, 0.05}, {0.05, 0.1}});
  return {GeneratingFunction::quadratic_ot(), GeneratingFunction::reflection(),
          GeneratingFunction::refraction(0.5), GeneratingFunction::refraction(2.0),
          GeneratingFunction::reflection(tilt), GeneratingFunction::refraction(0.5, tilt),
          GeneratingFunction::refraction(2.0, tilt)};
}

}  // namespace

TEST(Dualmaps, ReflectionFlatExamples) {
  const auto gf = GeneratingFunction::reflection();
  auto d = solve_duals(gf, {{0, 0}, 1.0, {0, 0}});
  EXPECT_NEAR(d.Z, -2.0, 1e-15);
  EXPECT_NEAR(d.Y.norm(), 0.0, 1e-15);
  d = solve_duals(gf, {{0, 0}, 1.0, {0.6, 0}});
  EXPECT_NEAR(d.Z, -3.125, 1e-14);
  EXPECT_NEAR((d.Y - Vec2(1.875, 0)).norm(), 0.0, 1e-14);
  EXPECT_LT(d.residual, 1e-12);
}

TEST(Dualmaps, QuadraticOtExample) {
  const auto d = solve_duals(GeneratingFunction::quadratic_ot(), {{0.3, 0.4}, 0.0, {1, 2}});
  EXPECT_NEAR((d.Y - Vec2(1, 2)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(d.Z, 1.1, 1e-15);
  EXPECT_NEAR((d.E - Mat2::Identity()).norm(), 0.0, 0.0);
  EXPECT_DOUBLE_EQ(d.detE, 1.0);
  EXPECT_EQ(d.A.norm(), 0.0);
}

TEST(Dualmaps, RefractionExample) {
  const auto gf = GeneratingFunction::refraction(2.0);
  const auto d = solve_duals(gf, {{0, 0}, -1.0, {0, 0}});
  EXPECT_NEAR(d.Z, 1.0, 1e-15);
  EXPECT_NEAR(d.Y.norm(), 0.0, 1e-15);
  EXPECT_NEAR(gf.eval({0, 0}, d.Y, d.Z).g, -1.0, 1e-15);
  EXPECT_NEAR((d.A + Mat2::Identity()).norm(), 0.0, 1e-14);
}

TEST(Dualmaps, MatrixAExamples) {
  EXPECT_NEAR((matrix_A(GeneratingFunction::reflection(), {{0, 0}, 1.0, {0, 0}}) + 0.5 * Mat2::Identity()).norm(),
              0.0, 1e-15);
  EXPECT_EQ(matrix_A(GeneratingFunction::quadratic_ot(), {{0.1, 0.2}, 0.3, {0.4, -0.5}}).norm(), 0.0);
}

TEST(Dualmaps, MatrixEExamples) {
  const auto gf = GeneratingFunction::reflection();
  const auto e = matrix_E(gf, {0.2, 0.3}, {0.2, 0.3}, -2.0);
  EXPECT_NEAR((e.E - 0.5 * Mat2::Identity()).norm(), 0.0, 1e-15);
  EXPECT_NEAR(e.det, 0.25, 1e-15);
  EXPECT_GT(std::abs(matrix_E(gf, {0, 0}, {1, 0}, -2.0).det), 1e-3);
}

TEST(Dualmaps, ScalarB) {
  const auto one = Density::constant(1.0), two = Density::constant(2.0);
  EXPECT_DOUBLE_EQ(scalar_B(GeneratingFunction::quadratic_ot(), {{0.1, 0}, 0, {0.2, 0.1}}, one, one), 1.0);
  EXPECT_DOUBLE_EQ(scalar_B(GeneratingFunction::quadratic_ot(), {{0.1, 0}, 0, {0.2, 0.1}}, two, one), 2.0);
  EXPECT_NEAR(scalar_B(GeneratingFunction::reflection(), {{0, 0}, 1.0, {0, 0}}, one, one), 0.25, 1e-15);
  EXPECT_THROW(scalar_B(GeneratingFunction::quadratic_ot(), {{0, 0}, 0, {0, 0}}, one, Density::constant(1e-9)),
               DualMapError);
}

TEST(Dualmaps, GstarExamples) {
  EXPECT_NEAR(dual_gstar(GeneratingFunction::quadratic_ot(), {0.3, 0.4}, {1, 2}, 0.25), 0.85, 1e-14);
  EXPECT_NEAR(dual_gstar(GeneratingFunction::reflection(), {0.1, 0.1}, {0.1, 0.1}, 1.0), -2.0, 1e-14);
  EXPECT_NEAR(dual_gstar(GeneratingFunction::refraction(2.0), {0.1, 0.1}, {0.1, 0.1}, -1.0), 1.0, 1e-14);
  EXPECT_THROW(dual_gstar(GeneratingFunction::reflection(), {0, 0}, {0, 0}, -1.0), DualMapError);
}

TEST(Dualmaps, GstarMatchesClosedForms) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-1, 1), V(0.05, 3.0);
  const auto refl = GeneratingFunction::reflection();
  for (int s = 0; s < 500; ++s) {
    const Vec2 x(U(rng), U(rng)), y(U(rng), U(rng));
    const double v = V(rng);
    const double r2 = (x - y).squaredNorm();
    EXPECT_NEAR(dual_gstar(refl, x, y, v), -v - std::sqrt(v * v + r2), 1e-12 * (1 + v));
  }
  for (double kappa : {0.5, 2.0}) {
    const auto refr = GeneratingFunction::refraction(kappa);
    const double sgn = kappa * kappa - 1.0, as = std::abs(sgn);
    for (int s = 0; s < 500; ++s) {
      const Vec2 x(U(rng), U(rng)), y(U(rng), U(rng));
      const Interval J = refr.J(x, y);
      const double u = J.hi - V(rng);
      const double m = -u * as, r2 = (x - y).squaredNorm();
      // roots of the quadratic from squaring; keep the one inside I(x, y)
      const double disc = std::sqrt(m * m + sgn * sgn * r2);
      double best = NAN;
      for (double sg : {-1.0, 1.0}) {
        const double z = (m * kappa + sg * disc) / sgn;
        if (refr.in_gamma(x, y, z) && std::abs(refr.eval_unchecked(x, y, z).g - u) < 1e-9) best = z;
      }
      ASSERT_TRUE(std::isfinite(best));
      EXPECT_NEAR(dual_gstar(refr, x, y, u), best, 1e-11 * (1 + std::abs(best)));
    }
  }
}

TEST(Dualmaps, RoundTrip) {
  std::mt19937_64 rng(4);
  for (const auto& gf : variants()) {
    for (int s = 0; s < 2000; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng);
      const GValue v = gf.eval(x, y, z);
      const auto d = solve_duals(gf, {x, v.g, v.gx});
      ASSERT_LT((d.Y - y).norm(), 1e-9) << to_string(gf.model);
      ASSERT_LT(std::abs(d.Z - z), 1e-9 * (1 + std::abs(z)));
      ASSERT_LT(d.residual, 1e-10 * (1 + std::abs(v.g) + v.gx.norm()));
      EXPECT_NEAR(dual_gstar(gf, x, y, v.g), z, 1e-10 * (1 + std::abs(z)));
    }
  }
}

TEST(Dualmaps, EinvIsYp) {
  std::mt19937_64 rng(8);
  const double h = 1e-6;
  for (const auto& gf : variants()) {
    for (int s = 0; s < 100; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng, 0.8);
      const GValue v = gf.eval(x, y, z);
      const Jet jet{x, v.g, v.gx};
      const auto d = solve_duals(gf, jet);
      Mat2 Yp;
      for (int k = 0; k < 2; ++k) {
        Jet a = jet, b = jet;
        a.p(k) += h;
        b.p(k) -= h;
        Yp.col(k) = (solve_duals(gf, a).Y - solve_duals(gf, b).Y) / (2 * h);
      }
      EXPECT_LT((Yp - d.Einv).norm(), 1e-5 * (1 + d.Einv.norm())) << to_string(gf.model);
    }
  }
}

TEST(Dualmaps, QJacobianIdentity) {
  std::mt19937_64 rng(9);
  const double h = 1e-6;
  for (const auto& gf : variants()) {
    for (int s = 0; s < 100; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng, 0.8);
      const GValue v = gf.eval(x, y, z);
      Mat2 Qx;
      for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e(k) = h;
        Qx.col(k) = (map_Q(gf, x + e, y, z) - map_Q(gf, x - e, y, z)) / (2 * h);
      }
      const Mat2 expect = -matrix_E(v).E.transpose() / v.gz;
      EXPECT_LT((Qx - expect).norm(), 1e-5 * (1 + expect.norm())) << to_string(gf.model);
    }
  }
}

TEST(Dualmaps, FlatClosedFormsAgreeWithNewton) {
  std::mt19937_64 rng(12);
  const GeneratingFunction flats[] = {GeneratingFunction::reflection(), GeneratingFunction::refraction(0.5),
                                      GeneratingFunction::refraction(2.0)};
  for (const auto& gf : flats) {
    for (int s = 0; s < 300; ++s) {
      const auto [x, y, z] = sample_triple(gf, rng);
      const GValue v = gf.eval(x, y, z);
      const Jet jet{x, v.g, v.gx};
      const auto a = solve_duals(gf, jet, DualMethod::automatic);
      const auto b = solve_duals(gf, jet, DualMethod::newton);
      EXPECT_LT((a.Y - b.Y).norm(), 1e-10);
      EXPECT_LT(std::abs(a.Z - b.Z), 1e-10 * (1 + std::abs(a.Z)));
    }
  }
}

TEST(Dualmaps, RejectsJetsOutsideU) {
  EXPECT_THROW(solve_duals(GeneratingFunction::reflection(), {{0, 0}, 1.0, {1.2, 0}}), DualMapError);
  EXPECT_THROW(solve_duals(GeneratingFunction::reflection(), {{0, 0}, -1.0, {0, 0}}), DualMapError);
  EXPECT_THROW(solve_duals(GeneratingFunction::refraction(2.0), {{0, 0}, 1.0, {0, 0}}), DualMapError);
  EXPECT_THROW(solve_duals(GeneratingFunction::quadratic_ot(), {{0, 0}, NAN, {0, 0}}), DualMapError);
}
