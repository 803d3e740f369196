#include "gpje/manufactured.hpp"
#include "gpje/verify.hpp"

#include <gtest/gtest.h>

using namespace gpje;

namespace {

const DomainSpec unit = DomainSpec::disc({0, 0}, 1.0);

std::vector<double> nodal(const Grid& g, const RadialManufactured& m) {
  std::vector<double> u(g.size());
  for (int k = 0; k < g.size(); ++k) u[k] = m.value(g.nodes[k]);
  return u;
}

}  // namespace

TEST(Verify, InterpolantConverges) {
  const RadialManufactured m;
  double prev_v = 0, prev_g = 0;
  for (int n : {16, 32, 64}) {
    const Grid g = build_grid(unit, n, n);
    const FieldInterpolant I(g, nodal(g, m));
    double ev = 0, eg = 0;
    for (const auto& x : sample_points(unit, 4000, 5)) {
      const Jet j = I.jet(x);
      ev = std::max(ev, std::abs(j.u - m.value(x)));
      eg = std::max(eg, (j.p - m.grad(x)).norm());
    }
    if (prev_v > 0) {
      EXPECT_GT(prev_v / ev, 6.0) << n;
      EXPECT_GT(prev_g / eg, 3.0) << n;
    }
    prev_v = ev;
    prev_g = eg;
  }
  EXPECT_LT(prev_g, 1e-5);
}

TEST(Verify, JetTracesMatchGeneratedMap) {
  std::mt19937_64 rng(17);
  const auto tilt = TargetProfile::quadratic(0.1, {0.05, -0.1}, Mat2{{0.2, 0.05}, {0.05, 0.1}});
  const std::pair<GeneratingFunction, Interval> cases[] = {
      {GeneratingFunction::reflection(), {2.0, 6.0}},
      {GeneratingFunction::refraction(0.5), {-6.0, -2.0}},
      {GeneratingFunction::refraction(2.0), {-6.0, -2.0}},
      {GeneratingFunction::reflection(tilt), {3.0, 6.0}},
      {GeneratingFunction::refraction(0.5, TargetProfile::bump(2.0, 0.3, {0.2, 0}, 0.5)), {-6.0, -2.0}}};
  for (const auto& [gf, J] : cases) {
    std::vector<Jet> jets;
    for (const auto& s : sample_jets(gf, unit, unit, J, 500, rng)) jets.push_back(s.jet);
    const RayReport r = trace_jets(gf, jets, 2.0);
    EXPECT_EQ(r.misses, 0) << to_string(gf.model);
    EXPECT_LT(r.max_deviation, 1e-8) << to_string(gf.model);
    EXPECT_TRUE(r.ok(1e-8));
  }
}

TEST(Verify, SpecularReflectionByHand) {
  // vertical ray onto a mirror tilted by p = (a, 0): leaves with angle 2 atan a
  const auto gf = GeneratingFunction::reflection();
  const double a = 0.2, u = 2.0;
  const RayHit h = trace_jet(gf, {{0, 0}, u, {a, 0}}, 20.0);
  ASSERT_TRUE(h.hit) << h.why;
  const double theta = 2 * std::atan(a);
  EXPECT_NEAR(std::abs(h.y.x()), u * std::tan(theta), 1e-12);
  EXPECT_NEAR(h.y.y(), 0.0, 1e-14);
}

TEST(Verify, FieldTraceOnManufacturedReflector) {
  const auto gf = GeneratingFunction::reflection();
  const RadialManufactured m;
  const Grid g = build_grid(unit, 32, 32);
  const RayReport r = trace_reflection(gf, FieldInterpolant(g, nodal(g, m)), 2000, 3);
  EXPECT_EQ(r.misses, 0);
  EXPECT_EQ(static_cast<int>(r.samples.size()), 2000);
  EXPECT_LT(r.max_deviation, 1e-10);
  EXPECT_THROW(trace_refraction(gf, FieldInterpolant(g, nodal(g, m)), 10, 3), Error);
}

TEST(Verify, BinsHaveEqualArea) {
  const BinLayout b{DomainSpec::disc({0.5, -0.5}, 2.0), 3, 6};
  double total = 0;
  for (int k = 0; k < b.size(); ++k) {
    const double a = b.integrate_bin(k, [](const Vec2&) { return 1.0; });
    EXPECT_NEAR(a, 4 * pi / 18, 1e-10);
    total += a;
  }
  EXPECT_NEAR(total, 4 * pi, 1e-9);
  EXPECT_EQ(b.locate({0.5, -0.5 + 1e-9}), b.index(0, 1));
  EXPECT_EQ(b.locate({0.5 + 1.99, -0.5 - 1e-9}), b.index(2, 5));
}

TEST(Verify, PushforwardOfManufacturedMap) {
  const auto gf = GeneratingFunction::reflection();
  const RadialManufactured m;
  const Grid g = build_grid(unit, 48, 48);
  const Density f = Density::custom([m, gf](const Vec2& x) { return m.jacobian(gf, x); });
  const MassReport r = pushforward_histogram(gf, FieldInterpolant(g, nodal(g, m)), f, Density::constant(1.0),
                                             BinLayout{m.target(gf, 1.0), 2, 8}, 200000);
  EXPECT_LT(r.max_mismatch, 0.02);
  EXPECT_LE(r.mass_identity_error, 1e-10);
  EXPECT_EQ(r.containment_failures, 0);
  EXPECT_LT(r.boundary_gap, r.tolerance);
  EXPECT_NEAR(r.fstar_scale, 1.0, 1e-3);
}

TEST(Verify, MismatchShrinksWithSamples) {
  const auto ot = GeneratingFunction::quadratic_ot();
  const Grid g = build_grid(unit, 32, 32);
  std::vector<double> u(g.size());
  for (int k = 0; k < g.size(); ++k) u[k] = 0.5 * g.nodes[k].squaredNorm();
  const FieldInterpolant I(g, u);
  std::vector<double> mism;
  for (long n : {16000L, 64000L, 256000L}) {
    const MassReport r = pushforward_histogram(ot, I, Density::constant(1), Density::constant(1), BinLayout{unit}, n);
    mism.push_back(r.max_mismatch);
    EXPECT_LE(r.mass_identity_error, 1e-12);
  }
  EXPECT_LT(mism[1], mism[0]);
  EXPECT_LT(mism[2], mism[1]);
  EXPECT_LT(mism[2], 0.6 * mism[0]);
}

TEST(Verify, StartFieldFailsContainment) {
  // g_rho image is a small ball about y0: it does not reach the target boundary
  const auto ot = GeneratingFunction::quadratic_ot();
  const Grid g = build_grid(unit, 24, 24);
  std::vector<double> u(g.size());
  for (int k = 0; k < g.size(); ++k) u[k] = 0.3 * std::sqrt(1.0 + g.nodes[k].squaredNorm());
  const MassReport r = pushforward_histogram(ot, FieldInterpolant(g, u), Density::constant(1), Density::constant(1),
                                             BinLayout{unit}, 50000);
  EXPECT_GT(r.boundary_gap, r.tolerance);
  EXPECT_GT(r.max_mismatch, 0.5);
}

TEST(Verify, BoundaryDistance) {
  EXPECT_NEAR(boundary_distance(unit, {0.5, 0}), 0.5, 1e-12);
  EXPECT_NEAR(boundary_distance(unit, {0, 1.5}), 0.5, 1e-12);
  EXPECT_NEAR(boundary_distance(DomainSpec::ellipse({0, 0}, {2, 1}), {0, 0}), 1.0, 1e-3);
}
