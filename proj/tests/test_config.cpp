#include "support.hpp"

#include <gtest/gtest.h>

using namespace gpje;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig a;
  const RunConfig b = parse_config_string(emit_config(a));
  EXPECT_TRUE(same_config(a, b));
  EXPECT_TRUE(std::isnan(b.homotopy.tau));
  EXPECT_TRUE(std::isnan(b.gconvex.z0));
  EXPECT_TRUE(std::isinf(b.model.z_lo));
  EXPECT_LT(b.model.z_lo, 0.0);
}

TEST(Config, EditedValuesRoundTrip) {
  RunConfig a;
  a.seed = 18446744073709551557ull;
  a.model.variant = "refraction";
  a.model.kappa = 0.5;
  a.model.z_hi = -0.25;
  a.phi.kind = "quadratic";
  a.phi.Q << 0.2, 0.05, 0.05, 0.1;
  a.omega.shape = "ellipse";
  a.omega.radii = Vec2(1.5, 0.75);
  a.f.kind = "polynomial";
  a.f.C << 0.1, 0.0, 0.0, 0.3;
  a.gconvex.y0 = Vec2(0.1, -0.2);
  a.homotopy.tau = 3.0;
  a.homotopy.limit_solve = false;
  a.verify.mass_samples = 4000000;
  a.verify.field = "initial";
  const RunConfig b = parse_config_string(emit_config(a));
  EXPECT_TRUE(same_config(a, b));
  EXPECT_EQ(b.seed, a.seed);
  EXPECT_EQ(b.phi.Q(0, 1), 0.05);
  EXPECT_EQ(b.gconvex.y0, a.gconvex.y0);
  EXPECT_EQ(emit_config(a), emit_config(b));
}

TEST(Config, ShortestDoubles) {
  RunConfig a;
  a.model.kappa = 0.1;
  const std::string text = emit_config(a);
  EXPECT_NE(text.find("kappa = 0.1 "), std::string::npos);
  EXPECT_EQ(parse_config_string(text).model.kappa, 0.1);
}

TEST(Config, CommentsAndBlankLines) {
  const auto c = parse_config_string("# header\n\n[grid]\nn_r = 16   # rings\nn_theta = 32\n[model]\nvariant = \"reflection\" # a # in a comment\n");
  EXPECT_EQ(c.grid.n_r, 16);
  EXPECT_EQ(c.grid.n_theta, 32);
  EXPECT_EQ(c.model.variant, "reflection");
}

TEST(Config, AutoAndInfinity) {
  const auto c = parse_config_string("[homotopy]\ntau = \"auto\"\n[model]\nz_lo = -inf\nz_hi = inf\n[gconvex]\nz0 = \"auto\"\nrho = 0.25\n");
  EXPECT_TRUE(std::isnan(c.homotopy.tau));
  EXPECT_TRUE(std::isinf(c.model.z_hi));
  EXPECT_TRUE(std::isnan(c.gconvex.z0));
  EXPECT_EQ(c.gconvex.rho, 0.25);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("[grid]\nn_r = 16\nn_r = 32\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("[grid]\n\nn_q = 2\n").find("line 3: unknown key 'n_q'"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nn_r = \"x\"\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("[grid\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("[grid]\n[grid]\n").find("duplicate section"), std::string::npos);
  EXPECT_NE(error_of("[model]\nkappa 2\n").find("line 2: expected key = value"), std::string::npos);
  EXPECT_NE(error_of("[nowhere]\nx = 1\n").find("unknown key"), std::string::npos);
  EXPECT_NE(error_of("[gconvex]\ny0 = [1, 2, 3]\n").find("line 2"), std::string::npos);
}

TEST(Config, ContentHash) {
  RunConfig a, b;
  EXPECT_EQ(content_hash(a), content_hash(b));
  EXPECT_EQ(content_hash(a).size(), 16u);
  b.seed = 2;
  EXPECT_NE(content_hash(a), content_hash(b));
}

TEST(Config, ShippedConfigsRoundTrip) {
  int seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(gpje::testing::config_dir())) {
    if (e.path().extension() != ".toml") continue;
    ++seen;
    const RunConfig a = load_config(e.path().string());
    EXPECT_TRUE(same_config(a, parse_config_string(emit_config(a)))) << e.path();
    EXPECT_NO_THROW(make_setup(a, e.path())) << e.path();
  }
  EXPECT_GE(seen, 8);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/run.toml"), ConfigError); }
