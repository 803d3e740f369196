#pragma once

// Finite differences on the curvilinear grid: fourth order in theta, and in r
// away from the outer rings. Computational derivatives (u_r, u_t, u_rr, u_rt,
// u_tt) are mapped to physical ones by
//   Du  = J^{-T} (u_r, u_t),
//   D2u = J^{-T} [u_ab - Du . x_ab] J^{-1},   J = [x_r | x_t].
// Interior rings use centered differences, differencing across the pole
// through the node at theta + pi. Rings near the boundary use one-sided
// differences in r.

#include "gpje/domains.hpp"

#include <Eigen/Sparse>

namespace gpje {

/// Linear weights of one node's gradient and Hessian in terms of field values.
struct NodeStencil {
  std::vector<int> idx;
  std::vector<Vec2> wp;  // gradient weights
  std::vector<Mat2> wH;  // Hessian weights

  void add(int k, const Vec2& p, const Mat2& H) {
    for (std::size_t n = 0; n < idx.size(); ++n) {
      if (idx[n] == k) {
        wp[n] += p;
        wH[n] += H;
        return;
      }
    }
    idx.push_back(k);
    wp.push_back(p);
    wH.push_back(H);
  }

  template <class Field>
  Vec2 gradient(const Field& u) const {
    Vec2 s = Vec2::Zero();
    for (std::size_t n = 0; n < idx.size(); ++n) s += wp[n] * u[idx[n]];
    return s;
  }
  template <class Field>
  Mat2 hessian(const Field& u) const {
    Mat2 s = Mat2::Zero();
    for (std::size_t n = 0; n < idx.size(); ++n) s += wH[n] * u[idx[n]];
    return s;
  }
};

class GridOperators {
 public:
  explicit GridOperators(const Grid& g) : grid_(&g), stencils_(g.size()) {
    for (int k = 0; k < g.size(); ++k) stencils_[k] = build(k);
  }

  const Grid& grid() const { return *grid_; }
  const NodeStencil& stencil(int k) const { return stencils_[k]; }

  template <class Field>
  Vec2 gradient(const Field& u, int k) const { return stencils_[k].gradient(u); }
  template <class Field>
  Mat2 hessian(const Field& u, int k) const { return stencils_[k].hessian(u); }

 private:
  struct Comp {
    double r = 0, t = 0, rr = 0, rt = 0, tt = 0;
  };

  // Node at ring i (possibly -1, mirrored through the pole) and column j.
  int node(int i, int j) const {
    const Grid& g = *grid_;
    if (i < 0) return g.index(-i - 1, j + g.n_theta / 2);
    return g.index(i, j);
  }

  using Weights = std::vector<std::pair<int, double>>;  // (offset, weight)

  NodeStencil build(int k) const {
    const Grid& g = *grid_;
    const int i = g.ring(k), j = g.column(k);
    const double dr = g.dr, dt = g.dtheta;
    std::vector<std::pair<int, Comp>> terms;
    auto put = [&](int ii, int jj, Comp c) { terms.emplace_back(node(ii, jj), c); };

    // Fourth order in theta everywhere and in r wherever the stencil fits.
    Weights r1, r2;
    if (i <= g.n_r - 3) {
      r1 = {{-2, 1 / 12.}, {-1, -8 / 12.}, {1, 8 / 12.}, {2, -1 / 12.}};
      r2 = {{-2, -1 / 12.}, {-1, 16 / 12.}, {0, -30 / 12.}, {1, 16 / 12.}, {2, -1 / 12.}};
    } else if (i == g.n_r - 2) {
      r1 = {{-1, -0.5}, {1, 0.5}};
      r2 = {{-1, 1.0}, {0, -2.0}, {1, 1.0}};
    } else {
      r1 = {{0, 1.5}, {-1, -2.0}, {-2, 0.5}};
      r2 = {{0, 2.0}, {-1, -5.0}, {-2, 4.0}, {-3, -1.0}};
    }
    const Weights t1 = {{-2, 1 / 12.}, {-1, -8 / 12.}, {1, 8 / 12.}, {2, -1 / 12.}};
    const Weights t2 = {{-2, -1 / 12.}, {-1, 16 / 12.}, {0, -30 / 12.}, {1, 16 / 12.}, {2, -1 / 12.}};
    for (auto [o, w] : r1) put(i + o, j, {w / dr, 0, 0, 0, 0});
    for (auto [o, w] : r2) put(i + o, j, {0, 0, w / (dr * dr), 0, 0});
    for (auto [o, w] : t1) put(i, j + o, {0, w / dt, 0, 0, 0});
    for (auto [o, w] : t2) put(i, j + o, {0, 0, 0, 0, w / (dt * dt)});
    for (auto [a, wa] : r1)
      for (auto [b, wb] : t1) put(i + a, j + b, {0, 0, 0, wa * wb / (dr * dt), 0});

    Mat2 Jm;
    Jm.col(0) = g.x_r[k];
    Jm.col(1) = g.x_t[k];
    const Mat2 Jinv = Jm.inverse();
    const Mat2 JinvT = Jinv.transpose();
    NodeStencil s;
    for (const auto& [n, c] : terms) {
      const Vec2 wp = JinvT * Vec2(c.r, c.t);
      Mat2 M;
      M(0, 0) = c.rr;
      M(0, 1) = M(1, 0) = c.rt - wp.dot(g.x_rt[k]);
      M(1, 1) = c.tt - wp.dot(g.x_tt[k]);
      s.add(n, wp, JinvT * M * Jinv);
    }
    return s;
  }

  const Grid* grid_;
  std::vector<NodeStencil> stencils_;
};

/// Piecewise-cubic Lagrange interpolation in computational coordinates
/// (r, theta) of nodal fields. Evaluation points slightly outside the domain
/// (r up to ~1 + dr) are extrapolated from the outer cells.
class GridInterpolator {
 public:
  explicit GridInterpolator(const Grid& g) : g_(&g) {}

  /// Interpolates several fields at once; fields[c][k] is component c at node k.
  template <std::size_t C>
  std::array<double, C> operator()(const std::array<const std::vector<double>*, C>& fields, const Vec2& x) const {
    const Grid& g = *g_;
    const Vec2 rt = relative_polar(g.domain, x);
    const double s = rt(0) / g.dr - 0.5;  // fractional ring index
    double t = rt(1) / g.dtheta;
    int i0 = static_cast<int>(std::floor(s)) - 1;
    i0 = std::min(i0, g.n_r - 4);
    const int j0 = static_cast<int>(std::floor(t)) - 1;
    double wr[4], wt[4];
    lagrange(s - i0, wr);
    lagrange(t - j0, wt);
    std::array<double, C> out{};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int ii = i0 + a, jj = j0 + b;
        const int k = ii < 0 ? g.index(-ii - 1, jj + g.n_theta / 2) : g.index(ii, jj);
        const double w = wr[a] * wt[b];
        for (std::size_t c = 0; c < C; ++c) out[c] += w * (*fields[c])[k];
      }
    }
    return out;
  }

 private:
  // Weights of the cubic through nodes 0, 1, 2, 3 evaluated at local coordinate s.
  static void lagrange(double s, double w[4]) {
    w[0] = -(s - 1) * (s - 2) * (s - 3) / 6.0;
    w[1] = s * (s - 2) * (s - 3) / 2.0;
    w[2] = -s * (s - 1) * (s - 3) / 2.0;
    w[3] = s * (s - 1) * (s - 2) / 6.0;
  }

  const Grid* g_;
};

}  // namespace gpje
