#pragma once

// Generated map of a nodal field: Tu = Y(x, u, Du) and its Jacobian.

#include "gpje/dualmaps.hpp"
#include "gpje/stencil.hpp"

namespace gpje {

struct TMapField {
  std::vector<Vec2> Tu;
  std::vector<double> detDTu;     // det(D2u - A) / det E
  std::vector<double> detDTu_fd;  // determinant of the differenced Tu field
  std::vector<double> lambda;     // smallest eigenvalue of D2u - A
  std::vector<int> non_elliptic;  // nodes with lambda <= 0
  double min_lambda = std::numeric_limits<double>::infinity();
};

inline TMapField map_T(const GeneratingFunction& gf, const GridOperators& ops, const std::vector<double>& u) {
  const Grid& g = ops.grid();
  const int n = g.size();
  TMapField t;
  t.Tu.resize(n);
  t.detDTu.resize(n);
  t.detDTu_fd.resize(n);
  t.lambda.resize(n);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t k) {
    try {
      const Vec2 p = ops.gradient(u, k);
      const Mat2 H = ops.hessian(u, k);
      const DualEval d = solve_duals(gf, {g.nodes[k], u[k], p});
      const Mat2 M = H - d.A;
      t.Tu[k] = d.Y;
      t.detDTu[k] = M.determinant() / d.detE;
      t.lambda[k] = min_eigenvalue(M);
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  });
  for (int k = 0; k < n; ++k)
    if (!errors[k].empty()) throw DualMapError("map_T: node " + std::to_string(k) + ": " + errors[k]);
  std::vector<double> tx(n), ty(n);
  for (int k = 0; k < n; ++k) {
    tx[k] = t.Tu[k].x();
    ty[k] = t.Tu[k].y();
  }
  for (int k = 0; k < n; ++k) {
    Mat2 D;
    D.row(0) = ops.gradient(tx, k).transpose();
    D.row(1) = ops.gradient(ty, k).transpose();
    t.detDTu_fd[k] = D.determinant();
    if (!(t.lambda[k] > 0.0)) t.non_elliptic.push_back(k);
    t.min_lambda = std::min(t.min_lambda, t.lambda[k]);
  }
  return t;
}

}  // namespace gpje
