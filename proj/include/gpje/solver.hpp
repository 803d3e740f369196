#pragma once

// Damped Newton continuation for the homotopy family
//   log det(D2u - A) = [tau (1 - t) + eps] (u - u0) + log B_t       interior
//   phi*(Y(x, u, Du)) = (1 - t) phi*(Tu0)                          boundary
// with B_t = |det E| [t f + (1 - t) s0] / f*(Y), s0 = f*(Tu0) |det DTu0|.
// After t = 1 the weight eps is reduced geometrically and finally set to 0.
// With limit_solve these stages are bordered: an unknown constant kappa is
// added to the zeroth-order term and the f-weighted mean of u - u0 is held
// at zero.

#include "gpje/conditions.hpp"
#include "gpje/densities.hpp"
#include "gpje/fields.hpp"

#include <Eigen/SparseLU>
#include <chrono>

namespace gpje {

struct Problem {
  GeneratingFunction gf;
  DomainSpec omega, omega_star;
  Density f, fstar;
};

struct HomotopyParams {
  double tau = -1.0;  // negative: estimate
  double eps0 = 1e-2;
  double eps_factor = 0.25;
  double eps_min = 1e-6;
  bool limit_solve = true;
  double dt0 = 0.1;
  double dt_min = 1e-6;
  double dt_max = 0.5;
  double dt_grow = 1.5;
  int fast_iters = 4;
  double newton_tol = 1e-9;
  double step_tol = 1e-11;  // also converged once |du| <= step_tol (1 + |u|)
  int max_newton = 25;
  double delta_min = 1e-8;
  double gradient_slack = 1.05;  // accepted iterates need |Du| <= slack * K0
};

struct SolverState {
  std::vector<double> u;
  double t = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
  bool bordered = false;
  std::vector<double> residual;  // interior rows then boundary rows, per node
  std::vector<Vec2> Tu;
  std::vector<double> lambda;
  double res_interior = 0.0;
  double res_boundary = 0.0;
  double res_mean = 0.0;  // bordered constraint row
  double min_lambda = 0.0;
  double min_obliqueness = 0.0;
  double max_gradient = 0.0;
  int clamped = 0;
  double penalty = 0.0;
  double floor = 0.0;  // rounding level of the interior residual

  double merged() const { return std::max({res_interior, res_boundary, res_mean}); }
};

struct TraceRow {
  std::string stage;
  double t = 0, eps = 0, dt = 0;
  int newton_iters = 0;
  double res_interior = 0, res_boundary = 0, min_lambda = 0, min_obliqueness = 0;
  int clamped = 0;
  double penalty = 0;
  bool accepted = false;
  bool monotone = true;
  std::string note;
};

struct ProbeReport {
  int probes = 0;
  int converged = 0;
  double max_distance = 0.0;
  int max_iterations = 0;
  double tau = 0.0;
  std::vector<std::string> failures;
  bool ok() const { return converged == probes; }
};

struct SolveResult {
  SolverState state;
  double tau = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> eps_schedule;
  int flipped_cells = 0;
  double boundary_image_error = 0.0;  // max |phi*(Tu)| on the boundary ring
};

/// Extension of log below delta_min: value, slope and curvature match at delta.
inline double clamped_log(double x, double delta, double& d1, double& pen) {
  if (x >= delta) {
    d1 = 1.0 / x;
    pen = 0.0;
    return std::log(x);
  }
  const double e = x - delta;
  d1 = 1.0 / delta - e / (delta * delta);
  pen = e * e / (2.0 * delta * delta);
  return std::log(delta) + e / delta - pen;
}

class HomotopySolver {
 public:
  HomotopySolver(Problem pb, const GridOperators& ops, std::vector<double> u0, HomotopyParams prm = {})
      : pb_(std::move(pb)), ops_(&ops), prm_(prm), u0_(std::move(u0)), a5_(constants_A5(pb_.gf, pb_.omega, pb_.omega_star)) {
    const Grid& g = ops.grid();
    const int n = g.size();
    if (static_cast<int>(u0_.size()) != n) throw SolverError("HomotopySolver: u0 does not match the grid");
    fx_.resize(n);
    log_s0_.assign(n, 0.0);
    phi0_.assign(n, 0.0);
    normal_.assign(n, Vec2::Zero());
    weight_.resize(n);
    for (int k = 0; k < n; ++k) {
      fx_[k] = pb_.f(g.nodes[k]);
      if (!(fx_[k] > density_floor)) throw SolverError("HomotopySolver: f below the positive floor at a node");
      if (g.is_boundary(k)) normal_[k] = boundary_point(g.domain, g.theta_of(g.column(k))).normal;
    }
    double wsum = 0.0;
    for (int k = 0; k < n; ++k) wsum += g.measure[k] * fx_[k];
    for (int k = 0; k < n; ++k) weight_[k] = g.measure[k] * fx_[k] / wsum;
    std::vector<std::string> errors(n);
    std::vector<double> cest(n, 0.0);
    parallel_for(n, [&](std::size_t k) {
      try {
        const Vec2 p = ops.gradient(u0_, k);
        const Mat2 H = ops.hessian(u0_, k);
        const JetTerms j = terms(g.nodes[k], u0_[k], p);
        if (g.is_boundary(k)) phi0_[k] = defining_function(pb_.omega_star, j.Y).phi;
        const double lam = min_eigenvalue(H - j.A);
        if (!(lam > 0.0)) {
          std::ostringstream m;
          m << "not elliptic (min eigenvalue of D2u - A = " << lam << ")";
          throw SolverError(m.str());
        }
        double pen = 0;
        log_s0_[k] = logdet(H - j.A, nullptr, pen) + j.q;
        const JetDerivs d = derivs(g.nodes[k], u0_[k], p);
        cest[k] = d.Au.norm() + d.Ap[0].norm() + d.Ap[1].norm() + std::abs(d.qu) + d.qp.norm();
      } catch (const Error& e) {
        errors[k] = e.what();
      }
    });
    for (int k = 0; k < n; ++k)
      if (!errors[k].empty()) throw SolverError("HomotopySolver: initial field at node " + std::to_string(k) + ": " + errors[k]);
    c_est_ = *std::max_element(cest.begin(), cest.end());
    tau_ = prm_.tau >= 0.0 ? prm_.tau : std::max(1.0, 4.0 * c_est_);
    pattern_ready_ = false;
  }

  double tau() const { return tau_; }
  double c_estimate() const { return c_est_; }
  const std::vector<double>& u0() const { return u0_; }
  const std::vector<double>& log_s0() const { return log_s0_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  const HomotopyParams& params() const { return prm_; }
  const A5Constants& a5() const { return a5_; }

  SolverState initial_state() const {
    SolverState s;
    s.u = u0_;
    s.t = 0.0;
    s.eps = prm_.eps0;
    evaluate(s);
    return s;
  }

  /// Fills the residual fields and diagnostics; throws DualMapError when a
  /// node leaves the admissible jet set.
  void evaluate(SolverState& s) const { assemble(s, nullptr); }

  /// Newton iterations at fixed (t, eps) until the merged residual is below
  /// tol. Returns false on stall, non-admissible iterates or the iteration cap.
  bool newton(SolverState& s, double tol, int max_iter, int& iters, std::string& why, bool& monotone) {
    iters = 0;
    monotone = true;
    evaluate(s);
    while (s.merged() > std::max(tol, s.floor)) {
      if (iters >= max_iter) {
        why = "iteration cap";
        return false;
      }
      Eigen::SparseMatrix<double> J;
      assemble(s, &J);
      Eigen::VectorXd rhs = -residual_vector(s);
      if (!pattern_ready_) {
        lu_.analyzePattern(J);
        pattern_ready_ = true;
      }
      lu_.factorize(J);
      if (lu_.info() != Eigen::Success) {
        why = "sparse LU factorization failed";
        return false;
      }
      const Eigen::VectorXd du = lu_.solve(rhs);
      if (lu_.info() != Eigen::Success || !du.allFinite()) {
        why = "linear solve failed";
        return false;
      }
      const double umax = Eigen::Map<const Eigen::VectorXd>(s.u.data(), s.u.size()).lpNorm<Eigen::Infinity>();
      if (du.head(s.u.size()).lpNorm<Eigen::Infinity>() <= prm_.step_tol * (1.0 + umax)) return true;
      const double r0 = s.merged();
      double alpha = 1.0;
      bool accepted = false;
      SolverState trial = s;
      while (alpha >= 1e-12) {
        for (std::size_t k = 0; k < s.u.size(); ++k) trial.u[k] = s.u[k] + alpha * du(k);
        if (s.bordered) trial.kappa = s.kappa + alpha * du(s.u.size());
        bool ok = true;
        try {
          evaluate(trial);
        } catch (const Error&) {
          ok = false;
        }
        if (ok && std::isfinite(trial.merged()) && trial.merged() <= (1.0 - 1e-4 * alpha) * r0) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      ++iters;
      if (!accepted) {
        why = "line search stall";
        return false;
      }
      if (trial.merged() > r0) monotone = false;
      s = std::move(trial);
    }
    return true;
  }

  SolveResult solve() {
    const auto start = std::chrono::steady_clock::now();
    trace_.clear();
    SolveResult out;
    out.tau = tau_;
    SolverState s = initial_state();
    double dt = prm_.dt0;
    std::vector<double> prev_u;
    double prev_t = 0.0;
    while (s.t < 1.0) {
      SolverState trial = s;
      trial.t = std::min(1.0, s.t + dt);
      if (!prev_u.empty()) {
        const double w = (trial.t - s.t) / (s.t - prev_t);
        for (std::size_t k = 0; k < s.u.size(); ++k) trial.u[k] += w * (s.u[k] - prev_u[k]);
      }
      TraceRow row = attempt(trial, "t", dt);
      if (row.accepted) {
        prev_u = s.u;
        prev_t = s.t;
        s = std::move(trial);
        if (row.newton_iters <= prm_.fast_iters) dt = std::min(prm_.dt_max, dt * prm_.dt_grow);
      } else {
        dt *= 0.5;
        if (dt < prm_.dt_min) {
          std::ostringstream m;
          m << "continuation: dt underflow at t = " << s.t << " (" << row.note << ")";
          throw SolverError(m.str());
        }
      }
    }
    out.eps_schedule.push_back(s.eps);
    s.bordered = prm_.limit_solve;
    while (s.eps > prm_.eps_min * (1.0 + 1e-12)) {
      SolverState trial = s;
      trial.eps = std::max(prm_.eps_min, s.eps * prm_.eps_factor);
      TraceRow row = attempt(trial, "eps", 0.0);
      if (!row.accepted) throw SolverError("continuation: eps-reduction divergence at eps = " + fmt(trial.eps) + " (" + row.note + ")");
      s = std::move(trial);
      out.eps_schedule.push_back(s.eps);
    }
    if (prm_.limit_solve) {
      SolverState trial = s;
      trial.eps = 0.0;
      TraceRow row = attempt(trial, "limit", 0.0);
      if (!row.accepted) throw SolverError("continuation: bordered eps -> 0 solve failed (" + row.note + ")");
      s = std::move(trial);
      out.eps_schedule.push_back(0.0);
    }
    out.state = std::move(s);
    image_checks(out);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  /// Newton at t = 0 from u0 plus smooth random perturbations.
  ProbeReport uniqueness_probe(int n_probes, double amplitude, std::uint64_t seed = 5) {
    ProbeReport r;
    r.tau = tau_;
    const Grid& g = ops_->grid();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int p = 0; p < n_probes; ++p) {
      std::vector<double> a(12);
      for (double& v : a) v = N(rng);
      SolverState s;
      s.u = u0_;
      s.t = 0.0;
      s.eps = prm_.eps0;
      for (int k = 0; k < g.size(); ++k) {
        const Vec2 x = g.nodes[k] - g.domain.center;
        const double e = a[0] + a[1] * x.x() + a[2] * x.y() + a[3] * x.x() * x.x() + a[4] * x.x() * x.y() +
                         a[5] * x.y() * x.y() + a[6] * std::sin(3 * x.x() + a[7]) * std::cos(2 * x.y() + a[8]) +
                         a[9] * std::cos(x.x() - a[10] * x.y() + a[11]);
        s.u[k] += amplitude * e / 3.0;
      }
      int iters = 0;
      std::string why;
      bool mono = true;
      bool ok = false;
      try {
        ok = newton(s, 1e-10, 30, iters, why, mono);
      } catch (const Error& e) {
        why = e.what();
      }
      double dist = 0.0;
      for (int k = 0; k < g.size(); ++k) dist = std::max(dist, std::abs(s.u[k] - u0_[k]));
      ++r.probes;
      r.max_iterations = std::max(r.max_iterations, iters);
      if (ok && dist < 1e-8) {
        ++r.converged;
        r.max_distance = std::max(r.max_distance, dist);
      } else {
        r.max_distance = std::max(r.max_distance, dist);
        r.failures.push_back("probe " + std::to_string(p) + ": " + (ok ? "converged elsewhere, distance " + fmt(dist) : why + ", residual " + fmt(s.merged()) + ", distance " + fmt(dist)));
      }
    }
    return r;
  }

  Eigen::VectorXd residual_vector(const SolverState& s) const {
    const int n = static_cast<int>(s.u.size());
    Eigen::VectorXd r(n + (s.bordered ? 1 : 0));
    for (int k = 0; k < n; ++k) r(k) = s.residual[k];
    if (s.bordered) r(n) = mean_row(s);
    return r;
  }

 private:
  struct JetTerms {
    Mat2 A;
    double q;  // log f*(Y) - log |det E|
    Vec2 Y;
    Mat2 Einv;
  };
  struct JetDerivs {
    Mat2 Au;
    std::array<Mat2, 2> Ap;
    double qu;
    Vec2 qp;
    Vec2 Yu;
  };

  JetTerms terms(const Vec2& x, double u, const Vec2& p) const {
    const DualEval d = solve_duals(pb_.gf, {x, u, p});
    const double fs = pb_.fstar(d.Y);
    if (!(fs > density_floor)) throw DualMapError("f*(Y) below the positive floor");
    return {d.A, std::log(fs) - std::log(std::abs(d.detE)), d.Y, d.Einv};
  }

  JetDerivs derivs(const Vec2& x, double u, const Vec2& p) const {
    JetDerivs d;
    const double hu = 1e-5 * std::max(1.0, std::abs(u));
    const double hp = 1e-5 * std::max(1.0, p.norm());
    const JetTerms up = terms(x, u + hu, p), um = terms(x, u - hu, p);
    d.Au = (up.A - um.A) / (2 * hu);
    d.qu = (up.q - um.q) / (2 * hu);
    d.Yu = (up.Y - um.Y) / (2 * hu);
    for (int i = 0; i < 2; ++i) {
      Vec2 e = Vec2::Zero();
      e(i) = hp;
      const JetTerms a = terms(x, u, p + e), b = terms(x, u, p - e);
      d.Ap[i] = (a.A - b.A) / (2 * hp);
      d.qp(i) = (a.q - b.q) / (2 * hp);
    }
    return d;
  }

  /// Clamped log det of a symmetric 2x2 matrix; optionally its gradient in M.
  double logdet(const Mat2& M, Mat2* grad, double& penalty) const {
    Eigen::SelfAdjointEigenSolver<Mat2> es;
    es.computeDirect(0.5 * (M + M.transpose()));
    double v = 0.0, d1[2];
    penalty = 0.0;
    for (int i = 0; i < 2; ++i) {
      double pen;
      v += clamped_log(es.eigenvalues()(i), prm_.delta_min, d1[i], pen);
      penalty += pen;
    }
    if (grad) *grad = es.eigenvectors() * Vec2(d1[0], d1[1]).asDiagonal() * es.eigenvectors().transpose();
    return v;
  }

  double mean_row(const SolverState& s) const {
    double m = 0.0;
    for (std::size_t k = 0; k < s.u.size(); ++k) m += weight_[k] * (s.u[k] - u0_[k]);
    return m;
  }

  void assemble(SolverState& s, Eigen::SparseMatrix<double>* J) const {
    const Grid& g = ops_->grid();
    const int n = g.size();
    const double c = tau_ * (1.0 - s.t) + s.eps;
    s.residual.assign(n, 0.0);
    s.Tu.assign(n, Vec2::Zero());
    s.lambda.assign(n, std::numeric_limits<double>::infinity());
    std::vector<double> obliq(n, std::numeric_limits<double>::infinity()), pen(n, 0.0), gradn(n, 0.0), fl(n, 0.0);
    std::vector<char> clamped(n, 0);
    std::vector<std::vector<std::pair<int, double>>> rows(J ? n : 0);
    std::vector<std::string> errors(n);
    parallel_for(n, [&](std::size_t kk) {
      const int k = static_cast<int>(kk);
      try {
        const NodeStencil& st = ops_->stencil(k);
        const Vec2& x = g.nodes[k];
        const double u = s.u[k];
        const Vec2 p = st.gradient(s.u);
        gradn[k] = p.norm();
        const JetTerms jt = terms(x, u, p);
        s.Tu[k] = jt.Y;
        const Mat2 M = st.hessian(s.u) - jt.A;
        s.lambda[k] = min_eigenvalue(M);
        if (g.is_boundary(k)) {
          const DefiningValue dv = defining_function(pb_.omega_star, jt.Y);
          s.residual[k] = dv.phi - (1.0 - s.t) * phi0_[k];
          const Vec2 Gp = jt.Einv.transpose() * dv.grad;
          obliq[k] = Gp.dot(normal_[k]);
          if (J) {
            const JetDerivs d = derivs(x, u, p);
            auto& row = rows[k];
            for (std::size_t m = 0; m < st.idx.size(); ++m) row.push_back({st.idx[m], Gp.dot(st.wp[m])});
            row.push_back({k, dv.grad.dot(d.Yu)});
          }
        } else {
          Mat2 F;
          double pk = 0.0;
          const double ld = logdet(M, J ? &F : nullptr, pk);
          pen[k] = pk;
          clamped[k] = s.lambda[k] < prm_.delta_min;
          double mag = 0.0;
          for (std::size_t m = 0; m < st.idx.size(); ++m) mag += st.wH[m].cwiseAbs().maxCoeff() * std::abs(s.u[st.idx[m]]);
          fl[k] = std::numeric_limits<double>::epsilon() * mag / std::max(s.lambda[k], prm_.delta_min);
          const double src = s.t * fx_[k] + (1.0 - s.t) * std::exp(log_s0_[k]);
          s.residual[k] = ld - c * (u - u0_[k]) - (s.bordered ? s.kappa : 0.0) - std::log(src) + jt.q;
          if (J) {
            const JetDerivs d = derivs(x, u, p);
            const double Ru = -(F.cwiseProduct(d.Au)).sum() - c + d.qu;
            const Vec2 Rp(-(F.cwiseProduct(d.Ap[0])).sum() + d.qp(0), -(F.cwiseProduct(d.Ap[1])).sum() + d.qp(1));
            auto& row = rows[k];
            for (std::size_t m = 0; m < st.idx.size(); ++m)
              row.push_back({st.idx[m], (F.cwiseProduct(st.wH[m])).sum() + Rp.dot(st.wp[m])});
            row.push_back({k, Ru});
          }
        }
      } catch (const Error& e) {
        errors[k] = e.what();
      }
    });
    for (int k = 0; k < n; ++k)
      if (!errors[k].empty()) throw DualMapError("node " + std::to_string(k) + ": " + errors[k]);
    s.res_interior = s.res_boundary = 0.0;
    s.min_lambda = s.min_obliqueness = std::numeric_limits<double>::infinity();
    s.clamped = 0;
    s.penalty = 0.0;
    s.max_gradient = 0.0;
    s.floor = 0.0;
    for (int k = 0; k < n; ++k) {
      s.floor = std::max(s.floor, fl[k]);
      const double a = std::abs(s.residual[k]);
      if (!std::isfinite(s.residual[k])) throw DualMapError("non-finite residual at node " + std::to_string(k));
      if (g.is_boundary(k)) {
        s.res_boundary = std::max(s.res_boundary, a);
        s.min_obliqueness = std::min(s.min_obliqueness, obliq[k]);
      } else {
        s.res_interior = std::max(s.res_interior, a);
      }
      s.min_lambda = std::min(s.min_lambda, s.lambda[k]);
      s.clamped += clamped[k];
      s.penalty += pen[k];
      s.max_gradient = std::max(s.max_gradient, gradn[k]);
    }
    s.res_mean = s.bordered ? std::abs(mean_row(s)) : 0.0;
    if (J) {
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < n; ++k)
        for (const auto& [col, v] : rows[k]) trips.emplace_back(k, col, v);
      const int size = n + (s.bordered ? 1 : 0);
      if (s.bordered) {
        for (int k = 0; k < n; ++k) {
          if (!g.is_boundary(k)) trips.emplace_back(k, n, -1.0);
          trips.emplace_back(n, k, weight_[k]);
        }
      }
      J->resize(size, size);
      J->setFromTriplets(trips.begin(), trips.end());
      J->makeCompressed();
      if (size != last_size_) {
        pattern_ready_ = false;
        last_size_ = size;
      }
    }
  }

  /// One continuation step; on success checks the state invariants.
  TraceRow attempt(SolverState& s, const std::string& stage, double dt) {
    TraceRow row;
    row.stage = stage;
    row.t = s.t;
    row.eps = s.eps;
    row.dt = dt;
    std::string why;
    bool mono = true;
    bool ok = false;
    try {
      ok = newton(s, prm_.newton_tol, prm_.max_newton, row.newton_iters, why, mono);
    } catch (const Error& e) {
      why = e.what();
    }
    if (ok) {
      if (!(s.min_lambda > 0.0)) {
        ok = false;
        why = "ellipticity lost (min lambda = " + fmt(s.min_lambda) + ")";
      } else if (!(s.min_obliqueness > 0.0)) {
        ok = false;
        why = "obliqueness lost (min G_p.gamma = " + fmt(s.min_obliqueness) + ")";
      } else if (std::isfinite(a5_.K0) && s.max_gradient > prm_.gradient_slack * a5_.K0) {
        ok = false;
        why = "gradient bound exceeded (|Du| = " + fmt(s.max_gradient) + " > K0 = " + fmt(a5_.K0) + ")";
      } else {
        const auto [lo, hi] = std::minmax_element(s.u.begin(), s.u.end());
        if (!(*lo > a5_.J0.lo && *hi < a5_.J0.hi)) {
          ok = false;
          why = "range escape from J0";
        }
      }
    }
    row.accepted = ok;
    row.monotone = mono;
    row.note = ok ? "" : why;
    row.res_interior = s.res_interior;
    row.res_boundary = s.res_boundary;
    row.min_lambda = s.min_lambda;
    row.min_obliqueness = s.min_obliqueness;
    row.clamped = s.clamped;
    row.penalty = s.penalty;
    trace_.push_back(row);
    return row;
  }

  void image_checks(SolveResult& out) const {
    const Grid& g = ops_->grid();
    const auto& T = out.state.Tu;
    for (int i = 0; i + 1 < g.n_r; ++i)
      for (int j = 0; j < g.n_theta; ++j) {
        const int a = g.index(i, j), b = g.index(i + 1, j), c = g.index(i + 1, j + 1), d = g.index(i, j + 1);
        const double src = cross(g.nodes[c] - g.nodes[a], g.nodes[d] - g.nodes[b]);
        const double img = cross(T[c] - T[a], T[d] - T[b]);
        if (src * img <= 0.0) ++out.flipped_cells;
      }
    for (int k = 0; k < g.size(); ++k)
      if (g.is_boundary(k))
        out.boundary_image_error = std::max(out.boundary_image_error, std::abs(defining_function(pb_.omega_star, T[k]).phi));
  }

  static std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  }

  Problem pb_;
  const GridOperators* ops_;
  HomotopyParams prm_;
  std::vector<double> u0_, fx_, log_s0_, phi0_, weight_;
  std::vector<Vec2> normal_;
  A5Constants a5_;
  double c_est_ = 0.0, tau_ = 1.0;
  std::vector<TraceRow> trace_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  mutable bool pattern_ready_ = false;
  mutable int last_size_ = -1;
};

}  // namespace gpje
