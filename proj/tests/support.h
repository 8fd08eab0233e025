#pragma once

// Random instance generators and independent oracles used across the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "parabolic/qcqp.h"

namespace parabolic::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix M(r, c);
  std::normal_distribution<double> g(0.0, scale);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) M(i, j) = g(rng);
  }
  return M;
}

inline Matrix random_symmetric(Rng& rng, int n, double scale = 1.0) {
  Matrix M = random_matrix(rng, n, n, scale);
  return 0.5 * (M + M.transpose());
}

inline Matrix random_psd(Rng& rng, int n, double shift = 0.1) {
  Matrix M = random_matrix(rng, n, n);
  return M * M.transpose() / n + shift * Matrix::Identity(n, n);
}

// Form whose value at Y equals `value`.
inline QuadForm form_through(const Matrix& A, const Matrix& B, const Matrix& Y, double value) {
  const double q = (Y.transpose() * A * Y).trace() + 2.0 * (B.transpose() * Y).trace();
  return QuadForm(A, B, value - q);
}

// Elementwise triple-loop evaluation of tr{YᵀAY} + 2 tr{BᵀY} + c.
inline double loop_eval(const Matrix& A, const Matrix& B, double c, const Matrix& Y) {
  double s = c;
  for (int col = 0; col < Y.cols(); ++col) {
    for (int i = 0; i < Y.rows(); ++i) {
      for (int j = 0; j < Y.rows(); ++j) s += Y(i, col) * A(i, j) * Y(j, col);
      s += 2.0 * B(i, col) * Y(i, col);
    }
  }
  return s;
}

struct RandomInstance {
  std::shared_ptr<const QcqpInstance> inst;
  Matrix feasible;  // a point known to satisfy every constraint
};

struct RandomSpec {
  int n = 3;
  int m = 1;
  int num_eq = 1;
  int num_ineq = 1;
  double box = 0.0;  // > 0 adds bounds [−box, box] as metadata and explicit rows
  double margin_lo = 0.1;
  double margin_hi = 1.0;
};

// Constraints are synthesized around a random point Y0, so Y0 is feasible:
// equalities vanish at Y0 and inequalities are strictly negative there.
inline RandomInstance random_instance(Rng& rng, const RandomSpec& spec) {
  const int n = spec.n;
  const int m = spec.m;
  const double r = spec.box > 0.0 ? 0.8 * spec.box : 1.0;
  Matrix Y0(n, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) Y0(i, j) = uniform(rng, -r, r);
  }
  QuadForm obj(random_symmetric(rng, n), random_matrix(rng, n, m), uniform(rng, -1, 1));
  std::vector<QuadForm> eq, ineq;
  for (int k = 0; k < spec.num_eq; ++k) {
    eq.push_back(form_through(random_symmetric(rng, n), random_matrix(rng, n, m), Y0, 0.0));
  }
  for (int k = 0; k < spec.num_ineq; ++k) {
    ineq.push_back(form_through(random_symmetric(rng, n), random_matrix(rng, n, m), Y0,
                                -uniform(rng, spec.margin_lo, spec.margin_hi)));
  }
  std::optional<Bounds> bounds;
  if (spec.box > 0.0) {
    bounds = Bounds{Vector::Constant(n, -spec.box), Vector::Constant(n, spec.box)};
    for (int i = 0; i < n; ++i) {
      Matrix B = Matrix::Zero(n, m);
      B(i, 0) = 0.5;
      ineq.push_back(QuadForm::Linear(B, -spec.box));
      ineq.push_back(QuadForm::Linear(-B, -spec.box));
    }
  }
  RandomInstance out;
  out.inst = std::make_shared<const QcqpInstance>(n, m, std::move(obj), std::move(eq),
                                                  std::move(ineq), std::move(bounds));
  out.feasible = Y0;
  return out;
}

// ---------------------------------------------------------------------------
// Smooth unconstrained minimization by BFGS with Armijo backtracking.

using Objective = std::function<double(const Vector&, Vector&)>;

inline Vector bfgs(const Objective& f, Vector x, int max_iter = 500, double gtol = 1e-11) {
  const int n = static_cast<int>(x.size());
  Matrix H = Matrix::Identity(n, n);
  Vector g(n);
  double fx = f(x, g);
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < gtol) break;
    Vector p = -H * g;
    if (p.dot(g) >= 0.0) {
      H.setIdentity();
      p = -g;
    }
    double t = 1.0;
    Vector xn(n), gn(n);
    double fn = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * p;
      fn = f(xn, gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * g.dot(p)) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
    const Vector sk = xn - x;
    const Vector yk = gn - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-14 * sk.norm() * yk.norm()) {
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - rho * sk * yk.transpose()) * H * (I - rho * yk * sk.transpose()) +
          rho * sk * sk.transpose();
    }
    x = xn;
    g = gn;
    fx = fn;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian local solver for min f(Y) s.t. the instance constraints
// plus, optionally, an extra smooth objective term. Returns the final point.

struct LocalResult {
  Matrix Y;
  double objective = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
};

inline LocalResult augmented_lagrangian(const QcqpInstance& inst,
                                        const std::function<double(const Matrix&, Matrix&)>& f,
                                        Matrix Y, int outer = 40) {
  const int n = inst.n();
  const int m = inst.m();
  const int ne = inst.num_equalities();
  const int ni = inst.num_inequalities();
  Vector lam_e = Vector::Zero(ne);
  Vector lam_i = Vector::Zero(ni);
  double rho = 10.0;
  double prev_violation = std::numeric_limits<double>::infinity();
  for (int o = 0; o < outer; ++o) {
    Objective L = [&](const Vector& v, Vector& g) {
      Matrix Yv = Eigen::Map<const Matrix>(v.data(), n, m);
      Matrix G(n, m);
      double val = f(Yv, G);
      for (int k = 0; k < ne; ++k) {
        const QuadForm& q = inst.equalities()[k];
        const double c = eval_q(q, Yv);
        val += lam_e(k) * c + 0.5 * rho * c * c;
        G += (lam_e(k) + rho * c) * grad_q(q, Yv);
      }
      for (int k = 0; k < ni; ++k) {
        const QuadForm& q = inst.inequalities()[k];
        const double c = eval_q(q, Yv);
        const double t = std::max(0.0, lam_i(k) + rho * c);
        val += (t * t - lam_i(k) * lam_i(k)) / (2.0 * rho);
        if (t > 0.0) G += t * grad_q(q, Yv);
      }
      g = Eigen::Map<const Vector>(G.data(), n * m);
      return val;
    };
    Vector v = Eigen::Map<const Vector>(Y.data(), n * m);
    // Penalty gradients scale with rho; an absolute tolerance would never be met.
    v = bfgs(L, v, 500, 1e-11 * std::max(1.0, rho));
    Y = Eigen::Map<const Matrix>(v.data(), n, m);
    double violation = 0.0;
    for (int k = 0; k < ne; ++k) {
      const double c = eval_q(inst.equalities()[k], Y);
      lam_e(k) += rho * c;
      violation = std::max(violation, std::abs(c));
    }
    for (int k = 0; k < ni; ++k) {
      const double c = eval_q(inst.inequalities()[k], Y);
      lam_i(k) = std::max(0.0, lam_i(k) + rho * c);
      violation = std::max(violation, std::max(c, 0.0));
    }
    if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, 1e10);
    prev_violation = violation;
    if (violation < 1e-10) break;
  }
  LocalResult r;
  r.Y = Y;
  Matrix G(n, m);
  r.objective = f(Y, G);
  r.violation = feasibility_residual(inst, Y, 1.0).max_eq_violation;
  r.violation = std::max(r.violation, feasibility_residual(inst, Y, 1.0).max_ineq_violation);
  return r;
}

// Best feasible local minimum of q0 over multiple random starts plus the given seeds.
inline LocalResult multistart_minimum(const QcqpInstance& inst, Rng& rng, int starts,
                                      const std::vector<Matrix>& seeds, double radius,
                                      double feas_tol = 1e-9) {
  auto f = [&](const Matrix& Y, Matrix& G) {
    G = grad_q(inst.objective(), Y);
    return eval_q(inst.objective(), Y);
  };
  LocalResult best;
  auto consider = [&](const Matrix& Y0) {
    LocalResult r = augmented_lagrangian(inst, f, Y0);
    if (r.violation <= feas_tol && r.objective < best.objective) best = r;
  };
  for (const auto& s : seeds) {
    consider(s);
    if (feasibility_residual(inst, s, feas_tol).is_feasible) {
      const double v = eval_q(inst.objective(), s);
      if (v < best.objective) best = {s, v, 0.0};
    }
  }
  for (int k = 0; k < starts; ++k) {
    Matrix Y0(inst.n(), inst.m());
    for (int j = 0; j < inst.m(); ++j) {
      for (int i = 0; i < inst.n(); ++i) Y0(i, j) = uniform(rng, -radius, radius);
    }
    consider(Y0);
  }
  return best;
}

// Multistart projection: min ‖Y − Yc‖² over the feasible set.
inline LocalResult multistart_projection(const QcqpInstance& inst, const Matrix& Yc, Rng& rng,
                                         int starts, double radius, double feas_tol = 1e-9) {
  auto f = [&](const Matrix& Y, Matrix& G) {
    G = 2.0 * (Y - Yc);
    return (Y - Yc).squaredNorm();
  };
  LocalResult best;
  for (int k = 0; k <= starts; ++k) {
    Matrix Y0 = Yc;
    if (k > 0) {
      for (int j = 0; j < inst.m(); ++j) {
        for (int i = 0; i < inst.n(); ++i) Y0(i, j) += uniform(rng, -radius, radius);
      }
    }
    LocalResult r = augmented_lagrangian(inst, f, Y0);
    if (r.violation <= feas_tol && r.objective < best.objective) best = r;
  }
  if (std::isfinite(best.objective)) best.objective = std::sqrt(best.objective);
  return best;
}

// ---------------------------------------------------------------------------
// Strictly convex QP  min xᵀQx + 2qᵀx  s.t.  Cx ≤ d  by active-set enumeration.

inline std::optional<double> convex_qp_enumerate(const Matrix& Q, const Vector& q,
                                                 const Matrix& C, const Vector& d) {
  const int n = static_cast<int>(Q.rows());
  const int r = static_cast<int>(C.rows());
  std::optional<double> best;
  for (int mask = 0; mask < (1 << r); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < r; ++i) {
      if (mask & (1 << i)) act.push_back(i);
    }
    const int a = static_cast<int>(act.size());
    if (a > n) continue;
    Matrix K = Matrix::Zero(n + a, n + a);
    Vector rhs(n + a);
    K.topLeftCorner(n, n) = 2.0 * Q;
    rhs.head(n) = -2.0 * q;
    for (int t = 0; t < a; ++t) {
      K.block(n + t, 0, 1, n) = C.row(act[t]);
      K.block(0, n + t, n, 1) = C.row(act[t]).transpose();
      rhs(n + t) = d(act[t]);
    }
    Eigen::FullPivLU<Matrix> lu(K);
    if (lu.rank() < n + a) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    if (a > 0 && sol.tail(a).minCoeff() < -1e-10) continue;
    if (r > 0 && (C * x - d).maxCoeff() > 1e-9) continue;
    const double val = x.dot(Q * x) + 2.0 * q.dot(x);
    if (!best || val < *best) best = val;
  }
  return best;
}

}  // namespace parabolic::testing
