#include "parabolic/theory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "parabolic/relaxation.h"

namespace parabolic {
namespace {

constexpr double kAcceptTol = 1e-7;
constexpr double kInactiveTol = 1e-7;

Vector vec(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }

Matrix unvec(const Vector& v, int n, int m) { return Eigen::Map<const Matrix>(v.data(), n, m); }

double max_violation(const QcqpInstance& inst, const Matrix& Y) {
  const auto r = feasibility_residual(inst, Y, 1.0);
  return std::max(r.max_eq_violation, r.max_ineq_violation);
}

// Σ_E q² + Σ_I max(q, 0)².
double merit(const QcqpInstance& inst, const Matrix& Y) {
  double s = 0.0;
  for (int k = 1; k <= inst.num_constraints(); ++k) {
    const double q = eval_q(inst.form(k), Y);
    if (inst.is_equality(k)) {
      s += q * q;
    } else if (q > 0.0) {
      s += q * q;
    }
  }
  return s;
}

// Minimum-norm solution of M x = r.
Vector min_norm_solve(const Matrix& M, const Vector& r) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(M);
  return cod.solve(r);
}

// SQP on min ‖Y − Yc‖² from a feasible Y, keeping feasibility after every step.
Matrix project(const QcqpInstance& inst, const Matrix& Yc, Matrix Y,
               const LocalSearchSettings& settings) {
  const int n = inst.n();
  const int m = inst.m();
  LocalSearchSettings inner = settings;
  inner.max_iter = 50;
  for (int it = 0; it < settings.max_iter; ++it) {
    std::vector<int> work;
    for (int k = 1; k <= inst.num_constraints(); ++k) {
      if (inst.is_equality(k) || eval_q(inst.form(k), Y) >= -kInactiveTol) work.push_back(k);
    }
    const Vector g = vec(Yc - Y);
    Vector D;
    while (true) {
      if (work.empty()) {
        D = g;
        break;
      }
      const Matrix J = jacobian(inst, work, Y);
      Vector q(work.size());
      for (size_t r = 0; r < work.size(); ++r) q(r) = eval_q(inst.form(work[r]), Y);
      // J D = −q;  D = g − Jᵀν.
      const Vector nu = min_norm_solve(J * J.transpose(), J * g + q);
      D = g - J.transpose() * nu;
      int drop = -1;
      double most = -1e-12;
      for (size_t r = 0; r < work.size(); ++r) {
        if (inst.is_inequality(work[r]) && nu(r) < most) {
          most = nu(r);
          drop = static_cast<int>(r);
        }
      }
      if (drop < 0) break;
      work.erase(work.begin() + drop);
    }
    if (D.norm() <= settings.step_tol * (1.0 + Y.norm())) break;
    const double dist = (Y - Yc).norm();
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-8; alpha *= 0.5) {
      auto trial = restore_feasibility(inst, Y + alpha * unvec(D, n, m), inner);
      if (trial && (*trial - Yc).norm() < dist - 1e-15) {
        Y = *trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return Y;
}

}  // namespace

std::optional<Matrix> restore_feasibility(const QcqpInstance& inst, const Matrix& Y0,
                                          const LocalSearchSettings& settings) {
  const int n = inst.n();
  const int m = inst.m();
  Matrix Y = Y0;
  for (int it = 0; it <= settings.max_iter; ++it) {
    std::vector<int> active;
    std::vector<double> res;
    double viol = 0.0;
    for (int k = 1; k <= inst.num_constraints(); ++k) {
      const double q = eval_q(inst.form(k), Y);
      if (inst.is_equality(k) || q > 0.0) {
        active.push_back(k);
        res.push_back(q);
        viol = std::max(viol, std::abs(q));
      }
    }
    if (viol <= settings.feas_tol) return Y;
    if (it == settings.max_iter) break;
    const Matrix J = jacobian(inst, active, Y);
    const Vector D = -min_norm_solve(J, Eigen::Map<const Vector>(res.data(), res.size()));
    const double phi = merit(inst, Y);
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-10; alpha *= 0.5) {
      const Matrix trial = Y + alpha * unvec(D, n, m);
      if (merit(inst, trial) < (1.0 - 1e-4 * alpha) * phi) {
        Y = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return std::nullopt;
}

std::optional<DistanceEstimate> feasibility_distance_upper(const QcqpInstance& inst,
                                                           const Matrix& Yc, double eta_probe,
                                                           const LocalSearchSettings& settings) {
  if (!(eta_probe > 0.0)) throw std::invalid_argument("eta_probe must be positive");
  if (Yc.rows() != inst.n() || Yc.cols() != inst.m()) {
    throw std::invalid_argument("point has wrong dimensions");
  }
  if (max_violation(inst, Yc) <= settings.feas_tol) return DistanceEstimate{0.0, Yc};

  std::vector<Matrix> starts;
  if (auto r = restore_feasibility(inst, Yc, settings)) starts.push_back(*r);
  {
    auto model = build_parabolic_model(inst, select_pairs(inst, default_pair_policy(inst)), Yc,
                                       eta_probe);
    auto sol = solve_relaxation(model);
    if (sol.solution.status == SolveStatus::kOptimal) {
      if (auto r = restore_feasibility(inst, sol.point.Y, settings)) starts.push_back(*r);
    }
  }
  std::optional<DistanceEstimate> best;
  for (const auto& s : starts) {
    const Matrix Y = project(inst, Yc, s, settings);
    if (max_violation(inst, Y) > kAcceptTol) continue;
    const double d = (Y - Yc).norm();
    if (!best || d < best->d_upper) best = DistanceEstimate{d, Y};
  }
  return best;
}

double expanded_q(const QcqpInstance& inst, int k, const Matrix& Yc, double d) {
  if (!(d >= 0.0)) throw std::invalid_argument("distance must be nonnegative");
  const QuadForm& f = inst.form(k);
  return eval_q(f, Yc) + grad_q(f, Yc).norm() * d + f.a_norm2() * d * d;
}

bool BindingSet::contains(int k) const {
  return std::binary_search(indices.begin(), indices.end(), k);
}

BindingSet quasi_binding_set(const QcqpInstance& inst, const Matrix& Yc, double d,
                             double binding_tol) {
  BindingSet b;
  for (int k = 1; k <= inst.num_constraints(); ++k) {
    if (inst.is_equality(k) || expanded_q(inst, k, Yc, d) >= -binding_tol) b.indices.push_back(k);
  }
  return b;
}

Matrix jacobian(const QcqpInstance& inst, const std::vector<int>& q, const Matrix& Yc) {
  Matrix J(q.size(), inst.n() * inst.m());
  for (size_t r = 0; r < q.size(); ++r) {
    if (q[r] < 1 || q[r] > inst.num_constraints()) {
      throw std::invalid_argument("jacobian rows must be constraint indices");
    }
    J.row(r) = vec(grad_q(inst.form(q[r]), Yc)).transpose();
  }
  return J;
}

double singularity(const QcqpInstance& inst, const Matrix& Yc, const BindingSet& b) {
  if (b.size() == 0) return std::numeric_limits<double>::infinity();
  if (b.size() > inst.n()) return 0.0;
  const Matrix J = jacobian(inst, b.indices, Yc);
  Eigen::JacobiSVD<Matrix> svd(J);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double singularity(const QcqpInstance& inst, const Matrix& Yc, double d) {
  return singularity(inst, Yc, quasi_binding_set(inst, Yc, d));
}

double pencil_norm_upper(const QcqpInstance& inst, int which) {
  if (which != 1 && which != 2) throw std::invalid_argument("pencil norm index must be 1 or 2");
  double s = 0.0;
  for (int k = 1; k <= inst.num_constraints(); ++k) {
    s += which == 1 ? inst.form(k).a_norm1() : inst.form(k).a_norm2();
  }
  return s;
}

EtaThresholds eta_thresholds(const QcqpInstance& inst, const Matrix& Yc,
                             const TheoryReport& report) {
  EtaThresholds out;
  const QuadForm& f0 = inst.objective();
  const double a1 = f0.a_norm1();
  const double a2 = f0.a_norm2();
  const double g0 = grad_q(f0, Yc).norm();
  const double r1 = report.rho1_ub;
  const double r2 = report.rho2_ub;
  const double s = report.s_value;
  auto multiplier_term = [&](double num, double den) {
    // An empty binding set has s = ∞ and contributes nothing.
    return std::isinf(den) ? 0.0 : num / den;
  };

  if (report.feasible && s > 0.0) {
    double eta = a1 + a2 + multiplier_term(2.0 * (2.0 * r1 + r2) * g0, s);
    for (int k = inst.num_equalities() + 1; k <= inst.num_constraints(); ++k) {
      if (report.binding.contains(k)) continue;
      const QuadForm& f = inst.form(k);
      const double q = std::abs(eval_q(f, Yc));
      const double gk = grad_q(f, Yc).norm();
      eta = std::max(eta, a2 + g0 * (std::sqrt(f.a_norm2() / q) + gk / q));
    }
    out.thm1 = kEtaInflation * eta;
  }

  if (report.distance_available && report.margin > 0.0) {
    const double d = report.d_upper;
    const double g0d = g0 + a2 * d;
    double eta = a1 + a2 +
                 multiplier_term(2.0 * r1 * a1 * d + 2.0 * (2.0 * r1 + r2) * g0d, report.margin);
    for (int k = inst.num_equalities() + 1; k <= inst.num_constraints(); ++k) {
      if (report.binding.contains(k)) continue;
      const QuadForm& f = inst.form(k);
      const double qt = std::abs(expanded_q(inst, k, Yc, d));
      const double gk = grad_q(f, Yc).norm();
      eta = std::max(eta, a2 + g0d * (std::sqrt(f.a_norm2() / qt) +
                                      (gk + 2.0 * f.a_norm2() * d) / qt));
    }
    out.thm2 = kEtaInflation * eta;
  }
  return out;
}

TheoryReport analyze(const QcqpInstance& inst, const Matrix& Yc, double eta_probe,
                     const LocalSearchSettings& settings) {
  TheoryReport rep;
  rep.rho1_ub = pencil_norm_upper(inst, 1);
  rep.rho2_ub = pencil_norm_upper(inst, 2);
  rep.feasible = max_violation(inst, Yc) <= settings.feas_tol;
  if (auto est = feasibility_distance_upper(inst, Yc, eta_probe, settings)) {
    rep.distance_available = true;
    rep.d_upper = est->d_upper;
    rep.Y_proj = est->Y_proj;
  } else {
    rep.notes.push_back("feasibility distance unavailable: local search did not reach F");
  }
  rep.binding = quasi_binding_set(inst, Yc, rep.distance_available ? rep.d_upper : 0.0);
  rep.s_value = singularity(inst, Yc, rep.binding);
  if (rep.binding.size() == 0) {
    rep.glicq_ok = true;
  } else {
    const Matrix J = jacobian(inst, rep.binding.indices, Yc);
    Eigen::FullPivLU<Matrix> lu(J);
    lu.setThreshold(1e-12);
    rep.glicq_ok = lu.rank() == rep.binding.size();
  }
  const int nb = rep.binding.size();
  rep.wide_binding = nb > inst.n() && nb <= inst.n() * inst.m();
  if (rep.wide_binding) {
    rep.notes.push_back("binding set larger than n but within n*m; singularity set to 0");
  }
  rep.margin = std::isinf(rep.s_value)
                   ? std::numeric_limits<double>::infinity()
                   : rep.s_value - 2.0 * (rep.rho1_ub + rep.rho2_ub) * rep.d_upper;
  const EtaThresholds eta = eta_thresholds(inst, Yc, rep);
  rep.eta_thm1 = eta.thm1;
  rep.eta_thm2 = eta.thm2;
  return rep;
}

ExactnessCertificate exactness_certificate(const Matrix& Lambda) {
  ExactnessCertificate c;
  c.Lambda = Lambda;
  const int n = static_cast<int>(Lambda.rows());
  c.diag_dominance_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double off = Lambda.row(i).cwiseAbs().sum() - std::abs(Lambda(i, i));
    c.diag_dominance_margin = std::min(c.diag_dominance_margin, Lambda(i, i) - off);
  }
  if (n == 0) c.diag_dominance_margin = 0.0;
  c.holds = c.diag_dominance_margin >= 0.0;
  return c;
}

ExactnessCertificate exactness_certificate(const QcqpInstance& inst,
                                           const std::map<int, double>& tau, double eta,
                                           const std::vector<int>& binding) {
  const int n = inst.n();
  Matrix L = eta * Matrix::Identity(n, n) + inst.objective().dense_A();
  for (int k : binding) {
    auto it = tau.find(k);
    if (it == tau.end()) throw std::invalid_argument("multipliers do not cover the binding set");
    L += it->second * inst.form(k).dense_A();
  }
  return exactness_certificate(L);
}

double kkt_residual(const QcqpInstance& inst, const Matrix& Y, const std::map<int, double>& tau,
                    const std::vector<int>& binding) {
  Matrix S = grad_q(inst.objective(), Y) / 2.0;
  double primal = 0.0;
  double sign = 0.0;
  for (int k : binding) {
    auto it = tau.find(k);
    if (it == tau.end()) throw std::invalid_argument("multipliers do not cover the binding set");
    S += it->second * grad_q(inst.form(k), Y) / 2.0;
    primal = std::max(primal, std::abs(eval_q(inst.form(k), Y)));
    if (inst.is_inequality(k)) sign = std::max(sign, -it->second);
  }
  double inactive = 0.0;
  for (int k = inst.num_equalities() + 1; k <= inst.num_constraints(); ++k) {
    if (std::find(binding.begin(), binding.end(), k) != binding.end()) continue;
    inactive = std::max(inactive, eval_q(inst.form(k), Y));
  }
  return std::max({S.norm(), primal, sign, inactive});
}

std::map<int, double> refine_multipliers(const QcqpInstance& inst, const Matrix& Y,
                                         const std::vector<int>& binding,
                                         const std::map<int, double>& tau, const Matrix& anchor,
                                         double eta) {
  std::map<int, double> out = tau;
  if (binding.empty()) return out;
  const Matrix Jt = jacobian(inst, binding, Y).transpose() / 2.0;
  Vector t0(binding.size());
  for (size_t r = 0; r < binding.size(); ++r) {
    auto it = tau.find(binding[r]);
    t0(r) = it == tau.end() ? 0.0 : it->second;
  }
  const Vector res = vec(grad_q(inst.objective(), Y) / 2.0 + eta * (Y - anchor)) + Jt * t0;
  const Vector t = t0 - min_norm_solve(Jt, res);
  for (size_t r = 0; r < binding.size(); ++r) out[binding[r]] = t(r);
  return out;
}

std::optional<PolishedPoint> polish_kkt(const QcqpInstance& inst, const Matrix& Y0,
                                        const std::map<int, double>& tau,
                                        const std::vector<int>& binding, const Matrix& anchor,
                                        double eta) {
  const int n = inst.n();
  const int m = inst.m();
  const int N = n * m;
  const int nb = static_cast<int>(binding.size());
  if (nb > N) return std::nullopt;
  Matrix Y = Y0;
  Vector t(nb);
  for (int r = 0; r < nb; ++r) {
    auto it = tau.find(binding[r]);
    t(r) = it == tau.end() ? 0.0 : it->second;
  }
  std::vector<Matrix> A(nb);
  for (int r = 0; r < nb; ++r) A[r] = inst.form(binding[r]).dense_A();
  const Matrix A0 = inst.objective().dense_A();
  auto residual = [&](Vector& F) {
    Matrix S = grad_q(inst.objective(), Y) / 2.0 + eta * (Y - anchor);
    F.resize(N + nb);
    for (int r = 0; r < nb; ++r) {
      S += t(r) * grad_q(inst.form(binding[r]), Y) / 2.0;
      F(N + r) = eval_q(inst.form(binding[r]), Y);
    }
    F.head(N) = vec(S);
    return F.lpNorm<Eigen::Infinity>();
  };
  const double scale = 1.0 + grad_q(inst.objective(), Y0).norm();
  Vector F;
  double res = residual(F);
  for (int it = 0; it < 20 && res > 1e-14 * scale; ++it) {
    Matrix H = A0 + eta * Matrix::Identity(n, n);
    for (int r = 0; r < nb; ++r) H += t(r) * A[r];
    Matrix K = Matrix::Zero(N + nb, N + nb);
    for (int j = 0; j < m; ++j) K.block(j * n, j * n, n, n) = H;
    const Matrix J = jacobian(inst, binding, Y);
    K.topRightCorner(N, nb) = J.transpose() / 2.0;
    K.bottomLeftCorner(nb, N) = J;
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) return std::nullopt;
    const Vector step = lu.solve(-F);
    Y += unvec(step.head(N), n, m);
    t += step.tail(nb);
    res = residual(F);
    if (!std::isfinite(res)) return std::nullopt;
  }
  if (res > 1e-11 * scale) return std::nullopt;
  PolishedPoint out{Y, tau, res};
  for (int r = 0; r < nb; ++r) out.tau[binding[r]] = t(r);
  return out;
}

std::optional<double> convergence_threshold_estimate(const QcqpInstance& inst,
                                                     const std::vector<Matrix>& points) {
  if (points.empty()) return std::nullopt;
  double gmax = 0.0;
  double smin = std::numeric_limits<double>::infinity();
  for (const auto& Y : points) {
    gmax = std::max(gmax, grad_q(inst.objective(), Y).norm());
    smin = std::min(smin, singularity(inst, Y, 0.0));
  }
  if (!(smin > 0.0)) return std::nullopt;
  const QuadForm& f0 = inst.objective();
  const double term = std::isinf(smin) ? 0.0 : 3.0 * pencil_norm_upper(inst, 1) * gmax / smin;
  return f0.a_norm1() + f0.a_norm2() + term;
}

}  // namespace parabolic
