#include "parabolic/conic_solver.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace parabolic {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kMaxIter:
      return "max_iter";
    case SolveStatus::kNumericFailure:
      return "numeric_failure";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (!(tol_feas > 0.0) || !(tol_gap > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

Vector SocScaling::apply(const Vector& v) const {
  const int dim = static_cast<int>(v.size());
  Vector out(dim);
  const double v0 = v(0);
  if (dim == 1) {
    out(0) = eta * a * v0;
    return out;
  }
  const auto v1 = v.tail(dim - 1);
  const double qv = q.dot(v1);
  out(0) = eta * (a * v0 + qv);
  out.tail(dim - 1) = eta * (v1 + (v0 + qv / (1.0 + a)) * q);
  return out;
}

Vector SocScaling::apply_inverse(const Vector& v) const {
  const int dim = static_cast<int>(v.size());
  Vector out(dim);
  const double v0 = v(0);
  if (dim == 1) {
    out(0) = v0 / (eta * a);
    return out;
  }
  const auto v1 = v.tail(dim - 1);
  const double qv = q.dot(v1);
  out(0) = (a * v0 - qv) / eta;
  out.tail(dim - 1) = (v1 + (-v0 + qv / (1.0 + a)) * q) / eta;
  return out;
}

Matrix SocScaling::squared() const {
  const int dim = static_cast<int>(q.size()) + 1;
  Matrix W(dim, dim);
  W(0, 0) = a;
  if (dim > 1) {
    W.block(0, 1, 1, dim - 1) = q.transpose();
    W.block(1, 0, dim - 1, 1) = q;
    W.block(1, 1, dim - 1, dim - 1) =
        Matrix::Identity(dim - 1, dim - 1) + q * q.transpose() / (1.0 + a);
  }
  return eta * eta * (W * W);
}

namespace {

// det(u) = u0² − ‖u1‖², computed without cancellation.
double soc_det(const double* u, int q) {
  double n1 = 0.0;
  for (int i = 1; i < q; ++i) n1 += u[i] * u[i];
  n1 = std::sqrt(n1);
  return (u[0] - n1) * (u[0] + n1);
}

}  // namespace

SocScaling soc_nt_scaling(const Vector& s, const Vector& z) {
  const int q = static_cast<int>(s.size());
  SocScaling w;
  w.q = Vector::Zero(q - 1);
  const double sdet = soc_det(s.data(), q);
  const double zdet = soc_det(z.data(), q);
  if (!(sdet > 0.0) || !(zdet > 0.0) || !(s(0) > 0.0) || !(z(0) > 0.0)) {
    throw std::domain_error("NT scaling requires interior points");
  }
  const double snorm = std::sqrt(sdet);
  const double znorm = std::sqrt(zdet);
  const Vector sb = s / snorm;
  const Vector zb = z / znorm;
  const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
  w.eta = std::sqrt(snorm / znorm);
  w.a = (sb(0) + zb(0)) / (2.0 * gamma);
  if (q > 1) w.q = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
  return w;
}

namespace {

using Clock = std::chrono::steady_clock;
using Triplet = Eigen::Triplet<double>;

constexpr double kStepFraction = 0.99;
constexpr double kStaticReg = 1e-8;
constexpr int kRefineSteps = 20;
// KKT systems up to this size use a dense pivoted LU.
constexpr int kDenseLimit = 800;
constexpr double kInaccurateCertificate = 1e-5;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConeLayout {
  int l = 0;
  std::vector<int> dims;
  std::vector<int> offsets;
  int size = 0;
  int degree() const { return l + static_cast<int>(dims.size()); }
};

ConeLayout make_layout(const ConeProgram& prog) {
  ConeLayout c;
  c.l = prog.num_nonneg;
  c.dims = prog.soc_dims;
  int off = c.l;
  for (int d : c.dims) {
    if (d < 1) throw std::invalid_argument("second-order cone dimension must be positive");
    c.offsets.push_back(off);
    off += d;
  }
  c.size = off;
  return c;
}

void add_identity(const ConeLayout& K, Vector& u, double t) {
  u.head(K.l).array() += t;
  for (int off : K.offsets) u(off) += t;
}

double min_eig(const ConeLayout& K, const Vector& u) {
  double m = std::numeric_limits<double>::infinity();
  if (K.l > 0) m = u.head(K.l).minCoeff();
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    const double tail = q > 1 ? u.segment(off + 1, q - 1).norm() : 0.0;
    m = std::min(m, u(off) - tail);
  }
  return m;
}

Vector jordan(const ConeLayout& K, const Vector& u, const Vector& v) {
  Vector out(K.size);
  out.head(K.l) = u.head(K.l).cwiseProduct(v.head(K.l));
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    out(off) = u.segment(off, q).dot(v.segment(off, q));
    if (q > 1) {
      out.segment(off + 1, q - 1) =
          u(off) * v.segment(off + 1, q - 1) + v(off) * u.segment(off + 1, q - 1);
    }
  }
  return out;
}

// Solves λ ∘ x = w.
Vector jordan_div(const ConeLayout& K, const Vector& lam, const Vector& w) {
  Vector out(K.size);
  out.head(K.l) = w.head(K.l).cwiseQuotient(lam.head(K.l));
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    const double l0 = lam(off);
    if (q == 1) {
      out(off) = w(off) / l0;
      continue;
    }
    const auto l1 = lam.segment(off + 1, q - 1);
    const auto w1 = w.segment(off + 1, q - 1);
    const double det = soc_det(lam.data() + off, q);
    const double x0 = (l0 * w(off) - l1.dot(w1)) / det;
    out(off) = x0;
    out.segment(off + 1, q - 1) = (w1 - x0 * l1) / l0;
  }
  return out;
}

// Largest α with u + α d in the cone (infinity if unbounded).
double max_step(const ConeLayout& K, const Vector& u, const Vector& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < K.l; ++i) {
    if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
  }
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    const double u0 = u(off);
    const double d0 = d(off);
    if (d0 < 0.0) alpha = std::min(alpha, -u0 / d0);
    if (q == 1) continue;
    const auto u1 = u.segment(off + 1, q - 1);
    const auto d1 = d.segment(off + 1, q - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = u0 * d0 - u1.dot(d1);
    const double c = std::max(soc_det(u.data() + off, q), 0.0);
    // Smallest positive root of a α² + 2 b α + c.
    const double disc = b * b - a * c;
    double root = std::numeric_limits<double>::infinity();
    if (a < 0.0 || b < 0.0) {
      const double sq = std::sqrt(std::max(disc, 0.0));
      if (disc >= 0.0 || a < 0.0) {
        if (b <= 0.0) {
          root = c / (-b + sq);
        } else {
          root = (b + sq) / (-a);
        }
      }
    }
    alpha = std::min(alpha, root);
  }
  return std::max(alpha, 0.0);
}

struct Scaling {
  Vector w_lin;
  std::vector<SocScaling> soc;
};

Scaling compute_scaling(const ConeLayout& K, const Vector& s, const Vector& z) {
  Scaling W;
  W.w_lin = (s.head(K.l).array() / z.head(K.l).array()).sqrt();
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    W.soc.push_back(soc_nt_scaling(s.segment(off, q), z.segment(off, q)));
  }
  return W;
}

Vector apply_w(const ConeLayout& K, const Scaling& W, const Vector& v) {
  Vector out(K.size);
  out.head(K.l) = W.w_lin.cwiseProduct(v.head(K.l));
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    out.segment(off, q) = W.soc[k].apply(v.segment(off, q));
  }
  return out;
}

Vector apply_winv(const ConeLayout& K, const Scaling& W, const Vector& v) {
  Vector out(K.size);
  out.head(K.l) = v.head(K.l).cwiseQuotient(W.w_lin);
  for (size_t k = 0; k < K.dims.size(); ++k) {
    const int q = K.dims[k];
    const int off = K.offsets[k];
    out.segment(off, q) = W.soc[k].apply_inverse(v.segment(off, q));
  }
  return out;
}

Matrix soc_inverse_matrix(const SocScaling& w) {
  const int dim = static_cast<int>(w.q.size()) + 1;
  Matrix M(dim, dim);
  M(0, 0) = w.a;
  if (dim > 1) {
    M.block(0, 1, 1, dim - 1) = -w.q.transpose();
    M.block(1, 0, dim - 1, 1) = -w.q;
    M.block(1, 1, dim - 1, dim - 1) =
        Matrix::Identity(dim - 1, dim - 1) + w.q * w.q.transpose() / (1.0 + w.a);
  }
  return M / w.eta;
}

// Scaled KKT system
//
//   [ 0   Aᵀ  G̃ᵀ ] [Δx]   [r1     ]
//   [ A   0   0   ] [Δy] = [r2     ]      G̃ = W⁻¹G,  u = WΔz,
//   [ G̃   0   −I  ] [u ]   [W⁻¹ r3 ]
//
// equivalent to the unscaled system with lower-right block −W². Small systems
// are factored dense with partial pivoting; larger ones use a regularized sparse
// LDLᵀ and iterative refinement against the unregularized matrix.
class KktSystem {
 public:
  KktSystem(const ConeProgram& prog, const ConeLayout& K)
      : prog_(prog), K_(K), N_(prog.num_vars()), p_(prog.num_eq()), mg_(K.size) {
    Grow_ = prog.G;
    // Column support of each second-order cone block of G.
    for (size_t k = 0; k < K_.dims.size(); ++k) {
      std::vector<int> cols;
      for (int r = K_.offsets[k]; r < K_.offsets[k] + K_.dims[k]; ++r) {
        for (RowMatrix::InnerIterator it(Grow_, r); it; ++it) cols.push_back(it.col());
      }
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
      block_cols_.push_back(std::move(cols));
    }
  }

  bool factor(const Scaling* W) {
    W_ = W;
    std::vector<Triplet> gt;
    gt.reserve(prog_.G.nonZeros() * 2);
    for (int r = 0; r < K_.l; ++r) {
      const double inv = W ? 1.0 / W->w_lin(r) : 1.0;
      for (RowMatrix::InnerIterator it(Grow_, r); it; ++it) {
        gt.emplace_back(r, it.col(), inv * it.value());
      }
    }
    for (size_t k = 0; k < K_.dims.size(); ++k) {
      const int q = K_.dims[k];
      const int off = K_.offsets[k];
      const auto& cols = block_cols_[k];
      Matrix Gb = Matrix::Zero(q, cols.size());
      for (int r = 0; r < q; ++r) {
        size_t pos = 0;
        for (RowMatrix::InnerIterator it(Grow_, off + r); it; ++it) {
          while (cols[pos] != it.col()) ++pos;
          Gb(r, pos) = it.value();
        }
      }
      const Matrix Sb = W ? Matrix(soc_inverse_matrix(W->soc[k]) * Gb) : Gb;
      for (int r = 0; r < q; ++r) {
        for (size_t j = 0; j < cols.size(); ++j) gt.emplace_back(off + r, cols[j], Sb(r, j));
      }
    }
    Gs_.resize(mg_, N_);
    Gs_.setFromTriplets(gt.begin(), gt.end());
    Gst_ = Gs_.transpose();

    const int T = N_ + p_ + mg_;
    std::vector<Triplet> trip;
    trip.reserve(N_ + prog_.A.nonZeros() + Gs_.nonZeros() + p_ + mg_);
    for (int i = 0; i < N_; ++i) trip.emplace_back(i, i, kStaticReg);
    for (int col = 0; col < prog_.A.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(prog_.A, col); it; ++it) {
        trip.emplace_back(N_ + it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < p_; ++i) trip.emplace_back(N_ + i, N_ + i, -kStaticReg);
    for (int col = 0; col < Gs_.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(Gs_, col); it; ++it) {
        trip.emplace_back(N_ + p_ + it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < mg_; ++i) trip.emplace_back(N_ + p_ + i, N_ + p_ + i, -1.0 - kStaticReg);
    kkt_.resize(T, T);
    kkt_.setFromTriplets(trip.begin(), trip.end());
    if (T <= kDenseLimit) {
      Matrix D = Matrix(kkt_).selfadjointView<Eigen::Lower>();
      for (int i = 0; i < N_; ++i) D(i, i) = 0.0;
      for (int i = N_; i < N_ + p_; ++i) D(i, i) = 0.0;
      for (int i = N_ + p_; i < T; ++i) D(i, i) = -1.0;
      dense_.compute(D);
      use_dense_ = true;
      return true;
    }
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt_);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt_);
    return ldlt_.info() == Eigen::Success;
  }

  // Solves the unscaled system K [Δx; Δy; Δz] = rhs.
  bool solve(const Vector& rhs, Vector& sol) const {
    Vector srhs = rhs;
    if (W_) srhs.tail(mg_) = apply_winv(K_, *W_, rhs.tail(mg_));
    auto base = [&](const Vector& r) -> Vector {
      return use_dense_ ? Vector(dense_.solve(r)) : Vector(ldlt_.solve(r));
    };
    Vector v = base(srhs);
    if (!v.allFinite()) return false;
    const double scale = 1.0 + srhs.lpNorm<Eigen::Infinity>();
    Vector res = srhs - multiply(v);
    double err = res.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < kRefineSteps && err > 1e-15 * scale; ++it) {
      const Vector next = v + base(res);
      const Vector next_res = srhs - multiply(next);
      const double next_err = next_res.lpNorm<Eigen::Infinity>();
      if (!(next_err < err)) break;
      v = next;
      res = next_res;
      err = next_err;
    }
    sol = v;
    if (W_) sol.tail(mg_) = apply_winv(K_, *W_, v.tail(mg_));
    return sol.allFinite();
  }

 private:
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  // Unregularized scaled K v.
  Vector multiply(const Vector& v) const {
    Vector out(v.size());
    const auto vx = v.head(N_);
    const auto vy = v.segment(N_, p_);
    const auto vu = v.tail(mg_);
    out.head(N_) = prog_.A.transpose() * vy + Gst_ * vu;
    out.segment(N_, p_) = prog_.A * vx;
    out.tail(mg_) = Gs_ * vx - vu;
    return out;
  }

  const ConeProgram& prog_;
  const ConeLayout& K_;
  int N_, p_, mg_;
  RowMatrix Grow_;
  std::vector<std::vector<int>> block_cols_;
  SparseMatrix Gs_, Gst_;
  SparseMatrix kkt_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
  Eigen::PartialPivLU<Matrix> dense_;
  bool use_dense_ = false;
  const Scaling* W_ = nullptr;
};

void check_program(const ConeProgram& prog, const ConeLayout& K) {
  const int N = prog.num_vars();
  if (prog.A.rows() != prog.b.size() || prog.A.cols() != N) {
    throw std::invalid_argument("equality block dimensions disagree");
  }
  if (prog.G.rows() != prog.h.size() || prog.G.cols() != N) {
    throw std::invalid_argument("cone block dimensions disagree");
  }
  if (K.size != prog.h.size()) {
    throw std::invalid_argument("cone dimensions do not match the number of cone rows");
  }
}

}  // namespace

ConeSolution solve_cone_program(const ConeProgram& prog, const SolverSettings& settings) {
  settings.validate();
  const auto start = Clock::now();
  const ConeLayout K = make_layout(prog);
  check_program(prog, K);
  const int N = prog.num_vars();
  const int p = prog.num_eq();
  const int mg = K.size;
  const Vector& c = prog.c;
  const Vector& b = prog.b;
  const Vector& h = prog.h;
  const SparseMatrix At = prog.A.transpose();
  const SparseMatrix Gt = prog.G.transpose();

  ConeSolution sol;
  auto finish = [&](SolveStatus st) {
    sol.status = st;
    if (settings.verbose) std::fprintf(stderr, "status %s\n", to_string(st).c_str());
    sol.time_s = std::chrono::duration<double>(Clock::now() - start).count();
    return sol;
  };
  auto segs = [&](const Vector& v, Vector& x, Vector& y, Vector& z) {
    x = v.head(N);
    y = v.segment(N, p);
    z = v.tail(mg);
  };

  KktSystem kkt(prog, K);
  if (!kkt.factor(nullptr)) return finish(SolveStatus::kNumericFailure);

  Vector x, y, z, s;
  {
    Vector rhs(N + p + mg), v;
    rhs << Vector::Zero(N), b, h;
    if (!kkt.solve(rhs, v)) return finish(SolveStatus::kNumericFailure);
    Vector yy, zz;
    segs(v, x, yy, zz);
    s = -zz;
    const double ap = -min_eig(K, s);
    if (ap >= -1e-8 * std::max(1.0, s.lpNorm<Eigen::Infinity>())) add_identity(K, s, 1.0 + ap);
    rhs << -c, Vector::Zero(p), Vector::Zero(mg);
    if (!kkt.solve(rhs, v)) return finish(SolveStatus::kNumericFailure);
    Vector xx;
    segs(v, xx, y, z);
    const double ad = -min_eig(K, z);
    if (ad >= -1e-8 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) add_identity(K, z, 1.0 + ad);
  }
  if (mg == 0) {
    // Pure equality-constrained LP: only the embedding variables remain.
    s.resize(0);
    z.resize(0);
  }
  double tau = 1.0;
  double kappa = 1.0;
  const double nb = std::max(1.0, b.norm());
  const double nh = std::max(1.0, h.norm());
  const double nc = std::max(1.0, c.norm());
  Vector e = Vector::Zero(mg);
  add_identity(K, e, 1.0);

  for (int iter = 0;; ++iter) {
    const Vector Atyz = At * y + Gt * z;
    const Vector rx = Atyz + c * tau;
    const Vector Ax = prog.A * x;
    const Vector Gx = prog.G * x;
    const Vector ry = -Ax + b * tau;
    const Vector rz = -Gx + h * tau - s;
    const double cx = c.dot(x);
    const double byhz = b.dot(y) + h.dot(z);
    const double rtau = -cx - byhz - kappa;

    sol.x = x / tau;
    sol.s = s / tau;
    sol.y = y / tau;
    sol.z = z / tau;
    sol.objective = cx / tau + prog.c0;
    sol.dual_objective = -byhz / tau + prog.c0;
    sol.iterations = iter;
    sol.pres = std::max(ry.norm() / nb, rz.norm() / nh) / tau;
    sol.dres = rx.norm() / nc / tau;
    sol.gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau;
    const double dcost = -byhz / tau;
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = sol.gap / -pcost;
    if (dcost > 0.0) relgap = sol.gap / dcost;
    if (settings.verbose) {
      std::fprintf(stderr, "%3d pcost %+.9e dcost %+.9e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   iter, pcost, dcost, sol.gap, sol.pres, sol.dres, tau, kappa);
    }
    if (sol.pres < settings.tol_feas && sol.dres < settings.tol_feas &&
        (sol.gap < settings.tol_gap || relgap < settings.tol_gap)) {
      return finish(SolveStatus::kOptimal);
    }
    const double infres = byhz < 0.0 ? Atyz.norm() / -byhz : kInf;
    const double unbres = cx < 0.0 ? std::max(Ax.norm(), (Gx + s).norm()) / -cx : kInf;
    auto certificate = [&](double tol) -> std::optional<SolveStatus> {
      if (!(kappa > tau)) return std::nullopt;
      if (infres < tol) {
        sol.x.setZero();
        sol.s.setZero();
        sol.y = y / -byhz;
        sol.z = z / -byhz;
        return SolveStatus::kInfeasible;
      }
      if (unbres < tol) {
        sol.x = x / -cx;
        sol.s = s / -cx;
        sol.y.setZero();
        sol.z.setZero();
        return SolveStatus::kUnbounded;
      }
      return std::nullopt;
    };
    if (auto st = certificate(settings.tol_feas)) return finish(*st);
    // Failure exits accept a certificate at reduced accuracy.
    auto fail = [&](SolveStatus st) {
      if (auto cert = certificate(kInaccurateCertificate)) return finish(*cert);
      return finish(st);
    };
    if (iter >= settings.max_iter) return fail(SolveStatus::kMaxIter);

    Scaling W;
    try {
      W = compute_scaling(K, s, z);
    } catch (const std::domain_error&) {
      return fail(SolveStatus::kNumericFailure);
    }
    const Vector lam = apply_w(K, W, z);
    if (!kkt.factor(&W)) return fail(SolveStatus::kNumericFailure);

    Vector rhs2(N + p + mg), sol2;
    rhs2 << -c, b, h;
    if (!kkt.solve(rhs2, sol2)) return fail(SolveStatus::kNumericFailure);
    Vector x2, y2, z2;
    segs(sol2, x2, y2, z2);
    const double P2 = c.dot(x2) + b.dot(y2) + h.dot(z2);

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double scale, const Vector& ds_rhs, double dk_rhs,
                         Direction& d) -> bool {
      const Vector lds = jordan_div(K, lam, ds_rhs);
      const Vector wlds = apply_w(K, W, lds);
      Vector rhs1(N + p + mg), sol1;
      rhs1 << -scale * rx, scale * ry, scale * rz - wlds;
      if (!kkt.solve(rhs1, sol1)) return false;
      Vector x1, y1, z1;
      segs(sol1, x1, y1, z1);
      const double P1 = c.dot(x1) + b.dot(y1) + h.dot(z1);
      const double denom = kappa / tau - P2;
      d.dtau = (dk_rhs / tau - scale * rtau + P1) / denom;
      d.dx = x1 + d.dtau * x2;
      d.dy = y1 + d.dtau * y2;
      d.dz = z1 + d.dtau * z2;
      // Taken from the linearized primal residual: wlds − W²Δz loses accuracy
      // when W is badly scaled.
      d.ds = scale * rz + h * d.dtau - prog.G * d.dx;
      d.dkappa = (dk_rhs - kappa * d.dtau) / tau;
      return d.dx.allFinite() && d.dz.allFinite() && std::isfinite(d.dtau);
    };
    auto step_length = [&](const Direction& d) {
      // Measured in the scaled space around λ, where the iterate is well centered.
      double a = std::min(max_step(K, lam, apply_winv(K, W, d.ds)),
                          max_step(K, lam, apply_w(K, W, d.dz)));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const double mu = (s.dot(z) + tau * kappa) / (K.degree() + 1);
    const Vector lamlam = jordan(K, lam, lam);
    Direction aff;
    if (!direction(1.0, -lamlam, -tau * kappa, aff)) {
      return fail(SolveStatus::kNumericFailure);
    }
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);
    const Vector corr = jordan(K, apply_winv(K, W, aff.ds), apply_w(K, W, aff.dz));
    Direction cmb;
    if (!direction(1.0 - sigma, -lamlam - corr + sigma * mu * e,
                   -tau * kappa - aff.dtau * aff.dkappa + sigma * mu, cmb)) {
      return fail(SolveStatus::kNumericFailure);
    }
    const double alpha = std::min(1.0, kStepFraction * step_length(cmb));
    if (!(alpha > 1e-12)) return fail(SolveStatus::kNumericFailure);
    x += alpha * cmb.dx;
    y += alpha * cmb.dy;
    z += alpha * cmb.dz;
    s += alpha * cmb.ds;
    tau += alpha * cmb.dtau;
    kappa += alpha * cmb.dkappa;
  }
}

ConeSolver reference_solver() {
  return [](const ConeProgram& prog, const SolverSettings& settings) {
    return solve_cone_program(prog, settings);
  };
}

RelaxationResult solve_relaxation(const RelaxationModel& model, const ConeSolver& solver,
                                  const SolverSettings& settings) {
  RelaxationResult r;
  r.program = encode_cone_program(model);
  r.solution = solver(r.program, settings);
  if (r.solution.status == SolveStatus::kOptimal) {
    r.point = model.lift(r.solution.x);
    r.value = r.solution.objective;
  }
  return r;
}

Multipliers extract_duals(const ConeSolution& sol, const RelaxationModel& model,
                          const ConeProgram& prog, double dual_tol) {
  if (sol.status != SolveStatus::kOptimal) {
    throw std::runtime_error("multipliers unavailable: solve status " + to_string(sol.status));
  }
  const QcqpInstance& inst = model.instance();
  Multipliers out;
  for (int r = 0; r < prog.num_eq(); ++r) {
    if (prog.eq_constraint[r] > 0) out.tau[prog.eq_constraint[r]] = sol.y(r);
  }
  for (int r = 0; r < prog.num_nonneg; ++r) {
    if (prog.ineq_constraint[r] > 0) out.tau[prog.ineq_constraint[r]] = sol.z(r);
  }
  const int n = inst.n();
  out.Lambda = model.eta() * Matrix::Identity(n, n) + inst.objective().dense_A();
  for (const auto& [k, t] : out.tau) {
    if (inst.is_equality(k) || std::abs(t) > dual_tol) {
      out.binding.push_back(k);
      out.Lambda += t * inst.form(k).dense_A();
    }
  }
  return out;
}

}  // namespace parabolic
