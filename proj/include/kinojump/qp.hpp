#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace kinojump {

/// Convex QP in OSQP form:
///   min 0.5 x^T H x + g^T x   s.t.   lower <= A x <= upper
/// Equality rows use lower == upper.
struct QpProblem {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd g;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int n() const { return static_cast<int>(g.size()); }
  int m() const { return static_cast<int>(lower.size()); }
};

struct QpSettings {
  double rho = 0.1;        // ADMM penalty
  double sigma = 1e-6;     // primal regularization
  double relax = 1.6;      // over-relaxation
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iters = 4000;
  int rho_update_every = 100;
};

enum class QpStatus { Solved, MaxIters, PrimalInfeasible };

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // constraint duals
  Eigen::VectorXd z;  // projected constraint values
  QpStatus status = QpStatus::MaxIters;
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();

  bool ok() const { return status == QpStatus::Solved; }
};

/// Operator-splitting (ADMM) solver for convex QPs. Deterministic for fixed
/// inputs; the KKT system is refactorized only when the penalty is rescaled.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpResult solve(const QpProblem& p, const Eigen::VectorXd* warm_x = nullptr,
                 const Eigen::VectorXd* warm_y = nullptr) const {
    const int n = p.n();
    const int m = p.m();
    if (p.H.rows() != n || p.H.cols() != n || p.A.rows() != m || p.A.cols() != n ||
        p.upper.size() != m)
      throw std::invalid_argument("QpSolver: inconsistent problem dimensions");

    QpResult r;
    r.x = warm_x && warm_x->size() == n ? *warm_x : Eigen::VectorXd::Zero(n);
    r.y = warm_y && warm_y->size() == m ? *warm_y : Eigen::VectorXd::Zero(m);
    r.z = p.A * r.x;
    for (int i = 0; i < m; ++i) r.z(i) = std::clamp(r.z(i), p.lower(i), p.upper(i));

    double rho = settings_.rho;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> kkt;
    factorize(p, rho, kkt);

    Eigen::VectorXd rhs(n + m), sol(n + m);
    Eigen::VectorXd x_tilde(n), z_tilde(m), z_prev(m), ax(m), hx(n), aty(n);
    Eigen::VectorXd dy = Eigen::VectorXd::Zero(m);

    for (int it = 1; it <= settings_.max_iters; ++it) {
      rhs.head(n) = settings_.sigma * r.x - p.g;
      rhs.tail(m) = r.z - r.y / rho;
      sol = kkt.solve(rhs);
      x_tilde = sol.head(n);
      z_tilde = r.z + (sol.tail(m) - r.y) / rho;

      const double a = settings_.relax;
      z_prev = r.z;
      r.x = a * x_tilde + (1.0 - a) * r.x;
      const Eigen::VectorXd z_relaxed = a * z_tilde + (1.0 - a) * z_prev;
      r.z = z_relaxed + r.y / rho;
      for (int i = 0; i < m; ++i) r.z(i) = std::clamp(r.z(i), p.lower(i), p.upper(i));
      dy = rho * (z_relaxed - r.z);
      r.y += dy;

      ax = p.A * r.x;
      hx = p.H.selfadjointView<Eigen::Upper>() * r.x;
      aty = p.A.transpose() * r.y;
      r.primal_residual = m == 0 ? 0.0 : (ax - r.z).lpNorm<Eigen::Infinity>();
      r.dual_residual = (hx + p.g + aty).lpNorm<Eigen::Infinity>();
      r.iterations = it;

      const double eps_pr = settings_.eps_abs +
                            settings_.eps_rel * std::max(ax.lpNorm<Eigen::Infinity>(),
                                                         r.z.lpNorm<Eigen::Infinity>());
      const double eps_du =
          settings_.eps_abs +
          settings_.eps_rel * std::max({hx.lpNorm<Eigen::Infinity>(), p.g.lpNorm<Eigen::Infinity>(),
                                        aty.lpNorm<Eigen::Infinity>()});
      if (r.primal_residual <= eps_pr && r.dual_residual <= eps_du) {
        r.status = QpStatus::Solved;
        return r;
      }

      if (m > 0 && infeasibility_certificate(p, dy)) {
        r.status = QpStatus::PrimalInfeasible;
        return r;
      }

      if (it % settings_.rho_update_every == 0) {
        const double scale = std::sqrt((r.primal_residual / std::max(eps_pr, 1e-12)) /
                                       std::max(r.dual_residual / std::max(eps_du, 1e-12), 1e-12));
        const double new_rho = std::clamp(rho * std::clamp(scale, 0.2, 5.0), 1e-6, 1e6);
        if (new_rho / rho > 2.0 || rho / new_rho > 2.0) {
          rho = new_rho;
          factorize(p, rho, kkt);
        }
      }
    }
    r.status = QpStatus::MaxIters;
    return r;
  }

 private:
  void factorize(const QpProblem& p, double rho,
                 Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& kkt) const {
    const int n = p.n();
    const int m = p.m();
    Eigen::SparseMatrix<double> K(n + m, n + m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(p.H.nonZeros() + 2 * p.A.nonZeros() + n + m);
    for (int k = 0; k < p.H.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.H, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, settings_.sigma);
    for (int k = 0; k < p.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, k); it; ++it) {
        trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho);
    K.setFromTriplets(trips.begin(), trips.end());
    kkt.compute(K);
    if (kkt.info() != Eigen::Success)
      throw std::runtime_error("QpSolver: KKT factorization failed");
  }

  // Primal infeasibility certificate along the dual step (OSQP condition).
  bool infeasibility_certificate(const QpProblem& p, const Eigen::VectorXd& dy) const {
    const double norm_dy = dy.lpNorm<Eigen::Infinity>();
    if (norm_dy < 1e-12) return false;
    const double eps = 1e-6 * norm_dy;
    if ((p.A.transpose() * dy).lpNorm<Eigen::Infinity>() > eps) return false;
    double support = 0.0;
    for (int i = 0; i < dy.size(); ++i) {
      if (dy(i) > 0.0) {
        if (!std::isfinite(p.upper(i))) return false;
        support += p.upper(i) * dy(i);
      } else if (dy(i) < 0.0) {
        if (!std::isfinite(p.lower(i))) return false;
        support += p.lower(i) * dy(i);
      }
    }
    return support < -eps;
  }

  QpSettings settings_;
};

/// Convenience wrapper used by tests and by the SQP layer: explicit equality
/// block plus ranged inequalities.
inline QpResult qp_solve(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& g,
                         const Eigen::SparseMatrix<double>& A_eq, const Eigen::VectorXd& b_eq,
                         const Eigen::SparseMatrix<double>& A_in, const Eigen::VectorXd& l_in,
                         const Eigen::VectorXd& u_in, const QpSettings& settings = {}) {
  QpProblem p;
  p.H = H;
  p.g = g;
  const int n = static_cast<int>(g.size());
  const int me = static_cast<int>(b_eq.size());
  const int mi = static_cast<int>(l_in.size());
  Eigen::SparseMatrix<double> A(me + mi, n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A_eq.nonZeros() + A_in.nonZeros());
  for (int k = 0; k < A_eq.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A_eq, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < A_in.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A_in, k); it; ++it)
      trips.emplace_back(me + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  A.setFromTriplets(trips.begin(), trips.end());
  p.A = A;
  p.lower.resize(me + mi);
  p.upper.resize(me + mi);
  p.lower.head(me) = b_eq;
  p.upper.head(me) = b_eq;
  p.lower.tail(mi) = l_in;
  p.upper.tail(mi) = u_in;
  return QpSolver(settings).solve(p);
}

}  // namespace kinojump
