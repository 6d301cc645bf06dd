#pragma once

// Dense convex QP solver: Mehrotra predictor-corrector primal-dual interior
// point over
//     min 1/2 z'Hz + g'z   s.t.  E z = e,  A z >= b,
// with the normal-equations assembly exploiting row sparsity of A (MPC bound
// rows are singletons). Fills the role an off-the-shelf OCP QP solver would;
// the MPC layer condenses the shooting structure before calling in.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace crane {

struct QPProblem {
  Eigen::MatrixXd H;  ///< symmetric PSD
  Eigen::VectorXd g;
  Eigen::MatrixXd E;  ///< equality rows (may be empty)
  Eigen::VectorXd e;
  Eigen::MatrixXd A;  ///< inequality rows A z >= b (may be empty)
  Eigen::VectorXd b;
};

enum class QPStatus { solved, max_iter, infeasible };

struct QPSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd eq_dual;
  Eigen::VectorXd ineq_dual;
  Eigen::VectorXd slack;
  QPStatus status = QPStatus::max_iter;
  int iterations = 0;
  double kkt_stationarity = 0.0;
  double kkt_primal = 0.0;
  double kkt_equality = 0.0;
  double kkt_complementarity = 0.0;

  double kkt_residual() const {
    return std::max({kkt_stationarity, kkt_primal, kkt_equality, kkt_complementarity});
  }
};

struct QPSettings {
  double tolerance = 1e-9;
  int max_iterations = 100;
  double regularization = 1e-11;
};

inline QPSolution solve_qp(const QPProblem& qp, const QPSettings& settings = {}) {
  const int n = static_cast<int>(qp.H.rows());
  const int me = static_cast<int>(qp.E.rows());
  const int m = static_cast<int>(qp.A.rows());
  if (qp.H.cols() != n || qp.g.size() != n || (me > 0 && qp.E.cols() != n) ||
      (m > 0 && qp.A.cols() != n) || qp.e.size() != me || qp.b.size() != m)
    throw std::invalid_argument("solve_qp: inconsistent dimensions");

  QPSolution sol;
  // No inequalities: one KKT solve.
  if (m == 0) {
    if (me == 0) {
      sol.z = (qp.H + settings.regularization * Eigen::MatrixXd::Identity(n, n)).ldlt().solve(-qp.g);
      sol.eq_dual.resize(0);
    } else {
      Eigen::MatrixXd K(n + me, n + me);
      K.setZero();
      K.topLeftCorner(n, n) = qp.H;
      K.topRightCorner(n, me) = qp.E.transpose();
      K.bottomLeftCorner(me, n) = qp.E;
      Eigen::VectorXd rhs(n + me);
      rhs.head(n) = -qp.g;
      rhs.tail(me) = qp.e;
      const Eigen::VectorXd sv = K.partialPivLu().solve(rhs);
      sol.z = sv.head(n);
      sol.eq_dual = sv.tail(me);
    }
    sol.ineq_dual.resize(0);
    sol.slack.resize(0);
    sol.status = QPStatus::solved;
    sol.iterations = 1;
    Eigen::VectorXd rd = qp.H * sol.z + qp.g;
    if (me > 0) rd += qp.E.transpose() * sol.eq_dual;
    sol.kkt_stationarity = rd.lpNorm<Eigen::Infinity>();
    sol.kkt_equality = me > 0 ? (qp.E * sol.z - qp.e).lpNorm<Eigen::Infinity>() : 0.0;
    return sol;
  }

  // Row support of A for the normal-equations assembly.
  std::vector<std::vector<int>> support(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (qp.A(i, j) != 0.0) support[i].push_back(j);

  // Starting point.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  if (me > 0) {
    Eigen::MatrixXd K(n + me, n + me);
    K.setZero();
    K.topLeftCorner(n, n) =
        qp.H + Eigen::MatrixXd::Identity(n, n);
    K.topRightCorner(n, me) = qp.E.transpose();
    K.bottomLeftCorner(me, n) = qp.E;
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -qp.g;
    rhs.tail(me) = qp.e;
    const Eigen::VectorXd sv = K.partialPivLu().solve(rhs);
    z = sv.head(n);
  }
  // Mehrotra starting point: min-norm duals solving A'lam ~ grad for the
  // gradient scale (via the n x n normal system), then shift both cones
  // strictly positive. A naive (1, 1) start diverges when the linear cost
  // (e.g. an L1 penalty weight) dwarfs the constraint scale.
  Eigen::VectorXd w = qp.A * z - qp.b;
  Eigen::VectorXd lam;
  {
    Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < m; ++i)
      for (int a : support[i]) {
        const double va = qp.A(i, a);
        for (int bcol : support[i])
          if (bcol >= a) AtA(a, bcol) += va * qp.A(i, bcol);
      }
    AtA.diagonal().array() += 1e-10;
    Eigen::VectorXd grad = qp.H * z + qp.g;
    if (me > 0) grad += qp.E.transpose() * y;
    lam = qp.A * AtA.selfadjointView<Eigen::Upper>().llt().solve(grad);
    const double dw = std::max(0.0, -1.5 * w.minCoeff());
    const double dl = std::max(0.0, -1.5 * lam.minCoeff());
    w.array() += dw;
    lam.array() += dl;
    const double dot = w.dot(lam);
    const double sw = w.sum(), sl = lam.sum();
    w.array() += (sl > 0.0) ? 0.5 * dot / sl : 1.0;
    lam.array() += (sw > 0.0) ? 0.5 * dot / sw : 1.0;
    w = w.cwiseMax(1e-8);
    lam = lam.cwiseMax(1e-8);
  }

  // One factorization per iteration, shared by the predictor and corrector
  // solves.
  Eigen::LLT<Eigen::MatrixXd> llt(n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  // Escalates the diagonal shift until the factorization succeeds; directions
  // untouched by H and by any active row otherwise sit at the bare
  // regularization floor and can defeat the Cholesky numerically.
  const auto factor_kkt = [&](const Eigen::VectorXd& d) {
    double reg = settings.regularization;
    for (int attempt = 0; attempt < 10; ++attempt, reg *= 100.0) {
      Eigen::MatrixXd M = qp.H;
      M.diagonal().array() += reg;
      for (int i = 0; i < m; ++i) {
        const double di = d[i];
        for (int a : support[i]) {
          const double va = di * qp.A(i, a);
          for (int bcol : support[i])
            if (bcol >= a) M(a, bcol) += va * qp.A(i, bcol);
        }
      }
      if (me == 0) {
        llt.compute(M.selfadjointView<Eigen::Upper>());
        if (llt.info() == Eigen::Success) return true;
      } else {
        M.triangularView<Eigen::StrictlyLower>() =
            M.triangularView<Eigen::StrictlyUpper>().transpose();
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + me, n + me);
        K.topLeftCorner(n, n) = M;
        K.topRightCorner(n, me) = qp.E.transpose();
        K.bottomLeftCorner(me, n) = qp.E;
        lu.compute(K);
        return true;  // partial-pivot LU tolerates indefiniteness; steps are
                      // checked for finiteness below
      }
    }
    return false;
  };
  const auto solve_kkt = [&](const Eigen::VectorXd& rhs_z, const Eigen::VectorXd& rhs_e,
                             Eigen::VectorXd& dz, Eigen::VectorXd& dy) {
    if (me == 0) {
      dz = llt.solve(rhs_z);
      dy.resize(0);
    } else {
      Eigen::VectorXd rhs(n + me);
      rhs.head(n) = rhs_z;
      rhs.tail(me) = rhs_e;
      const Eigen::VectorXd sv = lu.solve(rhs);
      dz = sv.head(n);
      dy = sv.tail(me);
    }
  };

  // Residuals are scaled by the problem's own magnitudes; an absolute test
  // with duals at the penalty-weight scale would never fire and the iteration
  // would destroy itself chasing mu toward zero.
  const double sg = 1.0 + qp.g.lpNorm<Eigen::Infinity>() + qp.H.lpNorm<Eigen::Infinity>();
  const double sb = 1.0 + qp.b.lpNorm<Eigen::Infinity>();
  const double se = me > 0 ? 1.0 + qp.e.lpNorm<Eigen::Infinity>() : 1.0;
  const double tol = settings.tolerance;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z = z, best_y = y, best_w = w, best_lam = lam;
  double best_res[4] = {0, 0, 0, 0};
  int best_iter = 0;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    Eigen::VectorXd rd = qp.H * z + qp.g - qp.A.transpose() * lam;
    if (me > 0) rd += qp.E.transpose() * y;
    const Eigen::VectorXd re = me > 0 ? Eigen::VectorXd(qp.E * z - qp.e) : Eigen::VectorXd();
    const Eigen::VectorXd rp = qp.A * z - w - qp.b;
    const double mu = w.dot(lam) / m;

    sol.kkt_stationarity = rd.lpNorm<Eigen::Infinity>() / sg;
    sol.kkt_primal = rp.lpNorm<Eigen::Infinity>() / sb;
    sol.kkt_equality = me > 0 ? re.lpNorm<Eigen::Infinity>() / se : 0.0;
    sol.kkt_complementarity = (w.array() * lam.array()).abs().maxCoeff() / sg;
    sol.iterations = iter;
    if (sol.kkt_residual() < best) {
      best = sol.kkt_residual();
      best_z = z;
      best_y = y;
      best_w = w;
      best_lam = lam;
      best_res[0] = sol.kkt_stationarity;
      best_res[1] = sol.kkt_primal;
      best_res[2] = sol.kkt_equality;
      best_res[3] = sol.kkt_complementarity;
      best_iter = iter;
    }
    if (sol.kkt_stationarity < tol && sol.kkt_primal < tol && sol.kkt_equality < tol &&
        sol.kkt_complementarity < tol) {
      sol.status = QPStatus::solved;
      break;
    }
    if (lam.lpNorm<Eigen::Infinity>() > 1e12 || w.lpNorm<Eigen::Infinity>() > 1e12) {
      sol.status = QPStatus::infeasible;
      break;
    }

    if (!factor_kkt(lam.cwiseQuotient(w))) break;

    // Affine predictor: rc = w o lam.
    Eigen::VectorXd rc = w.cwiseProduct(lam);
    Eigen::VectorXd rhs_z = -rd - qp.A.transpose() * ((rc + lam.cwiseProduct(rp)).cwiseQuotient(w));
    Eigen::VectorXd dz, dy;
    solve_kkt(rhs_z, me > 0 ? Eigen::VectorXd(-re) : Eigen::VectorXd(), dz, dy);
    Eigen::VectorXd dw = qp.A * dz + rp;
    Eigen::VectorXd dlam = (-rc - lam.cwiseProduct(dw)).cwiseQuotient(w);
    if (!dz.allFinite() || !dw.allFinite() || !dlam.allFinite()) break;

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
      return a;
    };
    const double a_aff = std::min(max_step(w, dw), max_step(lam, dlam));
    const double mu_aff = (w + a_aff * dw).dot(lam + a_aff * dlam) / m;
    const double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);

    // Corrector.
    rc = w.cwiseProduct(lam) + dw.cwiseProduct(dlam) -
         Eigen::VectorXd::Constant(m, sigma * mu);
    rhs_z = -rd - qp.A.transpose() * ((rc + lam.cwiseProduct(rp)).cwiseQuotient(w));
    solve_kkt(rhs_z, me > 0 ? Eigen::VectorXd(-re) : Eigen::VectorXd(), dz, dy);
    dw = qp.A * dz + rp;
    dlam = (-rc - lam.cwiseProduct(dw)).cwiseQuotient(w);
    if (!dz.allFinite() || !dw.allFinite() || !dlam.allFinite()) break;

    const double alpha =
        std::min(1.0, 0.995 * std::min(max_step(w, dw), max_step(lam, dlam)));
    z += alpha * dz;
    if (me > 0) y += alpha * dy;
    w += alpha * dw;
    lam += alpha * dlam;
  }

  // When the loop exits unconverged, the final iterate may be far worse than
  // an earlier one (late iterations can degrade once mu collapses); return the
  // best iterate seen instead.
  if (sol.status != QPStatus::solved && best < sol.kkt_residual()) {
    z = best_z;
    y = best_y;
    w = best_w;
    lam = best_lam;
    sol.kkt_stationarity = best_res[0];
    sol.kkt_primal = best_res[1];
    sol.kkt_equality = best_res[2];
    sol.kkt_complementarity = best_res[3];
    sol.iterations = best_iter;
    if (best_res[0] < tol && best_res[1] < tol && best_res[2] < tol && best_res[3] < tol)
      sol.status = QPStatus::solved;
  }
  sol.z = z;
  sol.eq_dual = y;
  sol.ineq_dual = lam;
  sol.slack = w;
  return sol;
}

}  // namespace crane
