#include "fsd/control/ocp_qp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>

namespace fsd::control {

namespace {

using MatXX = Eigen::Matrix<double, kQpNx, kQpNx>;
using MatUU = Eigen::Matrix<double, kQpNu, kQpNu>;
using MatUX = Eigen::Matrix<double, kQpNu, kQpNx>;
using MatZZ = Eigen::Matrix<double, kQpNz, kQpNz>;

struct Factor {
  std::vector<MatUX> K;
  std::vector<Eigen::LLT<MatUU>> huu;
  std::vector<MatUX> hux;
};

// Nonzero columns of one constraint row; most rows touch one to three variables.
struct RowPattern {
  int count{0};
  std::array<int, kQpNz> index{};
};

RowPattern row_pattern(const Eigen::Matrix<double, kQpNc, kQpNz>& g, int row) {
  RowPattern p;
  for (int j = 0; j < kQpNz; ++j) {
    if (g(row, j) != 0.0) p.index[static_cast<std::size_t>(p.count++)] = j;
  }
  return p;
}

QpVecZ stack(const QpVecX& x, const QpVecU& u) {
  QpVecZ z;
  z << x, u;
  return z;
}

void factorize(const std::vector<QpStage>& st, const std::vector<MatZZ>& w_hat, double reg, Factor& f) {
  const std::size_t n = st.size();
  f.K.resize(n);
  f.huu.resize(n);
  f.hux.resize(n);
  MatXX p = MatXX::Zero();
  for (std::size_t k = n; k-- > 0;) {
    const QpStage& s = st[k];
    const MatXX q = w_hat[k].topLeftCorner<kQpNx, kQpNx>();
    const MatUX m = w_hat[k].bottomLeftCorner<kQpNu, kQpNx>();
    MatUU r = w_hat[k].bottomRightCorner<kQpNu, kQpNu>();
    r.diagonal().array() += reg;
    const Eigen::Matrix<double, kQpNx, kQpNu> pb = p * s.B;
    const MatUU huu = r + s.B.transpose() * pb;
    f.hux[k] = m + pb.transpose() * s.A;
    f.huu[k].compute(huu);
    f.K[k] = -f.huu[k].solve(f.hux[k]);
    p = q + s.A.transpose() * p * s.A + f.hux[k].transpose() * f.K[k];
    p = 0.5 * (p + p.transpose()).eval();
  }
}

// Solves the reduced LQ problem for gradient g_hat; returns dz per stage.
void solve_lq(const std::vector<QpStage>& st, const Factor& f, const std::vector<QpVecZ>& g_hat,
              std::vector<QpVecX>& dx, std::vector<QpVecU>& du) {
  const std::size_t n = st.size();
  std::vector<QpVecU> kff(n);
  QpVecX p = QpVecX::Zero();
  for (std::size_t k = n; k-- > 0;) {
    const QpStage& s = st[k];
    const QpVecU hu = g_hat[k].tail<kQpNu>() + s.B.transpose() * p;
    kff[k] = -f.huu[k].solve(hu);
    p = g_hat[k].head<kQpNx>() + s.A.transpose() * p + f.hux[k].transpose() * kff[k];
  }
  dx.assign(n + 1, QpVecX::Zero());
  du.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    du[k] = f.K[k] * dx[k] + kff[k];
    dx[k + 1] = st[k].A * dx[k] + st[k].B * du[k];
  }
}

double max_step(const std::vector<QpVecC>& v, const std::vector<QpVecC>& dv) {
  double a = 1.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    for (int i = 0; i < kQpNc; ++i) {
      if (dv[k][i] < 0.0) a = std::min(a, -v[k][i] / dv[k][i]);
    }
  }
  return a;
}

}  // namespace

double qp_objective(const std::vector<QpStage>& stages, const QpSolution& sol) {
  double j = 0.0;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const QpVecZ z = stack(sol.x[k], sol.u[k]);
    j += 0.5 * z.dot(stages[k].W * z) + stages[k].w.dot(z);
  }
  return j;
}

QpSolution solve_ocp_qp(const std::vector<QpStage>& st, const QpOptions& opt) {
  const std::size_t n = st.size();
  QpSolution sol;
  sol.x.assign(n + 1, QpVecX::Zero());
  sol.u.assign(n, QpVecU::Zero());
  sol.lambda.assign(n, QpVecC::Ones());
  sol.slack.resize(n);
  for (std::size_t k = 0; k < n; ++k) sol.slack[k] = st[k].h.cwiseMax(1.0);
  if (n == 0) {
    sol.converged = true;
    return sol;
  }
  const double m_total = static_cast<double>(n * kQpNc);

  std::vector<QpVecC> rp(n), rc(n), ds(n), dl(n), ds_aff(n), dl_aff(n);
  std::vector<QpVecZ> grad(n), g_hat(n);
  std::vector<MatZZ> w_hat(n);
  std::vector<std::array<RowPattern, kQpNc>> patterns(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int i = 0; i < kQpNc; ++i) patterns[k][static_cast<std::size_t>(i)] = row_pattern(st[k].G, i);
  }
  std::vector<QpVecX> dx;
  std::vector<QpVecU> du;
  Factor fac;

  for (int it = 0; it < opt.max_iterations; ++it) {
    sol.iterations = it;
    // Residuals at the current iterate.
    double mu = 0.0;
    double rp_norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const QpVecZ z = stack(sol.x[k], sol.u[k]);
      rp[k] = st[k].G * z + sol.slack[k] - st[k].h;
      rp_norm = std::max(rp_norm, rp[k].cwiseAbs().maxCoeff());
      mu += sol.slack[k].dot(sol.lambda[k]);
      grad[k] = st[k].W * z + st[k].w + st[k].G.transpose() * sol.lambda[k];
    }
    mu /= m_total;
    // Stationarity residual along dynamically feasible directions (adjoint sweep).
    double rd_norm = 0.0;
    QpVecX costate = QpVecX::Zero();
    for (std::size_t k = n; k-- > 0;) {
      const QpVecU gu = grad[k].tail<kQpNu>() + st[k].B.transpose() * costate;
      rd_norm = std::max(rd_norm, gu.cwiseAbs().maxCoeff());
      costate = grad[k].head<kQpNx>() + st[k].A.transpose() * costate;
    }
    sol.mu = mu;
    sol.primal_residual = rp_norm;
    sol.dual_residual = rd_norm;
    if (mu < opt.tol && rp_norm < opt.tol && rd_norm < std::sqrt(opt.tol)) {
      sol.converged = true;
      return sol;
    }

    for (std::size_t k = 0; k < n; ++k) {
      const QpVecC d = sol.lambda[k].cwiseQuotient(sol.slack[k]);
      w_hat[k] = st[k].W;
      for (int i = 0; i < kQpNc; ++i) {
        const RowPattern& row = patterns[k][static_cast<std::size_t>(i)];
        for (int a = 0; a < row.count; ++a) {
          const double ga = d[i] * st[k].G(i, row.index[static_cast<std::size_t>(a)]);
          for (int b = 0; b < row.count; ++b) {
            w_hat[k](row.index[static_cast<std::size_t>(a)], row.index[static_cast<std::size_t>(b)]) +=
                ga * st[k].G(i, row.index[static_cast<std::size_t>(b)]);
          }
        }
      }
    }
    factorize(st, w_hat, opt.regularization, fac);

    const auto newton = [&](const std::vector<QpVecC>& r_c, std::vector<QpVecC>& d_s, std::vector<QpVecC>& d_l) {
      for (std::size_t k = 0; k < n; ++k) {
        const QpVecC corr = (sol.lambda[k].cwiseProduct(rp[k]) - r_c[k]).cwiseQuotient(sol.slack[k]);
        g_hat[k] = grad[k] + st[k].G.transpose() * corr;
      }
      solve_lq(st, fac, g_hat, dx, du);
      for (std::size_t k = 0; k < n; ++k) {
        const QpVecZ dz = stack(dx[k], du[k]);
        d_s[k] = -rp[k] - st[k].G * dz;
        d_l[k] = (-r_c[k] - sol.lambda[k].cwiseProduct(d_s[k])).cwiseQuotient(sol.slack[k]);
      }
    };

    // Predictor.
    for (std::size_t k = 0; k < n; ++k) rc[k] = sol.slack[k].cwiseProduct(sol.lambda[k]);
    newton(rc, ds_aff, dl_aff);
    const double ap = max_step(sol.slack, ds_aff);
    const double ad = max_step(sol.lambda, dl_aff);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mu_aff += (sol.slack[k] + ap * ds_aff[k]).dot(sol.lambda[k] + ad * dl_aff[k]);
    }
    mu_aff /= m_total;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector.
    for (std::size_t k = 0; k < n; ++k) {
      rc[k] = sol.slack[k].cwiseProduct(sol.lambda[k]) + ds_aff[k].cwiseProduct(dl_aff[k]) -
              QpVecC::Constant(sigma * mu);
    }
    newton(rc, ds, dl);
    const double alpha_p = std::min(1.0, 0.995 * max_step(sol.slack, ds));
    const double alpha_d = std::min(1.0, 0.995 * max_step(sol.lambda, dl));
    for (std::size_t k = 0; k < n; ++k) {
      sol.x[k + 1] += alpha_p * dx[k + 1];
      sol.u[k] += alpha_p * du[k];
      sol.slack[k] += alpha_p * ds[k];
      sol.lambda[k] += alpha_d * dl[k];
    }
  }
  sol.iterations = opt.max_iterations;
  return sol;
}

}  // namespace fsd::control
