#include "pbc/spbc.hpp"

#include "pbc/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pbc {

namespace {

void check_inputs(const Eigen::MatrixXd& x, const AnalyteVector& a, const SpbcConfig& cfg,
                  const EigenSystem& eig) {
  cfg.validate();
  if (x.rows() < 1 || !x.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "spectra must be non-empty and finite");
  }
  if (a.values.size() != x.rows()) {
    throw Error(ErrorKind::InvalidDimension,
                "analyte '" + a.name + "' has " + std::to_string(a.values.size()) +
                    " entries for " + std::to_string(x.rows()) + " samples");
  }
  if (!a.values.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "analyte '" + a.name + "' has non-finite entries");
  }
  if (x.cols() != eig.n || eig.order != cfg.order) {
    throw Error(ErrorKind::InvalidDimension, "eigensystem does not match spectra/order");
  }
  const double floor = 1e-12 * std::sqrt(static_cast<double>(x.rows()));
  if (a.values.norm() < floor) {
    throw Error(ErrorKind::DegenerateAnalyte,
                "analyte '" + a.name +
                    "' is (numerically) zero; use the unsupervised Eilers baseline instead");
  }
}

double relative_change(const Eigen::MatrixXd& next, const Eigen::MatrixXd& prev) {
  return (next - prev).norm() / std::max(1.0, prev.norm());
}

}  // namespace

void SpbcConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParameter, "SPBC lambda must be finite and > 0");
  }
  if (order != 1 && order != 2) throw Error(ErrorKind::InvalidParameter, "SPBC order must be 1 or 2");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "SPBC tol must be > 0");
  if (max_iter < 1) throw Error(ErrorKind::InvalidParameter, "SPBC max_iter must be >= 1");
  if (!(ridge_tau_rel > 0.0 && ridge_tau_rel <= 1e-2)) {
    throw Error(ErrorKind::InvalidParameter, "ridge_tau_rel must lie in (0, 1e-2]");
  }
}

SvdCache svd_cache(const Eigen::MatrixXd& x) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = s.size() > 0 ? s[0] * std::max(x.rows(), x.cols()) *
                                        std::numeric_limits<double>::epsilon()
                                  : 0.0;
  int rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  SvdCache cache;
  cache.singular_values = s.head(rank);
  cache.left = svd.matrixU().leftCols(rank);
  cache.right = svd.matrixV().leftCols(rank);
  cache.nullspace = svd.matrixV().rightCols(x.cols() - rank);
  return cache;
}

Eigen::VectorXd ridge_solve(const SvdCache& svd, const Eigen::VectorXd& d, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidParameter, "ridge parameter tau must be > 0");
  if (d.size() != svd.right.rows()) {
    throw Error(ErrorKind::InvalidDimension, "ridge right-hand side has wrong length");
  }
  const Eigen::VectorXd f =
      (svd.singular_values.array().square() + tau * tau).inverse().matrix();
  Eigen::VectorXd w = svd.right * f.cwiseProduct(svd.right.transpose() * d);
  if (svd.nullspace.cols() > 0) {
    w += svd.nullspace * (svd.nullspace.transpose() * d) / (tau * tau);
  }
  return w;
}

Eigen::VectorXd ridge_regression(const SvdCache& svd, const Eigen::VectorXd& a, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidParameter, "ridge parameter tau must be > 0");
  if (a.size() != svd.left.rows()) {
    throw Error(ErrorKind::InvalidDimension, "ridge response has wrong length");
  }
  const Eigen::ArrayXd s = svd.singular_values.array();
  const Eigen::VectorXd f = (s / (s.square() + tau * tau)).matrix();
  return svd.right * f.cwiseProduct(svd.left.transpose() * a);
}

Eigen::VectorXd ridge_regression(const Eigen::MatrixXd& b, const Eigen::VectorXd& a, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidParameter, "ridge parameter tau must be > 0");
  if (a.size() != b.rows()) throw Error(ErrorKind::InvalidDimension, "ridge response has wrong length");
  const double t2 = tau * tau;
  if (b.rows() <= b.cols()) {
    Eigen::MatrixXd gram = b * b.transpose();
    gram.diagonal().array() += t2;
    return b.transpose() * gram.ldlt().solve(a);
  }
  Eigen::MatrixXd gram = b.transpose() * b;
  gram.diagonal().array() += t2;
  return gram.ldlt().solve(b.transpose() * a);
}

Eigen::VectorXd rank_one_direction(const Eigen::VectorXd& w, const EigenSystem& eig,
                                   double lambda, RankOneSolve method) {
  if (w.size() != eig.n) throw Error(ErrorKind::InvalidDimension, "w length does not match n");
  const double wn2 = w.squaredNorm();
  if (!(wn2 > 0.0)) {
    throw Error(ErrorKind::DegenerateRegression, "regression vector w is zero");
  }
  if (lambda == 0.0) return w / wn2;

  if (method == RankOneSolve::Dense) {
    const DerivativeOperator d(eig.order, eig.n);
    Eigen::MatrixXd m = (lambda * lambda) * d.dense_gram();
    m.noalias() += w * w.transpose();
    // Minimum-norm solution; m is singular on part of V0 for order 2.
    return m.completeOrthogonalDecomposition().solve(w);
  }

  // In the eigenbasis of C the system reads (L + u u^T) y = u, L = lambda^2 S^2.
  // If u has weight on the nullspace, u^T y = 1 forces y to vanish on the
  // regularized block, and the minimum-norm choice is u0 / |u0|^2. Otherwise
  // L is invertible on the support of u and Sherman-Morrison applies.
  const int r = eig.regularized_count();
  const Eigen::VectorXd u0 = eig.nullspace.transpose() * w;
  if (u0.norm() > 1e-10 * std::sqrt(wn2)) {
    return eig.nullspace * (u0 / u0.squaredNorm());
  }
  const auto basis = eig.regularized_loadings();
  const Eigen::VectorXd u = basis.transpose() * w;
  const Eigen::VectorXd l = (lambda * lambda) * eig.values.head(r);
  const Eigen::VectorXd linv_u = u.cwiseQuotient(l);
  const double s = u.dot(linv_u);
  return basis * (linv_u / (1.0 + s));
}

Eigen::MatrixXd spbc_step4_nipals(const Eigen::MatrixXd& r, const SpectralSmoother& smoother) {
  return smoother.apply(r);
}

Eigen::MatrixXd spbc_step4_ils(const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                               const EigenSystem& eig, double lambda, RankOneSolve method) {
  return r * rank_one_direction(w, eig, lambda, method).transpose();
}

double roughness(const Eigen::MatrixXd& z, const DerivativeOperator& d) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    total += d.apply(z.row(i).transpose()).squaredNorm();
  }
  return total;
}

double spbc_n_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& w, const Eigen::MatrixXd& z, double lambda,
                        const DerivativeOperator& d) {
  return (x - z - a * w.transpose()).squaredNorm() + lambda * lambda * roughness(z, d);
}

double spbc_i_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& w, const Eigen::MatrixXd& z, double lambda,
                        const DerivativeOperator& d) {
  return ((x - z) * w - a).squaredNorm() + lambda * lambda * roughness(z, d);
}

SpbcResult spbc_n(const Eigen::MatrixXd& x, const AnalyteVector& a, const SpbcConfig& cfg,
                  const EigenSystem& eig) {
  check_inputs(x, a, cfg, eig);
  const DerivativeOperator d(cfg.order, static_cast<int>(x.cols()));
  const SpectralSmoother smoother(eig, cfg.lambda);
  const Eigen::VectorXd& av = a.values;
  const double ata = av.squaredNorm();

  SpbcResult res;
  res.baseline = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (int k = 1; k <= cfg.max_iter; ++k) {
    res.w = (x - res.baseline).transpose() * av / ata;
    const Eigen::MatrixXd r = x - av * res.w.transpose();
    Eigen::MatrixXd next = spbc_step4_nipals(r, smoother);
    res.objective_trace.push_back(spbc_n_objective(x, av, res.w, next, cfg.lambda, d));
    const double change = relative_change(next, res.baseline);
    res.baseline = std::move(next);
    res.iterations = k;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

SpbcResult spbc_i(const Eigen::MatrixXd& x, const AnalyteVector& a, const SpbcConfig& cfg,
                  const EigenSystem& eig, const SvdCache& xsvd) {
  check_inputs(x, a, cfg, eig);
  if (xsvd.left.rows() != x.rows() || xsvd.right.rows() != x.cols()) {
    throw Error(ErrorKind::InvalidDimension, "SVD cache does not match the spectra");
  }
  if (xsvd.rank() == 0) {
    throw Error(ErrorKind::DegenerateRegression, "spectra matrix is zero");
  }
  const DerivativeOperator d(cfg.order, static_cast<int>(x.cols()));
  const Eigen::VectorXd& av = a.values;
  const double tau = cfg.ridge_tau_rel * xsvd.sigma_max();

  SpbcResult res;
  res.baseline = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  res.w = Eigen::VectorXd::Zero(x.cols());
  for (int k = 1; k <= cfg.max_iter; ++k) {
    // With Z = 0 the ridge system has the constant matrix X^T X, so the cached
    // SVD gives the solution directly.
    res.w = k == 1 ? ridge_regression(xsvd, av, tau)
                   : ridge_regression(Eigen::MatrixXd(x - res.baseline), av, tau);
    if (res.w.norm() < 1e-14) {
      throw Error(ErrorKind::DegenerateRegression, "regression vector w collapsed to zero");
    }
    const Eigen::VectorXd r = x * res.w - av;
    Eigen::MatrixXd next = spbc_step4_ils(r, res.w, eig, cfg.lambda);
    res.objective_trace.push_back(spbc_i_objective(x, av, res.w, next, cfg.lambda, d));
    const double change = relative_change(next, res.baseline);
    res.baseline = std::move(next);
    res.iterations = k;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace pbc
