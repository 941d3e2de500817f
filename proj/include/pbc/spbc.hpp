#pragma once

#include "pbc/operators.hpp"
#include "pbc/smoothers.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pbc {

/// Reference concentrations of the analyte used to build baselines.
struct AnalyteVector {
  Eigen::VectorXd values;
  std::string name;
};

struct SpbcConfig {
  double lambda = 100.0;
  int order = 1;
  double tol = 1e-8;
  int max_iter = 50;
  double ridge_tau_rel = 1e-6;  // ILS only: tau = ridge_tau_rel * sigma_1(X)

  void validate() const;
};

struct SpbcResult {
  Eigen::MatrixXd baseline;  // Z
  Eigen::VectorXd w;
  int iterations = 0;
  /// Objective value after each ALS sweep; one entry per iteration.
  std::vector<double> objective_trace;
  bool converged = false;

  Eigen::MatrixXd corrected(const Eigen::MatrixXd& x) const { return x - baseline; }
};

/// Thin SVD of X split into its numerical range and nullspace.
struct SvdCache {
  Eigen::VectorXd singular_values;  // sigma_1 >= ... >= sigma_r > 0
  Eigen::MatrixXd left;             // P, m x r
  Eigen::MatrixXd right;            // Q, n x r
  Eigen::MatrixXd nullspace;        // Q0, n x (n - r); empty when rank = n

  int rank() const noexcept { return static_cast<int>(singular_values.size()); }
  double sigma_max() const noexcept { return rank() > 0 ? singular_values[0] : 0.0; }
};

SvdCache svd_cache(const Eigen::MatrixXd& x);

/// (X^T X + tau^2 I)^{-1} d through the cached factors:
/// Q diag(1/(sigma^2 + tau^2)) Q^T d + Q0 Q0^T d / tau^2.
Eigen::VectorXd ridge_solve(const SvdCache& svd, const Eigen::VectorXd& d, double tau);

/// (X^T X + tau^2 I)^{-1} X^T a = Q diag(sigma/(sigma^2 + tau^2)) P^T a.
Eigen::VectorXd ridge_regression(const SvdCache& svd, const Eigen::VectorXd& a, double tau);

/// argmin_w ||B w - a||^2 + tau^2 ||w||^2 for an arbitrary B, solved in the
/// smaller of the primal (n x n) and dual (m x m) forms.
Eigen::VectorXd ridge_regression(const Eigen::MatrixXd& b, const Eigen::VectorXd& a, double tau);

enum class RankOneSolve { Auto, Dense, Eigen };

/// Minimum-norm g with (w w^T + lambda^2 C) g = w. The system is consistent
/// for every w; it is singular for order 2 (and for order 1 when sum(w) = 0).
/// Auto uses the eigenbasis (O(n^2), and more accurate than the dense
/// factorization when lambda is large); Dense is kept as a cross-check.
Eigen::VectorXd rank_one_direction(const Eigen::VectorXd& w, const EigenSystem& eig,
                                   double lambda, RankOneSolve method = RankOneSolve::Auto);

/// Step 4 of the NIPALS variant: Z = R (V F V^T + V0 V0^T).
Eigen::MatrixXd spbc_step4_nipals(const Eigen::MatrixXd& r, const SpectralSmoother& smoother);

/// Step 4 of the ILS variant: Z = r w^T (w w^T + lambda^2 C)^{-1} = r g^T.
Eigen::MatrixXd spbc_step4_ils(const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                               const EigenSystem& eig, double lambda,
                               RankOneSolve method = RankOneSolve::Auto);

/// sum_i ||D z_i||^2 over the rows of Z.
double roughness(const Eigen::MatrixXd& z, const DerivativeOperator& d);

/// ||X - Z - a w^T||_F^2 + lambda^2 ||D Z^T||_F^2
double spbc_n_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& w, const Eigen::MatrixXd& z, double lambda,
                        const DerivativeOperator& d);

/// ||(X - Z) w - a||^2 + lambda^2 ||D Z^T||_F^2
double spbc_i_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& w, const Eigen::MatrixXd& z, double lambda,
                        const DerivativeOperator& d);

/// Supervised baseline via the NIPALS outer-product ALS.
///
/// Baselines are coupled across samples through w, so the whole batch must be
/// corrected together; dropping or adding a sample changes every baseline.
/// Throws DegenerateAnalyte when ||a|| < 1e-12 sqrt(m); use eilers_baseline()
/// in that case, which is the a = 0 limit of this method.
SpbcResult spbc_n(const Eigen::MatrixXd& x, const AnalyteVector& a, const SpbcConfig& cfg,
                  const EigenSystem& eig);

/// Supervised baseline via the inverse-least-squares ALS. `xsvd` must be
/// svd_cache(x). Same batch semantics as spbc_n.
SpbcResult spbc_i(const Eigen::MatrixXd& x, const AnalyteVector& a, const SpbcConfig& cfg,
                  const EigenSystem& eig, const SvdCache& xsvd);

}  // namespace pbc
