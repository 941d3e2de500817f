#pragma once

#include "pbc/operators.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace pbc {

/// Spectra, one sample per row and one channel per column.
struct SpectraMatrix {
  Eigen::MatrixXd values;
  std::vector<double> wavelengths;  // empty, or one per column (nm)

  Eigen::Index samples() const noexcept { return values.rows(); }
  Eigen::Index channels() const noexcept { return values.cols(); }

  /// Throws unless all entries are finite, m >= 1, n >= 3, and wavelengths
  /// (when present) match n and strictly increase.
  void validate() const;
};

struct BaselineResult {
  Eigen::MatrixXd baseline;   // Z
  Eigen::MatrixXd corrected;  // X - Z
  /// Per-row reweighting iteration counts; empty for direct solves.
  std::vector<int> iterations;
  /// Per-row objective traces; empty for direct solves.
  std::vector<std::vector<double>> objective_trace;
};

/// Applies Z = R (V F V^T + V0 V0^T), the spectral form of
/// Z (I + lambda^2 C) = R, to every row of R.
class SpectralSmoother {
 public:
  SpectralSmoother(const EigenSystem& eig, double lambda);

  double lambda() const noexcept { return lambda_; }
  const Eigen::VectorXd& factors() const noexcept { return factors_; }

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& r) const;

 private:
  double lambda_;
  Eigen::MatrixXd basis_;   // V restricted to nonzero s^2
  Eigen::MatrixXd scaled_;  // F V^T on the same columns
  Eigen::MatrixXd null_;    // V0
  Eigen::VectorXd factors_;
};

/// Number of X -> loading-basis projection passes performed so far by the
/// Eilers solvers in this process. Exposed so tests can count work.
std::uint64_t projection_pass_count() noexcept;

BaselineResult eilers_baseline(const Eigen::MatrixXd& x, double lambda, const EigenSystem& eig);

/// One projection of X onto the loadings, reused for every lambda in the bank.
std::vector<BaselineResult> eilers_baseline_multi_lambda(const Eigen::MatrixXd& x,
                                                         const EigenSystem& eig,
                                                         const FilterBank& bank);

/// Solves (H + lambda^2 C) z = H x with a banded Cholesky factorization,
/// H = diag(h).
Eigen::VectorXd weighted_baseline(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& h, double lambda,
                                  const DerivativeOperator& d);

struct AirplsConfig {
  double lambda = 100.0;
  int order = 1;
  int max_iter = 15;
  double termination_ratio = 1e-3;

  void validate() const;
};

/// airPLS weight for channel j at iteration k given the residual x_j - z_j
/// and rho = sum(min(0, x - z)). Zero for non-negative residuals.
double airpls_weight(double residual, double rho, int iteration);

/// Adaptive iteratively reweighted baseline, each row independently.
/// The objective trace of each row records |rho| at every iteration.
/// Rows are distributed over `jobs` threads; output does not depend on jobs.
BaselineResult airpls_baseline(const Eigen::MatrixXd& x, const AirplsConfig& cfg, int jobs = 1);

}  // namespace pbc
