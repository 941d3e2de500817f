#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace pbc {

inline constexpr int kMaxLatentDims = 20;

struct CenteredData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
};

CenteredData mean_center(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// PLS1 calibration. coefficients.col(k-1) is the regression vector using
/// the first k latent dimensions. Means are zero when fitted on data that was
/// centered by the caller.
struct PlsModel {
  int max_lv = 0;
  /// Latent dimensions actually extracted; later columns repeat the last fit
  /// when the response was exhausted early.
  int components = 0;
  Eigen::MatrixXd coefficients;  // n x max_lv
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
};

/// NIPALS PLS1 on centered data with X and y deflation.
/// Requires 1 <= max_lv <= min(m - 1, n, 20).
PlsModel pls_fit(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, int max_lv);

/// mean_center() followed by pls_fit(), with the means stored in the model.
PlsModel pls_calibrate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_lv);

/// y_hat = (X2 - 1 mu_x) b_lv + 1 mu_y
Eigen::VectorXd pls_predict(const PlsModel& model, const Eigen::MatrixXd& x2, int lv);

/// Largest admissible latent dimension count for an m x n calibration set.
int max_latent_dims(Eigen::Index m, Eigen::Index n, int requested = kMaxLatentDims);

struct LatentSelection {
  std::vector<double> mard_per_lv;
  std::vector<double> r2_per_lv;
  std::vector<int> ranks_alpha;  // 1 = lowest MARD
  std::vector<int> ranks_beta;   // 1 = highest R2
  int chosen_lv = 1;             // 1-based
};

/// Ordinal ranks starting at 1; ties keep their order of first occurrence.
std::vector<int> ordinal_ranks(std::span<const double> values, bool ascending);

/// Picks the latent dimension whose (MARD rank, R2 rank) pair is closest to
/// the origin; ties go to the smaller dimension.
LatentSelection select_latent_dim(std::span<const double> mard_per_lv,
                                  std::span<const double> r2_per_lv);

}  // namespace pbc
