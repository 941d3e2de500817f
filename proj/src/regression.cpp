#include "pbc/regression.hpp"

#include "pbc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pbc {

CenteredData mean_center(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() < 2) {
    throw Error(ErrorKind::InvalidDimension, "mean centering needs at least 2 samples");
  }
  if (y.size() != x.rows()) {
    throw Error(ErrorKind::InvalidDimension, "response length does not match sample count");
  }
  CenteredData c;
  c.x_mean = x.colwise().mean();
  c.y_mean = y.mean();
  c.x = x.rowwise() - c.x_mean;
  c.y = y.array() - c.y_mean;
  return c;
}

int max_latent_dims(Eigen::Index m, Eigen::Index n, int requested) {
  const auto cap = std::min<Eigen::Index>({static_cast<Eigen::Index>(requested),
                                           static_cast<Eigen::Index>(kMaxLatentDims), m - 1, n});
  return static_cast<int>(std::max<Eigen::Index>(cap, 0));
}

PlsModel pls_fit(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, int max_lv) {
  const Eigen::Index m = xc.rows();
  const Eigen::Index n = xc.cols();
  if (yc.size() != m) {
    throw Error(ErrorKind::InvalidDimension, "response length does not match sample count");
  }
  if (max_lv < 1 || max_lv > max_latent_dims(m, n)) {
    throw Error(ErrorKind::InvalidParameter,
                "max_lv=" + std::to_string(max_lv) + " outside [1, min(m-1, n, 20)=" +
                    std::to_string(max_latent_dims(m, n)) + "]");
  }
  if (!(yc.norm() > 0.0)) {
    throw Error(ErrorKind::DegenerateResponse, "response has zero variance");
  }

  Eigen::MatrixXd x = xc;
  Eigen::VectorXd y = yc;
  Eigen::MatrixXd weights(n, max_lv);
  Eigen::MatrixXd loadings(n, max_lv);
  Eigen::VectorXd yload(max_lv);

  PlsModel model;
  model.max_lv = max_lv;
  model.coefficients = Eigen::MatrixXd::Zero(n, max_lv);
  model.x_mean = Eigen::RowVectorXd::Zero(n);

  const double start = (x.transpose() * y).norm();
  int k = 0;
  for (; k < max_lv; ++k) {
    Eigen::VectorXd w = x.transpose() * y;
    const double wn = w.norm();
    if (!(wn > 1e-12 * start)) break;  // response fully explained
    w /= wn;
    const Eigen::VectorXd t = x * w;
    const double tt = t.squaredNorm();
    if (!(tt > 0.0)) break;
    const Eigen::VectorXd p = x.transpose() * t / tt;
    const double q = y.dot(t) / tt;
    x.noalias() -= t * p.transpose();
    y -= q * t;
    weights.col(k) = w;
    loadings.col(k) = p;
    yload[k] = q;

    const int c = k + 1;
    // b = W (P^T W)^{-1} q on the first c components.
    const Eigen::MatrixXd ptw = loadings.leftCols(c).transpose() * weights.leftCols(c);
    model.coefficients.col(k) =
        weights.leftCols(c) * ptw.partialPivLu().solve(yload.head(c));
  }
  model.components = k;
  for (int j = std::max(k, 1); j < max_lv; ++j) {
    model.coefficients.col(j) = model.coefficients.col(j - 1);
  }
  return model;
}

PlsModel pls_calibrate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_lv) {
  const CenteredData c = mean_center(x, y);
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  if (c.y.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw Error(ErrorKind::DegenerateResponse, "response has zero variance");
  }
  PlsModel model = pls_fit(c.x, c.y, max_lv);
  model.x_mean = c.x_mean;
  model.y_mean = c.y_mean;
  return model;
}

Eigen::VectorXd pls_predict(const PlsModel& model, const Eigen::MatrixXd& x2, int lv) {
  if (lv < 1 || lv > model.max_lv) {
    throw Error(ErrorKind::InvalidParameter,
                "latent dimension " + std::to_string(lv) + " outside [1, " +
                    std::to_string(model.max_lv) + "]");
  }
  if (x2.cols() != model.coefficients.rows()) {
    throw Error(ErrorKind::InvalidDimension, "prediction spectra have the wrong channel count");
  }
  Eigen::VectorXd yhat = (x2.rowwise() - model.x_mean) * model.coefficients.col(lv - 1);
  yhat.array() += model.y_mean;
  return yhat;
}

std::vector<int> ordinal_ranks(std::span<const double> values, bool ascending) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return ascending ? values[i] < values[j] : values[i] > values[j];
  });
  std::vector<int> ranks(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = static_cast<int>(pos) + 1;
  return ranks;
}

LatentSelection select_latent_dim(std::span<const double> mard_per_lv,
                                  std::span<const double> r2_per_lv) {
  if (mard_per_lv.empty() || mard_per_lv.size() != r2_per_lv.size()) {
    throw Error(ErrorKind::InvalidDimension, "metric sequences must be non-empty and equal length");
  }
  for (std::size_t k = 0; k < mard_per_lv.size(); ++k) {
    if (!std::isfinite(mard_per_lv[k]) || !std::isfinite(r2_per_lv[k])) {
      throw Error(ErrorKind::InvalidMetric,
                  "non-finite metric at latent dimension " + std::to_string(k + 1));
    }
  }
  LatentSelection sel;
  sel.mard_per_lv.assign(mard_per_lv.begin(), mard_per_lv.end());
  sel.r2_per_lv.assign(r2_per_lv.begin(), r2_per_lv.end());
  sel.ranks_alpha = ordinal_ranks(mard_per_lv, true);
  sel.ranks_beta = ordinal_ranks(r2_per_lv, false);
  // Compare squared distances: integers, so ties are exact.
  long best = -1;
  for (std::size_t k = 0; k < sel.ranks_alpha.size(); ++k) {
    const long a = sel.ranks_alpha[k];
    const long b = sel.ranks_beta[k];
    const long d2 = a * a + b * b;
    if (best < 0 || d2 < best) {
      best = d2;
      sel.chosen_lv = static_cast<int>(k) + 1;
    }
  }
  return sel;
}

}  // namespace pbc
