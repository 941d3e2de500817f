#include "pbc/smoothers.hpp"

#include "pbc/error.hpp"
#include "pbc/parallel.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace pbc {

namespace {

std::atomic<std::uint64_t> g_projection_passes{0};

void check_eig_matches(const Eigen::MatrixXd& x, const EigenSystem& eig) {
  if (x.cols() != eig.n) {
    throw Error(ErrorKind::InvalidDimension,
                "spectra have " + std::to_string(x.cols()) + " channels but eigensystem has n=" +
                    std::to_string(eig.n));
  }
}

// Cholesky factorization of a symmetric positive definite band matrix given
// by its upper band: band(k, i) = A(i, i+k).
class BandCholesky {
 public:
  explicit BandCholesky(const Eigen::MatrixXd& band)
      : p_(static_cast<int>(band.rows()) - 1), n_(static_cast<int>(band.cols())),
        l_(Eigen::MatrixXd::Zero(n_, p_ + 1)) {
    const double max_diag = band.row(0).cwiseAbs().maxCoeff();
    const double tiny = n_ * std::numeric_limits<double>::epsilon() * max_diag;
    // l_(i, d) holds L(i, i-d).
    for (int i = 0; i < n_; ++i) {
      for (int j = std::max(0, i - p_); j <= i; ++j) {
        double s = band(i - j, j);
        for (int k = std::max(0, i - p_); k < j; ++k) s -= l_(i, i - k) * l_(j, j - k);
        if (i == j) {
          if (!(s > tiny)) {
            throw Error(ErrorKind::SingularSystem,
                        "weighted system is singular (pivot " + std::to_string(s) +
                            " at channel " + std::to_string(i) + ")");
          }
          l_(i, 0) = std::sqrt(s);
        } else {
          l_(i, i - j) = s / l_(j, 0);
        }
      }
    }
  }

  Eigen::VectorXd solve(Eigen::VectorXd b) const {
    for (int i = 0; i < n_; ++i) {
      for (int k = std::max(0, i - p_); k < i; ++k) b[i] -= l_(i, i - k) * b[k];
      b[i] /= l_(i, 0);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      for (int k = i + 1; k <= std::min(n_ - 1, i + p_); ++k) b[i] -= l_(k, k - i) * b[k];
      b[i] /= l_(i, 0);
    }
    return b;
  }

 private:
  int p_;
  int n_;
  Eigen::MatrixXd l_;
};

}  // namespace

void SpectraMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 3) {
    throw Error(ErrorKind::InvalidDimension, "spectra must have m >= 1 samples and n >= 3 channels");
  }
  if (!values.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "spectra contain non-finite entries");
  }
  if (!wavelengths.empty()) {
    if (static_cast<Eigen::Index>(wavelengths.size()) != values.cols()) {
      throw Error(ErrorKind::InvalidDimension, "wavelength count does not match channel count");
    }
    for (std::size_t j = 1; j < wavelengths.size(); ++j) {
      if (!(wavelengths[j] > wavelengths[j - 1])) {
        throw Error(ErrorKind::InvalidParameter, "wavelengths must be strictly increasing");
      }
    }
  }
}

SpectralSmoother::SpectralSmoother(const EigenSystem& eig, double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParameter, "penalty lambda must be finite and >= 0");
  }
  const int r = eig.regularized_count();
  basis_ = eig.regularized_loadings();
  factors_ = (1.0 + lambda * lambda * eig.values.head(r).array()).inverse().matrix();
  scaled_ = factors_.asDiagonal() * basis_.transpose();
  null_ = eig.nullspace;
}

Eigen::MatrixXd SpectralSmoother::apply(const Eigen::Ref<const Eigen::MatrixXd>& r) const {
  if (r.cols() != basis_.rows()) {
    throw Error(ErrorKind::InvalidDimension, "smoother applied to matrix of wrong width");
  }
  Eigen::MatrixXd z = (r * basis_) * scaled_;
  z.noalias() += (r * null_) * null_.transpose();
  return z;
}

std::uint64_t projection_pass_count() noexcept { return g_projection_passes.load(); }

std::vector<BaselineResult> eilers_baseline_multi_lambda(const Eigen::MatrixXd& x,
                                                         const EigenSystem& eig,
                                                         const FilterBank& bank) {
  check_eig_matches(x, eig);
  if (bank.lambdas.empty()) {
    throw Error(ErrorKind::InvalidParameter, "lambda list is empty");
  }
  if (bank.n != eig.n || bank.order != eig.order) {
    throw Error(ErrorKind::InvalidDimension, "filter bank was built on a different eigensystem");
  }
  const int r = eig.regularized_count();
  const auto basis = eig.regularized_loadings();

  const Eigen::MatrixXd projected = x * basis;
  const Eigen::MatrixXd fixed = (x * eig.nullspace) * eig.nullspace.transpose();
  ++g_projection_passes;

  std::vector<BaselineResult> results;
  results.reserve(bank.lambdas.size());
  for (std::size_t k = 0; k < bank.lambdas.size(); ++k) {
    BaselineResult res;
    if (bank.lambdas[k] == 0.0) {
      res.baseline = x;
    } else {
      const auto f = bank.factors[k].head(r);
      res.baseline = (projected * f.asDiagonal()) * basis.transpose() + fixed;
    }
    res.corrected = x - res.baseline;
    results.push_back(std::move(res));
  }
  return results;
}

BaselineResult eilers_baseline(const Eigen::MatrixXd& x, double lambda, const EigenSystem& eig) {
  const double lambdas[] = {lambda};
  auto results = eilers_baseline_multi_lambda(x, eig, filter_bank(eig, lambdas));
  return std::move(results.front());
}

Eigen::VectorXd weighted_baseline(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& h, double lambda,
                                  const DerivativeOperator& d) {
  if (x.size() != d.cols() || h.size() != d.cols()) {
    throw Error(ErrorKind::InvalidDimension, "spectrum, weights and operator sizes differ");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParameter, "weighted baseline requires finite lambda > 0");
  }
  if ((h.array() < 0.0).any() || !h.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "weights must be finite and non-negative");
  }
  if ((h.array() == 0.0).all()) {
    throw Error(ErrorKind::SingularSystem, "all weights are zero");
  }
  Eigen::MatrixXd band = (lambda * lambda) * d.gram_band();
  band.row(0) += h.transpose();
  const BandCholesky chol(band);
  return chol.solve(h.cwiseProduct(x));
}

void AirplsConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidParameter, "airpls lambda must be finite and > 0");
  }
  if (order != 1 && order != 2) {
    throw Error(ErrorKind::InvalidParameter, "airpls order must be 1 or 2");
  }
  if (max_iter < 1) throw Error(ErrorKind::InvalidParameter, "airpls max_iter must be >= 1");
  if (!(termination_ratio > 0.0 && termination_ratio < 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "airpls termination_ratio must lie in (0, 1)");
  }
}

double airpls_weight(double residual, double rho, int iteration) {
  if (residual >= 0.0) return 0.0;
  return std::exp(iteration * std::abs(residual) / std::abs(rho));
}

BaselineResult airpls_baseline(const Eigen::MatrixXd& x, const AirplsConfig& cfg, int jobs) {
  cfg.validate();
  const DerivativeOperator d(cfg.order, static_cast<int>(x.cols()));
  const Eigen::Index m = x.rows();
  const Eigen::Index n = x.cols();

  BaselineResult res;
  res.baseline.resize(m, n);
  res.iterations.assign(static_cast<std::size_t>(m), 0);
  res.objective_trace.assign(static_cast<std::size_t>(m), {});

  parallel_for(static_cast<std::size_t>(m), jobs, [&](std::size_t i) {
    const Eigen::VectorXd xi = x.row(static_cast<Eigen::Index>(i)).transpose();
    const double threshold = cfg.termination_ratio * xi.cwiseAbs().sum();
    Eigen::VectorXd z = weighted_baseline(xi, Eigen::VectorXd::Ones(n), cfg.lambda, d);
    auto& trace = res.objective_trace[i];
    int done = 0;
    for (int k = 1; k <= cfg.max_iter; ++k) {
      const Eigen::VectorXd resid = xi - z;
      const double rho = resid.cwiseMin(0.0).sum();
      trace.push_back(std::abs(rho));
      if (std::abs(rho) < threshold) break;
      Eigen::VectorXd h(n);
      for (Eigen::Index j = 0; j < n; ++j) h[j] = airpls_weight(resid[j], rho, k);
      try {
        z = weighted_baseline(xi, h, cfg.lambda, d);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularSystem) throw;
        break;  // too few active channels to pin the baseline; keep the last one
      }
      done = k;
    }
    res.iterations[i] = done;
    res.baseline.row(static_cast<Eigen::Index>(i)) = z.transpose();
  });
  res.corrected = x - res.baseline;
  return res;
}

}  // namespace pbc
