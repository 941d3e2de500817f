#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pbc {

/// Banded difference operator D of order 1 (stencil [1,-1]) or order 2
/// (stencil [1,-2,1]), shape (n-order) x n.
class DerivativeOperator {
 public:
  DerivativeOperator(int order, int n);

  int order() const noexcept { return order_; }
  int cols() const noexcept { return n_; }
  int rows() const noexcept { return n_ - order_; }
  std::span<const double> stencil() const noexcept;

  /// D * v, length rows().
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// Upper band of C = D^T D: band(k, i) = C(i, i+k) for k = 0..order.
  Eigen::MatrixXd gram_band() const;

  /// Dense materialization; intended for oracles and small problems only.
  Eigen::MatrixXd dense() const;
  Eigen::MatrixXd dense_gram() const;

 private:
  int order_;
  int n_;
};

DerivativeOperator make_operator(int order, int n);

/// Eigendecomposition of C = D^T D.
///
/// `values` holds s_j^2 in descending order, the trailing `order` entries
/// exactly zero. `loadings` is the full n x n orthonormal V whose trailing
/// `order` columns are the columns of `nullspace` (V0) in reverse order, so
/// the last column is always the constant vector.
struct EigenSystem {
  int order = 1;
  int n = 0;
  Eigen::VectorXd values;
  Eigen::MatrixXd loadings;
  Eigen::MatrixXd nullspace;

  /// Number of columns carrying a nonzero s_j^2.
  int regularized_count() const noexcept { return n - order; }
  auto regularized_loadings() const { return loadings.leftCols(n - order); }
};

/// Closed-form eigensystem of D1^T D1: s_j^2 = 2 - 2cos((n-j)pi/n) with
/// cosine loading vectors, each normalized to unit length.
EigenSystem closed_form_eigensystem(int n);

/// Dense symmetric eigendecomposition of D^T D restricted to the complement
/// of the analytic nullspace. Used for order 2 and as an oracle for order 1.
EigenSystem numerical_eigensystem(int order, int n);

/// Closed form for order 1, numerical for order 2.
EigenSystem make_eigensystem(int order, int n);

/// Orthonormal basis of the nullspace of D via Gram-Schmidt on the
/// constant and ramp vectors.
Eigen::MatrixXd nullspace_basis(int order, int n);

struct FilterBank {
  std::vector<double> lambdas;
  /// factors[k][j] = 1 / (1 + lambdas[k]^2 * values[j]).
  std::vector<Eigen::VectorXd> factors;
  int order = 1;
  int n = 0;
};

FilterBank filter_bank(const EigenSystem& eig, std::span<const double> lambdas);

// Binary cache: "SBEG", u32 version, u32 order, u32 n, then little-endian
// f64 values, loadings (row-major), nullspace (row-major).
inline constexpr std::uint32_t kEigenCacheVersion = 1;

void save_eigensystem(const EigenSystem& eig, const std::filesystem::path& path);
EigenSystem load_eigensystem(const std::filesystem::path& path);

/// make_eigensystem() backed by a file cache in `dir`. An empty dir disables
/// caching. Unreadable or mismatched cache files are recomputed and rewritten.
EigenSystem cached_eigensystem(int order, int n, const std::filesystem::path& dir);

/// Directory named by PBC_EIGEN_CACHE_DIR, or empty.
std::filesystem::path eigen_cache_dir_from_env();

/// Number of sign changes in v, ignoring entries below `tol` in magnitude.
int count_sign_changes(const Eigen::Ref<const Eigen::VectorXd>& v, double tol = 1e-12);

}  // namespace pbc
