#include "pbc/operators.hpp"

#include "pbc/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

namespace pbc {

namespace {

constexpr std::array<double, 2> kStencil1{1.0, -1.0};
constexpr std::array<double, 3> kStencil2{1.0, -2.0, 1.0};

void check_order(int order) {
  if (order != 1 && order != 2) {
    throw Error(ErrorKind::InvalidParameter,
                "difference order must be 1 or 2, got " + std::to_string(order));
  }
}

void check_dims(int order, int n) {
  check_order(order);
  if (n <= order) {
    throw Error(ErrorKind::InvalidDimension,
                "channel count n=" + std::to_string(n) + " must exceed order " +
                    std::to_string(order));
  }
}

// Fix the sign so that the first entry that is not negligible is positive.
void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double tol = 1e-12 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > tol) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

DerivativeOperator::DerivativeOperator(int order, int n) : order_(order), n_(n) {
  check_dims(order, n);
}

std::span<const double> DerivativeOperator::stencil() const noexcept {
  if (order_ == 1) return {kStencil1.data(), kStencil1.size()};
  return {kStencil2.data(), kStencil2.size()};
}

Eigen::VectorXd DerivativeOperator::apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != n_) {
    throw Error(ErrorKind::InvalidDimension, "operator applied to vector of wrong length");
  }
  const auto s = stencil();
  Eigen::VectorXd out(rows());
  for (int r = 0; r < rows(); ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += s[k] * v[r + static_cast<int>(k)];
    out[r] = acc;
  }
  return out;
}

Eigen::MatrixXd DerivativeOperator::gram_band() const {
  const auto s = stencil();
  Eigen::MatrixXd band = Eigen::MatrixXd::Zero(order_ + 1, n_);
  // Each row r of D touches columns r..r+order; accumulate its outer product.
  for (int r = 0; r < rows(); ++r) {
    for (int p = 0; p <= order_; ++p) {
      for (int q = p; q <= order_; ++q) {
        band(q - p, r + p) += s[p] * s[q];
      }
    }
  }
  return band;
}

Eigen::MatrixXd DerivativeOperator::dense() const {
  const auto s = stencil();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows(), n_);
  for (int r = 0; r < rows(); ++r) {
    for (std::size_t k = 0; k < s.size(); ++k) d(r, r + static_cast<int>(k)) = s[k];
  }
  return d;
}

Eigen::MatrixXd DerivativeOperator::dense_gram() const {
  const Eigen::MatrixXd d = dense();
  return d.transpose() * d;
}

DerivativeOperator make_operator(int order, int n) { return DerivativeOperator(order, n); }

Eigen::MatrixXd nullspace_basis(int order, int n) {
  check_dims(order, n);
  Eigen::MatrixXd basis(n, order);
  basis.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  if (order == 2) {
    Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
    ramp.array() -= ramp.mean();
    basis.col(1) = ramp / ramp.norm();
  }
  return basis;
}

EigenSystem closed_form_eigensystem(int n) {
  if (n < 2) {
    throw Error(ErrorKind::InvalidDimension, "closed-form eigensystem requires n >= 2");
  }
  const double pi = std::numbers::pi;
  EigenSystem eig;
  eig.order = 1;
  eig.n = n;
  eig.values.resize(n);
  eig.loadings.resize(n, n);
  for (int j = 1; j <= n; ++j) {
    const int k = n - j;
    eig.values[j - 1] = 2.0 - 2.0 * std::cos(k * pi / n);
    auto col = eig.loadings.col(j - 1);
    for (int i = 1; i <= n; ++i) {
      col[i - 1] = std::cos(k * (2.0 * i - 1.0) * pi / (2.0 * n));
    }
    col /= col.norm();
  }
  eig.values[n - 1] = 0.0;
  eig.nullspace = nullspace_basis(1, n);
  eig.loadings.col(n - 1) = eig.nullspace.col(0);
  return eig;
}

EigenSystem numerical_eigensystem(int order, int n) {
  check_dims(order, n);
  const DerivativeOperator d(order, n);
  const Eigen::MatrixXd c = d.dense_gram();
  const Eigen::MatrixXd v0 = nullspace_basis(order, n);

  // Orthonormal complement of span(V0) from a full Householder basis.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v0);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd comp = q.rightCols(n - order);

  const Eigen::MatrixXd restricted = comp.transpose() * c * comp;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(restricted);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularSystem, "symmetric eigensolver failed");
  }

  EigenSystem eig;
  eig.order = order;
  eig.n = n;
  eig.values = Eigen::VectorXd::Zero(n);
  eig.loadings.resize(n, n);
  const int r = n - order;
  // Eigen returns ascending order; store descending.
  for (int j = 0; j < r; ++j) {
    const int src = r - 1 - j;
    eig.values[j] = std::max(0.0, solver.eigenvalues()[src]);
    eig.loadings.col(j) = comp * solver.eigenvectors().col(src);
    canonicalize_sign(eig.loadings.col(j));
  }
  // Trailing columns run ramp then constant, so frequency keeps falling.
  eig.loadings.rightCols(order) = v0.rowwise().reverse();
  eig.nullspace = v0;
  return eig;
}

EigenSystem make_eigensystem(int order, int n) {
  check_dims(order, n);
  return order == 1 ? closed_form_eigensystem(n) : numerical_eigensystem(order, n);
}

FilterBank filter_bank(const EigenSystem& eig, std::span<const double> lambdas) {
  FilterBank bank;
  bank.order = eig.order;
  bank.n = eig.n;
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorKind::InvalidParameter,
                  "penalty lambda must be finite and >= 0, got " + std::to_string(lambda));
    }
    const double l2 = lambda * lambda;
    bank.lambdas.push_back(lambda);
    bank.factors.push_back((1.0 + l2 * eig.values.array()).inverse().matrix());
  }
  return bank;
}

namespace {

constexpr char kMagic[4] = {'S', 'B', 'E', 'G'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorKind::Io, "truncated eigensystem cache file");
  return to_little(v);
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_le(os, m(i, j));
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_le<double>(is);
  return m;
}

}  // namespace

void save_eigensystem(const EigenSystem& eig, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kEigenCacheVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(eig.order));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(eig.n));
  for (Eigen::Index j = 0; j < eig.values.size(); ++j) write_le(os, eig.values[j]);
  write_matrix(os, eig.loadings);
  write_matrix(os, eig.nullspace);
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

EigenSystem load_eigensystem(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::Parse, path.string() + ": not an eigensystem cache file");
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kEigenCacheVersion) {
    throw Error(ErrorKind::Parse, path.string() + ": unsupported cache version " +
                                      std::to_string(version));
  }
  EigenSystem eig;
  eig.order = static_cast<int>(read_le<std::uint32_t>(is));
  eig.n = static_cast<int>(read_le<std::uint32_t>(is));
  check_dims(eig.order, eig.n);
  eig.values.resize(eig.n);
  for (int j = 0; j < eig.n; ++j) eig.values[j] = read_le<double>(is);
  eig.loadings = read_matrix(is, eig.n, eig.n);
  eig.nullspace = read_matrix(is, eig.n, eig.order);
  return eig;
}

EigenSystem cached_eigensystem(int order, int n, const std::filesystem::path& dir) {
  if (dir.empty()) return make_eigensystem(order, n);
  const auto path =
      dir / ("sbeg_o" + std::to_string(order) + "_n" + std::to_string(n) + ".bin");
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      EigenSystem eig = load_eigensystem(path);
      if (eig.order == order && eig.n == n) return eig;
    } catch (const Error&) {
      // fall through and rebuild
    }
  }
  EigenSystem eig = make_eigensystem(order, n);
  std::filesystem::create_directories(dir, ec);
  const auto tmp = path.string() + ".tmp";
  try {
    save_eigensystem(eig, tmp);
    std::filesystem::rename(tmp, path, ec);
  } catch (const Error&) {
    // A read-only cache dir is not fatal.
  }
  return eig;
}

std::filesystem::path eigen_cache_dir_from_env() {
  const char* dir = std::getenv("PBC_EIGEN_CACHE_DIR");
  return dir ? std::filesystem::path(dir) : std::filesystem::path();
}

int count_sign_changes(const Eigen::Ref<const Eigen::VectorXd>& v, double tol) {
  int changes = 0;
  int last = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) <= tol) continue;
    const int sign = v[i] > 0.0 ? 1 : -1;
    if (last != 0 && sign != last) ++changes;
    last = sign;
  }
  return changes;
}

}  // namespace pbc
