#include "pbc/error.hpp"
#include "pbc/smoothers.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace pbc;
using testutil::dense_smooth;
using testutil::hand_gram;
using testutil::random_matrix;
using testutil::rel_err;

namespace {

// Smooth curve plus positive Gaussian peaks.
struct PeakRow {
  Eigen::VectorXd x;
  Eigen::VectorXd baseline;
};

PeakRow peak_row(int n, double shift) {
  PeakRow p;
  p.x.resize(n);
  p.baseline.resize(n);
  for (int j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / (n - 1);
    p.baseline[j] = 1.0 + shift + 0.8 * t - 0.6 * t * t + 0.2 * std::sin(2.0 * t);
    double peaks = 0.0;
    for (double c : {0.2, 0.45, 0.7, 0.85}) peaks += 1.5 * std::exp(-0.5 * std::pow((t - c) / 0.012, 2));
    p.x[j] = p.baseline[j] + peaks;
  }
  return p;
}

}  // namespace

TEST_CASE("spectra validation") {
  SpectraMatrix s;
  s.values = Eigen::MatrixXd::Ones(2, 3);
  CHECK_NOTHROW(s.validate());
  s.wavelengths = {1.0, 2.0, 2.0};
  CHECK_THROWS_AS(s.validate(), Error);
  s.wavelengths = {1.0, 2.0};
  CHECK_THROWS_AS(s.validate(), Error);
  s.wavelengths.clear();
  s.values(0, 0) = std::nan("");
  CHECK_THROWS_AS(s.validate(), Error);
  s.values = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("lambda = 0 returns the spectra unchanged") {
  pbc::Rng rng(11);
  for (int order : {1, 2}) {
    const Eigen::MatrixXd x = random_matrix(rng, 4, 9);
    const BaselineResult r = eilers_baseline(x, 0.0, make_eigensystem(order, 9));
    CHECK(r.baseline == x);
    CHECK(r.corrected == Eigen::MatrixXd::Zero(4, 9));
  }
}

TEST_CASE("huge lambda flattens a row to its mean") {
  pbc::Rng rng(12);
  const Eigen::MatrixXd x = random_matrix(rng, 1, 50);
  const Eigen::MatrixXd z = eilers_baseline(x, 1e8, closed_form_eigensystem(50)).baseline;
  const double range = x.maxCoeff() - x.minCoeff();
  CHECK((z.array() - x.mean()).abs().maxCoeff() < 1e-4 * range);
}

TEST_CASE("eilers matches a dense solve") {
  pbc::Rng rng(13);
  for (int order : {1, 2}) {
    for (double lambda : {0.3, 10.0, 1000.0}) {
      const Eigen::MatrixXd x = random_matrix(rng, 5, 7);
      const Eigen::MatrixXd z = eilers_baseline(x, lambda, make_eigensystem(order, 7)).baseline;
      CHECK(rel_err(z, dense_smooth(x, lambda, order)) < 1e-10);
      // Normal-equation residual.
      const Eigen::MatrixXd a =
          Eigen::MatrixXd::Identity(7, 7) + lambda * lambda * hand_gram(order, 7);
      // Normwise backward error.
      const double resid = (a * z.transpose() - x.transpose()).norm();
      CHECK(resid / (a.norm() * z.norm() + x.norm()) < 1e-10);
    }
  }
}

TEST_CASE("multi-lambda path equals single calls and projects once") {
  pbc::Rng rng(14);
  const Eigen::MatrixXd x = random_matrix(rng, 6, 30);
  const EigenSystem e = closed_form_eigensystem(30);
  const std::vector<double> lambdas{1, 10, 100, 1000};
  const auto before = projection_pass_count();
  const auto multi = eilers_baseline_multi_lambda(x, e, filter_bank(e, lambdas));
  CHECK(projection_pass_count() - before == 1);
  REQUIRE(multi.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const BaselineResult single = eilers_baseline(x, lambdas[k], e);
    CHECK((multi[k].baseline - single.baseline).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const std::vector<double> zero{0.0};
  CHECK(eilers_baseline_multi_lambda(x, e, filter_bank(e, zero))[0].baseline == x);
  CHECK_THROWS_AS(eilers_baseline_multi_lambda(x, e, filter_bank(e, std::vector<double>{})), Error);
  CHECK_THROWS_AS(eilers_baseline(x, 1.0, closed_form_eigensystem(29)), Error);
}

TEST_CASE("eilers properties: linearity, row permutation, mean, penalty monotonicity") {
  pbc::Rng rng(15);
  const EigenSystem e1 = closed_form_eigensystem(25);
  const Eigen::MatrixXd x1 = random_matrix(rng, 4, 25);
  const Eigen::MatrixXd x2 = random_matrix(rng, 4, 25);
  const auto b = [&](const Eigen::MatrixXd& x, double lam) { return eilers_baseline(x, lam, e1).baseline; };
  CHECK(rel_err(b(2.0 * x1 - 3.0 * x2, 7.0), 2.0 * b(x1, 7.0) - 3.0 * b(x2, 7.0)) < 1e-10);

  Eigen::MatrixXd perm = x1;
  perm.row(0).swap(perm.row(3));
  Eigen::MatrixXd zp = b(perm, 7.0);
  zp.row(0).swap(zp.row(3));
  CHECK((zp - b(x1, 7.0)).cwiseAbs().maxCoeff() < 1e-13);

  const Eigen::MatrixXd z = b(x1, 50.0);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(z.row(i).mean() - x1.row(i).mean()) < 1e-10);

  for (int order : {1, 2}) {
    const EigenSystem e = make_eigensystem(order, 25);
    const Eigen::MatrixXd d = testutil::hand_difference(order, 25);
    double prev_lam = 0.1;
    Eigen::MatrixXd prev = eilers_baseline(x1, prev_lam, e).baseline;
    for (double lam : {1.0, 10.0, 100.0}) {
      const Eigen::MatrixXd cur = eilers_baseline(x1, lam, e).baseline;
      for (int i = 0; i < 4; ++i) {
        CHECK((d * cur.row(i).transpose()).norm() <= (d * prev.row(i).transpose()).norm() + 1e-12);
      }
      prev = cur;
    }
  }
}

TEST_CASE("weighted baseline") {
  pbc::Rng rng(16);
  for (int order : {1, 2}) {
    const int n = 40;
    const DerivativeOperator d(order, n);
    const Eigen::VectorXd x = testutil::random_vector(rng, n);

    // Unit weights reduce to the Eilers solve.
    const Eigen::VectorXd z1 = weighted_baseline(x, Eigen::VectorXd::Ones(n), 5.0, d);
    const Eigen::MatrixXd ze = eilers_baseline(x.transpose(), 5.0, make_eigensystem(order, n)).baseline;
    CHECK((z1 - ze.row(0).transpose()).norm() / x.norm() < 1e-10);

    // Random non-negative weights against a dense solve.
    Eigen::VectorXd h(n);
    for (int j = 0; j < n; ++j) h[j] = rng.uniform() < 0.3 ? 0.0 : 2.0 * rng.uniform();
    h[0] = 1.0;
    h[n - 1] = 1.0;
    const Eigen::MatrixXd a = Eigen::MatrixXd(h.asDiagonal()) + 9.0 * hand_gram(order, n);
    const Eigen::VectorXd want = a.partialPivLu().solve(h.cwiseProduct(x));
    const Eigen::VectorXd got = weighted_baseline(x, h, 3.0, d);
    CHECK((got - want).norm() / want.norm() < 1e-10);
    CHECK(std::isfinite((testutil::hand_difference(order, n) * got).norm()));
  }
  const DerivativeOperator d(1, 10);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(10, 0, 1);
  try {
    weighted_baseline(x, Eigen::VectorXd::Zero(10), 1.0, d);
    FAIL("expected a singular-system error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularSystem);
  }
  Eigen::VectorXd neg = Eigen::VectorXd::Ones(10);
  neg[3] = -1.0;
  CHECK_THROWS_AS(weighted_baseline(x, neg, 1.0, d), Error);
}

TEST_CASE("airpls weight formula") {
  CHECK(airpls_weight(-0.5, -2.0, 3) == doctest::Approx(std::exp(0.75)).epsilon(1e-15));
  CHECK(airpls_weight(0.0, -2.0, 3) == 0.0);
  CHECK(airpls_weight(0.7, -2.0, 5) == 0.0);
}

TEST_CASE("airpls config validation") {
  AirplsConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AirplsConfig{};
  c.termination_ratio = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AirplsConfig{};
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AirplsConfig{};
  c.order = 3;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("airpls on an already smooth spectrum stops at once") {
  pbc::Rng rng(17);
  const Eigen::MatrixXd raw = random_matrix(rng, 3, 60);
  const Eigen::MatrixXd x =
      (eilers_baseline(raw, 1000.0, closed_form_eigensystem(60)).baseline.array() + 5.0).matrix();
  AirplsConfig cfg;
  cfg.lambda = 1.0;
  const BaselineResult r = airpls_baseline(x, cfg);
  for (int i = 0; i < 3; ++i) CHECK(r.iterations[i] <= 2);
  CHECK((r.baseline - x).norm() / x.norm() < 0.05);
}

TEST_CASE("airpls recovers a baseline under positive peaks better than eilers") {
  const int n = 300;
  Eigen::MatrixXd x(3, n), truth(3, n);
  for (int i = 0; i < 3; ++i) {
    const PeakRow p = peak_row(n, 0.3 * i);
    x.row(i) = p.x.transpose();
    truth.row(i) = p.baseline.transpose();
  }
  AirplsConfig cfg;
  cfg.lambda = 100.0;
  cfg.order = 2;
  const BaselineResult air = airpls_baseline(x, cfg);
  const Eigen::MatrixXd eil = eilers_baseline(x, 100.0, make_eigensystem(2, n)).baseline;
  CHECK((air.baseline - truth).norm() < (x - truth).norm());
  CHECK((air.baseline - truth).norm() < (eil - truth).norm());
  CHECK(air.corrected == x - air.baseline);
  for (int i = 0; i < 3; ++i) {
    CHECK(air.objective_trace[i].size() >= 1);
    // |rho| never grows between reweightings.
    for (std::size_t k = 1; k < air.objective_trace[i].size(); ++k) {
      CHECK(air.objective_trace[i][k] <= air.objective_trace[i][k - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("airpls output does not depend on the thread count") {
  pbc::Rng rng(18);
  Eigen::MatrixXd x = random_matrix(rng, 9, 80);
  for (int i = 0; i < 9; ++i) x.row(i) += peak_row(80, 0.1 * i).x.transpose();
  AirplsConfig cfg;
  const BaselineResult a = airpls_baseline(x, cfg, 1);
  const BaselineResult b = airpls_baseline(x, cfg, 4);
  CHECK(a.baseline == b.baseline);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("spectral smoother") {
  pbc::Rng rng(19);
  const EigenSystem e = make_eigensystem(2, 12);
  const SpectralSmoother s(e, 4.0);
  const Eigen::MatrixXd r = random_matrix(rng, 3, 12);
  CHECK(rel_err(s.apply(r), dense_smooth(r, 4.0, 2)) < 1e-10);
  CHECK(s.factors().size() == 10);
  CHECK_THROWS_AS(SpectralSmoother(e, -1.0), Error);
  CHECK_THROWS_AS(s.apply(random_matrix(rng, 3, 11)), Error);
}
