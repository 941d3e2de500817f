#include "pbc/datasets.hpp"
#include "pbc/error.hpp"
#include "pbc/evaluation.hpp"
#include "pbc/operators.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

using namespace pbc;

namespace {

Dataset parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_dataset(in, schema, "mem");
}

ErrorKind kind_of(const std::string& text, const CsvSchema& schema = {}) {
  try {
    parse(text, schema);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidParameter;
}

std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("cookie-style layout") {
  std::ostringstream os;
  for (int j = 0; j < 700; ++j) os << "wl_" << 1100 + 2 * j << ',';
  os << "fat,sucrose,flour,water\n";
  pbc::Rng rng(61);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 700; ++j) os << rng.uniform() << ',';
    os << "20.1,17.2,45.3,3.9\n";
  }
  const Dataset d = parse(os.str());
  CHECK(d.samples() == 5);
  CHECK(d.channels() == 700);
  CHECK(d.analyte_names() == std::vector<std::string>{"fat", "sucrose", "flour", "water"});
  REQUIRE(d.spectra.wavelengths.size() == 700);
  CHECK(d.spectra.wavelengths.front() == 1100.0);
  CHECK(d.spectra.wavelengths.back() == 2498.0);
  CHECK(d.analyte("water")[4] == 3.9);
  CHECK(d.has_analyte("fat"));
  CHECK_FALSE(d.has_analyte("protein"));
  try {
    d.analyte("protein");
    FAIL("expected unknown analyte");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("sucrose") != std::string::npos);
  }

  CsvSchema only;
  only.analyte_columns = {"sucrose"};
  CHECK(parse(os.str(), only).analyte_names() == std::vector<std::string>{"sucrose"});
}

TEST_CASE("one sample loads; splitting it fails later") {
  const Dataset d = parse("wl_1,wl_2,wl_3,a\n1,2,3,4\n");
  CHECK(d.samples() == 1);
  CHECK_THROWS_AS(make_splits(static_cast<int>(d.samples()), 1, 1), Error);
}

TEST_CASE("parse errors carry a location") {
  CHECK(kind_of("") == ErrorKind::Parse);
  CHECK(kind_of("a,b\n1,2\n") == ErrorKind::Parse);  // no spectral columns
  CHECK(kind_of("wl_1,wl_2,a\n1,2\n") == ErrorKind::Parse);
  CHECK(kind_of("wl_1,wl_2,a\n1,x,3\n") == ErrorKind::Parse);
  CHECK(kind_of("wl_1,wl_2,a\n1,nan,3\n") == ErrorKind::Parse);
  CHECK(kind_of("wl_1,wl_2,a\n") == ErrorKind::Parse);
  CsvSchema s;
  s.analyte_columns = {"b"};
  CHECK(kind_of("wl_1,wl_2,a\n1,2,3\n", s) == ErrorKind::Parse);

  const std::string msg = message_of("wl_1,wl_2,fat\n1,2,3\n4,oops,6\n");
  CHECK(msg.find("mem:3") != std::string::npos);
  CHECK(msg.find("column 2") != std::string::npos);
  CHECK(msg.find("wl_2") != std::string::npos);
  CHECK(msg.find("oops") != std::string::npos);

  const std::string ragged = message_of("wl_1,wl_2,fat\n1,2,3\n4,5\n");
  CHECK(ragged.find("mem:3") != std::string::npos);
  CHECK(ragged.find("expected 3 fields") != std::string::npos);
}

TEST_CASE("non-numeric wavelength suffixes give no wavelength axis") {
  const Dataset d = parse("wl_a,wl_b,wl_c,y\n1,2,3,0\n4,5,6,0\n");
  CHECK(d.channels() == 3);
  CHECK(d.spectra.wavelengths.empty());
}

TEST_CASE("save and load round trip is exact") {
  pbc::Rng rng(62);
  Dataset d;
  d.spectra.values = testutil::random_matrix(rng, 6, 9) * 1e3;
  d.spectra.values(0, 0) = 0.1;
  d.spectra.values(1, 1) = 1.0 / 3.0;
  d.spectra.values(2, 2) = -2.2250738585072014e-308;
  d.spectra.wavelengths.resize(9);
  for (int j = 0; j < 9; ++j) d.spectra.wavelengths[j] = 400.5 + j;
  d.analytes.emplace_back("fat", testutil::random_vector(rng, 6));
  d.analytes.emplace_back("water", testutil::random_vector(rng, 6));

  const auto dir = testutil::temp_dir("ds");
  const auto path = dir / "d.csv";
  save_dataset(path, d);
  const Dataset back = load_dataset(path);
  CHECK(back.spectra.values == d.spectra.values);
  CHECK(back.spectra.wavelengths == d.spectra.wavelengths);
  CHECK(back.analyte("fat") == d.analyte("fat"));
  CHECK(back.analyte("water") == d.analyte("water"));
  CHECK(back.provenance.find("d.csv") != std::string::npos);

  // Saving again gives the same bytes.
  save_dataset(dir / "e.csv", back);
  CHECK(testutil::slurp(path) == testutil::slurp(dir / "e.csv"));

  try {
    load_dataset(dir / "missing.csv");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("sample exclusion") {
  CHECK(parse_index_list("23") == std::vector<int>{23});
  CHECK(parse_index_list("5,1,3-4,4") == std::vector<int>{1, 3, 4, 5});
  CHECK(parse_index_list("") == std::vector<int>{});
  CHECK_THROWS_AS(parse_index_list("0"), Error);
  CHECK_THROWS_AS(parse_index_list("4-2"), Error);
  CHECK_THROWS_AS(parse_index_list("a"), Error);

  const Dataset d = parse("wl_1,wl_2,wl_3,a\n1,2,0,10\n3,4,0,20\n5,6,0,30\n");
  const Dataset e = d.without_samples({2});
  CHECK(e.samples() == 2);
  CHECK(e.spectra.values(1, 0) == 5.0);
  CHECK(e.analyte("a") == Eigen::Vector2d(10, 30));
  CHECK_THROWS_AS(d.without_samples({4}), Error);
}

TEST_CASE("synthetic data") {
  SynthSpec clean;
  clean.noise_sigma = 0.0;
  clean.baseline_amplitude = 0.0;
  const SynthDataset c = synth_generate(clean);
  CHECK(c.data.spectra.values == c.true_signal);
  CHECK(c.true_baseline.cwiseAbs().maxCoeff() == 0.0);

  SynthSpec perfect;
  perfect.target_r = 1.0;
  const SynthDataset p = synth_generate(perfect);
  CHECK(pearson_correlation(p.data.analyte("a"), p.data.analyte("y")) == doctest::Approx(1.0).epsilon(1e-12));

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthSpec s;
    s.m = 200;
    s.target_r = 0.5;
    s.seed = seed;
    const SynthDataset g = synth_generate(s);
    CHECK(std::abs(pearson_correlation(g.data.analyte("a"), g.data.analyte("y")) - 0.5) <= 0.05);
    CHECK(g.data.analyte("a").minCoeff() > 0.0);
    CHECK(g.data.analyte("y").minCoeff() > 0.0);
  }

  // Baseline rows live in the span of the low-frequency loadings.
  SynthSpec s;
  s.m = 20;
  s.n = 40;
  const SynthDataset g = synth_generate(s);
  const EigenSystem e = closed_form_eigensystem(40);
  const Eigen::MatrixXd low = e.loadings.rightCols(s.baseline_smoothness);
  const Eigen::MatrixXd proj = g.true_baseline * low * low.transpose();
  CHECK((proj - g.true_baseline).norm() < 1e-10 * g.true_baseline.norm());

  const Eigen::MatrixXd resid = g.data.spectra.values - g.true_baseline - g.true_signal;
  const double sd = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
  CHECK(sd == doctest::Approx(s.noise_sigma).epsilon(0.1));
  CHECK(synth_generate(s).data.spectra.values == g.data.spectra.values);

  const auto& wl = g.data.spectra.wavelengths;
  for (Eigen::Index j = 1; j < wl.size(); ++j) CHECK(wl[j] > wl[j - 1]);

  SynthSpec bad;
  bad.m = 2;
  CHECK_THROWS_AS(synth_generate(bad), Error);
  bad = {};
  bad.target_r = 1.5;
  CHECK_THROWS_AS(synth_generate(bad), Error);
  bad = {};
  bad.noise_sigma = -1;
  CHECK_THROWS_AS(synth_generate(bad), Error);
}
