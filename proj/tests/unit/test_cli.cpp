#include "cli.hpp"
#include "pbc/datasets.hpp"
#include "pbc/operators.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  Run r;
  r.code = pbc::cli::run(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

int line_count(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

// Small synthetic table shared by the file-based cases.
fs::path make_input(const fs::path& dir) {
  const fs::path data = dir / "synth";
  const Run r = run({"synth", "--output", data.string(), "--m", "40", "--n", "30", "--seed", "3"});
  REQUIRE(r.code == 0);
  return data / "dataset.csv";
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"benchmark", "--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eigen"}).code == 2);  // --output missing
  CHECK(run({"eigen", "--output", "x", "--n", "notanumber"}).code == 2);
}

TEST_CASE("synth writes data and ground truth") {
  const auto dir = testutil::temp_dir("cli_synth");
  const fs::path input = make_input(dir);
  CHECK(fs::exists(input));
  CHECK(fs::exists(dir / "synth" / "true_baseline.csv"));
  CHECK(fs::exists(dir / "synth" / "true_signal.csv"));
  const pbc::Dataset d = pbc::load_dataset(input);
  CHECK(d.samples() == 40);
  CHECK(d.channels() == 30);
  CHECK(d.has_analyte("a"));
  CHECK(d.has_analyte("y"));
  CHECK(run({"synth", "--output", (dir / "bad").string(), "--target-r", "2"}).code == 2);
  CHECK(run({"synth", "--output", (dir / "bad").string(), "--m", "2"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("eigen subcommand") {
  const auto dir = testutil::temp_dir("cli_eigen");
  const Run r = run({"eigen", "--output", dir.string(), "--n", "12", "--lambda", "1,10"});
  REQUIRE(r.code == 0);
  const std::string values = testutil::slurp(dir / "values.csv");
  const std::string loadings = testutil::slurp(dir / "loadings.csv");
  const std::string filters = testutil::slurp(dir / "filters.csv");
  CHECK(values.rfind("j,s2\n", 0) == 0);
  CHECK(line_count(values) == 13);
  CHECK(line_count(loadings) == 13);
  CHECK(filters.rfind("j,s2,lambda_1,lambda_10\n", 0) == 0);

  // Largest eigenvalue row agrees with the library.
  const pbc::EigenSystem e = pbc::closed_form_eigensystem(12);
  std::istringstream in(values);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  const double s2 = std::stod(first.substr(first.find(',') + 1));
  CHECK(s2 == doctest::Approx(e.values[0]).epsilon(1e-15));

  CHECK(run({"eigen", "--output", (dir / "n").string(), "--n", "30", "--order", "2", "--numerical"}).code == 0);
  CHECK(run({"eigen", "--output", (dir / "bad").string(), "--n", "1"}).code == 2);
  CHECK(run({"eigen", "--output", (dir / "bad").string(), "--order", "3"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("baseline subcommand") {
  const auto dir = testutil::temp_dir("cli_base");
  const fs::path input = make_input(dir);
  const fs::path out = dir / "eilers";
  Run r = run({"baseline", "--input", input.string(), "--output", out.string(), "--method", "EILERS",
               "--lambda", "10,100"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "baseline_lambda-10.csv"));
  CHECK(fs::exists(out / "corrected_lambda-100.csv"));

  const pbc::Dataset corrected = pbc::load_dataset(out / "corrected_lambda-100.csv");
  const pbc::Dataset raw = pbc::load_dataset(input);
  const Eigen::MatrixXd want =
      raw.spectra.values - testutil::dense_smooth(raw.spectra.values, 100.0, 1);
  CHECK((corrected.spectra.values - want).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(corrected.analyte("a") == raw.analyte("a"));

  r = run({"baseline", "--input", input.string(), "--output", (dir / "s").string(), "--method", "SPBC_N",
           "--lambda", "10", "--analyte", "a", "--exclude-samples", "1-3"});
  CHECK(r.code == 0);
  CHECK(pbc::load_dataset(dir / "s" / "corrected_lambda-10.csv").samples() == 37);

  r = run({"baseline", "--input", input.string(), "--output", (dir / "s2").string(), "--method", "SPBC_N"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--analyte") != std::string::npos);
  CHECK(run({"baseline", "--input", input.string(), "--output", (dir / "s3").string(), "--method", "EILERS",
             "--lambda", "-1"})
            .code == 2);
  r = run({"baseline", "--input", input.string(), "--output", (dir / "l0").string(), "--method", "EILERS",
           "--lambda", "0"});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(pbc::load_dataset(dir / "l0" / "corrected_lambda-0.csv").spectra.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(run({"baseline", "--input", input.string(), "--output", (dir / "l1").string(), "--method", "SPBC_N",
             "--analyte", "a", "--lambda", "0"})
            .code == 2);
  CHECK(run({"baseline", "--input", (dir / "nope.csv").string(), "--output", (dir / "s4").string()}).code == 4);

  // A constant-zero analyte column cannot drive SPBC.
  {
    pbc::Dataset d = raw;
    d.analytes.emplace_back("zero", Eigen::VectorXd::Zero(d.samples()));
    pbc::save_dataset(dir / "zero.csv", d);
  }
  r = run({"baseline", "--input", (dir / "zero.csv").string(), "--output", (dir / "z").string(), "--method",
           "SPBC_I", "--analyte", "zero"});
  CHECK(r.code == 3);
  CHECK_FALSE(fs::exists(dir / "z" / "baseline_lambda-100.csv"));
  fs::remove_all(dir);
}

TEST_CASE("benchmark subcommand, config file and determinism") {
  const auto dir = testutil::temp_dir("cli_bench");
  const fs::path input = make_input(dir);
  const std::vector<std::string> common{"benchmark", "--input", input.string(), "--analyte", "a",
                                        "--response", "y", "--splits", "5", "--lambda", "10,100",
                                        "--method", "EILERS,SPBC_N:full"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = common;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  Run r1 = with({"--output", (dir / "b1").string(), "--jobs", "1"});
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("failed records: 0 of 25") != std::string::npos);
  const std::string records = testutil::slurp(dir / "b1" / "records.csv");
  CHECK(line_count(records) == 26);
  int none = 0;
  std::istringstream in(records);
  for (std::string line; std::getline(in, line);) none += line.find(",NONE,") != std::string::npos;
  CHECK(none == 5);
  CHECK(fs::exists(dir / "b1" / "summary.csv"));

  Run r2 = with({"--output", (dir / "b2").string(), "--jobs", "3"});
  REQUIRE(r2.code == 0);
  CHECK(testutil::slurp(dir / "b2" / "records.csv") == records);
  CHECK(testutil::slurp(dir / "b2" / "summary.csv") == testutil::slurp(dir / "b1" / "summary.csv"));

  // Same run described by a config file; a command-line seed overrides it.
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# benchmark settings\n"
        << "input = " << input.string() << "\n"
        << "analyte = a\nresponse = y\nsplits = 5\nlambda = 10,100\n"
        << "method = EILERS,SPBC_N:full\nseed = 99\n";
  }
  Run r3 = run({"benchmark", "--config", (dir / "run.cfg").string(), "--output", (dir / "b3").string(),
                "--seed", "1"});
  REQUIRE(r3.code == 0);
  CHECK(testutil::slurp(dir / "b3" / "records.csv") == records);
  Run r4 = run({"benchmark", "--config", (dir / "run.cfg").string(), "--output", (dir / "b4").string()});
  REQUIRE(r4.code == 0);
  CHECK(testutil::slurp(dir / "b4" / "records.csv") != records);

  CHECK(run({"benchmark", "--config", (dir / "missing.cfg").string(), "--output", (dir / "b5").string()}).code ==
        4);
  CHECK(with({"--output", (dir / "b6").string(), "--response", "nope"}).code == 2);
  CHECK(with({"--output", (dir / "b7").string(), "--method", "SPBC_X"}).code == 2);
  fs::remove_all(dir);
}
