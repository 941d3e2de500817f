#include "cli.hpp"

#include "pbc/datasets.hpp"
#include "pbc/error.hpp"
#include "pbc/evaluation.hpp"
#include "pbc/operators.hpp"
#include "pbc/parallel.hpp"
#include "pbc/smoothers.hpp"
#include "pbc/spbc.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace pbc::cli {

namespace {

struct Common {
  std::string input;
  std::string output;
  std::string exclude;
  int jobs = default_jobs();
};

struct BaselineOpts {
  Common c;
  std::string method = "EILERS";
  std::string lambda = "100";
  int order = 1;
  std::string analyte;
  std::string scheme;
};

struct BenchOpts {
  Common c;
  std::string method = "SPBC_N:full";
  std::string scheme = "full";
  std::string lambda = "1,10,100,1000";
  int order = 1;
  std::string analyte;
  std::string response;
  int splits = 200;
  std::uint64_t seed = 1;
};

struct EigenOpts {
  std::string output;
  int n = 40;
  int order = 1;
  std::string lambda = "0.001,0.01,0.1,1,10,100,1000";
  bool numerical = false;
};

struct SynthOpts {
  std::string output;
  SynthSpec spec;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split_commas(text)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::InvalidParameter, "--lambda: bad value '" + tok + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidParameter, "--lambda: empty list");
  return out;
}

void check_order(int order) {
  if (order != 1 && order != 2) {
    throw Error(ErrorKind::InvalidParameter, "--order must be 1 or 2, got " + std::to_string(order));
  }
}

void check_jobs(int jobs) {
  if (jobs < 1) throw Error(ErrorKind::InvalidParameter, "--jobs must be >= 1");
}

Dataset load_input(const Common& c, const std::vector<std::string>& needed) {
  if (c.input.empty()) throw Error(ErrorKind::InvalidParameter, "--input is required");
  CsvSchema schema;
  Dataset d = load_dataset(c.input, schema);
  if (!c.exclude.empty()) d = d.without_samples(parse_index_list(c.exclude));
  for (const auto& name : needed) (void)d.analyte(name);
  return d;
}

fs::path prepare_output(const std::string& out) {
  if (out.empty()) throw Error(ErrorKind::InvalidParameter, "--output is required");
  const fs::path p(out);
  std::error_code ec;
  if (fs::exists(p, ec) && !fs::is_directory(p, ec)) {
    throw Error(ErrorKind::Io, "--output exists and is not a directory: " + out);
  }
  return p;
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + p.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return f;
}

void write_matrix_csv(const fs::path& p, const Eigen::MatrixXd& z, const std::vector<double>& wl) {
  Dataset d;
  d.spectra.values = z;
  d.spectra.wavelengths = wl;
  save_dataset(p, d);
}

// ---- baseline ----------------------------------------------------------------

int cmd_baseline(const BaselineOpts& o, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(o.method);
  if (method == Method::None) {
    throw Error(ErrorKind::InvalidParameter, "--method NONE has no baseline to compute");
  }
  check_order(o.order);
  check_jobs(o.c.jobs);
  const std::vector<double> lambdas = parse_lambdas(o.lambda);
  for (double lam : lambdas) {
    if (!(lam >= 0.0) || !std::isfinite(lam)) {
      throw Error(ErrorKind::InvalidParameter, "--lambda values must be finite and >= 0");
    }
    if (lam == 0.0) {
      if (method != Method::Eilers) {
        throw Error(ErrorKind::InvalidParameter,
                    std::string("--lambda 0 is not allowed for ") + to_string(method));
      }
      err << "warning: lambda=0 makes the baseline equal the spectra; corrected output is zero\n";
    }
  }
  if (is_supervised(method) && o.analyte.empty()) {
    throw Error(ErrorKind::InvalidParameter,
                std::string("--analyte is required for ") + to_string(method));
  }
  if (!o.scheme.empty() && parse_scheme(o.scheme) == Scheme::Partial) {
    throw Error(ErrorKind::InvalidParameter,
                "--scheme partial applies to benchmark only; baseline uses the given analyte");
  }
  const fs::path dir = prepare_output(o.c.output);
  std::vector<std::string> needed;
  if (is_supervised(method)) needed.push_back(o.analyte);
  const Dataset d = load_input(o.c, needed);
  const Eigen::MatrixXd& x = d.spectra.values;
  const int n = static_cast<int>(x.cols());

  std::vector<Eigen::MatrixXd> baselines;
  std::vector<std::string> notes;
  if (method == Method::Eilers) {
    const EigenSystem eig = cached_eigensystem(o.order, n, eigen_cache_dir_from_env());
    const FilterBank bank = filter_bank(eig, lambdas);
    for (auto& r : eilers_baseline_multi_lambda(x, eig, bank)) {
      baselines.push_back(std::move(r.baseline));
      notes.emplace_back("direct solve");
    }
  } else if (method == Method::Airpls) {
    for (double lam : lambdas) {
      AirplsConfig cfg;
      cfg.lambda = lam;
      cfg.order = o.order;
      cfg.validate();
      BaselineResult r = airpls_baseline(x, cfg, o.c.jobs);
      const auto [lo, hi] = std::minmax_element(r.iterations.begin(), r.iterations.end());
      notes.push_back("iterations " + std::to_string(*lo) + ".." + std::to_string(*hi));
      baselines.push_back(std::move(r.baseline));
    }
  } else {
    const EigenSystem eig = cached_eigensystem(o.order, n, eigen_cache_dir_from_env());
    const AnalyteVector a{d.analyte(o.analyte), o.analyte};
    SvdCache svd;
    if (method == Method::SpbcI) svd = svd_cache(x);
    std::vector<SpbcResult> results(lambdas.size());
    parallel_for(lambdas.size(), o.c.jobs, [&](std::size_t k) {
      SpbcConfig cfg;
      cfg.lambda = lambdas[k];
      cfg.order = o.order;
      results[k] = method == Method::SpbcN ? spbc_n(x, a, cfg, eig) : spbc_i(x, a, cfg, eig, svd);
    });
    for (auto& r : results) {
      notes.push_back("iterations " + std::to_string(r.iterations) +
                      (r.converged ? ", converged" : ", NOT converged"));
      baselines.push_back(std::move(r.baseline));
    }
  }

  make_dir(dir);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const std::string tag = "lambda-" + fmt_short(lambdas[k]);
    write_matrix_csv(dir / ("baseline_" + tag + ".csv"), baselines[k], d.spectra.wavelengths);
    Dataset corrected = d;
    corrected.spectra.values = x - baselines[k];
    save_dataset(dir / ("corrected_" + tag + ".csv"), corrected);
    out << to_string(method) << " lambda=" << fmt_short(lambdas[k]) << " order=" << o.order
        << ": " << notes[k] << '\n';
  }
  out << "samples=" << x.rows() << " channels=" << n << " output=" << dir.string() << '\n';
  return kOk;
}

// ---- benchmark ---------------------------------------------------------------

std::vector<SchemeConfig> parse_methods(const std::string& methods, const std::string& schemes,
                                        int order) {
  std::vector<Scheme> default_schemes;
  for (const auto& s : split_commas(schemes)) default_schemes.push_back(parse_scheme(s));
  if (default_schemes.empty()) default_schemes.push_back(Scheme::Full);

  std::vector<SchemeConfig> out;
  for (const auto& tok : split_commas(methods)) {
    const auto colon = tok.find(':');
    SchemeConfig c;
    c.order = order;
    c.method = parse_method(tok.substr(0, colon));
    if (colon != std::string::npos) {
      c.scheme = parse_scheme(tok.substr(colon + 1));
      if (!is_supervised(c.method) && c.scheme != Scheme::None) {
        throw Error(ErrorKind::InvalidParameter,
                    "--method: scheme given for non-SPBC method '" + tok + "'");
      }
      out.push_back(c);
    } else if (is_supervised(c.method)) {
      for (Scheme s : default_schemes) {
        if (s == Scheme::None) {
          throw Error(ErrorKind::InvalidParameter, "--scheme must be full or partial");
        }
        c.scheme = s;
        out.push_back(c);
      }
    } else {
      out.push_back(c);
    }
  }
  if (out.empty()) throw Error(ErrorKind::InvalidParameter, "--method: empty list");
  return out;
}

void print_condensed(std::ostream& out, const BenchmarkReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-8s %6s %12s %12s %6s\n", "method", "scheme", "lambda",
                "median_mard", "median_r2", "n");
  out << line;
  for (std::size_t i = 0; i + 1 < report.summaries.size(); i += 2) {
    const SummaryRow& m = report.summaries[i];
    const SummaryRow& r = report.summaries[i + 1];
    const std::string lam = m.method == Method::None ? "NA" : fmt_short(m.lambda);
    if (m.stats.count == 0) {
      std::snprintf(line, sizeof line, "%-16s %-8s %6s %12s %12s %6d\n", to_string(m.method),
                    to_string(m.scheme), lam.c_str(), "NA", "NA", 0);
    } else {
      std::snprintf(line, sizeof line, "%-16s %-8s %6s %12.4f %12.4f %6d\n", to_string(m.method),
                    to_string(m.scheme), lam.c_str(), m.stats.median, r.stats.median,
                    m.stats.count);
    }
    out << line;
  }
  out << "failed records: " << report.failed << " of " << report.records.size() << '\n';
}

int cmd_benchmark(const BenchOpts& o, std::ostream& out, std::ostream& err) {
  check_order(o.order);
  check_jobs(o.c.jobs);
  if (o.splits < 1) throw Error(ErrorKind::InvalidParameter, "--splits must be >= 1");
  if (o.analyte.empty()) throw Error(ErrorKind::InvalidParameter, "--analyte is required");
  if (o.response.empty()) throw Error(ErrorKind::InvalidParameter, "--response is required");
  const std::vector<SchemeConfig> methods = parse_methods(o.method, o.scheme, o.order);
  const std::vector<double> lambdas = parse_lambdas(o.lambda);
  for (double lam : lambdas) {
    if (!(lam > 0.0)) throw Error(ErrorKind::InvalidParameter, "--lambda values must be > 0");
  }
  const fs::path dir = prepare_output(o.c.output);
  const Dataset d = load_input(o.c, {o.analyte, o.response});
  (void)split_sizes(static_cast<int>(d.samples()));

  Triplet t{d.spectra.values, d.analyte(o.analyte), d.analyte(o.response)};
  BenchmarkOptions opts;
  opts.jobs = o.c.jobs;
  opts.eigen_cache_dir = eigen_cache_dir_from_env();
  const BenchmarkReport report = run_benchmark(t, methods, lambdas, o.splits, o.seed, opts);

  make_dir(dir);
  {
    auto f = open_out(dir / "records.csv");
    write_records_csv(f, report);
  }
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, report);
  }
  print_condensed(out, report);
  for (const auto& r : report.records) {
    if (r.failed) err << "split " << r.split_id << ' ' << to_string(r.method) << ": " << r.error << '\n';
  }
  return kOk;
}

// ---- eigen ----------------------------------------------------------------------

int cmd_eigen(const EigenOpts& o, std::ostream& out) {
  check_order(o.order);
  if (o.n < o.order + 1) {
    throw Error(ErrorKind::InvalidParameter,
                "--n must be >= " + std::to_string(o.order + 1) + " for order " + std::to_string(o.order));
  }
  const std::vector<double> lambdas = parse_lambdas(o.lambda);
  const fs::path dir = prepare_output(o.output);
  const EigenSystem eig =
      o.numerical ? numerical_eigensystem(o.order, o.n) : make_eigensystem(o.order, o.n);
  const FilterBank bank = filter_bank(eig, lambdas);

  make_dir(dir);
  {
    auto f = open_out(dir / "values.csv");
    f << "j,s2\n";
    for (int j = 0; j < eig.n; ++j) f << j + 1 << ',' << fmt17(eig.values[j]) << '\n';
  }
  {
    auto f = open_out(dir / "loadings.csv");
    f << "i";
    for (int j = 0; j < eig.n; ++j) f << ",v" << j + 1;
    f << '\n';
    for (int i = 0; i < eig.n; ++i) {
      f << i + 1;
      for (int j = 0; j < eig.n; ++j) f << ',' << fmt17(eig.loadings(i, j));
      f << '\n';
    }
  }
  {
    auto f = open_out(dir / "filters.csv");
    f << "j,s2";
    for (double lam : lambdas) f << ",lambda_" << fmt_short(lam);
    f << '\n';
    for (int j = 0; j < eig.n; ++j) {
      f << j + 1 << ',' << fmt17(eig.values[j]);
      for (const auto& fk : bank.factors) f << ',' << fmt17(fk[j]);
      f << '\n';
    }
  }
  out << "order=" << o.order << " n=" << o.n << (o.numerical ? " (numerical)" : "")
      << " smallest nonzero s2=" << fmt_short(eig.values[eig.regularized_count() - 1])
      << " output=" << dir.string() << '\n';
  return kOk;
}

// ---- synth ----------------------------------------------------------------------

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  const fs::path dir = prepare_output(o.output);
  const SynthDataset s = synth_generate(o.spec);
  make_dir(dir);
  save_dataset(dir / "dataset.csv", s.data);
  write_matrix_csv(dir / "true_baseline.csv", s.true_baseline, s.data.spectra.wavelengths);
  write_matrix_csv(dir / "true_signal.csv", s.true_signal, s.data.spectra.wavelengths);
  out << s.data.provenance << " corr(a,y)="
      << fmt_short(pearson_correlation(s.data.analyte("a"), s.data.analyte("y")))
      << " output=" << dir.string() << '\n';
  return kOk;
}

// ---- config file ------------------------------------------------------------------

const std::set<std::string> kFlagKeys = {"numerical"};

// Appends `--key value` for config entries not already given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  std::vector<std::string> merged;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      ++i;
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) continue;
    merged.push_back(args[i]);
  }
  if (path.empty()) return merged;

  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config file " + path);
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidParameter,
                  path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto s0 = s.find_first_not_of(" \t\r\"");
      const auto s1 = s.find_last_not_of(" \t\r\"");
      return s0 == std::string::npos ? std::string() : s.substr(s0, s1 - s0 + 1);
    };
    std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty() || key == "config" || given(key)) continue;
    if (kFlagKeys.count(key)) {
      if (value == "true" || value == "1") merged.push_back("--" + key);
    } else {
      merged.push_back("--" + key);
      merged.push_back(value);
    }
  }
  return merged;
}

int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::Io) return kIo;
  if (e.is_degeneracy()) return kDegenerate;
  return kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penalized and supervised baseline correction for spectra", "spbc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  const std::string config_help = "key=value file; keys are long flag names, flags on the command line win";
  std::string config_unused;

  BaselineOpts bo;
  auto* base = app.add_subcommand("baseline", "Estimate and remove baselines from a spectra file");
  base->add_option("--input", bo.c.input, "Input table (wl_<nm> spectral columns + analyte columns)")->required();
  base->add_option("--output", bo.c.output, "Output directory")->required();
  base->add_option("--method", bo.method, "EILERS, AIRPLS, SPBC_N or SPBC_I")->capture_default_str();
  base->add_option("--lambda", bo.lambda, "Penalty lambda (unitless), comma list allowed")->capture_default_str();
  base->add_option("--order", bo.order, "Derivative order of the penalty (1 or 2)")->capture_default_str();
  base->add_option("--analyte", bo.analyte, "Analyte column driving SPBC baselines");
  base->add_option("--scheme", bo.scheme, "Accepted for symmetry with benchmark; only 'full' applies");
  base->add_option("--exclude-samples", bo.c.exclude, "1-based sample rows to drop, e.g. 23,40-42");
  base->add_option("--jobs", bo.c.jobs, "Worker threads")->capture_default_str();
  base->add_option("--config", config_unused, config_help);

  BenchOpts be;
  auto* bench = app.add_subcommand("benchmark", "Split-resampled PLS benchmark of baseline methods");
  bench->add_option("--input", be.c.input, "Input table")->required();
  bench->add_option("--output", be.c.output, "Output directory for records.csv and summary.csv")->required();
  bench->add_option("--method", be.method,
                    "Comma list: NONE, EILERS, AIRPLS, SPBC_N[:full|partial], SPBC_I[:full|partial]; NONE always runs")
      ->capture_default_str();
  bench->add_option("--scheme", be.scheme, "Scheme(s) for SPBC methods given without one (full, partial)")
      ->capture_default_str();
  bench->add_option("--lambda", be.lambda, "Penalty lambdas (unitless), comma list")->capture_default_str();
  bench->add_option("--order", be.order, "Derivative order of the penalty (1 or 2)")->capture_default_str();
  bench->add_option("--analyte", be.analyte, "Column holding the baseline analyte a")->required();
  bench->add_option("--response", be.response, "Column holding the predicted response y")->required();
  bench->add_option("--splits", be.splits, "Number of random calibration/tuning/validation splits")
      ->capture_default_str();
  bench->add_option("--seed", be.seed, "Root random seed")->capture_default_str();
  bench->add_option("--exclude-samples", be.c.exclude, "1-based sample rows to drop, e.g. 23,40-42");
  bench->add_option("--jobs", be.c.jobs, "Worker threads")->capture_default_str();
  bench->add_option("--config", config_unused, config_help);

  EigenOpts eo;
  auto* eigen = app.add_subcommand("eigen", "Eigenvalues, loadings and filter factors of D^T D");
  eigen->add_option("--output", eo.output, "Output directory")->required();
  eigen->add_option("--n", eo.n, "Channel count")->capture_default_str();
  eigen->add_option("--order", eo.order, "Derivative order (1 or 2)")->capture_default_str();
  eigen->add_option("--lambda", eo.lambda, "Penalty lambdas for filter factors, comma list")->capture_default_str();
  eigen->add_flag("--numerical", eo.numerical, "Use the dense numerical eigendecomposition");
  eigen->add_option("--config", config_unused, config_help);

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known baselines");
  synth->add_option("--output", so.output, "Output directory")->required();
  synth->add_option("--m", so.spec.m, "Samples")->capture_default_str();
  synth->add_option("--n", so.spec.n, "Channels (2 nm spacing from 1100 nm)")->capture_default_str();
  synth->add_option("--target-r", so.spec.target_r, "Sample correlation of a with y, in [-1, 1]")
      ->capture_default_str();
  synth->add_option("--noise", so.spec.noise_sigma, "Noise standard deviation (absorbance units)")
      ->capture_default_str();
  synth->add_option("--amplitude", so.spec.baseline_amplitude, "Baseline amplitude (absorbance units)")
      ->capture_default_str();
  synth->add_option("--smoothness", so.spec.baseline_smoothness, "Low-frequency loading vectors in the baseline")
      ->capture_default_str();
  synth->add_option("--scatter", so.spec.baseline_scatter, "Baseline scatter not tied to a, relative")
      ->capture_default_str();
  synth->add_option("--seed", so.spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--config", config_unused, config_help);

  try {
    std::vector<std::string> argv = merge_config(args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }

  try {
    if (*base) return cmd_baseline(bo, out, err);
    if (*bench) return cmd_benchmark(be, out, err);
    if (*eigen) return cmd_eigen(eo, out);
    if (*synth) return cmd_synth(so, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kValidation;
}

}  // namespace pbc::cli
