#include "pbc/datasets.hpp"

#include "pbc/error.hpp"
#include "pbc/operators.hpp"
#include "pbc/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

namespace pbc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool Dataset::has_analyte(const std::string& name) const {
  return std::any_of(analytes.begin(), analytes.end(),
                     [&](const auto& p) { return p.first == name; });
}

const Eigen::VectorXd& Dataset::analyte(const std::string& name) const {
  for (const auto& [n, v] : analytes) {
    if (n == name) return v;
  }
  std::string names;
  for (const auto& n : analyte_names()) names += (names.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::InvalidParameter,
              "no analyte column '" + name + "' (available: " + (names.empty() ? "none" : names) + ")");
}

std::vector<std::string> Dataset::analyte_names() const {
  std::vector<std::string> out;
  for (const auto& p : analytes) out.push_back(p.first);
  return out;
}

Dataset Dataset::without_samples(const std::vector<int>& rows_1based) const {
  const auto m = static_cast<int>(samples());
  std::vector<bool> drop(static_cast<std::size_t>(m), false);
  for (int r : rows_1based) {
    if (r < 1 || r > m) {
      throw Error(ErrorKind::InvalidParameter,
                  "excluded sample " + std::to_string(r) + " outside 1.." + std::to_string(m));
    }
    drop[r - 1] = true;
  }
  std::vector<int> keep;
  for (int i = 0; i < m; ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  Dataset out;
  out.provenance = provenance;
  out.spectra.wavelengths = spectra.wavelengths;
  out.spectra.values.resize(static_cast<Eigen::Index>(keep.size()), channels());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.spectra.values.row(static_cast<Eigen::Index>(i)) = spectra.values.row(keep[i]);
  }
  for (const auto& [name, v] : analytes) {
    Eigen::VectorXd nv(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) nv[static_cast<Eigen::Index>(i)] = v[keep[i]];
    out.analytes.emplace_back(name, std::move(nv));
  }
  return out;
}

void Dataset::validate() const {
  spectra.validate();
  for (const auto& [name, v] : analytes) {
    if (v.size() != samples()) {
      throw Error(ErrorKind::InvalidDimension, "analyte '" + name + "' has the wrong length");
    }
    if (!v.allFinite()) {
      throw Error(ErrorKind::InvalidParameter, "analyte '" + name + "' has non-finite values");
    }
  }
}

Dataset parse_dataset(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(ErrorKind::Parse, source + ":" + std::to_string(line_no) + ": " + msg);
  };

  // Header.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw fail("empty file");
  std::vector<std::string> header;
  for (auto c : split_line(line, schema.delimiter)) header.push_back(unquote(c));

  std::vector<std::size_t> spec_cols;
  std::vector<double> wavelengths;
  bool all_numeric = true;
  std::vector<std::size_t> non_spec;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (!schema.spectral_prefix.empty() && h.rfind(schema.spectral_prefix, 0) == 0) {
      spec_cols.push_back(c);
      double w = 0.0;
      if (parse_double(std::string_view(h).substr(schema.spectral_prefix.size()), w) &&
          std::isfinite(w)) {
        wavelengths.push_back(w);
      } else {
        all_numeric = false;
      }
    } else {
      non_spec.push_back(c);
    }
  }
  if (spec_cols.empty()) {
    throw fail("no spectral columns with prefix '" + schema.spectral_prefix + "'");
  }

  std::vector<std::size_t> analyte_cols;
  if (schema.analyte_columns.empty()) {
    analyte_cols = non_spec;
  } else {
    std::string missing;
    for (const auto& name : schema.analyte_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        missing += (missing.empty() ? "" : ", ") + name;
      } else {
        analyte_cols.push_back(static_cast<std::size_t>(it - header.begin()));
      }
    }
    if (!missing.empty()) throw fail("missing analyte column(s): " + missing);
  }

  std::vector<std::vector<double>> spec_rows;
  std::vector<std::vector<double>> ana_rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw fail("expected " + std::to_string(header.size()) + " fields, found " +
                 std::to_string(cells.size()));
    }
    auto number = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw fail("column " + std::to_string(c + 1) + " ('" + header[c] + "'): not a number: '" +
                   std::string(cells[c]) + "'");
      }
      if (!std::isfinite(v)) {
        throw fail("column " + std::to_string(c + 1) + " ('" + header[c] + "'): non-finite value");
      }
      return v;
    };
    std::vector<double> s(spec_cols.size());
    for (std::size_t j = 0; j < spec_cols.size(); ++j) s[j] = number(spec_cols[j]);
    std::vector<double> a(analyte_cols.size());
    for (std::size_t j = 0; j < analyte_cols.size(); ++j) a[j] = number(analyte_cols[j]);
    spec_rows.push_back(std::move(s));
    ana_rows.push_back(std::move(a));
  }
  if (spec_rows.empty()) throw fail("no data rows");

  Dataset d;
  d.provenance = source;
  const auto m = static_cast<Eigen::Index>(spec_rows.size());
  const auto n = static_cast<Eigen::Index>(spec_cols.size());
  d.spectra.values.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d.spectra.values(i, j) = spec_rows[i][j];
  }
  if (all_numeric) d.spectra.wavelengths = std::move(wavelengths);
  for (std::size_t k = 0; k < analyte_cols.size(); ++k) {
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = ana_rows[i][k];
    d.analytes.emplace_back(header[analyte_cols[k]], std::move(v));
  }
  try {
    d.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, source + ": " + e.what());
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_dataset(in, schema, path.string());
}

void write_dataset(std::ostream& os, const Dataset& d, const std::string& spectral_prefix) {
  const Eigen::Index n = d.channels();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j > 0) os << ',';
    os << spectral_prefix
       << (d.spectra.wavelengths.empty() ? std::to_string(j + 1) : fmt17(d.spectra.wavelengths[j]));
  }
  for (const auto& [name, v] : d.analytes) os << ',' << name;
  os << '\n';
  for (Eigen::Index i = 0; i < d.samples(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j > 0) os << ',';
      os << fmt17(d.spectra.values(i, j));
    }
    for (const auto& [name, v] : d.analytes) os << ',' << fmt17(v[i]);
    os << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& d,
                  const std::string& spectral_prefix) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_dataset(out, d, spectral_prefix);
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<int> parse_index_list(const std::string& text) {
  std::set<int> rows;
  auto bad = [&] { return Error(ErrorKind::InvalidParameter, "bad sample list '" + text + "'"); };
  auto to_int = [&](std::string_view s) {
    s = trim(s);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw bad();
    if (v < 1) throw Error(ErrorKind::InvalidParameter, "sample numbers are 1-based");
    return v;
  };
  for (auto item : split_line(text, ',')) {
    if (item.empty()) continue;
    const std::size_t dash = item.find('-');
    if (dash == std::string_view::npos) {
      rows.insert(to_int(item));
    } else {
      const int lo = to_int(item.substr(0, dash));
      const int hi = to_int(item.substr(dash + 1));
      if (hi < lo) throw bad();
      for (int r = lo; r <= hi; ++r) rows.insert(r);
    }
  }
  return {rows.begin(), rows.end()};
}

// ---- synthetic data ----------------------------------------------------------

void SynthSpec::validate() const {
  if (m < 3) throw Error(ErrorKind::Feasibility, "synthetic data needs m >= 3 to set a correlation");
  if (n < 3) throw Error(ErrorKind::InvalidDimension, "synthetic data needs n >= 3");
  if (!(std::abs(target_r) <= 1.0)) throw Error(ErrorKind::InvalidParameter, "|target_r| must be <= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorKind::InvalidParameter, "noise_sigma must be finite and >= 0");
  }
  if (!(baseline_amplitude >= 0.0) || !std::isfinite(baseline_amplitude)) {
    throw Error(ErrorKind::InvalidParameter, "baseline_amplitude must be finite and >= 0");
  }
  if (!(baseline_scatter >= 0.0) || !std::isfinite(baseline_scatter)) {
    throw Error(ErrorKind::InvalidParameter, "baseline_scatter must be finite and >= 0");
  }
  if (baseline_smoothness < 1 || baseline_smoothness > n) {
    throw Error(ErrorKind::InvalidParameter, "baseline_smoothness must lie in [1, n]");
  }
}

namespace {

Eigen::VectorXd centered_normals(Rng& rng, int m) {
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z[i] = rng.normal();
  z.array() -= z.mean();
  return z;
}

Eigen::VectorXd band(const std::vector<double>& wl, double center, double width) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(wl.size()));
  for (std::size_t j = 0; j < wl.size(); ++j) {
    const double t = (wl[j] - center) / width;
    g[static_cast<Eigen::Index>(j)] = std::exp(-0.5 * t * t);
  }
  return g;
}

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const int m = spec.m;
  const int n = spec.n;
  Rng rng(derive_seed(spec.seed, 0x5e, 0));

  // Unit-variance scores with an exact sample correlation.
  Eigen::VectorXd za = centered_normals(rng, m);
  Eigen::VectorXd zy = centered_normals(rng, m);
  if (!(za.norm() > 0.0)) throw Error(ErrorKind::Feasibility, "degenerate analyte draw");
  za /= za.norm();
  zy -= zy.dot(za) * za;
  if (!(zy.norm() > 0.0)) throw Error(ErrorKind::Feasibility, "degenerate response draw");
  zy /= zy.norm();
  const double r = spec.target_r;
  const Eigen::VectorXd zr = r * za + std::sqrt(std::max(0.0, 1.0 - r * r)) * zy;
  const double scale = std::sqrt(static_cast<double>(m - 1));

  const Eigen::VectorXd a = (10.0 + 2.0 * scale * za.array()).matrix();
  const Eigen::VectorXd y = (20.0 + 3.0 * scale * zr.array()).matrix();
  Eigen::VectorXd u(m);
  for (int i = 0; i < m; ++i) u[i] = 5.0 + rng.normal();

  double achieved = 0.0;
  {
    const Eigen::VectorXd ac = a.array() - a.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    achieved = ac.dot(yc) / std::sqrt(ac.squaredNorm() * yc.squaredNorm());
  }
  if (!(std::abs(achieved - r) <= 0.05)) {
    throw Error(ErrorKind::Feasibility, "achieved correlation " + fmt17(achieved) +
                                            " misses target " + fmt17(r));
  }
  if (!(y.minCoeff() > 0.0) || !(a.minCoeff() > 0.0)) {
    throw Error(ErrorKind::Feasibility, "generated concentrations are not all positive");
  }

  std::vector<double> wl(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) wl[j] = 1100.0 + 2.0 * j;
  const double span = wl.back() - wl.front();
  const double w0 = wl.front();
  const Eigen::VectorXd gy = 0.010 * band(wl, w0 + 0.30 * span, 0.04 * span);
  const Eigen::VectorXd ga = 0.010 * band(wl, w0 + 0.55 * span, 0.05 * span) +
                             0.005 * band(wl, w0 + 0.20 * span, 0.03 * span);
  const Eigen::VectorXd gu = 0.010 * band(wl, w0 + 0.75 * span, 0.04 * span);

  SynthDataset out;
  out.true_signal = y * gy.transpose() + a * ga.transpose() + u * gu.transpose();

  // Smoothest D1 loadings, scaled to unit RMS entries. The constant vector
  // is the last column.
  const EigenSystem eig = closed_form_eigensystem(n);
  const int k = spec.baseline_smoothness;
  const Eigen::MatrixXd basis = std::sqrt(static_cast<double>(n)) * eig.loadings.rightCols(k);
  Eigen::VectorXd gamma(k);
  for (int c = 0; c < k; ++c) gamma[c] = rng.normal();
  Eigen::MatrixXd coef(m, k);
  const double abar = a.mean();
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < k; ++c) {
      coef(i, c) = spec.baseline_amplitude *
                   (gamma[c] * a[i] / abar + spec.baseline_scatter * rng.normal());
    }
  }
  out.true_baseline = coef * basis.transpose();

  Eigen::MatrixXd x = out.true_signal + out.true_baseline;
  if (spec.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += spec.noise_sigma * rng.normal();
    }
  }

  out.data.spectra.values = std::move(x);
  out.data.spectra.wavelengths = std::move(wl);
  out.data.analytes = {{"y", y}, {"a", a}, {"u", u}};
  char prov[160];
  std::snprintf(prov, sizeof prov, "synthetic m=%d n=%d r=%.17g seed=%llu", m, n, r,
                static_cast<unsigned long long>(spec.seed));
  out.data.provenance = prov;
  return out;
}

}  // namespace pbc
