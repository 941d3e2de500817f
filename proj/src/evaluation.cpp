#include "pbc/evaluation.hpp"

#include "pbc/error.hpp"
#include "pbc/parallel.hpp"
#include "pbc/random.hpp"
#include "pbc/smoothers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

namespace pbc {

namespace {

// Sub-seed streams.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kEnsembleStream = 2;

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::InvalidDimension,
                "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

// R2 for ranking purposes; an undefined correlation ranks as 0.
double r2_or_zero(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y) {
  try {
    return r2(y_hat, y);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UndefinedCorrelation || e.kind() == ErrorKind::InvalidDimension) {
      return 0.0;
    }
    throw;
  }
}

double mse(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y) {
  return (y_hat - y).squaredNorm() / static_cast<double>(y.size());
}

// Latent dimension chosen on a held-out set (ranked MARD + R2). MSE stands
// in for MARD when a reference is zero.
int choose_lv(const PlsModel& model, const Eigen::MatrixXd& xt, const Eigen::VectorXd& yt) {
  if (yt.size() == 0) return 1;
  const bool has_zero = (yt.array() == 0.0).any();
  std::vector<double> err(static_cast<std::size_t>(model.max_lv));
  std::vector<double> fit(static_cast<std::size_t>(model.max_lv));
  for (int lv = 1; lv <= model.max_lv; ++lv) {
    const Eigen::VectorXd pred = pls_predict(model, xt, lv);
    err[lv - 1] = has_zero ? mse(pred, yt) : mard(pred, yt);
    fit[lv - 1] = r2_or_zero(pred, yt);
  }
  return select_latent_dim(err, fit).chosen_lv;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto& c : s) {
    if (c == '-') c = '_';
  }
  return s;
}

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- metrics ---------------------------------------------------------------

double mard(std::span<const double> y_hat, std::span<const double> y) {
  require_same_length(y_hat.size(), y.size());
  if (y.empty()) throw Error(ErrorKind::InvalidDimension, "MARD of an empty set");
  std::string zeros;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] == 0.0) zeros += (zeros.empty() ? "" : ",") + std::to_string(j);
  }
  if (!zeros.empty()) {
    throw Error(ErrorKind::InvalidMetric, "MARD undefined: zero reference at index " + zeros);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) sum += 100.0 * std::abs(y_hat[j] - y[j]) / std::abs(y[j]);
  return sum / static_cast<double>(y.size());
}

double mard(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y) {
  return mard(as_span(y_hat), as_span(y));
}

double pearson_correlation(std::span<const double> u, std::span<const double> v) {
  require_same_length(u.size(), v.size());
  if (u.size() < 2) throw Error(ErrorKind::InvalidDimension, "correlation needs at least 2 values");
  const double n = static_cast<double>(u.size());
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n;
  const double mv = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = u[i] - mu;
    const double dv = v[i] - mv;
    suv += du * dv;
    suu += du * du;
    svv += dv * dv;
  }
  if (!(suu > 0.0) || !(svv > 0.0)) {
    throw Error(ErrorKind::UndefinedCorrelation, "correlation undefined for a constant input");
  }
  const double r = suv / std::sqrt(suu * svv);
  return std::clamp(r, -1.0, 1.0);
}

double pearson_correlation(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return pearson_correlation(as_span(u), as_span(v));
}

double r2(std::span<const double> y_hat, std::span<const double> y) {
  const double r = pearson_correlation(y, y_hat);
  return r * r;
}

double r2(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y) {
  return r2(as_span(y_hat), as_span(y));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidDimension, "quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidParameter, "quantile outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

TrimmedMean tukey_trimmed_mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidDimension, "trimmed mean of an empty set");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double q1 = quantile_sorted(s, 0.25);
  const double q3 = quantile_sorted(s, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;
  TrimmedMean out;
  double sum = 0.0;
  for (double v : values) {
    if (v >= lo && v <= hi) {
      sum += v;
      ++out.kept;
    } else {
      ++out.trimmed;
    }
  }
  if (out.kept == 0) {
    out.fallback = true;
    out.value = quantile_sorted(s, 0.5);
  } else {
    out.value = sum / out.kept;
  }
  return out;
}

// ---- partitions ------------------------------------------------------------

SplitSizes split_sizes(int m) {
  if (m < 10) {
    throw Error(ErrorKind::InvalidDimension,
                "need at least 10 samples for a calibration/tuning/validation split, got " +
                    std::to_string(m));
  }
  SplitSizes s;
  s.tuning = std::max(1, static_cast<int>(std::floor(0.05 * m)));
  s.validation = static_cast<int>(std::lround(0.5 * m));
  s.calibration = m - s.tuning - s.validation;
  return s;
}

SplitPlan make_splits(int m, int n_splits, std::uint64_t seed) {
  if (n_splits < 1) throw Error(ErrorKind::InvalidParameter, "number of splits must be >= 1");
  const SplitSizes sz = split_sizes(m);
  SplitPlan plan;
  plan.seed = seed;
  plan.samples = m;
  plan.splits.reserve(static_cast<std::size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, kSplitStream, static_cast<std::uint64_t>(s)));
    rng.shuffle(perm);
    SplitIndices idx;
    const auto b = perm.begin();
    idx.calibration.assign(b, b + sz.calibration);
    idx.tuning.assign(b + sz.calibration, b + sz.calibration + sz.tuning);
    idx.validation.assign(b + sz.calibration + sz.tuning, perm.end());
    std::sort(idx.calibration.begin(), idx.calibration.end());
    std::sort(idx.tuning.begin(), idx.tuning.end());
    std::sort(idx.validation.begin(), idx.validation.end());
    plan.splits.push_back(std::move(idx));
  }
  return plan;
}

// ---- ensemble --------------------------------------------------------------

EnsembleEstimate ensemble_estimate_a2(const Eigen::MatrixXd& x1, const Eigen::VectorXd& a1,
                                      const Eigen::MatrixXd& x2, const EnsembleConfig& cfg,
                                      std::uint64_t seed) {
  if (a1.size() != x1.rows()) {
    throw Error(ErrorKind::InvalidDimension, "analyte length does not match calibration samples");
  }
  if (x2.cols() != x1.cols()) {
    throw Error(ErrorKind::InvalidDimension, "channel count differs between sets");
  }
  if (cfg.rounds < 1) throw Error(ErrorKind::InvalidParameter, "ensemble needs at least one round");
  if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "ensemble subsample fraction outside (0, 1]");
  }
  const int m1 = static_cast<int>(x1.rows());
  const int k = std::clamp(static_cast<int>(std::lround(cfg.subsample * m1)), 2, m1);
  if (m1 < 2) throw Error(ErrorKind::InvalidDimension, "ensemble needs at least 2 calibration samples");

  Eigen::MatrixXd est(x2.rows(), cfg.rounds);
  for (int r = 0; r < cfg.rounds; ++r) {
    Rng rng(derive_seed(seed, kEnsembleStream, static_cast<std::uint64_t>(r)));
    std::vector<int> perm(static_cast<std::size_t>(m1));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> in(perm.begin(), perm.begin() + k);
    std::vector<int> out(perm.begin() + k, perm.end());
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());

    const Eigen::MatrixXd xi = take_rows(x1, in);
    const Eigen::VectorXd ai = take(a1, in);
    const PlsModel model =
        pls_calibrate(xi, ai, max_latent_dims(xi.rows(), xi.cols(), cfg.max_lv));
    const int lv = choose_lv(model, take_rows(x1, out), take(a1, out));
    est.col(r) = pls_predict(model, x2, lv);
  }

  EnsembleEstimate result;
  result.values.resize(x2.rows());
  for (Eigen::Index i = 0; i < x2.rows(); ++i) {
    const Eigen::VectorXd row = est.row(i).transpose();
    const TrimmedMean t = tukey_trimmed_mean(as_span(row));
    result.values[i] = t.value;
    if (t.fallback) ++result.fallbacks;
  }
  return result;
}

// ---- schemes ---------------------------------------------------------------

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::None: return "NONE";
    case Method::Eilers: return "EILERS";
    case Method::Airpls: return "AIRPLS";
    case Method::SpbcN: return "SPBC_N";
    case Method::SpbcI: return "SPBC_I";
  }
  return "?";
}

const char* to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::None: return "NA";
    case Scheme::Full: return "full";
    case Scheme::Partial: return "partial";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  const std::string t = upper(text);
  if (t == "NONE") return Method::None;
  if (t == "EILERS") return Method::Eilers;
  if (t == "AIRPLS") return Method::Airpls;
  if (t == "SPBC_N") return Method::SpbcN;
  if (t == "SPBC_I") return Method::SpbcI;
  throw Error(ErrorKind::InvalidParameter, "unknown method '" + text + "'");
}

Scheme parse_scheme(const std::string& text) {
  const std::string t = upper(text);
  if (t == "FULL" || t == "F") return Scheme::Full;
  if (t == "PARTIAL" || t == "P") return Scheme::Partial;
  if (t == "NA" || t == "NONE" || t.empty()) return Scheme::None;
  throw Error(ErrorKind::InvalidParameter, "unknown scheme '" + text + "'");
}

bool is_supervised(Method m) noexcept {
  return m == Method::SpbcN || m == Method::SpbcI;
}

void SchemeConfig::validate() const {
  if (is_supervised(method) && scheme == Scheme::None) {
    throw Error(ErrorKind::InvalidParameter,
                std::string(to_string(method)) + " needs a scheme (full or partial)");
  }
  if (!is_supervised(method) && scheme != Scheme::None) {
    throw Error(ErrorKind::InvalidParameter,
                std::string("scheme applies only to SPBC methods, not ") + to_string(method));
  }
  if (method == Method::None) return;
  if (!(std::isfinite(lambda) && lambda > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "lambda must be finite and > 0, got " + fmt_num(lambda));
  }
  if (order != 1 && order != 2) {
    throw Error(ErrorKind::InvalidParameter, "order must be 1 or 2, got " + std::to_string(order));
  }
}

std::string SchemeConfig::label() const {
  std::string s = to_string(method);
  if (scheme != Scheme::None) s += std::string("-") + to_string(scheme);
  if (method != Method::None) s += " lambda=" + fmt_num(lambda) + " order=" + std::to_string(order);
  return s;
}

void Triplet::validate() const {
  if (a.size() != x.rows() || y.size() != x.rows()) {
    throw Error(ErrorKind::InvalidDimension, "spectra, analyte and response lengths differ");
  }
  if (x.cols() < 3) throw Error(ErrorKind::InvalidDimension, "need at least 3 channels");
  if (!x.allFinite() || !a.allFinite() || !y.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "non-finite value in benchmark data");
  }
}

std::shared_ptr<const EigenSystem> EigenSystemPool::get(int order, int n) {
  std::lock_guard lock(mutex_);
  auto& slot = systems_[{order, n}];
  if (!slot) {
    slot = std::make_shared<const EigenSystem>(dir_.empty() ? make_eigensystem(order, n)
                                                            : cached_eigensystem(order, n, dir_));
  }
  return slot;
}

Eigen::MatrixXd compute_baseline(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                                 const SchemeConfig& cfg, const BenchmarkOptions& opts,
                                 EigenSystemPool& pool) {
  const int n = static_cast<int>(x.cols());
  switch (cfg.method) {
    case Method::None:
      return Eigen::MatrixXd::Zero(x.rows(), x.cols());
    case Method::Eilers:
      return eilers_baseline(x, cfg.lambda, *pool.get(cfg.order, n)).baseline;
    case Method::Airpls: {
      AirplsConfig c = opts.airpls;
      c.lambda = cfg.lambda;
      c.order = cfg.order;
      return airpls_baseline(x, c, 1).baseline;
    }
    case Method::SpbcN: {
      SpbcConfig c = opts.spbc;
      c.lambda = cfg.lambda;
      c.order = cfg.order;
      return spbc_n(x, {a, "a"}, c, *pool.get(cfg.order, n)).baseline;
    }
    case Method::SpbcI: {
      SpbcConfig c = opts.spbc;
      c.lambda = cfg.lambda;
      c.order = cfg.order;
      return spbc_i(x, {a, "a"}, c, *pool.get(cfg.order, n), svd_cache(x)).baseline;
    }
  }
  throw Error(ErrorKind::InvalidParameter, "unknown method");
}

MetricsRecord run_scheme(const Triplet& data, const SchemeConfig& cfg, const SplitIndices& split,
                         int split_id, std::uint64_t seed, const BenchmarkOptions& opts,
                         EigenSystemPool& pool) {
  cfg.validate();
  MetricsRecord rec;
  rec.split_id = split_id;
  rec.method = cfg.method;
  rec.scheme = cfg.scheme;
  rec.lambda = cfg.method == Method::None ? 0.0 : cfg.lambda;
  rec.order = cfg.order;

  try {
    const auto& cal = split.calibration;
    const auto& tun = split.tuning;
    const auto& val = split.validation;
    const auto m1 = static_cast<Eigen::Index>(cal.size());
    const auto mt = static_cast<Eigen::Index>(tun.size());
    const auto m2 = static_cast<Eigen::Index>(val.size());
    const Eigen::Index n = data.x.cols();

    // Stacked [calibration; tuning; validation].
    Eigen::MatrixXd xs(m1 + mt + m2, n);
    xs.topRows(m1) = take_rows(data.x, cal);
    xs.middleRows(m1, mt) = take_rows(data.x, tun);
    xs.bottomRows(m2) = take_rows(data.x, val);

    Eigen::VectorXd as(xs.rows());
    as.head(m1) = take(data.a, cal);
    if (cfg.scheme == Scheme::Partial) {
      const EnsembleEstimate est = ensemble_estimate_a2(
          xs.topRows(m1), as.head(m1), xs.bottomRows(mt + m2), opts.ensemble,
          derive_seed(seed, kEnsembleStream, static_cast<std::uint64_t>(split_id)));
      as.tail(mt + m2) = est.values;
    } else {
      as.segment(m1, mt) = take(data.a, tun);
      as.tail(m2) = take(data.a, val);
    }

    const Eigen::MatrixXd corrected = xs - compute_baseline(xs, as, cfg, opts, pool);

    const Eigen::VectorXd y1 = take(data.y, cal);
    const Eigen::VectorXd yt = take(data.y, tun);
    const Eigen::VectorXd y2 = take(data.y, val);
    const PlsModel model =
        pls_calibrate(corrected.topRows(m1), y1, max_latent_dims(m1, n, opts.max_lv));
    rec.chosen_lv = choose_lv(model, corrected.middleRows(m1, mt), yt);

    const Eigen::VectorXd pred = pls_predict(model, corrected.bottomRows(m2), rec.chosen_lv);
    rec.mard = mard(pred, y2);
    rec.r2 = r2(pred, y2);
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return rec;
}

BoxplotSummary summarize(std::vector<double> values) {
  BoxplotSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.p10 = quantile_sorted(values, 0.10);
  s.median = quantile_sorted(values, 0.50);
  s.p90 = quantile_sorted(values, 0.90);
  return s;
}

const SummaryRow* BenchmarkReport::find(Method method, Scheme scheme, double lambda, int order,
                                        const std::string& metric) const {
  for (const auto& row : summaries) {
    if (row.method != method || row.scheme != scheme || row.metric != metric) continue;
    if (method != Method::None && (row.lambda != lambda || row.order != order)) continue;
    return &row;
  }
  return nullptr;
}

BenchmarkReport run_benchmark(const Triplet& data, std::span<const SchemeConfig> methods,
                              std::span<const double> lambdas, int n_splits, std::uint64_t seed,
                              const BenchmarkOptions& opts) {
  data.validate();
  const SplitPlan plan = make_splits(static_cast<int>(data.x.rows()), n_splits, seed);

  // Cells per split: NONE first, then each method x lambda.
  std::vector<SchemeConfig> per_split{SchemeConfig{}};
  for (const auto& m : methods) {
    if (m.method == Method::None) continue;
    if (lambdas.empty()) throw Error(ErrorKind::InvalidParameter, "empty lambda list");
    for (double lam : lambdas) {
      SchemeConfig c = m;
      c.lambda = lam;
      c.validate();
      per_split.push_back(c);
    }
  }

  const std::size_t cells = per_split.size();
  BenchmarkReport report;
  report.records.resize(cells * plan.splits.size());
  EigenSystemPool pool(opts.eigen_cache_dir);
  parallel_for(report.records.size(), opts.jobs, [&](std::size_t i) {
    const std::size_t s = i / cells;
    report.records[i] = run_scheme(data, per_split[i % cells], plan.splits[s],
                                   static_cast<int>(s), seed, opts, pool);
  });

  for (const auto& c : per_split) {
    std::vector<double> md, rr;
    for (std::size_t s = 0; s < plan.splits.size(); ++s) {
      const MetricsRecord& r = report.records[s * cells + static_cast<std::size_t>(&c - per_split.data())];
      if (r.failed) continue;
      md.push_back(r.mard);
      rr.push_back(r.r2);
    }
    const double lam = c.method == Method::None ? 0.0 : c.lambda;
    report.summaries.push_back({c.method, c.scheme, lam, c.order, "mard", summarize(md)});
    report.summaries.push_back({c.method, c.scheme, lam, c.order, "r2", summarize(rr)});
  }
  for (const auto& r : report.records) report.failed += r.failed ? 1 : 0;
  return report;
}

void write_records_csv(std::ostream& os, const BenchmarkReport& report) {
  os << "split_id,method,scheme,lambda,order,chosen_lv,mard,r2\n";
  for (const auto& r : report.records) {
    const bool none = r.method == Method::None;
    os << r.split_id << ',' << to_string(r.method) << ',' << to_string(r.scheme) << ','
       << (none ? "NA" : fmt_num(r.lambda)) << ',' << (none ? "NA" : std::to_string(r.order)) << ',';
    if (r.failed) {
      os << "NA,NA,NA\n";
    } else {
      os << r.chosen_lv << ',' << fmt_num(r.mard) << ',' << fmt_num(r.r2) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const BenchmarkReport& report) {
  os << "method,scheme,lambda,order,metric,min,p10,median,p90,max\n";
  for (const auto& row : report.summaries) {
    const bool none = row.method == Method::None;
    os << to_string(row.method) << ',' << to_string(row.scheme) << ','
       << (none ? "NA" : fmt_num(row.lambda)) << ',' << (none ? "NA" : std::to_string(row.order))
       << ',' << row.metric;
    const auto& s = row.stats;
    if (s.count == 0) {
      os << ",NA,NA,NA,NA,NA\n";
    } else {
      os << ',' << fmt_num(s.min) << ',' << fmt_num(s.p10) << ',' << fmt_num(s.median) << ','
         << fmt_num(s.p90) << ',' << fmt_num(s.max) << '\n';
    }
  }
}

}  // namespace pbc
