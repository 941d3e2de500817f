#pragma once

#include "pbc/operators.hpp"
#include "pbc/regression.hpp"
#include "pbc/spbc.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pbc {

// ---- metrics ---------------------------------------------------------------

/// Mean absolute relative difference in percent.
double mard(std::span<const double> y_hat, std::span<const double> y);
double mard(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y);

double pearson_correlation(std::span<const double> u, std::span<const double> v);
double pearson_correlation(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Squared Pearson correlation between references and predictions.
double r2(std::span<const double> y_hat, std::span<const double> y);
double r2(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y);

/// Linear-interpolation quantile (numpy default) of an ascending sequence.
double quantile_sorted(std::span<const double> sorted, double p);

struct TrimmedMean {
  double value = 0.0;
  int kept = 0;
  int trimmed = 0;
  bool fallback = false;  // everything trimmed; value is the untrimmed median
};

/// Mean of the values inside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
TrimmedMean tukey_trimmed_mean(std::span<const double> values);

// ---- partitions ------------------------------------------------------------

struct SplitIndices {
  std::vector<int> calibration;
  std::vector<int> tuning;
  std::vector<int> validation;
};

struct SplitSizes {
  int calibration = 0;
  int tuning = 0;
  int validation = 0;
};

/// tuning = max(1, floor(0.05 m)), validation = round(0.5 m), calibration
/// takes the remainder.
SplitSizes split_sizes(int m);

struct SplitPlan {
  std::uint64_t seed = 0;
  double calibration_fraction = 0.45;
  double tuning_fraction = 0.05;
  double validation_fraction = 0.50;
  int samples = 0;
  std::vector<SplitIndices> splits;
};

SplitPlan make_splits(int m, int n_splits, std::uint64_t seed);

// ---- ensemble estimate of unknown analyte values -----------------------------

struct EnsembleConfig {
  int rounds = 25;
  double subsample = 0.80;
  int max_lv = kMaxLatentDims;
};

struct EnsembleEstimate {
  Eigen::VectorXd values;
  int fallbacks = 0;  // samples whose estimates were all trimmed
};

/// Fits `rounds` PLS models of a1 on random subsamples of X1, predicts X2 with
/// each, and averages the Tukey-trimmed predictions per sample. Each round's
/// latent dimension is picked on its out-of-bag calibration samples.
EnsembleEstimate ensemble_estimate_a2(const Eigen::MatrixXd& x1, const Eigen::VectorXd& a1,
                                      const Eigen::MatrixXd& x2, const EnsembleConfig& cfg,
                                      std::uint64_t seed);

// ---- schemes ---------------------------------------------------------------

enum class Method { None, Eilers, Airpls, SpbcN, SpbcI };
enum class Scheme { None, Full, Partial };

const char* to_string(Method m) noexcept;
const char* to_string(Scheme s) noexcept;
Method parse_method(const std::string& text);
Scheme parse_scheme(const std::string& text);
bool is_supervised(Method m) noexcept;

struct SchemeConfig {
  Method method = Method::None;
  Scheme scheme = Scheme::None;
  double lambda = 100.0;
  int order = 1;

  /// Scheme must be Full/Partial exactly for SPBC methods; lambda > 0 for
  /// every method other than None.
  void validate() const;
  std::string label() const;
};

/// Spectra X with the baseline analyte a and the response y.
struct Triplet {
  Eigen::MatrixXd x;
  Eigen::VectorXd a;
  Eigen::VectorXd y;

  void validate() const;
};

struct MetricsRecord {
  int split_id = 0;
  Method method = Method::None;
  Scheme scheme = Scheme::None;
  double lambda = 0.0;
  int order = 1;
  int chosen_lv = 0;
  double mard = 0.0;
  double r2 = 0.0;
  bool failed = false;
  std::string error;
};

struct BenchmarkOptions {
  int max_lv = kMaxLatentDims;
  int jobs = 1;
  EnsembleConfig ensemble;
  AirplsConfig airpls;  // lambda/order overridden per scheme
  SpbcConfig spbc;      // lambda/order overridden per scheme
  std::filesystem::path eigen_cache_dir;
};

/// Thread-safe store of eigensystems keyed by (order, n).
class EigenSystemPool {
 public:
  explicit EigenSystemPool(std::filesystem::path cache_dir = {}) : dir_(std::move(cache_dir)) {}
  std::shared_ptr<const EigenSystem> get(int order, int n);

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::shared_ptr<const EigenSystem>> systems_;
};

/// Baseline for the stacked [calibration; tuning; validation] block. The
/// analyte vector is ignored by unsupervised methods.
Eigen::MatrixXd compute_baseline(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                                 const SchemeConfig& cfg, const BenchmarkOptions& opts,
                                 EigenSystemPool& pool);

/// One split, one configuration. Failures are reported in the record rather
/// than thrown, except for invalid configurations.
MetricsRecord run_scheme(const Triplet& data, const SchemeConfig& cfg, const SplitIndices& split,
                         int split_id, std::uint64_t seed, const BenchmarkOptions& opts,
                         EigenSystemPool& pool);

struct BoxplotSummary {
  double min = 0.0;
  double p10 = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  double max = 0.0;
  int count = 0;
};

BoxplotSummary summarize(std::vector<double> values);

struct SummaryRow {
  Method method = Method::None;
  Scheme scheme = Scheme::None;
  double lambda = 0.0;
  int order = 1;
  std::string metric;  // "mard" or "r2"
  BoxplotSummary stats;
};

struct BenchmarkReport {
  std::vector<MetricsRecord> records;
  std::vector<SummaryRow> summaries;
  int failed = 0;

  /// Summary for one group, or nullptr.
  const SummaryRow* find(Method method, Scheme scheme, double lambda, int order,
                         const std::string& metric) const;
};

/// Cross product of methods x lambdas x splits. NONE is always run once per
/// split (it has no lambda); a NONE entry in `methods` is not duplicated.
/// The lambda of each entry in `methods` is replaced by each of `lambdas`.
BenchmarkReport run_benchmark(const Triplet& data, std::span<const SchemeConfig> methods,
                              std::span<const double> lambdas, int n_splits, std::uint64_t seed,
                              const BenchmarkOptions& opts);

void write_records_csv(std::ostream& os, const BenchmarkReport& report);
void write_summary_csv(std::ostream& os, const BenchmarkReport& report);

}  // namespace pbc
