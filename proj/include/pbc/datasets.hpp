#pragma once

#include "pbc/smoothers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace pbc {

struct Dataset {
  SpectraMatrix spectra;
  std::vector<std::pair<std::string, Eigen::VectorXd>> analytes;  // file order
  std::string provenance;

  Eigen::Index samples() const noexcept { return spectra.samples(); }
  Eigen::Index channels() const noexcept { return spectra.channels(); }

  bool has_analyte(const std::string& name) const;
  /// Throws InvalidParameter naming the available analytes.
  const Eigen::VectorXd& analyte(const std::string& name) const;
  std::vector<std::string> analyte_names() const;

  /// Copy without the given samples (1-based row numbers).
  Dataset without_samples(const std::vector<int>& rows_1based) const;

  void validate() const;
};

/// Column layout of a delimited text file. Spectral columns are the ones whose
/// header starts with `spectral_prefix`; the remainder of the header is the
/// wavelength when it parses as a number.
struct CsvSchema {
  std::string spectral_prefix = "wl_";
  /// Analyte columns to read; empty means every non-spectral column.
  std::vector<std::string> analyte_columns;
  char delimiter = ',';
};

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_dataset(std::istream& in, const CsvSchema& schema = {},
                      const std::string& source = "<stream>");

/// Header + one row per sample, 17 significant digits. Spectral columns are
/// named prefix + wavelength (or prefix + 1-based channel when there are none).
void write_dataset(std::ostream& os, const Dataset& d, const std::string& spectral_prefix = "wl_");
void save_dataset(const std::filesystem::path& path, const Dataset& d,
                  const std::string& spectral_prefix = "wl_");

/// Parses "1,5,23" or "3-7,12" into sorted unique 1-based row numbers.
std::vector<int> parse_index_list(const std::string& text);

// ---- synthetic data ----------------------------------------------------------

struct SynthSpec {
  int m = 120;
  int n = 150;
  double baseline_amplitude = 1.0;
  int baseline_smoothness = 8;  // low-frequency loading vectors used
  /// Relative size of the per-sample baseline scatter not tied to a.
  double baseline_scatter = 1.0;
  double target_r = 0.9;  // sample corr(a, y)
  double noise_sigma = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthDataset {
  Dataset data;  // analytes "y" (response), "a" (baseline analyte), "u" (interferent)
  Eigen::MatrixXd true_baseline;
  Eigen::MatrixXd true_signal;
};

SynthDataset synth_generate(const SynthSpec& spec);

}  // namespace pbc
