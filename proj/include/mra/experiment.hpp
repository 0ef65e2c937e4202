#pragma once

#include <functional>
#include <string>
#include <utility>

#include "mra/model.hpp"
#include "mra/unbias.hpp"

namespace mra {

/// ||pf - pf_hat|| / ||pf|| over the window (full band when omitted).
/// Throws when the reference norm vanishes; use absolute_error then.
double relative_error(const SpectrumGrid& pf, const SpectrumGrid& pf_hat,
                      std::optional<Window> window = {});

/// ||pf - pf_hat|| over the window.
double absolute_error(const SpectrumGrid& pf, const SpectrumGrid& pf_hat,
                      std::optional<Window> window = {});

/// Noise level from the signal-free tail region |x| > (3/2)(box/4):
/// sigma_hat^2 = (mean squared tail sample) * n * dx^2, undoing the
/// white-noise calibration. Throws if the tail region is empty.
double estimate_sigma_tails(const ObservationBatch& batch);
double estimate_sigma_tails(const BatchSummary& summary);

enum class EtaMode { oracle, empirical };

std::string eta_mode_name(EtaMode m);

/// Paper-regime defaults: box 2^5 at sampling level 5, SNR 1/2,
/// sigma = sqrt(2), eta = 12^{-1/2}, 10 trials per M.
struct Defaults {
  static constexpr int box_length = 32;
  static constexpr int level = 5;
  static constexpr double snr = 0.5;
  static constexpr double sigma = 1.4142135623730951;
  static constexpr double eta = 0.28867513459481287;
  static constexpr int trials = 10;
};

struct ExperimentPlan {
  std::vector<SignalId> signals;
  std::vector<std::int64_t> m_values;
  int trials = Defaults::trials;
  EtaMode mode = EtaMode::oracle;
  double eta = Defaults::eta;
  double sigma = Defaults::sigma;
  double snr = Defaults::snr;
  int box_length = Defaults::box_length;
  int level = Defaults::level;
  std::uint64_t seed = 1;
  OptimizerConfig opt;
  int threads = 1;
  bool timings = false;

  void validate() const;
  std::size_t cell_count() const {
    return signals.size() * m_values.size() * static_cast<std::size_t>(trials);
  }
};

struct ErrorRow {
  SignalId signal = SignalId::f8;
  std::int64_t m = 0;
  int trial = 0;
  double error = 0.0;
  bool absolute = false;
  EtaMode mode = EtaMode::oracle;
  double eta_hat = 0.0;
  double sigma_hat = 0.0;
  double l = 0.0;
  std::uint64_t seed = 0;
  std::int64_t wall_ms = 0;
  bool failed = false;
  std::string fail_reason;
};

struct AggregateRow {
  SignalId signal = SignalId::f8;
  std::int64_t m = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  int n_trials = 0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  std::vector<AggregateRow> aggregates;
};

/// One pass over the plan. Cells are independent tasks; output is identical
/// for any thread count and any execution order (all randomness flows through
/// per-cell substreams of the master seed). Per-cell failures are recorded in
/// the row and the sweep continues. The optional progress callback receives
/// (completed, total) and must be thread-safe.
ErrorTable run_sweep(const ExperimentPlan& plan,
                     const std::function<void(std::size_t, std::size_t)>&
                         progress = nullptr);

std::vector<AggregateRow> aggregate_rows(const std::vector<ErrorRow>& rows);

/// OLS slope of log2(mean error) on log2(M) over aggregates with
/// m_lo <= M <= m_hi. Needs at least 3 points with positive error.
double fit_slope(const ErrorTable& table, SignalId signal, std::int64_t m_lo,
                 std::int64_t m_hi);

/// Slope through arbitrary (x, y) pairs in log2-log2 coordinates.
double fit_loglog_slope(std::span<const std::pair<double, double>> points);

/// (L, ||h - h * phi_L||_2) for each requested width; all widths must be
/// resolvable on h's grid.
std::vector<std::pair<double, double>> smoothing_rate_probe(
    const SpectrumGrid& h, std::span<const double> l_values);

/// Cell seed derivation, exposed so estimates can be reproduced standalone:
/// mix(mix(mix(master, signal_index), m), trial).
std::uint64_t cell_seed(std::uint64_t master, SignalId signal, std::int64_t m,
                        int trial);

/// Metric window: the resolved band minus 4L at each edge.
Window metric_window(const FrequencyGrid& grid, double l_smooth);

// -- CSV --------------------------------------------------------------------
//
// Row schema:   signal,M,trial,error,error_kind,eta_mode,eta_hat,sigma_hat,
//               L,seed,wall_ms
// Aggregate:    signal,M,mean_error,std_error,n_trials
// All numeric fields use round-trip decimal formatting (17 significant
// digits). Failed cells carry error = nan.

class CsvSchemaError : public Error {
 public:
  CsvSchemaError(const std::string& msg, std::string column)
      : Error(msg), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

std::string format_double(double v);

void write_rows_csv(const ErrorTable& table, const std::filesystem::path& path);
void write_aggregates_csv(const ErrorTable& table,
                          const std::filesystem::path& path);
std::vector<AggregateRow> read_aggregates_csv(const std::filesystem::path& path);

}  // namespace mra
