#include "mra/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace mra {

namespace {

double windowed_distance(const SpectrumGrid& pf, const SpectrumGrid& pf_hat,
                         const std::optional<Window>& window) {
  if (!(pf.grid == pf_hat.grid)) throw Error("error metric: grid mismatch");
  SpectrumGrid diff{pf.grid, std::vector<double>(pf.grid.n)};
  for (int i = 0; i < pf.grid.n; ++i)
    diff.values[i] = pf.values[i] - pf_hat.values[i];
  return l2_norm(diff, window);
}

}  // namespace

double relative_error(const SpectrumGrid& pf, const SpectrumGrid& pf_hat,
                      std::optional<Window> window) {
  const double ref = l2_norm(pf, window);
  if (!(ref > 0.0))
    throw Error("relative_error: reference norm is zero; use absolute_error");
  return windowed_distance(pf, pf_hat, window) / ref;
}

double absolute_error(const SpectrumGrid& pf, const SpectrumGrid& pf_hat,
                      std::optional<Window> window) {
  return windowed_distance(pf, pf_hat, window);
}

namespace {

double sigma_from_tail_stats(double sum_sq, std::int64_t count,
                             const SpatialGrid& grid) {
  if (count < 1) throw Error("estimate_sigma_tails: margin region empty");
  const double per_sample = sum_sq / static_cast<double>(count);
  return std::sqrt(per_sample * grid.n * grid.dx * grid.dx);
}

}  // namespace

double estimate_sigma_tails(const ObservationBatch& batch) {
  const double cut = tail_region_threshold(batch.grid);
  double sum_sq = 0.0;
  std::int64_t count = 0;
  std::vector<double> row;
  for (std::int64_t j = 0; j < batch.params.m; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * batch.grid.n;
    const double* values = nullptr;
    if (batch.frequency_native) {
      ComplexSpectrum spec{frequency_grid(batch.grid),
                           {batch.spectra.begin() + off,
                            batch.spectra.begin() + off + batch.grid.n}};
      row = inverse_fourier_transform(spec).values;
      values = row.data();
    } else {
      values = batch.spatial.data() + off;
    }
    for (int k = 0; k < batch.grid.n; ++k) {
      if (std::abs(batch.grid.x(k)) <= cut) continue;
      sum_sq += values[k] * values[k];
      ++count;
    }
  }
  return sigma_from_tail_stats(sum_sq, count, batch.grid);
}

double estimate_sigma_tails(const BatchSummary& summary) {
  return sigma_from_tail_stats(summary.tail_sum_sq, summary.tail_count,
                               summary.grid);
}

std::string eta_mode_name(EtaMode m) {
  return m == EtaMode::oracle ? "oracle" : "empirical";
}

void ExperimentPlan::validate() const {
  if (signals.empty()) throw Error("ExperimentPlan: no signals");
  if (m_values.empty()) throw Error("ExperimentPlan: no M values");
  for (std::size_t i = 1; i < m_values.size(); ++i)
    if (m_values[i] <= m_values[i - 1])
      throw Error("ExperimentPlan: m_values must be strictly increasing");
  if (m_values.front() < 1) throw Error("ExperimentPlan: M must be >= 1");
  if (trials < 1) throw Error("ExperimentPlan: trials must be >= 1");
  if (threads < 1) throw Error("ExperimentPlan: threads must be >= 1");
  if (!(sigma >= 0.0)) throw Error("ExperimentPlan: sigma must be >= 0");
  opt.validate();
  SpatialGrid::make(box_length, level);
}

std::uint64_t cell_seed(std::uint64_t master, SignalId signal, std::int64_t m,
                        int trial) {
  std::uint64_t s = mix_seed(master, static_cast<std::uint64_t>(signal) + 1);
  s = mix_seed(s, static_cast<std::uint64_t>(m));
  return mix_seed(s, static_cast<std::uint64_t>(trial));
}

Window metric_window(const FrequencyGrid& grid, double l_smooth) {
  const double margin = 4.0 * l_smooth;
  return Window{-grid.omega_max + margin, grid.omega_max - margin};
}

namespace {

struct Cell {
  std::size_t signal_index = 0;
  std::int64_t m = 0;
  int trial = 0;
};

ErrorRow run_cell(const ExperimentPlan& plan, const SignalSpec& spec,
                  const SpectrumGrid& reference, const SpatialGrid& grid,
                  const Cell& cell) {
  ErrorRow row;
  row.signal = spec.id;
  row.m = cell.m;
  row.trial = cell.trial;
  row.mode = plan.mode;
  row.seed = cell_seed(plan.seed, spec.id, cell.m, cell.trial);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    ModelParams params;
    params.eta = plan.eta;
    params.sigma = plan.sigma;
    params.m = cell.m;
    params.translation_halfwidth = ModelParams::max_translation(plan.eta, grid);
    params.seed = row.seed;

    const bool empirical = plan.mode == EtaMode::empirical;
    const BatchSummary summary =
        summarize_observations(spec, params, grid, empirical);

    EstimateReport report;
    if (empirical) {
      const double sigma_hat = estimate_sigma_tails(summary);
      row.sigma_hat = sigma_hat;
      const SpectrumGrid mean = mean_power_spectrum(summary, sigma_hat);
      report = estimate_noisy(mean, std::nullopt, sigma_hat, cell.m, plan.opt);
      row.eta_hat = report.eta_hat.value_or(
          std::numeric_limits<double>::quiet_NaN());
    } else {
      row.sigma_hat = plan.sigma;
      const SpectrumGrid mean = mean_power_spectrum(summary);
      report = estimate_noisy(mean, plan.eta, plan.sigma, cell.m, plan.opt);
      row.eta_hat = plan.eta;
    }
    row.l = report.l_smooth;

    const Window window =
        metric_window(reference.grid, report.l_smooth);
    const double ref_norm = l2_norm(reference, window);
    row.absolute = !(ref_norm > 0.0);
    row.error = row.absolute
                    ? absolute_error(reference, report.pf_hat, window)
                    : relative_error(reference, report.pf_hat, window);
  } catch (const Error& e) {
    row.failed = true;
    row.fail_reason = e.what();
    row.error = std::numeric_limits<double>::quiet_NaN();
    row.eta_hat = std::numeric_limits<double>::quiet_NaN();
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (plan.timings)
    row.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  return row;
}

}  // namespace

std::vector<AggregateRow> aggregate_rows(const std::vector<ErrorRow>& rows) {
  std::map<std::pair<int, std::int64_t>, std::vector<double>> groups;
  for (const ErrorRow& r : rows) {
    if (r.failed) continue;
    groups[{static_cast<int>(r.signal), r.m}].push_back(r.error);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, errors] : groups) {
    AggregateRow a;
    a.signal = static_cast<SignalId>(key.first);
    a.m = key.second;
    a.n_trials = static_cast<int>(errors.size());
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= errors.size();
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    a.mean_error = mean;
    a.std_error = errors.size() > 1
                      ? std::sqrt(var / (errors.size() - 1.0) / errors.size())
                      : 0.0;
    out.push_back(a);
  }
  return out;
}

ErrorTable run_sweep(
    const ExperimentPlan& plan,
    const std::function<void(std::size_t, std::size_t)>& progress) {
  plan.validate();
  const SpatialGrid grid = SpatialGrid::make(plan.box_length, plan.level);

  // Amplitudes are calibrated against the configured noise regime; noise-free
  // plans reuse the default regime so relative errors stay comparable.
  const double calib_sigma = plan.sigma > 0.0 ? plan.sigma : Defaults::sigma;
  std::vector<SignalSpec> specs;
  std::vector<SpectrumGrid> references;
  for (SignalId id : plan.signals) {
    specs.push_back(calibrated_spec(id, calib_sigma, plan.snr, grid));
    references.push_back(reference_power_spectrum(specs.back(), grid));
  }

  std::vector<Cell> cells;
  cells.reserve(plan.cell_count());
  for (std::size_t s = 0; s < plan.signals.size(); ++s)
    for (std::int64_t m : plan.m_values)
      for (int t = 0; t < plan.trials; ++t) cells.push_back(Cell{s, m, t});

  std::vector<ErrorRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const int workers =
      std::max(1, std::min<int>(plan.threads, static_cast<int>(cells.size())));

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      rows[i] = run_cell(plan, specs[c.signal_index],
                         references[c.signal_index], grid, c);
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) progress(d, cells.size());
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ErrorTable table;
  table.rows = std::move(rows);
  table.aggregates = aggregate_rows(table.rows);
  return table;
}

double fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3)
    throw Error("fit_slope: need at least 3 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0))
      throw Error("fit_slope: nonpositive value in log-log fit");
    const double lx = std::log2(x);
    const double ly = std::log2(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw Error("fit_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

double fit_slope(const ErrorTable& table, SignalId signal, std::int64_t m_lo,
                 std::int64_t m_hi) {
  std::vector<std::pair<double, double>> points;
  for (const AggregateRow& a : table.aggregates) {
    if (a.signal != signal || a.m < m_lo || a.m > m_hi) continue;
    points.emplace_back(static_cast<double>(a.m), a.mean_error);
  }
  return fit_loglog_slope(points);
}

std::vector<std::pair<double, double>> smoothing_rate_probe(
    const SpectrumGrid& h, std::span<const double> l_values) {
  std::vector<std::pair<double, double>> out;
  out.reserve(l_values.size());
  for (double l : l_values) {
    const SpectrumGrid smoothed = gaussian_smooth(h, l);
    SpectrumGrid diff{h.grid, std::vector<double>(h.grid.n)};
    for (int i = 0; i < h.grid.n; ++i)
      diff.values[i] = h.values[i] - smoothed.values[i];
    out.emplace_back(l, l2_norm(diff));
  }
  return out;
}

// -- CSV ---------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kRowHeader =
    "signal,M,trial,error,error_kind,eta_mode,eta_hat,sigma_hat,L,seed,wall_ms";
constexpr const char* kAggregateHeader =
    "signal,M,mean_error,std_error,n_trials";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const char* column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CsvSchemaError("bad numeric value in column " + std::string(column),
                         column);
  return v;
}

}  // namespace

void write_rows_csv(const ErrorTable& table,
                    const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << kRowHeader << "\n";
  for (const ErrorRow& r : table.rows) {
    os << signal_name(r.signal) << ',' << r.m << ',' << r.trial << ','
       << format_double(r.error) << ','
       << (r.absolute ? "absolute" : "relative") << ','
       << (r.mode == EtaMode::oracle ? "oracle" : "learned") << ','
       << format_double(r.eta_hat) << ',' << format_double(r.sigma_hat) << ','
       << format_double(r.l) << ',' << r.seed << ',' << r.wall_ms << "\n";
  }
  if (!os) throw Error("failed writing " + path.string());
}

void write_aggregates_csv(const ErrorTable& table,
                          const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << kAggregateHeader << "\n";
  for (const AggregateRow& a : table.aggregates) {
    os << signal_name(a.signal) << ',' << a.m << ','
       << format_double(a.mean_error) << ',' << format_double(a.std_error)
       << ',' << a.n_trials << "\n";
  }
  if (!os) throw Error("failed writing " + path.string());
}

std::vector<AggregateRow> read_aggregates_csv(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line))
    throw CsvSchemaError("empty CSV: " + path.string(), "signal");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const auto expected = split_csv(kAggregateHeader);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i])
      throw CsvSchemaError("CSV header mismatch; expected column " +
                               expected[i],
                           expected[i]);
  }
  std::vector<AggregateRow> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != expected.size())
      throw CsvSchemaError("CSV row has wrong field count", "signal");
    AggregateRow a;
    a.signal = parse_signal_id(fields[0]);
    a.m = static_cast<std::int64_t>(parse_double(fields[1], "M"));
    a.mean_error = parse_double(fields[2], "mean_error");
    a.std_error = parse_double(fields[3], "std_error");
    a.n_trials = static_cast<int>(parse_double(fields[4], "n_trials"));
    out.push_back(a);
  }
  if (out.empty())
    throw CsvSchemaError("CSV has no data rows: " + path.string(), "signal");
  return out;
}

}  // namespace mra
