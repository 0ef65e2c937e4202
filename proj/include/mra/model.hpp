#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "mra/rng.hpp"
#include "mra/signals.hpp"

namespace mra {

/// Parameters of the dilation / noisy-dilation observation models.
/// sigma = 0 gives the noise-free dilation model.
struct ModelParams {
  double eta = 0.0;     // dilation std dev, eta^2 <= 1/12
  double sigma = 0.0;   // additive-noise level,

  std::int64_t m = 0;   // number of observations
  double translation_halfwidth = 0.0;
  std::uint64_t seed = 0;

  /// Largest halfwidth keeping the worst-case dilated support inside the box.
  static double max_translation(double eta, const SpatialGrid& grid);

  void validate(const SignalSpec& spec, const SpatialGrid& grid) const;
};

struct ObservationBatch {
  SignalSpec spec;
  ModelParams params;
  SpatialGrid grid;
  std::vector<double> taus;
  std::vector<double> ts;
  bool frequency_native = false;
  /// Row-major m x n. Exactly one of the two payloads is populated.
  std::vector<double> spatial;
  std::vector<std::complex<double>> spectra;
};

/// Streaming reduction of a batch: holds everything the estimators need
/// without materializing m observations. Produced by the same substreams as
/// generate(), so results agree bit for bit.
struct BatchSummary {
  SignalSpec spec;
  ModelParams params;
  SpatialGrid grid;
  std::vector<double> taus;
  std::vector<double> ts;
  SpectrumGrid mean_py;     // (1/m) sum Py_j, not debiased
  double tail_sum_sq = 0.0; // sum of squared samples over the tail region
  std::int64_t tail_count = 0;
};

/// Discrete white noise calibrated so E[P_epsilon(w)] = sigma^2 for every
/// bin under the continuous-FT normalization (per-sample variance
/// sigma^2 / (n dx^2)).
SampledSignal white_noise(const SpatialGrid& grid, double sigma,
                          SplitMix64& rng);

/// Per-observation substream: tau, t, then n gaussians.
std::uint64_t observation_seed(std::uint64_t seed, std::int64_t j);

/// M independent observations. Deterministic given params.seed and
/// order-independent across j.
ObservationBatch generate(const SignalSpec& spec, const ModelParams& params,
                          const SpatialGrid& grid);

/// Same draws as generate(); accumulates the mean power spectrum and,
/// optionally, spatial tail statistics for noise estimation.
BatchSummary summarize_observations(const SignalSpec& spec,
                                    const ModelParams& params,
                                    const SpatialGrid& grid,
                                    bool need_tails = false,
                                    double tail_abs_threshold = 0.0);

/// (1/m) sum Py_j - sigma^2. sigma_override substitutes an estimated noise
/// level for the generating one (empirical mode).
SpectrumGrid mean_power_spectrum(const ObservationBatch& batch,
                                 std::optional<double> sigma_override = {});
SpectrumGrid mean_power_spectrum(const BatchSummary& summary,
                                 std::optional<double> sigma_override = {});

/// Tail region for noise estimation: |x| > (3/2) * (box/4), outside the
/// worst-case dilated support of the hidden signal.
double tail_region_threshold(const SpatialGrid& grid);

// -- Batch container --------------------------------------------------------
//
// Binary layout (little-endian):
//   magic "MRAB", u32 version, u32 box_length, u32 level, u32 flags
//   (bit 0: frequency-native payload), u64 m, u64 seed, f64 eta, f64 sigma,
//   f64 translation_halfwidth, f64 amplitude, f64 support_halfwidth,
//   8-byte signal id (null-padded ASCII), then taus[m], ts[m] and the
//   payload as f64: spatial m x n, or interleaved re/im m x n pairs.

void write_batch(const ObservationBatch& batch,
                 const std::filesystem::path& path);
ObservationBatch read_batch(const std::filesystem::path& path);

class BatchFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mra
