#include "mra/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mra/fft.hpp"

namespace mra {

static_assert(std::endian::native == std::endian::little,
              "batch container assumes a little-endian host");

double ModelParams::max_translation(double eta, const SpatialGrid& grid) {
  const double reach = worst_case_stretch(eta) * grid.half_width / 2.0;
  return std::max(0.0, grid.half_width - reach);
}

void ModelParams::validate(const SignalSpec& spec,
                           const SpatialGrid& grid) const {
  if (!(eta >= 0.0) || eta * eta > 1.0 / 12.0 + 1e-15)
    throw Error("ModelParams: eta^2 must lie in [0, 1/12]");
  if (!(sigma >= 0.0)) throw Error("ModelParams: sigma must be >= 0");
  if (m < 1) throw Error("ModelParams: m must be >= 1");
  const double reach =
      worst_case_stretch(eta) * spec.support_halfwidth + translation_halfwidth;
  if (reach > grid.half_width * (1.0 + 1e-12))
    throw Error("ModelParams: worst-case observation leaves the box");
}

SampledSignal white_noise(const SpatialGrid& grid, double sigma,
                          SplitMix64& rng) {
  SampledSignal sig{grid, std::vector<double>(grid.n, 0.0)};
  if (sigma > 0.0) {
    const double scale = sigma / (grid.dx * std::sqrt(double(grid.n)));
    for (int k = 0; k < grid.n; ++k) sig.values[k] = scale * rng.gaussian();
  }
  return sig;
}

std::uint64_t observation_seed(std::uint64_t seed, std::int64_t j) {
  return mix_seed(seed, static_cast<std::uint64_t>(j));
}

double tail_region_threshold(const SpatialGrid& grid) {
  return 1.5 * grid.half_width / 2.0;
}

namespace {

struct Observation {
  double tau = 0.0;
  double t = 0.0;
  std::vector<double> spatial;                 // spatial pipeline
  std::vector<std::complex<double>> spectrum;  // frequency-native pipeline
};

// One observation of the model; the draw order (tau, t, then n gaussians)
// is part of the substream contract.
Observation make_observation(const SignalSpec& spec, const ModelParams& params,
                             const SpatialGrid& grid, std::int64_t j,
                             bool want_spatial) {
  SplitMix64 rng(observation_seed(params.seed, j));
  Observation obs;
  const double tau_half = std::sqrt(3.0) * params.eta;
  obs.tau = rng.uniform(-tau_half, tau_half);
  obs.t = rng.uniform(-params.translation_halfwidth,
                      params.translation_halfwidth);

  const bool freq_native = signal_domain(spec.id) == SignalDomain::frequency;
  if (!freq_native) {
    obs.spatial = dilated_translated(spec, obs.tau, obs.t, grid).signal.values;
    if (params.sigma > 0.0) {
      const double scale =
          params.sigma / (grid.dx * std::sqrt(double(grid.n)));
      for (int k = 0; k < grid.n; ++k) obs.spatial[k] += scale * rng.gaussian();
    }
    return obs;
  }

  obs.spectrum = sample_spectrum(spec, obs.tau, obs.t, grid).values;
  if (params.sigma > 0.0) {
    SampledSignal noise = white_noise(grid, params.sigma, rng);
    const ComplexSpectrum noise_hat = fourier_transform(noise);
    for (int mth = 0; mth < grid.n; ++mth)
      obs.spectrum[mth] += noise_hat.values[mth];
  }
  if (want_spatial) {
    ComplexSpectrum full{frequency_grid(grid), obs.spectrum};
    obs.spatial = inverse_fourier_transform(full).values;
  }
  return obs;
}

void accumulate_py(const Observation& obs, const SpatialGrid& grid,
                   std::vector<double>& acc) {
  if (!obs.spectrum.empty()) {
    for (std::size_t i = 0; i < obs.spectrum.size(); ++i)
      acc[i] += std::norm(obs.spectrum[i]);
    return;
  }
  const SpectrumGrid py = power_spectrum(SampledSignal{grid, obs.spatial});
  for (std::size_t i = 0; i < py.values.size(); ++i) acc[i] += py.values[i];
}

SpectrumGrid debias(const FrequencyGrid& f, const std::vector<double>& sum_py,
                    std::int64_t m, double sigma) {
  SpectrumGrid out{f, std::vector<double>(f.n)};
  const double bias = sigma * sigma;
  for (int i = 0; i < f.n; ++i)
    out.values[i] = sum_py[i] / static_cast<double>(m) - bias;
  return out;
}

}  // namespace

ObservationBatch generate(const SignalSpec& spec, const ModelParams& params,
                          const SpatialGrid& grid) {
  params.validate(spec, grid);
  ObservationBatch batch;
  batch.spec = spec;
  batch.params = params;
  batch.grid = grid;
  batch.frequency_native = signal_domain(spec.id) == SignalDomain::frequency;
  batch.taus.resize(params.m);
  batch.ts.resize(params.m);
  if (batch.frequency_native)
    batch.spectra.resize(static_cast<std::size_t>(params.m) * grid.n);
  else
    batch.spatial.resize(static_cast<std::size_t>(params.m) * grid.n);

  for (std::int64_t j = 0; j < params.m; ++j) {
    Observation obs = make_observation(spec, params, grid, j, false);
    batch.taus[j] = obs.tau;
    batch.ts[j] = obs.t;
    const std::size_t off = static_cast<std::size_t>(j) * grid.n;
    if (batch.frequency_native)
      std::copy(obs.spectrum.begin(), obs.spectrum.end(),
                batch.spectra.begin() + off);
    else
      std::copy(obs.spatial.begin(), obs.spatial.end(),
                batch.spatial.begin() + off);
  }
  return batch;
}

BatchSummary summarize_observations(const SignalSpec& spec,
                                    const ModelParams& params,
                                    const SpatialGrid& grid, bool need_tails,
                                    double tail_abs_threshold) {
  params.validate(spec, grid);
  BatchSummary s;
  s.spec = spec;
  s.params = params;
  s.grid = grid;
  s.taus.resize(params.m);
  s.ts.resize(params.m);
  const FrequencyGrid f = frequency_grid(grid);
  std::vector<double> acc(f.n, 0.0);
  const double tail_cut =
      tail_abs_threshold > 0.0 ? tail_abs_threshold : tail_region_threshold(grid);

  for (std::int64_t j = 0; j < params.m; ++j) {
    Observation obs = make_observation(spec, params, grid, j, need_tails);
    s.taus[j] = obs.tau;
    s.ts[j] = obs.t;
    accumulate_py(obs, grid, acc);
    if (need_tails) {
      for (int k = 0; k < grid.n; ++k) {
        if (std::abs(grid.x(k)) <= tail_cut) continue;
        s.tail_sum_sq += obs.spatial[k] * obs.spatial[k];
        ++s.tail_count;
      }
    }
  }
  s.mean_py = SpectrumGrid{f, std::vector<double>(f.n)};
  for (int i = 0; i < f.n; ++i)
    s.mean_py.values[i] = acc[i] / static_cast<double>(params.m);
  return s;
}

SpectrumGrid mean_power_spectrum(const ObservationBatch& batch,
                                 std::optional<double> sigma_override) {
  if (batch.params.m < 1) throw Error("mean_power_spectrum: empty batch");
  const FrequencyGrid f = frequency_grid(batch.grid);
  std::vector<double> acc(f.n, 0.0);
  for (std::int64_t j = 0; j < batch.params.m; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * batch.grid.n;
    Observation obs;
    if (batch.frequency_native)
      obs.spectrum.assign(batch.spectra.begin() + off,
                          batch.spectra.begin() + off + batch.grid.n);
    else
      obs.spatial.assign(batch.spatial.begin() + off,
                         batch.spatial.begin() + off + batch.grid.n);
    accumulate_py(obs, batch.grid, acc);
  }
  return debias(f, acc, batch.params.m,
                sigma_override.value_or(batch.params.sigma));
}

SpectrumGrid mean_power_spectrum(const BatchSummary& summary,
                                 std::optional<double> sigma_override) {
  SpectrumGrid out = summary.mean_py;
  const double sigma = sigma_override.value_or(summary.params.sigma);
  for (double& v : out.values) v -= sigma * sigma;
  return out;
}

namespace {

constexpr char kMagic[4] = {'M', 'R', 'A', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw BatchFormatError("batch file truncated");
  return v;
}

}  // namespace

void write_batch(const ObservationBatch& batch,
                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint32_t>(batch.grid.box_length()));
  const auto level =
      static_cast<std::uint32_t>(std::lround(-std::log2(batch.grid.dx)));
  put(os, level);
  put(os, static_cast<std::uint32_t>(batch.frequency_native ? 1 : 0));
  put(os, static_cast<std::uint64_t>(batch.params.m));
  put(os, batch.params.seed);
  put(os, batch.params.eta);
  put(os, batch.params.sigma);
  put(os, batch.params.translation_halfwidth);
  put(os, batch.spec.amplitude);
  put(os, batch.spec.support_halfwidth);
  char idbuf[8] = {};
  const std::string name = signal_name(batch.spec.id);
  std::memcpy(idbuf, name.data(), std::min<std::size_t>(name.size(), 8));
  os.write(idbuf, 8);
  os.write(reinterpret_cast<const char*>(batch.taus.data()),
           batch.taus.size() * sizeof(double));
  os.write(reinterpret_cast<const char*>(batch.ts.data()),
           batch.ts.size() * sizeof(double));
  if (batch.frequency_native)
    os.write(reinterpret_cast<const char*>(batch.spectra.data()),
             batch.spectra.size() * sizeof(std::complex<double>));
  else
    os.write(reinterpret_cast<const char*>(batch.spatial.data()),
             batch.spatial.size() * sizeof(double));
  if (!os) throw Error("failed writing " + path.string());
}

ObservationBatch read_batch(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw BatchFormatError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw BatchFormatError("not a batch file: bad magic");
  if (get<std::uint32_t>(is) != kVersion)
    throw BatchFormatError("unsupported batch version");
  const auto box = static_cast<int>(get<std::uint32_t>(is));
  const auto level = static_cast<int>(get<std::uint32_t>(is));
  const auto flags = get<std::uint32_t>(is);

  ObservationBatch batch;
  batch.grid = SpatialGrid::make(box, level);
  batch.frequency_native = (flags & 1u) != 0;
  batch.params.m = static_cast<std::int64_t>(get<std::uint64_t>(is));
  batch.params.seed = get<std::uint64_t>(is);
  batch.params.eta = get<double>(is);
  batch.params.sigma = get<double>(is);
  batch.params.translation_halfwidth = get<double>(is);
  const double amplitude = get<double>(is);
  const double support = get<double>(is);
  char idbuf[9] = {};
  is.read(idbuf, 8);
  if (!is) throw BatchFormatError("batch file truncated");
  batch.spec.id = parse_signal_id(idbuf);
  batch.spec.amplitude = amplitude;
  batch.spec.support_halfwidth = support;

  if (batch.params.m < 1 || batch.params.m > (std::int64_t(1) << 40))
    throw BatchFormatError("implausible observation count");
  const std::size_t m = static_cast<std::size_t>(batch.params.m);
  batch.taus.resize(m);
  batch.ts.resize(m);
  is.read(reinterpret_cast<char*>(batch.taus.data()), m * sizeof(double));
  is.read(reinterpret_cast<char*>(batch.ts.data()), m * sizeof(double));
  const std::size_t cells = m * static_cast<std::size_t>(batch.grid.n);
  if (batch.frequency_native) {
    batch.spectra.resize(cells);
    is.read(reinterpret_cast<char*>(batch.spectra.data()),
            cells * sizeof(std::complex<double>));
  } else {
    batch.spatial.resize(cells);
    is.read(reinterpret_cast<char*>(batch.spatial.data()),
            cells * sizeof(double));
  }
  if (!is) throw BatchFormatError("batch file truncated");
  is.peek();
  if (!is.eof()) throw BatchFormatError("trailing bytes in batch file");
  return batch;
}

}  // namespace mra
