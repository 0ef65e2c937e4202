#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "mra/experiment.hpp"
#include "mra/model.hpp"
#include "mra/unbias.hpp"

using namespace mra;
using namespace mra::test;

namespace {

constexpr double kSigma = 1.4142135623730951;
constexpr double kEta = 0.28867513459481287;  // 12^{-1/2}
constexpr double kSnr = 0.5;

ModelParams params_for(const SpatialGrid& g, double eta, double sigma,
                       std::int64_t m, std::uint64_t seed) {
  ModelParams p;
  p.eta = eta;
  p.sigma = sigma;
  p.m = m;
  p.translation_halfwidth = ModelParams::max_translation(eta, g);
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("model parameter validation") {
  const SpatialGrid g = default_grid();
  const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);

  CHECK(ModelParams::max_translation(kEta, g) == doctest::Approx(4.0));

  ModelParams p = params_for(g, 0.5, kSigma, 10, 1);  // eta^2 > 1/12
  CHECK_THROWS_AS(p.validate(spec, g), Error);
  p = params_for(g, kEta, kSigma, 0, 1);
  CHECK_THROWS_AS(p.validate(spec, g), Error);
  p = params_for(g, kEta, kSigma, 10, 1);
  p.translation_halfwidth = 5.0;  // leaves the box at worst-case dilation
  CHECK_THROWS_AS(p.validate(spec, g), Error);
  CHECK_NOTHROW(params_for(g, kEta, kSigma, 10, 1).validate(spec, g));
}

TEST_CASE("white noise calibration") {
  const SpatialGrid g = default_grid();
  const FrequencyGrid f = frequency_grid(g);
  const double sigma = kSigma;
  const std::int64_t draws = 20000;

  std::vector<double> mean(f.n, 0.0), mean_sq(f.n, 0.0);
  for (std::int64_t j = 0; j < draws; ++j) {
    SplitMix64 rng(observation_seed(42, j));
    const SpectrumGrid pe = power_spectrum(white_noise(g, sigma, rng));
    for (int m = 0; m < f.n; ++m) {
      mean[m] += pe.values[m];
      mean_sq[m] += pe.values[m] * pe.values[m];
    }
  }
  const double s2 = sigma * sigma;
  const double s4 = s2 * s2;

  SUBCASE("E[P_eps] = sigma^2 per bin and tightly over the band") {
    double band = 0.0;
    for (int m = 0; m < f.n; ++m) {
      const double bin_mean = mean[m] / draws;
      band += bin_mean;
      // per-bin standard error is about sigma^2 / sqrt(draws); allow 6 of them
      CHECK(std::abs(bin_mean - s2) < 6.0 * s2 / std::sqrt(double(draws)));
    }
    band /= f.n;
    const double band_se = s2 / std::sqrt(double(draws) * f.n);
    CHECK(std::abs(band - s2) < 4.0 * band_se);
  }

  SUBCASE("second-moment bound E[(P_eps)^2] <= 3 sigma^4") {
    // equality holds at the two real bins (omega = 0 and the band edge);
    // allow 4 standard errors on top
    const double se = std::sqrt(96.0) * s4 / std::sqrt(double(draws));
    for (int m = 0; m < f.n; ++m)
      CHECK(mean_sq[m] / draws <= 3.0 * s4 + 4.0 * se);
  }

  SUBCASE("variance bound var(mean P_eps) <= 3 sigma^4 / M") {
    const double se = std::sqrt(96.0) * s4 / std::sqrt(double(draws));
    for (int m = 0; m < f.n; ++m) {
      const double bin_mean = mean[m] / draws;
      const double var = mean_sq[m] / draws - bin_mean * bin_mean;
      CHECK(var / draws <= (3.0 * s4 + 4.0 * se) / draws);
    }
  }

  SUBCASE("sigma = 0 yields the zero signal") {
    SplitMix64 rng(1);
    const SampledSignal noise = white_noise(g, 0.0, rng);
    CHECK(max_abs(noise.values) == 0.0);
  }
}

TEST_CASE("tau and t statistics") {
  const SpatialGrid g = default_grid();
  const SignalSpec spec = SignalSpec::make(SignalId::f8, g);
  const std::int64_t m = 20000;
  const ModelParams p = params_for(g, kEta, 0.0, m, 7);
  const BatchSummary s = summarize_observations(spec, p, g);

  double tmean = 0.0, tvar = 0.0;
  for (double tau : s.taus) tmean += tau;
  tmean /= m;
  for (double tau : s.taus) tvar += (tau - tmean) * (tau - tmean);
  tvar /= (m - 1);

  const double se_mean = kEta / std::sqrt(double(m));
  const double se_var = kEta * kEta * std::sqrt(0.8 / double(m));
  CHECK(std::abs(tmean) < 4.0 * se_mean);
  CHECK(std::abs(tvar - kEta * kEta) < 4.0 * se_var);

  // uniform tau never exceeds sqrt(3) eta
  for (double tau : s.taus) CHECK(std::abs(tau) <= std::sqrt(3.0) * kEta);
  for (double t : s.ts) CHECK(std::abs(t) <= p.translation_halfwidth);
}

TEST_CASE("generation determinism and substream independence") {
  const SpatialGrid g = default_grid();
  const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);

  SUBCASE("same seed gives bit-identical batches") {
    const ObservationBatch a = generate(spec, params_for(g, kEta, kSigma, 6, 99), g);
    const ObservationBatch b = generate(spec, params_for(g, kEta, kSigma, 6, 99), g);
    CHECK(a.taus == b.taus);
    CHECK(a.ts == b.ts);
    CHECK(a.spatial == b.spatial);
  }

  SUBCASE("observation j does not depend on batch size") {
    const ObservationBatch small = generate(spec, params_for(g, kEta, kSigma, 3, 99), g);
    const ObservationBatch big = generate(spec, params_for(g, kEta, kSigma, 8, 99), g);
    for (int j = 0; j < 3; ++j) {
      CHECK(small.taus[j] == big.taus[j]);
      CHECK(small.ts[j] == big.ts[j]);
      for (int k = 0; k < g.n; ++k)
        CHECK(small.spatial[j * g.n + k] == big.spatial[j * g.n + k]);
    }
  }

  SUBCASE("summary agrees with the materialized batch bit for bit") {
    const ModelParams p = params_for(g, kEta, kSigma, 40, 1234);
    const ObservationBatch batch = generate(spec, p, g);
    const BatchSummary summary = summarize_observations(spec, p, g);
    const SpectrumGrid a = mean_power_spectrum(batch);
    const SpectrumGrid b = mean_power_spectrum(summary);
    CHECK(a.values == b.values);
    CHECK(batch.taus == summary.taus);
  }

  SUBCASE("frequency-native pipeline matches too") {
    const SignalSpec f6 = calibrated_spec(SignalId::f6, kSigma, kSnr, g);
    const ModelParams p = params_for(g, kEta, kSigma, 25, 4321);
    const ObservationBatch batch = generate(f6, p, g);
    CHECK(batch.frequency_native);
    const BatchSummary summary = summarize_observations(f6, p, g);
    const SpectrumGrid a = mean_power_spectrum(batch);
    const SpectrumGrid b = mean_power_spectrum(summary);
    CHECK(a.values == b.values);
  }
}

TEST_CASE("noise-free degenerate cases") {
  const SpatialGrid g = default_grid();

  SUBCASE("eta = 0, sigma = 0: every Py equals Pf") {
    const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
    ModelParams p = params_for(g, 0.0, 0.0, 5, 11);
    p.translation_halfwidth = 2.0;
    const ObservationBatch batch = generate(spec, p, g);
    const SpectrumGrid pf = reference_power_spectrum(spec, g);
    const double peak = max_abs(pf.values);
    for (int j = 0; j < 5; ++j) {
      SampledSignal y{g, {batch.spatial.begin() + j * g.n,
                          batch.spatial.begin() + (j + 1) * g.n}};
      const SpectrumGrid py = power_spectrum(y);
      CHECK(max_abs_diff(py.values, pf.values) < 1e-8 * peak);
    }
  }

  SUBCASE("sigma = 0 reproduces the noiseless model exactly") {
    const SignalSpec spec = calibrated_spec(SignalId::f2, kSigma, kSnr, g);
    const ModelParams p = params_for(g, kEta, 0.0, 4, 5);
    const ObservationBatch batch = generate(spec, p, g);
    for (int j = 0; j < 4; ++j) {
      const auto direct =
          dilated_translated(spec, batch.taus[j], batch.ts[j], g);
      for (int k = 0; k < g.n; ++k)
        CHECK(batch.spatial[j * g.n + k] == direct.signal.values[k]);
    }
  }

  SUBCASE("f8 with sigma = 0 has an exactly zero mean spectrum") {
    const SignalSpec f8 = SignalSpec::make(SignalId::f8, g);
    const BatchSummary s =
        summarize_observations(f8, params_for(g, kEta, 0.0, 10, 3), g);
    CHECK(max_abs(mean_power_spectrum(s).values) == 0.0);
  }
}

TEST_CASE("single-observation dilation identity through the batch") {
  const SpatialGrid g = default_grid();
  const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
  const ModelParams p = params_for(g, kEta, 0.0, 1, 77);
  const BatchSummary s = summarize_observations(spec, p, g);
  const SpectrumGrid mean = mean_power_spectrum(s);
  const SpectrumGrid pf = reference_power_spectrum(spec, g);
  const double scale = 1.0 - s.taus[0];
  const double peak = max_abs(pf.values);
  double worst = 0.0;
  for (int m = 0; m < pf.grid.n; ++m) {
    const double w = pf.grid.omega(m);
    const double expected =
        scale * scale * interp_cubic(pf.values, pf.grid, scale * w);
    worst = std::max(worst, std::abs(mean.values[m] - expected) / peak);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("mean power spectrum converges to the dilation average") {
  const SpatialGrid g = default_grid();
  const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
  const std::int64_t m_big = 30000;

  // pilot batch estimates the per-bin variance for the error budget
  const ObservationBatch pilot =
      generate(spec, params_for(g, kEta, 0.0, 1500, 2024), g);
  const FrequencyGrid f = frequency_grid(g);
  std::vector<double> vmean(f.n, 0.0), vsq(f.n, 0.0);
  for (int j = 0; j < 1500; ++j) {
    SampledSignal y{g, {pilot.spatial.begin() + j * g.n,
                        pilot.spatial.begin() + (j + 1) * g.n}};
    const SpectrumGrid py = power_spectrum(y);
    for (int i = 0; i < f.n; ++i) {
      vmean[i] += py.values[i];
      vsq[i] += py.values[i] * py.values[i];
    }
  }
  double var_integral = 0.0;
  for (int i = 0; i < f.n; ++i) {
    const double mu = vmean[i] / 1500.0;
    var_integral += (vsq[i] / 1500.0 - mu * mu) * f.domega;
  }

  const BatchSummary s =
      summarize_observations(spec, params_for(g, kEta, 0.0, m_big, 2024), g);
  const SpectrumGrid mean = mean_power_spectrum(s);
  const SpectrumGrid pf = reference_power_spectrum(spec, g);
  const SpectrumGrid g_eta = g_eta_oracle(pf, kEta, 128);

  SpectrumGrid diff{f, std::vector<double>(f.n)};
  for (int i = 0; i < f.n; ++i)
    diff.values[i] = mean.values[i] - g_eta.values[i];
  const double dist = l2_norm(diff);
  const double bound = std::sqrt(var_integral / double(m_big));
  CHECK(dist < 2.0 * bound + 1e-3 * l2_norm(g_eta));
}

TEST_CASE("debiasing drives the zero-signal mean spectrum to zero") {
  const SpatialGrid g = default_grid();
  const SignalSpec f8 = SignalSpec::make(SignalId::f8, g);
  std::vector<std::pair<double, double>> points;
  for (int p2 = 8; p2 <= 14; p2 += 2) {
    const std::int64_t m = std::int64_t(1) << p2;
    const BatchSummary s =
        summarize_observations(f8, params_for(g, kEta, kSigma, m, 55), g);
    points.emplace_back(double(m), l2_norm(mean_power_spectrum(s)));
  }
  const double slope = fit_loglog_slope(points);
  CHECK(slope > -0.6);
  CHECK(slope < -0.4);
}

TEST_CASE("batch serialization") {
  const SpatialGrid g = default_grid();
  const auto tmp = std::filesystem::temp_directory_path() / "mra_batch_test.bin";

  SUBCASE("round trip preserves every field") {
    const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
    const ObservationBatch a = generate(spec, params_for(g, kEta, kSigma, 7, 31), g);
    write_batch(a, tmp);
    const ObservationBatch b = read_batch(tmp);
    CHECK(b.spec.id == a.spec.id);
    CHECK(b.spec.amplitude == a.spec.amplitude);
    CHECK(b.spec.support_halfwidth == a.spec.support_halfwidth);
    CHECK(b.params.m == a.params.m);
    CHECK(b.params.eta == a.params.eta);
    CHECK(b.params.sigma == a.params.sigma);
    CHECK(b.params.seed == a.params.seed);
    CHECK(b.params.translation_halfwidth == a.params.translation_halfwidth);
    CHECK(b.grid == a.grid);
    CHECK(b.taus == a.taus);
    CHECK(b.ts == a.ts);
    CHECK(b.spatial == a.spatial);
    CHECK_FALSE(b.frequency_native);
    std::filesystem::remove(tmp);
  }

  SUBCASE("frequency-native round trip") {
    const SignalSpec spec = calibrated_spec(SignalId::f7, kSigma, kSnr, g);
    const ObservationBatch a = generate(spec, params_for(g, kEta, kSigma, 4, 8), g);
    write_batch(a, tmp);
    const ObservationBatch b = read_batch(tmp);
    CHECK(b.frequency_native);
    CHECK(b.spectra == a.spectra);
    std::filesystem::remove(tmp);
  }

  SUBCASE("header layout is stable") {
    const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
    const ObservationBatch a = generate(spec, params_for(g, kEta, kSigma, 2, 5), g);
    write_batch(a, tmp);
    std::ifstream is(tmp, std::ios::binary);
    char magic[4];
    is.read(magic, 4);
    CHECK(std::string(magic, 4) == "MRAB");
    std::uint32_t version = 0, box = 0, level = 0, flags = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&box), 4);
    is.read(reinterpret_cast<char*>(&level), 4);
    is.read(reinterpret_cast<char*>(&flags), 4);
    CHECK(version == 1);
    CHECK(box == 32);
    CHECK(level == 5);
    CHECK(flags == 0);
    std::filesystem::remove(tmp);
  }

  SUBCASE("corrupt files are rejected") {
    {
      std::ofstream os(tmp, std::ios::binary);
      os << "garbage";
    }
    CHECK_THROWS_AS(read_batch(tmp), BatchFormatError);

    const SignalSpec spec = calibrated_spec(SignalId::f1, kSigma, kSnr, g);
    const ObservationBatch a = generate(spec, params_for(g, kEta, kSigma, 3, 5), g);
    write_batch(a, tmp);
    // truncation
    std::filesystem::resize_file(tmp, std::filesystem::file_size(tmp) / 2);
    CHECK_THROWS_AS(read_batch(tmp), BatchFormatError);
    std::filesystem::remove(tmp);
  }
}
