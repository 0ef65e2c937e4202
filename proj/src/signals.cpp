#include "mra/signals.hpp"

#include <cmath>

namespace mra {

SignalId parse_signal_id(std::string_view name) {
  if (name.size() == 2 && name[0] == 'f' && name[1] >= '1' && name[1] <= '8')
    return static_cast<SignalId>(name[1] - '1');
  throw Error("unknown signal id: " + std::string(name));
}

std::string signal_name(SignalId id) {
  return "f" + std::to_string(static_cast<int>(id) + 1);
}

SignalDomain signal_domain(SignalId id) {
  switch (id) {
    case SignalId::f4:
    case SignalId::f6:
    case SignalId::f7:
      return SignalDomain::frequency;
    default:
      return SignalDomain::spatial;
  }
}

namespace {

double sinc(double u) {
  if (u == 0.0) return 1.0;
  const double pu = kPi * u;
  return std::sin(pu) / pu;
}

// Period-2 triangle wave: 1 at even integers, 0 at odd ones.
double zigzag(double u) {
  const double m = u - 2.0 * std::floor(u / 2.0);
  return std::abs(m - 1.0);
}

}  // namespace

double spatial_form(SignalId id, double x) {
  switch (id) {
    case SignalId::f1:
      return std::exp(-5.0 * x * x) * std::cos(8.0 * x);
    case SignalId::f2:
      return std::exp(-5.0 * x * x) * std::cos(16.0 * x);
    case SignalId::f3:
      return std::exp(-5.0 * x * x) * std::cos(32.0 * x);
    case SignalId::f5:
      return std::exp(-0.04 * x * x) * std::cos(30.0 * x + 1.5 * x * x);
    case SignalId::f8:
      return 0.0;
    default:
      throw Error("spatial_form: " + signal_name(id) + " is frequency-defined");
  }
}

double fourier_form(SignalId id, double omega) {
  switch (id) {
    case SignalId::f4:
      return sinc(0.2 * (omega - 32.0)) + sinc(0.2 * (-omega - 32.0));
    case SignalId::f6:
      return (omega >= 32.0 && omega <= 38.0) ||
                     (omega >= -38.0 && omega <= -32.0)
                 ? 1.0
                 : 0.0;
    case SignalId::f7:
      return std::sqrt(zigzag(0.2 * (omega + 40.0)) +
                       zigzag(0.2 * (omega - 40.0)));
    default:
      throw Error("fourier_form: " + signal_name(id) + " is spatially defined");
  }
}

SignalSpec SignalSpec::make(SignalId id, const SpatialGrid& grid,
                            double amplitude) {
  return SignalSpec{id, id == SignalId::f8 ? 0.0 : amplitude,
                    grid.half_width / 2.0};
}

namespace {

double windowed_spatial(const SignalSpec& spec, double u) {
  if (std::abs(u) > spec.support_halfwidth) return 0.0;
  return spec.amplitude * spatial_form(spec.id, u);
}

// Discrete energy sum f^2 dx of the unit-amplitude signal; frequency-defined
// signals use the discrete Parseval identity, which is exact for this FT
// convention.
double unit_energy(SignalId id, const SpatialGrid& grid) {
  if (signal_domain(id) == SignalDomain::spatial) {
    const double support = grid.half_width / 2.0;
    double acc = 0.0;
    for (int k = 0; k < grid.n; ++k) {
      const double x = grid.x(k);
      if (std::abs(x) > support) continue;
      const double v = spatial_form(id, x);
      acc += v * v;
    }
    return acc * grid.dx;
  }
  const FrequencyGrid f = frequency_grid(grid);
  double acc = 0.0;
  for (int m = 0; m < f.n; ++m) {
    const double v = fourier_form(id, f.omega(m));
    acc += v * v;
  }
  return acc * f.domega / kTwoPi;
}

}  // namespace

double calibrate_snr(SignalId id, double sigma, double snr,
                     const SpatialGrid& grid) {
  if (id == SignalId::f8) throw Error("calibrate_snr: zero signal has no SNR");
  if (!(sigma > 0.0) || !(snr > 0.0))
    throw Error("calibrate_snr: sigma and snr must be positive");
  const double energy = unit_energy(id, grid);
  if (!(energy > 0.0)) throw Error("calibrate_snr: signal has zero energy");
  const double box = 2.0 * grid.half_width;
  return std::sqrt(box * snr * sigma * sigma / energy);
}

SignalSpec calibrated_spec(SignalId id, double sigma, double snr,
                           const SpatialGrid& grid) {
  if (id == SignalId::f8) return SignalSpec::make(id, grid);
  return SignalSpec::make(id, grid, calibrate_snr(id, sigma, snr, grid));
}

double worst_case_stretch(double eta) { return 1.0 + std::sqrt(3.0) * eta; }

namespace {

void check_support(const SignalSpec& spec, double tau, double t,
                   const SpatialGrid& grid) {
  const double reach = (1.0 - tau) * spec.support_halfwidth + std::abs(t);
  if (reach > grid.half_width * (1.0 + 1e-12))
    throw Error("observation leaves the box");
}

}  // namespace

SpatialSample dilated_translated(const SignalSpec& spec, double tau, double t,
                                 const SpatialGrid& grid) {
  check_support(spec, tau, t, grid);
  if (signal_domain(spec.id) == SignalDomain::spatial) {
    SampledSignal sig{grid, std::vector<double>(grid.n)};
    const double inv = 1.0 / (1.0 - tau);
    for (int k = 0; k < grid.n; ++k)
      sig.values[k] = windowed_spatial(spec, inv * (grid.x(k) - t));
    return {std::move(sig), false};
  }
  const ComplexSpectrum spec_j = sample_spectrum(spec, tau, t, grid);
  return {inverse_fourier_transform(spec_j), true};
}

ComplexSpectrum sample_spectrum(const SignalSpec& spec, double tau, double t,
                                const SpatialGrid& grid) {
  check_support(spec, tau, t, grid);
  const FrequencyGrid f = frequency_grid(grid);
  if (signal_domain(spec.id) == SignalDomain::frequency) {
    ComplexSpectrum out{f, std::vector<std::complex<double>>(f.n)};
    const double scale = 1.0 - tau;
    for (int m = 0; m < f.n; ++m) {
      const double w = f.omega(m);
      out.values[m] = spec.amplitude * scale * fourier_form(spec.id, scale * w) *
                      std::polar(1.0, -w * t);
    }
    return out;
  }
  return fourier_transform(dilated_translated(spec, tau, t, grid).signal);
}

SpectrumGrid reference_power_spectrum(const SignalSpec& spec,
                                      const SpatialGrid& grid) {
  return power_spectrum(sample_spectrum(spec, 0.0, 0.0, grid));
}

}  // namespace mra
