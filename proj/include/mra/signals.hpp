#pragma once

#include <string>
#include <string_view>

#include "mra/grid.hpp"

namespace mra {

enum class SignalId { f1, f2, f3, f4, f5, f6, f7, f8 };

enum class SignalDomain { spatial, frequency };

SignalId parse_signal_id(std::string_view name);
std::string signal_name(SignalId id);

/// f4, f6, f7 are defined by their (real, even) Fourier transforms and are
/// handled natively in frequency; the rest are spatial closed forms.
SignalDomain signal_domain(SignalId id);

/// A test signal with its normalization constant and spatial support window.
/// Spatial formulas are hard-windowed to |x| <= support_halfwidth (hidden
/// signals live on the inner half of the observation box).
struct SignalSpec {
  SignalId id = SignalId::f8;
  double amplitude = 0.0;
  double support_halfwidth = 0.0;

  static SignalSpec make(SignalId id, const SpatialGrid& grid,
                         double amplitude = 1.0);
};

/// Unit-amplitude closed forms (no window applied).
double spatial_form(SignalId id, double x);
double fourier_form(SignalId id, double omega);

/// Normalization so the discrete SNR, (1/N) sum f^2 dx / sigma^2, equals the
/// target. Throws for f8.
double calibrate_snr(SignalId id, double sigma, double snr,
                     const SpatialGrid& grid);

SignalSpec calibrated_spec(SignalId id, double sigma, double snr,
                           const SpatialGrid& grid);

struct SpatialSample {
  SampledSignal signal;
  /// Set when a frequency-defined signal was realized through an inverse FT.
  bool approx_from_frequency = false;
};

/// Samples f((1 - tau)^{-1}(x - t)) on the grid. Spatial signals evaluate the
/// closed form at the transformed points; frequency-defined signals go
/// through sample_spectrum and an inverse FT. Throws if the transformed
/// support leaves the box.
SpatialSample dilated_translated(const SignalSpec& spec, double tau, double t,
                                 const SpatialGrid& grid);

/// fhat_j(w) = (1 - tau) fhat((1 - tau) w) e^{-i w t} for frequency-defined
/// signals (exact); spatial signals are sampled and transformed.
ComplexSpectrum sample_spectrum(const SignalSpec& spec, double tau, double t,
                                const SpatialGrid& grid);

/// Power spectrum of the untransformed signal, the reference for error
/// metrics.
SpectrumGrid reference_power_spectrum(const SignalSpec& spec,
                                      const SpatialGrid& grid);

/// Largest (1 - tau) over |tau| <= sqrt(3) eta; bounds the dilated support.
double worst_case_stretch(double eta);

}  // namespace mra
