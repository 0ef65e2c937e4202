#pragma once

#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mra {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid of n = box_length * 2^level samples covering
/// [-box_length/2, box_length/2) with step dx = 2^-level.
struct SpatialGrid {
  int n = 0;
  double dx = 0.0;
  double half_width = 0.0;

  /// box_length must be a positive even integer, level >= 0.
  static SpatialGrid make(int box_length, int level);

  double x(int k) const { return -half_width + k * dx; }
  int box_length() const { return static_cast<int>(2.0 * half_width); }

  bool operator==(const SpatialGrid&) const = default;
};

/// Frequency grid paired with a SpatialGrid: n points, step 2*pi/box_length,
/// covering [-2^level * pi, 2^level * pi) with omega = 0 at index n/2.
struct FrequencyGrid {
  int n = 0;
  double domega = 0.0;
  double omega_max = 0.0;

  double omega(int m) const { return (m - n / 2) * domega; }
  int center() const { return n / 2; }
  /// Index of the grid point at or just below omega.
  int floor_index(double omega) const;

  bool operator==(const FrequencyGrid&) const = default;
};

FrequencyGrid frequency_grid(const SpatialGrid& g);

struct SampledSignal {
  SpatialGrid grid;
  std::vector<double> values;
};

struct ComplexSpectrum {
  FrequencyGrid grid;
  std::vector<std::complex<double>> values;
};

/// Real samples of a power spectrum (or any function of omega).
struct SpectrumGrid {
  FrequencyGrid grid;
  std::vector<double> values;
};

/// Closed frequency interval used to window norms and error metrics.
struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

// -- Fourier transforms -----------------------------------------------------
//
// Continuous convention: fhat(w) = integral f(x) e^{-ixw} dx, approximated by
// the DFT scaled by dx with an explicit phase for the grid origin at
// -half_width, so sampled spectra line up with closed-form transforms.

ComplexSpectrum fourier_transform(const SampledSignal& sig);

/// Inverse transform; returns the real part. If max_imag is given it receives
/// the largest |imaginary| residual (diagnostic for spectra of real signals).
SampledSignal inverse_fourier_transform(const ComplexSpectrum& spec,
                                        double* max_imag = nullptr);

SpectrumGrid power_spectrum(const ComplexSpectrum& spec);
SpectrumGrid power_spectrum(const SampledSignal& sig);

// -- Gaussian smoothing -----------------------------------------------------

/// Convolution with a sampled Gaussian of width L, renormalized so the
/// discrete weights sum to exactly 1. Zero padding outside the band.
/// Throws if width < domega (sub-resolution kernels degenerate to a delta).
SpectrumGrid gaussian_smooth(const SpectrumGrid& s, double width);

/// Derivative of the smoothed spectrum, computed with the analytic kernel
/// phi_L'(w) = -(w/L^2) phi_L(w), renormalized so a linear ramp maps to its
/// exact slope. Same preconditions as gaussian_smooth.
SpectrumGrid gaussian_smooth_derivative(const SpectrumGrid& s, double width);

/// Half-width, in grid points, of the sampled kernel for a given width.
int gaussian_kernel_radius(double width, double domega);

// -- Norms ------------------------------------------------------------------

/// sqrt(sum values^2 * domega) over the window (full band when omitted).
/// Throws if the window contains no grid points.
double l2_norm(const SpectrumGrid& s, std::optional<Window> window = {});

double l2_norm(const SampledSignal& sig);

// -- Cubic interpolation ----------------------------------------------------
//
// Catmull-Rom on the uniform frequency grid with zero extension outside the
// band. Linear in the data, which the dilation operators rely on.

double interp_cubic(std::span<const double> values, const FrequencyGrid& g,
                    double omega);
double interp_cubic_derivative(std::span<const double> values,
                               const FrequencyGrid& g, double omega);

}  // namespace mra
