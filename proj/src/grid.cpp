#include "mra/grid.hpp"

#include <algorithm>
#include <cmath>

#include "mra/fft.hpp"

namespace mra {

SpatialGrid SpatialGrid::make(int box_length, int level) {
  if (box_length <= 0 || box_length % 2 != 0)
    throw Error("SpatialGrid: box_length must be a positive even integer");
  if (level < 0 || level > 24) throw Error("SpatialGrid: level out of range");
  SpatialGrid g;
  g.n = box_length << level;
  if ((g.n & (g.n - 1)) != 0)
    throw Error("SpatialGrid: point count must be a power of two");
  g.dx = std::ldexp(1.0, -level);
  g.half_width = box_length / 2.0;
  return g;
}

FrequencyGrid frequency_grid(const SpatialGrid& g) {
  FrequencyGrid f;
  f.n = g.n;
  f.domega = kTwoPi / (g.n * g.dx);
  f.omega_max = (f.n / 2) * f.domega;
  return f;
}

int FrequencyGrid::floor_index(double w) const {
  return static_cast<int>(std::floor(w / domega)) + n / 2;
}

namespace {

// Origin phase e^{-i x0 w_m} so the DFT matches the continuous transform of
// samples anchored at x0 = -half_width.
std::vector<std::complex<double>> origin_phase(const SpatialGrid& g,
                                               const FrequencyGrid& f,
                                               double sign) {
  std::vector<std::complex<double>> ph(f.n);
  for (int m = 0; m < f.n; ++m)
    ph[m] = std::polar(1.0, sign * g.half_width * f.omega(m));
  return ph;
}

}  // namespace

ComplexSpectrum fourier_transform(const SampledSignal& sig) {
  const SpatialGrid& g = sig.grid;
  if (static_cast<int>(sig.values.size()) != g.n)
    throw Error("fourier_transform: value count does not match grid");
  const FrequencyGrid f = frequency_grid(g);

  // Recentering the frequency origin to -omega_max multiplies sample k by
  // (-1)^k; the remaining factor is a plain DFT.
  std::vector<std::complex<double>> buf(g.n);
  for (int k = 0; k < g.n; ++k)
    buf[k] = (k & 1) ? -sig.values[k] : sig.values[k];
  std::vector<std::complex<double>> out(g.n);
  fft_forward(buf, out);

  ComplexSpectrum spec{f, std::move(out)};
  const auto ph = origin_phase(g, f, 1.0);
  for (int m = 0; m < f.n; ++m) spec.values[m] *= g.dx * ph[m];
  return spec;
}

SampledSignal inverse_fourier_transform(const ComplexSpectrum& spec,
                                        double* max_imag) {
  const FrequencyGrid& f = spec.grid;
  if (static_cast<int>(spec.values.size()) != f.n)
    throw Error("inverse_fourier_transform: value count does not match grid");
  SpatialGrid g;
  g.n = f.n;
  g.dx = kTwoPi / (f.n * f.domega);
  g.half_width = g.n * g.dx / 2.0;

  std::vector<std::complex<double>> buf(f.n);
  const auto ph = origin_phase(g, f, -1.0);
  for (int m = 0; m < f.n; ++m) buf[m] = spec.values[m] * ph[m];
  std::vector<std::complex<double>> out(f.n);
  fft_inverse(buf, out);

  SampledSignal sig{g, std::vector<double>(g.n)};
  const double scale = f.domega / kTwoPi;
  double worst = 0.0;
  for (int k = 0; k < g.n; ++k) {
    const std::complex<double> v = out[k] * scale;
    sig.values[k] = (k & 1) ? -v.real() : v.real();
    worst = std::max(worst, std::abs(v.imag()));
  }
  if (max_imag) *max_imag = worst;
  return sig;
}

SpectrumGrid power_spectrum(const ComplexSpectrum& spec) {
  SpectrumGrid p{spec.grid, std::vector<double>(spec.values.size())};
  for (std::size_t i = 0; i < spec.values.size(); ++i)
    p.values[i] = std::norm(spec.values[i]);
  return p;
}

SpectrumGrid power_spectrum(const SampledSignal& sig) {
  return power_spectrum(fourier_transform(sig));
}

int gaussian_kernel_radius(double width, double domega) {
  return static_cast<int>(std::ceil(6.0 * width / domega));
}

namespace {

void check_width(double width, double domega) {
  if (!(width > 0.0) || width < domega * (1.0 - 1e-12))
    throw Error("gaussian_smooth: kernel narrower than frequency resolution");
}

// Sampled Gaussian, renormalized to unit sum: exact mass preservation and
// exact response to constants.
std::vector<double> smoothing_kernel(double width, double domega, int radius) {
  std::vector<double> w(2 * radius + 1);
  for (int r = 0; r <= radius; ++r) {
    const double u = r * domega / width;
    const double v = std::exp(-0.5 * u * u);
    w[radius + r] = v;
    w[radius - r] = v;
  }
  double sum = w[radius];
  for (int r = 1; r <= radius; ++r) sum += 2.0 * w[radius + r];
  for (double& v : w) v /= sum;
  return w;
}

// Sampled phi', renormalized so the first moment sum_r (r*domega) k_r = -1:
// linear ramps then differentiate exactly. Antisymmetry is exact by
// construction, so constants map to zero.
std::vector<double> derivative_kernel(double width, double domega, int radius) {
  std::vector<double> w(2 * radius + 1, 0.0);
  const double inv_norm = 1.0 / (std::sqrt(kTwoPi) * width);
  for (int r = 1; r <= radius; ++r) {
    const double u = r * domega;
    const double v = -(u / (width * width)) * inv_norm *
                     std::exp(-0.5 * (u / width) * (u / width)) * domega;
    w[radius + r] = v;
    w[radius - r] = -v;
  }
  double moment = 0.0;
  for (int r = 1; r <= radius; ++r) moment += 2.0 * (r * domega) * w[radius + r];
  for (double& v : w) v /= -moment;
  return w;
}

SpectrumGrid convolve(const SpectrumGrid& s, const std::vector<double>& kernel,
                      int radius) {
  const int n = s.grid.n;
  SpectrumGrid out{s.grid, std::vector<double>(n, 0.0)};
  for (int i = 0; i < n; ++i) {
    const int rlo = std::max(-radius, i - (n - 1));
    const int rhi = std::min(radius, i);
    double acc = 0.0;
    for (int r = rlo; r <= rhi; ++r) acc += kernel[radius + r] * s.values[i - r];
    out.values[i] = acc;
  }
  return out;
}

}  // namespace

SpectrumGrid gaussian_smooth(const SpectrumGrid& s, double width) {
  check_width(width, s.grid.domega);
  const int radius = gaussian_kernel_radius(width, s.grid.domega);
  return convolve(s, smoothing_kernel(width, s.grid.domega, radius), radius);
}

SpectrumGrid gaussian_smooth_derivative(const SpectrumGrid& s, double width) {
  check_width(width, s.grid.domega);
  const int radius = gaussian_kernel_radius(width, s.grid.domega);
  return convolve(s, derivative_kernel(width, s.grid.domega, radius), radius);
}

double l2_norm(const SpectrumGrid& s, std::optional<Window> window) {
  double acc = 0.0;
  bool any = false;
  for (int m = 0; m < s.grid.n; ++m) {
    if (window) {
      const double w = s.grid.omega(m);
      if (w < window->lo || w > window->hi) continue;
    }
    acc += s.values[m] * s.values[m];
    any = true;
  }
  if (!any) throw Error("l2_norm: empty window");
  return std::sqrt(acc * s.grid.domega);
}

double l2_norm(const SampledSignal& sig) {
  double acc = 0.0;
  for (double v : sig.values) acc += v * v;
  return std::sqrt(acc * sig.grid.dx);
}

namespace {

// Catmull-Rom weights for local coordinate t in [0,1].
inline void catmull_rom(double t, double w[4]) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

inline void catmull_rom_derivative(double t, double w[4]) {
  const double t2 = t * t;
  w[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
  w[1] = 0.5 * (9.0 * t2 - 10.0 * t);
  w[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
  w[3] = 0.5 * (3.0 * t2 - 2.0 * t);
}

}  // namespace

double interp_cubic(std::span<const double> values, const FrequencyGrid& g,
                    double omega) {
  const double pos = omega / g.domega + g.n / 2;
  const double fl = std::floor(pos);
  const int i = static_cast<int>(fl);
  if (i < -1 || i > g.n) return 0.0;
  double w[4];
  catmull_rom(pos - fl, w);
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int idx = i - 1 + k;
    if (idx >= 0 && idx < g.n) acc += w[k] * values[idx];
  }
  return acc;
}

double interp_cubic_derivative(std::span<const double> values,
                               const FrequencyGrid& g, double omega) {
  const double pos = omega / g.domega + g.n / 2;
  const double fl = std::floor(pos);
  const int i = static_cast<int>(fl);
  if (i < -1 || i > g.n) return 0.0;
  double w[4];
  catmull_rom_derivative(pos - fl, w);
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int idx = i - 1 + k;
    if (idx >= 0 && idx < g.n) acc += w[k] * values[idx];
  }
  return acc / g.domega;
}

}  // namespace mra
