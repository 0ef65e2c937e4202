#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mra/grid.hpp"

namespace mra::test {

inline SpatialGrid default_grid() { return SpatialGrid::make(32, 5); }

inline SampledSignal sample_function(const SpatialGrid& g,
                                     const std::function<double(double)>& f) {
  SampledSignal sig{g, std::vector<double>(g.n)};
  for (int k = 0; k < g.n; ++k) sig.values[k] = f(g.x(k));
  return sig;
}

inline SpectrumGrid sample_spectrum_function(
    const FrequencyGrid& g, const std::function<double(double)>& f) {
  SpectrumGrid s{g, std::vector<double>(g.n)};
  for (int m = 0; m < g.n; ++m) s.values[m] = f(g.omega(m));
  return s;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Relative L2 distance over a symmetric interior fraction of the band.
inline double rel_l2_interior(const SpectrumGrid& ref, const SpectrumGrid& got,
                              double fraction = 0.9) {
  const double lim = ref.grid.omega_max * fraction;
  double num = 0.0, den = 0.0;
  for (int m = 0; m < ref.grid.n; ++m) {
    if (std::abs(ref.grid.omega(m)) > lim) continue;
    const double d = ref.values[m] - got.values[m];
    num += d * d;
    den += ref.values[m] * ref.values[m];
  }
  return std::sqrt(num / den);
}

/// Interior indices at least `margin` points away from either band edge.
inline bool is_interior(const FrequencyGrid& g, int index, int margin) {
  return index >= margin && index < g.n - margin;
}

}  // namespace mra::test
