#pragma once

#include <complex>
#include <span>

namespace mra {

/// Unscaled complex DFT, sum_k in[k] e^{-2*pi*i*k*m/n}. Backed by FFTW with
/// cached per-thread plans; output is bit-reproducible for a fixed size on a
/// fixed machine (FFTW_ESTIMATE plans do not depend on runtime timing).
void fft_forward(std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out);

/// Unscaled inverse transform, sum_m in[m] e^{+2*pi*i*k*m/n} (no 1/n factor).
void fft_inverse(std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out);

}  // namespace mra
