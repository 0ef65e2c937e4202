#include "mra/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mra {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW buffers + plans for one transform size, owned by one thread.
struct SizePlans {
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit SizePlans(std::size_t n) {
    in = fftw_alloc_complex(n);
    out = fftw_alloc_complex(n);
    std::lock_guard<std::mutex> lock(planner_mutex());  // planner is not thread-safe
    fwd = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  SizePlans(const SizePlans&) = delete;
  SizePlans& operator=(const SizePlans&) = delete;

  ~SizePlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(in);
    fftw_free(out);
  }
};

SizePlans& plans_for(std::size_t n) {
  thread_local std::map<std::size_t, SizePlans> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.try_emplace(n, n).first;
  return it->second;
}

void execute(std::span<const std::complex<double>> in,
             std::span<std::complex<double>> out, bool forward) {
  if (in.size() != out.size()) throw std::invalid_argument("fft: size mismatch");
  if (in.empty()) return;
  SizePlans& p = plans_for(in.size());
  static_assert(sizeof(fftw_complex) == sizeof(std::complex<double>));
  std::memcpy(static_cast<void*>(p.in), static_cast<const void*>(in.data()),
              in.size() * sizeof(fftw_complex));
  fftw_execute(forward ? p.fwd : p.inv);
  std::memcpy(static_cast<void*>(out.data()), static_cast<const void*>(p.out),
              in.size() * sizeof(fftw_complex));
}

}  // namespace

void fft_forward(std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out) {
  execute(in, out, true);
}

void fft_inverse(std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out) {
  execute(in, out, false);
}

}  // namespace mra
