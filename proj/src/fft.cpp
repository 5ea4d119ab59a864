#include "fft.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <new>

#include <fftw3.h>

namespace shotlog::detail {

namespace {
// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  std::lock_guard lock(planner_mutex());
  time_ = fftw_alloc_real(n_);
  auto* freq = fftw_alloc_complex(bins());
  freq_ = freq;
  if (!time_ || !freq) throw std::bad_alloc();
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), time_, freq, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), freq, time_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(time_);
  fftw_free(freq_);
}

void RealFft::forward(std::span<const double> input, std::vector<std::complex<double>>& spectrum) {
  std::copy(input.begin(), input.end(), time_);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  spectrum.resize(bins());
  std::memcpy(spectrum.data(), freq_, bins() * sizeof(std::complex<double>));
}

void RealFft::inverse(std::span<const std::complex<double>> spectrum, std::vector<double>& output) {
  // c2r overwrites its input, so work on the plan's own buffer.
  std::memcpy(freq_, spectrum.data(), bins() * sizeof(std::complex<double>));
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  output.assign(time_, time_ + n_);
}

std::size_t next_fast_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

} // namespace shotlog::detail
