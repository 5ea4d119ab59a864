#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace shotlog::detail {

// Real-input FFT of a fixed length backed by FFTW. Plans are created once per
// instance; execution is reentrant on distinct instances.
class RealFft {
public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  // `input.size()` must equal size(); result holds bins() values.
  void forward(std::span<const double> input, std::vector<std::complex<double>>& spectrum);
  // Unnormalized inverse: forward followed by inverse scales by size().
  void inverse(std::span<const std::complex<double>> spectrum, std::vector<double>& output);

private:
  std::size_t n_;
  double* time_ = nullptr;
  void* freq_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

// Smallest n' >= n whose prime factors are all 2, 3 or 5.
std::size_t next_fast_size(std::size_t n);

} // namespace shotlog::detail
