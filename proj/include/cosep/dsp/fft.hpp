#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace cosep::dsp {

using Complex = std::complex<double>;

// Real-input DFT of a fixed length n, backed by FFTW. Plans are created once
// per length and shared; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // in: n reals -> out: n/2+1 complex bins (unnormalized).
  void forward(const double* in, Complex* out) const;
  // in: n/2+1 bins -> out: n reals, scaled by 1/n so inverse(forward(x)) == x.
  void inverse(const Complex* in, double* out) const;

 private:
  std::size_t n_;
  void* fwd_;
  void* inv_;
};

}  // namespace cosep::dsp
