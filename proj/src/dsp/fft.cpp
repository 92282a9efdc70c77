#include "cosep/dsp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace cosep::dsp {
namespace {

struct Plans {
  fftw_plan fwd;
  fftw_plan inv;
};

// FFTW's planner is not thread-safe, so plan creation is serialized here and
// the plans live for the whole process.
Plans plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, Plans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans p{fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, flags),
          fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, flags | FFTW_DESTROY_INPUT)};
  fftw_free(in);
  fftw_free(out);
  if (p.fwd == nullptr || p.inv == nullptr) {
    throw std::runtime_error("FFTW planning failed for length " + std::to_string(n));
  }
  cache.emplace(n, p);
  return p;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw std::invalid_argument("FFT length must be at least 2");
  Plans p = plans_for(n);
  fwd_ = p.fwd;
  inv_ = p.inv;
}

void RealFft::forward(const double* in, Complex* out) const {
  // The r2c transform does not modify its input.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const Complex* in, double* out) const {
  // c2r destroys its input, so work on a copy.
  std::vector<Complex> tmp(in, in + bins());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_), reinterpret_cast<fftw_complex*>(tmp.data()),
                       out);
  const double s = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] *= s;
}

}  // namespace cosep::dsp
