#include "cosep/dsp/resample.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosep::dsp {

Waveform decimate(const Waveform& w, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
  if (factor == 1) return w;
  const int half = 32 * factor;
  const double cutoff = 0.45 / factor;  // cycles per input sample
  std::vector<double> taps(2 * half + 1);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double x = static_cast<double>(i);
    const double sinc = i == 0 ? 2.0 * cutoff
                               : std::sin(2.0 * std::numbers::pi * cutoff * x) / (std::numbers::pi * x);
    const double blackman = 0.42 + 0.5 * std::cos(std::numbers::pi * x / (half + 1)) +
                            0.08 * std::cos(2.0 * std::numbers::pi * x / (half + 1));
    taps[i + half] = sinc * blackman;
    sum += taps[i + half];
  }
  for (double& t : taps) t /= sum;

  Waveform out;
  out.sample_rate = w.sample_rate / factor;
  const long n = static_cast<long>(w.samples.size());
  out.samples.resize((w.samples.size() + factor - 1) / factor);
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    const long c = static_cast<long>(k) * factor;
    double acc = 0.0;
    for (int i = -half; i <= half; ++i) {
      const long idx = c - i;
      if (idx >= 0 && idx < n) acc += taps[i + half] * w.samples[idx];
    }
    out.samples[k] = acc;
  }
  return out;
}

Waveform to_sample_rate(const Waveform& w, int target_rate) {
  if (w.sample_rate == target_rate) return w;
  if (w.sample_rate <= 0 || w.sample_rate % target_rate != 0) {
    throw std::invalid_argument("unsupported sample rate " + std::to_string(w.sample_rate) +
                                " Hz: must be an integer multiple of " +
                                std::to_string(target_rate) + " Hz");
  }
  return decimate(w, w.sample_rate / target_rate);
}

}  // namespace cosep::dsp
