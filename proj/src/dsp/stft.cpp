#include "cosep/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cosep::dsp {
namespace {

void check_cfg(const StftConfig& cfg) {
  if (cfg.window < 2 || cfg.window % 2 != 0 || cfg.hop == 0 || cfg.hop > cfg.window) {
    throw std::invalid_argument("invalid STFT config: window " + std::to_string(cfg.window) +
                                ", hop " + std::to_string(cfg.hop));
  }
}

}  // namespace

std::size_t num_frames(std::size_t n, const StftConfig& cfg) {
  if (n < cfg.window) return 0;
  return 1 + (n - cfg.window) / cfg.hop;
}

std::size_t samples_for_frames(std::size_t frames, const StftConfig& cfg) {
  if (frames == 0) throw std::invalid_argument("samples_for_frames: zero frames");
  return (frames - 1) * cfg.hop + cfg.window;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  check_cfg(cfg);
  if (w.samples.size() < cfg.window) {
    throw std::invalid_argument("stft: input of " + std::to_string(w.samples.size()) +
                                " samples is shorter than one window (" +
                                std::to_string(cfg.window) + ")");
  }
  const RealFft fft(cfg.window);
  const std::vector<double> win = hann(cfg.window);
  ComplexSpectrogram s;
  s.cfg = cfg;
  s.sample_rate = w.sample_rate;
  s.freq = fft.bins();
  s.time = num_frames(w.samples.size(), cfg);
  s.bins.assign(s.freq * s.time, Complex{});
  std::vector<double> frame(cfg.window);
  std::vector<Complex> spec(s.freq);
  for (std::size_t t = 0; t < s.time; ++t) {
    const double* src = w.samples.data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window; ++i) frame[i] = src[i] * win[i];
    fft.forward(frame.data(), spec.data());
    for (std::size_t f = 0; f < s.freq; ++f) s.at(f, t) = spec[f];
  }
  return s;
}

Waveform istft(const ComplexSpectrogram& s, std::size_t length) {
  check_cfg(s.cfg);
  if (s.freq != s.cfg.window / 2 + 1 || s.bins.size() != s.freq * s.time || s.time == 0) {
    throw std::invalid_argument("istft: spectrogram of " + std::to_string(s.freq) + "x" +
                                std::to_string(s.time) + " does not match window " +
                                std::to_string(s.cfg.window));
  }
  const std::size_t win_len = s.cfg.window;
  const std::size_t natural = (s.time - 1) * s.cfg.hop + win_len;
  const RealFft fft(win_len);
  const std::vector<double> win = hann(win_len);
  std::vector<double> acc(natural, 0.0), norm(natural, 0.0);
  std::vector<Complex> spec(s.freq);
  std::vector<double> frame(win_len);
  for (std::size_t t = 0; t < s.time; ++t) {
    for (std::size_t f = 0; f < s.freq; ++f) spec[f] = s.at(f, t);
    fft.inverse(spec.data(), frame.data());
    const std::size_t off = t * s.cfg.hop;
    for (std::size_t i = 0; i < win_len; ++i) {
      acc[off + i] += frame[i] * win[i];
      norm[off + i] += win[i] * win[i];
    }
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.assign(length == 0 ? natural : length, 0.0);
  const std::size_t n = std::min(natural, out.samples.size());
  // Near the ends the squared-window sum drops towards zero; dividing by it
  // there would blow up any inconsistency a mask introduced, so it is
  // floored at a fraction of its peak.
  const double floor = kIstftNormFloor * *std::max_element(norm.begin(), norm.end());
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = acc[i] / std::max(norm[i], floor);
  }
  return out;
}

MagSpectrogram magnitude(const ComplexSpectrogram& s) {
  MagSpectrogram m(s.freq, s.time, FreqAxis::kLinear);
  for (std::size_t i = 0; i < s.bins.size(); ++i) m.values[i] = std::abs(s.bins[i]);
  return m;
}

}  // namespace cosep::dsp
