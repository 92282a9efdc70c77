#pragma once

#include <cstddef>
#include <vector>

#include "cosep/dsp/fft.hpp"
#include "cosep/dsp/grid.hpp"
#include "cosep/dsp/wav.hpp"

namespace cosep::dsp {

inline constexpr double kIstftNormFloor = 0.1;

struct StftConfig {
  std::size_t window = 1022;
  std::size_t hop = 256;
};

// F = window/2 + 1 bins by T frames, row-major with frequency as row.
struct ComplexSpectrogram {
  std::size_t freq = 0;
  std::size_t time = 0;
  StftConfig cfg;
  int sample_rate = kDefaultSampleRate;
  std::vector<Complex> bins;

  Complex& at(std::size_t f, std::size_t t) { return bins[f * time + t]; }
  const Complex& at(std::size_t f, std::size_t t) const { return bins[f * time + t]; }
};

// Frames of a signal of length n with no padding: 1 + (n - window) / hop.
std::size_t num_frames(std::size_t n, const StftConfig& cfg = {});
// Shortest signal yielding exactly `frames` frames.
std::size_t samples_for_frames(std::size_t frames, const StftConfig& cfg = {});

// Periodic Hann window of the given length.
std::vector<double> hann(std::size_t n);

// Frame t covers samples [t*hop, t*hop + window). Throws if the input is
// shorter than one window.
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg = {});

// Weighted overlap-add normalized by the summed squared window, floored at
// kIstftNormFloor times its peak, so the first and last ~hop samples are
// tapered instead of inverted exactly. `length` pads or trims the output
// (0 keeps the natural length (T-1)*hop + window).
Waveform istft(const ComplexSpectrogram& s, std::size_t length = 0);

MagSpectrogram magnitude(const ComplexSpectrogram& s);

}  // namespace cosep::dsp
