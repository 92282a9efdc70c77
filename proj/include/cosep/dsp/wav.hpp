#pragma once

#include <filesystem>
#include <vector>

namespace cosep::dsp {

inline constexpr int kDefaultSampleRate = 11025;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
};

// Throws std::invalid_argument on a non-positive rate or non-finite sample.
void validate(const Waveform& w);

double rms(const std::vector<double>& x);

// 16-bit PCM mono. Samples map to int16 as round(x * 32767), clamped to
// [-32767, 32767]; reading divides by 32767, so quantized signals round-trip
// exactly.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Rounds every sample onto the 16-bit grid used by write_wav.
double quantize_16bit(double x);

}  // namespace cosep::dsp
