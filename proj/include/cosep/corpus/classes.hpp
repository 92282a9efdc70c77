#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosep/dsp/wav.hpp"

namespace cosep::corpus {

// Parametric harmonic instrument.
struct SourceClass {
  std::size_t id = 0;
  std::string name;
  double f0_lo = 220.0;  // Hz; notes draw log-uniformly from [f0_lo, f0_hi]
  double f0_hi = 220.0;
  std::vector<double> harmonics;  // amplitude of harmonic k+1, max 1
  double attack = 0.02;           // s
  double decay = 1.0;             // 1/s, exponential within a note
  double vibrato_rate = 5.0;      // Hz
  double vibrato_depth = 0.0;     // relative frequency deviation
};

// `n` classes with fundamentals tiling roughly 98-1100 Hz. The first six
// use hand-designed harmonic profiles; further ones are drawn from a fixed
// seed and accepted only if distinguishable from all earlier ones.
std::vector<SourceClass> default_classes(std::size_t n);

// At least two harmonic coefficients differ by >= 0.2.
bool timbres_distinguishable(const SourceClass& a, const SourceClass& b);

// A sequence of enveloped notes with optional short rests, band-limited
// below 0.95 * Nyquist, normalized to RMS 0.1. Deterministic in
// (class, seconds, seed, sample_rate).
dsp::Waveform synth_source(const SourceClass& cls, double seconds, std::uint64_t seed,
                           int sample_rate = dsp::kDefaultSampleRate);

// 1/f noise (Kellet's filter on white noise), unit RMS.
std::vector<double> pink_noise(std::size_t n, std::uint64_t seed);

void to_json(nlohmann::json& j, const SourceClass& c);
void from_json(const nlohmann::json& j, SourceClass& c);

}  // namespace cosep::corpus
