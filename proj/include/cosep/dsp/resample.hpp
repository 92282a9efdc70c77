#pragma once

#include "cosep/dsp/wav.hpp"

namespace cosep::dsp {

// Lowpass (windowed sinc) then keep every factor-th sample. factor 1 is a copy.
Waveform decimate(const Waveform& w, int factor);

// Brings a waveform to `target_rate` when the source rate is an integer
// multiple of it; throws std::invalid_argument naming the rate otherwise.
Waveform to_sample_rate(const Waveform& w, int target_rate = kDefaultSampleRate);

}  // namespace cosep::dsp
