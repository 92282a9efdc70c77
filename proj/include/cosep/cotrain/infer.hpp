#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cosep/dsp/grid.hpp"
#include "cosep/dsp/wav.hpp"
#include "cosep/sepnet/sepnet.hpp"

namespace cosep::cotrain {

// Start frames of spec_size-frame windows over `frames` frames: hop
// spec_size / 4, with a final window aligned to the end when the hop does
// not land there. Throws if frames < spec_size.
std::vector<std::size_t> window_starts(std::size_t frames, std::size_t spec_size);

struct Separation {
  std::vector<dsp::Waveform> tracks;   // one per requested class, input length
  std::vector<dsp::RatioMask> masks;   // warped spec_size x T, window-averaged
  dsp::MagSpectrogram mixture;         // warped |X|
};

// Sliding-window separation of a whole clip in eval mode. Classes may
// include the adaptable class. Throws std::invalid_argument for an empty or
// out-of-range class list, a sample rate other than the model's 11025 Hz or
// a clip shorter than one window.
Separation separate_clip(sepnet::Sepnet& net, const dsp::Waveform& mixture,
                         std::span<const std::size_t> classes, std::size_t max_batch = 64);

std::vector<dsp::Waveform> infer_clip(sepnet::Sepnet& net, const dsp::Waveform& mixture,
                                      std::span<const std::size_t> classes);

// Track conditioned on the clip's top object; noise is left to the
// adaptable class.
dsp::Waveform denoise(sepnet::Sepnet& net, const dsp::Waveform& noisy, std::size_t top_class);

}  // namespace cosep::cotrain
