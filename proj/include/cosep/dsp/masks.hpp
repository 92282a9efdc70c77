#pragma once

#include <cstddef>
#include <utility>

#include "cosep/dsp/grid.hpp"
#include "cosep/dsp/stft.hpp"

namespace cosep::dsp {

inline constexpr double kMaskFloor = 1e-8;

// Elementwise mask * magnitude; layouts must match.
MagSpectrogram apply_mask(const MagSpectrogram& mag, const RatioMask& mask);

// a / (a + b) and b / (a + b). Where a + b <= kMaskFloor both masks are 0.
// Throws on negative entries or mismatched layouts.
std::pair<RatioMask, RatioMask> gt_ratio_masks(const MagSpectrogram& a,
                                               const MagSpectrogram& b);

// Scales the mixture STFT by the mask (keeping the mixture phase) and
// inverts it. A warped-axis mask is unwarped first. `length` as in istft.
Waveform reconstruct(const RatioMask& mask, const ComplexSpectrogram& mixture,
                     std::size_t length = 0);

}  // namespace cosep::dsp
