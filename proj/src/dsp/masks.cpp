#include "cosep/dsp/masks.hpp"

#include <stdexcept>
#include <string>

#include "cosep/dsp/warp.hpp"

namespace cosep::dsp {
namespace {

std::string layout(const TfGrid& g) {
  return std::to_string(g.freq) + "x" + std::to_string(g.time) + " " +
         std::string(axis_name(g.axis));
}

void require_layout(const char* op, const TfGrid& a, const TfGrid& b) {
  if (!a.same_layout(b)) {
    throw std::invalid_argument(std::string(op) + ": layout mismatch " + layout(a) + " vs " +
                                layout(b));
  }
}

}  // namespace

MagSpectrogram apply_mask(const MagSpectrogram& mag, const RatioMask& mask) {
  require_layout("apply_mask", mag, mask);
  MagSpectrogram out(mag.freq, mag.time, mag.axis);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = mag.values[i] * mask.values[i];
  }
  return out;
}

std::pair<RatioMask, RatioMask> gt_ratio_masks(const MagSpectrogram& a,
                                               const MagSpectrogram& b) {
  require_layout("gt_ratio_masks", a, b);
  RatioMask ma(a.freq, a.time, a.axis), mb(a.freq, a.time, a.axis);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = a.values[i], y = b.values[i];
    if (x < 0.0 || y < 0.0) {
      throw std::invalid_argument("gt_ratio_masks: negative magnitude at index " +
                                  std::to_string(i));
    }
    const double den = x + y;
    if (den > kMaskFloor) {
      ma.values[i] = x / den;
      mb.values[i] = y / den;
    }
  }
  return {std::move(ma), std::move(mb)};
}

Waveform reconstruct(const RatioMask& mask, const ComplexSpectrogram& mixture,
                     std::size_t length) {
  const RatioMask* lin = &mask;
  RatioMask unwarped;
  if (mask.axis == FreqAxis::kWarped) {
    unwarped = log_warp_for(mask.freq, mixture.freq).unwarp(mask);
    lin = &unwarped;
  }
  if (lin->freq != mixture.freq || lin->time != mixture.time) {
    throw std::invalid_argument("reconstruct: mask " + layout(mask) +
                                " does not fit mixture " + std::to_string(mixture.freq) +
                                "x" + std::to_string(mixture.time));
  }
  ComplexSpectrogram s = mixture;
  for (std::size_t i = 0; i < s.bins.size(); ++i) s.bins[i] *= lin->values[i];
  return istft(s, length);
}

}  // namespace cosep::dsp
