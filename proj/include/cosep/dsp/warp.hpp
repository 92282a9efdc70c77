#pragma once

#include <cstddef>
#include <vector>

#include "cosep/dsp/grid.hpp"

namespace cosep::dsp {

// Resampling of a linear STFT frequency axis (bins 0..linear_bins-1) onto
// `warped_bins` geometrically spaced positions between bin 1 and the last
// bin, by linear interpolation.
//
// Positions are snapped so that unwarp can invert warp on its range:
//  - where the geometric spacing is at least one bin, positions are integers;
//  - where it is finer, every integer bin is itself a position and the
//    remaining positions fall strictly between two integer positions.
// Unwarp writes each warped value back to its integer position and
// interpolates the bins in between, which makes warp(unwarp(warp(m))) equal
// to warp(m) bit for bit. The DC bin is not read by warp; unwarp fills it
// with the lowest warped value.
class LogWarp {
 public:
  LogWarp(std::size_t linear_bins, std::size_t warped_bins);

  std::size_t linear_bins() const { return linear_bins_; }
  std::size_t warped_bins() const { return warped_bins_; }
  // Fractional linear-bin position of each warped bin.
  const std::vector<double>& positions() const { return pos_; }

  TfGrid warp(const TfGrid& linear) const;
  TfGrid unwarp(const TfGrid& warped) const;

 private:
  std::size_t linear_bins_;
  std::size_t warped_bins_;
  std::vector<double> pos_;
  std::vector<std::size_t> lo_;   // floor(position)
  std::vector<double> frac_;      // position - floor
  // For each linear bin: index of the warped bin at that integer position,
  // or npos; otherwise the bracketing warped bins and interpolation weight.
  std::vector<std::size_t> exact_;
  std::vector<std::size_t> left_;
  std::vector<double> weight_;
};

// Shared instance for the default 512-bin STFT axis.
const LogWarp& log_warp_for(std::size_t warped_bins, std::size_t linear_bins = 512);

}  // namespace cosep::dsp
