#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

namespace cosep::dsp {

enum class FreqAxis { kLinear, kWarped };

std::string_view axis_name(FreqAxis a);

// Real-valued frequency x time grid (magnitudes or masks), row-major with
// frequency as the row index.
struct TfGrid {
  std::size_t freq = 0;
  std::size_t time = 0;
  FreqAxis axis = FreqAxis::kLinear;
  std::vector<double> values;

  TfGrid() = default;
  TfGrid(std::size_t f, std::size_t t, FreqAxis a, double fill = 0.0)
      : freq(f), time(t), axis(a), values(f * t, fill) {}

  double& at(std::size_t f, std::size_t t) { return values[f * time + t]; }
  double at(std::size_t f, std::size_t t) const { return values[f * time + t]; }
  bool same_layout(const TfGrid& o) const {
    return freq == o.freq && time == o.time && axis == o.axis;
  }
};

using MagSpectrogram = TfGrid;
using RatioMask = TfGrid;

// Columns [t0, t0 + n) of a grid.
TfGrid slice_time(const TfGrid& g, std::size_t t0, std::size_t n);

// "COSEPGRD" magic, uint32 version, uint32 axis, uint64 freq, uint64 time,
// float64 payload.
void write_grid(const std::filesystem::path& path, const TfGrid& g);
TfGrid read_grid(const std::filesystem::path& path);

}  // namespace cosep::dsp
