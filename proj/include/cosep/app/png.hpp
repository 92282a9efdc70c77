#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cosep/dsp/grid.hpp"

namespace cosep::app {

// 8-bit grayscale PNG, rows top to bottom.
void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels);

// Renders a grid with low frequencies at the bottom. Magnitudes are shown
// as log(1 + v) scaled to the grid's maximum; masks (values in [0, 1]) are
// shown linearly.
void write_grid_png(const std::filesystem::path& path, const dsp::TfGrid& g, bool log_scale);

}  // namespace cosep::app
