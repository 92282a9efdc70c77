#include "cosep/app/png.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <zlib.h>

namespace cosep::app {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void chunk(std::ofstream& f, const char* type, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> buf;
  put_u32(buf, static_cast<std::uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), buf.data() + 4, static_cast<uInt>(buf.size() - 4));
  put_u32(buf, static_cast<std::uint32_t>(crc));
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels) {
  if (width == 0 || height == 0 || pixels.size() != width * height) {
    throw std::invalid_argument("write_png_gray: bad image size");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve(height * (width + 1));
  for (std::size_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(y * width),
               pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * width));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("write_png_gray: compression failed");
  }
  z.resize(zlen);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth 8, grayscale
  chunk(f, "IHDR", ihdr);
  chunk(f, "IDAT", z);
  chunk(f, "IEND", {});
}

void write_grid_png(const std::filesystem::path& path, const dsp::TfGrid& g, bool log_scale) {
  std::vector<double> v(g.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = log_scale ? std::log1p(std::max(0.0, g.values[i])) : g.values[i];
  }
  double hi = log_scale ? 0.0 : 1.0;
  if (log_scale)
    for (double x : v) hi = std::max(hi, x);
  std::vector<std::uint8_t> px(g.freq * g.time);
  for (std::size_t f = 0; f < g.freq; ++f) {
    for (std::size_t t = 0; t < g.time; ++t) {
      const double x = hi > 0.0 ? std::clamp(v[f * g.time + t] / hi, 0.0, 1.0) : 0.0;
      px[(g.freq - 1 - f) * g.time + t] = static_cast<std::uint8_t>(std::lround(255.0 * x));
    }
  }
  write_png_gray(path, g.time, g.freq, px);
}

}  // namespace cosep::app
