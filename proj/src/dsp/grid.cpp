#include "cosep/dsp/grid.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace cosep::dsp {
namespace {
constexpr std::array<char, 8> kMagic = {'C', 'O', 'S', 'E', 'P', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string_view axis_name(FreqAxis a) { return a == FreqAxis::kLinear ? "linear" : "warped"; }

TfGrid slice_time(const TfGrid& g, std::size_t t0, std::size_t n) {
  if (t0 + n > g.time) {
    throw std::out_of_range("slice_time: frames [" + std::to_string(t0) + ", " +
                            std::to_string(t0 + n) + ") exceed " + std::to_string(g.time));
  }
  TfGrid out(g.freq, n, g.axis);
  for (std::size_t f = 0; f < g.freq; ++f) {
    for (std::size_t t = 0; t < n; ++t) out.at(f, t) = g.at(f, t0 + t);
  }
  return out;
}

void write_grid(const std::filesystem::path& path, const TfGrid& g) {
  if (g.values.size() != g.freq * g.time) throw std::invalid_argument("write_grid: bad grid size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write grid file: " + path.string());
  const std::uint32_t axis = g.axis == FreqAxis::kLinear ? 0 : 1;
  const std::uint64_t f = g.freq, t = g.time;
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&axis), sizeof axis);
  out.write(reinterpret_cast<const char*>(&f), sizeof f);
  out.write(reinterpret_cast<const char*>(&t), sizeof t);
  out.write(reinterpret_cast<const char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing grid file: " + path.string());
}

TfGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grid file: " + path.string());
  std::array<char, 8> magic{};
  std::uint32_t version = 0, axis = 0;
  std::uint64_t f = 0, t = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&axis), sizeof axis);
  in.read(reinterpret_cast<char*>(&f), sizeof f);
  in.read(reinterpret_cast<char*>(&t), sizeof t);
  if (!in || magic != kMagic) throw std::runtime_error("not a grid file: " + path.string());
  if (version != kVersion || axis > 1) {
    throw std::runtime_error("unsupported grid file: " + path.string());
  }
  TfGrid g(f, t, axis == 0 ? FreqAxis::kLinear : FreqAxis::kWarped);
  in.read(reinterpret_cast<char*>(g.values.data()),
          static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated grid file: " + path.string());
  return g;
}

}  // namespace cosep::dsp
