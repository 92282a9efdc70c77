#include "cosep/dsp/warp.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace cosep::dsp {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

bool is_integer(double x) { return x == std::floor(x); }

std::vector<double> snapped_positions(std::size_t linear_bins, std::size_t n) {
  const double top = static_cast<double>(linear_bins - 1);
  std::vector<double> p(n);
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = std::pow(top, static_cast<double>(j) / static_cast<double>(n - 1));
  }
  p.front() = 1.0;
  p.back() = top;

  // Each integer bin in range takes the nearest position if that position
  // is within half a bin.
  std::vector<bool> snapped(n, false);
  std::size_t j = 0;
  for (std::size_t bin = 1; bin < linear_bins; ++bin) {
    const double b = static_cast<double>(bin);
    while (j + 1 < n && std::abs(p[j + 1] - b) <= std::abs(p[j] - b)) ++j;
    if (std::abs(p[j] - b) < 0.5 && !snapped[j]) {
      p[j] = b;
      snapped[j] = true;
    }
  }

  // A fractional position must sit between two integer positions. Where it
  // does not (the hand-over between fine and coarse spacing), move it onto
  // the free neighbouring integer. Repeat until nothing changes.
  auto taken = [&](double b) {
    for (std::size_t k = 0; k < n; ++k) {
      if (p[k] == b) return true;
    }
    return false;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (is_integer(p[k])) continue;
      const double lo = std::floor(p[k]), hi = lo + 1.0;
      const bool lo_ok = taken(lo), hi_ok = taken(hi);
      if (lo_ok && hi_ok) continue;
      if (!lo_ok && !hi_ok) {
        p[k] = (p[k] - lo < hi - p[k]) ? lo : hi;
      } else {
        p[k] = lo_ok ? hi : lo;
      }
      changed = true;
    }
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (!(p[k] > p[k - 1])) {
      throw std::logic_error("log warp: positions not strictly increasing at " +
                             std::to_string(k) + " for " + std::to_string(n) + " bins");
    }
  }
  return p;
}

}  // namespace

LogWarp::LogWarp(std::size_t linear_bins, std::size_t warped_bins)
    : linear_bins_(linear_bins), warped_bins_(warped_bins) {
  if (linear_bins < 3 || warped_bins < 2 || warped_bins > linear_bins - 1) {
    throw std::invalid_argument("log warp: cannot map " + std::to_string(linear_bins) +
                                " linear bins to " + std::to_string(warped_bins));
  }
  pos_ = snapped_positions(linear_bins, warped_bins);
  lo_.resize(warped_bins);
  frac_.resize(warped_bins);
  for (std::size_t j = 0; j < warped_bins; ++j) {
    lo_[j] = static_cast<std::size_t>(std::floor(pos_[j]));
    frac_[j] = pos_[j] - std::floor(pos_[j]);
  }
  exact_.assign(linear_bins, kNone);
  left_.assign(linear_bins, 0);
  weight_.assign(linear_bins, 0.0);
  for (std::size_t j = 0; j < warped_bins; ++j) {
    if (frac_[j] == 0.0) exact_[lo_[j]] = j;
  }
  std::size_t j = 0;
  for (std::size_t bin = 1; bin < linear_bins; ++bin) {
    if (exact_[bin] != kNone) continue;
    const double b = static_cast<double>(bin);
    while (j + 1 < warped_bins && pos_[j + 1] < b) ++j;
    left_[bin] = j;
    weight_[bin] = (b - pos_[j]) / (pos_[j + 1] - pos_[j]);
  }
}

TfGrid LogWarp::warp(const TfGrid& m) const {
  if (m.axis != FreqAxis::kLinear || m.freq != linear_bins_) {
    throw std::invalid_argument("log warp: expected a linear-axis grid with " +
                                std::to_string(linear_bins_) + " bins, got " +
                                std::string(axis_name(m.axis)) + " with " +
                                std::to_string(m.freq));
  }
  TfGrid out(warped_bins_, m.time, FreqAxis::kWarped);
  for (std::size_t j = 0; j < warped_bins_; ++j) {
    const double* a = m.values.data() + lo_[j] * m.time;
    double* dst = out.values.data() + j * m.time;
    if (frac_[j] == 0.0) {
      for (std::size_t t = 0; t < m.time; ++t) dst[t] = a[t];
    } else {
      const double* b = a + m.time;
      const double f = frac_[j];
      for (std::size_t t = 0; t < m.time; ++t) dst[t] = a[t] + f * (b[t] - a[t]);
    }
  }
  return out;
}

TfGrid LogWarp::unwarp(const TfGrid& w) const {
  if (w.axis != FreqAxis::kWarped || w.freq != warped_bins_) {
    throw std::invalid_argument("log unwarp: expected a warped-axis grid with " +
                                std::to_string(warped_bins_) + " bins, got " +
                                std::string(axis_name(w.axis)) + " with " +
                                std::to_string(w.freq));
  }
  TfGrid out(linear_bins_, w.time, FreqAxis::kLinear);
  for (std::size_t bin = 0; bin < linear_bins_; ++bin) {
    double* dst = out.values.data() + bin * w.time;
    if (bin == 0 || exact_[bin] != kNone) {
      const double* src = w.values.data() + (bin == 0 ? 0 : exact_[bin]) * w.time;
      for (std::size_t t = 0; t < w.time; ++t) dst[t] = src[t];
      continue;
    }
    const double* a = w.values.data() + left_[bin] * w.time;
    const double* b = a + w.time;
    const double f = weight_[bin];
    for (std::size_t t = 0; t < w.time; ++t) dst[t] = a[t] + f * (b[t] - a[t]);
  }
  return out;
}

const LogWarp& log_warp_for(std::size_t warped_bins, std::size_t linear_bins) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<LogWarp>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{linear_bins, warped_bins}];
  if (!slot) slot = std::make_unique<LogWarp>(linear_bins, warped_bins);
  return *slot;
}

}  // namespace cosep::dsp
