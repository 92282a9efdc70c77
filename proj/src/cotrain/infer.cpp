#include "cosep/cotrain/infer.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "cosep/cotrain/cotrain.hpp"
#include "cosep/dsp/masks.hpp"
#include "cosep/dsp/stft.hpp"
#include "cosep/dsp/warp.hpp"

namespace cosep::cotrain {

std::vector<std::size_t> window_starts(std::size_t frames, std::size_t spec_size) {
  if (frames < spec_size) {
    throw std::invalid_argument("clip shorter than one window (" + std::to_string(frames) +
                                " < " + std::to_string(spec_size) + " frames)");
  }
  const std::size_t hop = std::max<std::size_t>(1, spec_size / 4);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + spec_size <= frames; s += hop) starts.push_back(s);
  if (starts.back() + spec_size < frames) starts.push_back(frames - spec_size);
  return starts;
}

Separation separate_clip(sepnet::Sepnet& net, const dsp::Waveform& mixture,
                         std::span<const std::size_t> classes, std::size_t max_batch) {
  const auto& cfg = net.config();
  if (classes.empty()) throw std::invalid_argument("separate: no classes requested");
  for (std::size_t c : classes) {
    if (c >= cfg.n_classes) {
      throw std::invalid_argument("separate: class " + std::to_string(c) + " outside 0.." +
                                  std::to_string(cfg.n_classes - 1));
    }
  }
  if (mixture.sample_rate != dsp::kDefaultSampleRate) {
    throw std::invalid_argument("separate: expected " + std::to_string(dsp::kDefaultSampleRate) +
                                " Hz, got " + std::to_string(mixture.sample_rate));
  }
  if (mixture.size() < crop_length(cfg.spec_size)) {
    throw std::invalid_argument("clip shorter than one window (" +
                                std::to_string(mixture.size()) + " < " +
                                std::to_string(crop_length(cfg.spec_size)) + " samples)");
  }
  const std::size_t S = cfg.spec_size;
  const auto spec = dsp::stft(mixture);
  Separation out;
  out.mixture = dsp::log_warp_for(S, spec.freq).warp(dsp::magnitude(spec));
  const std::size_t T = spec.time;
  const auto starts = window_starts(T, S);

  // Every (window, class) job becomes one batch row.
  struct Job {
    std::size_t start, cls;
  };
  std::vector<Job> jobs;
  for (std::size_t s : starts)
    for (std::size_t k = 0; k < classes.size(); ++k) jobs.push_back({s, k});

  std::vector<dsp::RatioMask> acc(classes.size(), dsp::RatioMask(S, T, dsp::FreqAxis::kWarped));
  std::vector<double> count(T, 0.0);
  for (std::size_t s : starts)
    for (std::size_t t = s; t < s + S; ++t) count[t] += 1.0;

  for (std::size_t j0 = 0; j0 < jobs.size(); j0 += max_batch) {
    const std::size_t n = std::min(max_batch, jobs.size() - j0);
    Tensor mag({n, 1, S, S});
    std::vector<std::size_t> ids(n);
    for (std::size_t r = 0; r < n; ++r) {
      const Job& job = jobs[j0 + r];
      ids[r] = classes[job.cls];
      double* dst = mag.ptr() + r * S * S;
      for (std::size_t f = 0; f < S; ++f)
        for (std::size_t t = 0; t < S; ++t) dst[f * S + t] = out.mixture.at(f, job.start + t);
    }
    Graph g(false);
    const Tensor& m = net.separate(g, g.constant(std::move(mag)), net.condition(g, ids)).value();
    for (std::size_t r = 0; r < n; ++r) {
      const Job& job = jobs[j0 + r];
      const double* src = m.ptr() + r * S * S;
      for (std::size_t f = 0; f < S; ++f)
        for (std::size_t t = 0; t < S; ++t) acc[job.cls].at(f, job.start + t) += src[f * S + t];
    }
  }
  for (auto& mask : acc) {
    for (std::size_t f = 0; f < S; ++f)
      for (std::size_t t = 0; t < T; ++t) mask.at(f, t) /= count[t];
    out.tracks.push_back(dsp::reconstruct(mask, spec, mixture.size()));
  }
  out.masks = std::move(acc);
  return out;
}

std::vector<dsp::Waveform> infer_clip(sepnet::Sepnet& net, const dsp::Waveform& mixture,
                                      std::span<const std::size_t> classes) {
  return separate_clip(net, mixture, classes).tracks;
}

dsp::Waveform denoise(sepnet::Sepnet& net, const dsp::Waveform& noisy, std::size_t top_class) {
  const std::size_t cls[] = {top_class};
  return separate_clip(net, noisy, cls).tracks.front();
}

}  // namespace cosep::cotrain
