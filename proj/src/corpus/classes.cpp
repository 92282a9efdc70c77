#include "cosep/corpus/classes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cosep::corpus {
namespace {

constexpr std::size_t kHarmonics = 10;

struct Preset {
  const char* name;
  std::vector<double> harmonics;
  double attack, decay, vibrato_rate, vibrato_depth;
};

std::vector<Preset> presets() {
  std::vector<double> saw(kHarmonics), hollow(kHarmonics), pure(kHarmonics);
  for (std::size_t k = 0; k < kHarmonics; ++k) {
    saw[k] = 1.0 / static_cast<double>(k + 1);
    hollow[k] = k % 2 == 0 ? 1.0 / static_cast<double>(k + 1) : 0.0;
    pure[k] = std::pow(0.35, static_cast<double>(k));
  }
  return {
      {"saw", saw, 0.01, 1.5, 5.0, 0.004},
      {"hollow", hollow, 0.05, 0.5, 4.5, 0.006},
      {"nasal", {0.4, 1.0, 0.9, 0.5, 0.3, 0.2, 0.1, 0.08, 0.05, 0.03}, 0.03, 1.0, 5.5, 0.003},
      {"pure", pure, 0.08, 0.3, 6.0, 0.008},
      {"bright", {0.3, 0.4, 0.6, 0.8, 1.0, 0.8, 0.6, 0.4, 0.3, 0.2}, 0.02, 2.0, 5.0, 0.005},
      {"buzzy", {1.0, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5}, 0.005, 3.0, 0.0, 0.0},
  };
}

}  // namespace

bool timbres_distinguishable(const SourceClass& a, const SourceClass& b) {
  const std::size_t n = std::max(a.harmonics.size(), b.harmonics.size());
  int differing = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = k < a.harmonics.size() ? a.harmonics[k] : 0.0;
    const double y = k < b.harmonics.size() ? b.harmonics[k] : 0.0;
    if (std::abs(x - y) >= 0.2) ++differing;
  }
  return differing >= 2;
}

std::vector<SourceClass> default_classes(std::size_t n) {
  if (n == 0) throw std::invalid_argument("default_classes: need at least one class");
  const auto pre = presets();
  const double lo = 98.0, hi = 1100.0;
  const double ratio = std::pow(hi / lo, 1.0 / static_cast<double>(n));
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SourceClass> out;
  for (std::size_t c = 0; c < n; ++c) {
    SourceClass cls;
    cls.id = c;
    cls.f0_lo = lo * std::pow(ratio, static_cast<double>(c));
    cls.f0_hi = cls.f0_lo * ratio;
    if (c < pre.size()) {
      cls.name = pre[c].name;
      cls.harmonics = pre[c].harmonics;
      cls.attack = pre[c].attack;
      cls.decay = pre[c].decay;
      cls.vibrato_rate = pre[c].vibrato_rate;
      cls.vibrato_depth = pre[c].vibrato_depth;
    } else {
      cls.name = "class" + std::to_string(c);
      for (int attempt = 0;; ++attempt) {
        if (attempt > 10000) throw std::logic_error("default_classes: cannot find distinct timbre");
        cls.harmonics.assign(kHarmonics, 0.0);
        for (double& h : cls.harmonics) h = u(rng);
        const double mx = *std::max_element(cls.harmonics.begin(), cls.harmonics.end());
        for (double& h : cls.harmonics) h /= mx;
        bool ok = true;
        for (const auto& prev : out) ok = ok && timbres_distinguishable(cls, prev);
        if (ok) break;
      }
      cls.attack = 0.005 + 0.07 * u(rng);
      cls.decay = 0.3 + 2.7 * u(rng);
      cls.vibrato_rate = 4.0 + 2.0 * u(rng);
      cls.vibrato_depth = 0.008 * u(rng);
    }
    out.push_back(std::move(cls));
  }
  return out;
}

dsp::Waveform synth_source(const SourceClass& cls, double seconds, std::uint64_t seed,
                           int sample_rate) {
  if (!(seconds > 0.0)) throw std::invalid_argument("synth_source: duration must be positive");
  if (cls.harmonics.empty() || cls.f0_lo <= 0.0 || cls.f0_hi < cls.f0_lo) {
    throw std::invalid_argument("synth_source: malformed class '" + cls.name + "'");
  }
  const double sr = static_cast<double>(sample_rate);
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sr));
  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(n, 0.0);

  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (cls.id + 1)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double nyq_limit = 0.95 * sr / 2.0;
  const double release = 0.01;
  std::size_t pos = 0;
  while (pos < n) {
    if (pos > 0 && u(rng) < 0.15) {
      pos += static_cast<std::size_t>((0.05 + 0.2 * u(rng)) * sr);
      continue;
    }
    const double dur = 0.3 + 0.6 * u(rng);
    const std::size_t len = std::min(n - pos, static_cast<std::size_t>(dur * sr));
    const double f0 = cls.f0_lo * std::pow(cls.f0_hi / cls.f0_lo, u(rng));
    const double vib_phase0 = 2.0 * std::numbers::pi * u(rng);
    const double note_gain = 0.7 + 0.3 * u(rng);
    const double fmax = f0 * (1.0 + cls.vibrato_depth);
    std::size_t kmax = 0;
    while (kmax < cls.harmonics.size() && (kmax + 1) * fmax < nyq_limit) ++kmax;
    double phase = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / sr;
      const double f = f0 * (1.0 + cls.vibrato_depth *
                                       std::sin(2.0 * std::numbers::pi * cls.vibrato_rate * t +
                                                vib_phase0));
      phase += 2.0 * std::numbers::pi * f / sr;
      double env = std::min(1.0, t / cls.attack) * std::exp(-cls.decay * t);
      const double left = static_cast<double>(len - i) / sr;
      if (left < release) env *= left / release;
      double s = 0.0;
      for (std::size_t k = 0; k < kmax; ++k) {
        s += cls.harmonics[k] * std::sin(static_cast<double>(k + 1) * phase);
      }
      w.samples[pos + i] = note_gain * env * s;
    }
    pos += len;
  }
  const double r = dsp::rms(w.samples);
  if (r > 0.0) {
    for (double& v : w.samples) v *= 0.1 / r;
  }
  return w;
}

std::vector<double> pink_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double white = d(rng);
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    out[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
  }
  const double r = dsp::rms(out);
  if (r > 0.0) {
    for (double& v : out) v /= r;
  }
  return out;
}

void to_json(nlohmann::json& j, const SourceClass& c) {
  j = {{"id", c.id},
       {"name", c.name},
       {"f0_lo", c.f0_lo},
       {"f0_hi", c.f0_hi},
       {"harmonics", c.harmonics},
       {"attack", c.attack},
       {"decay", c.decay},
       {"vibrato_rate", c.vibrato_rate},
       {"vibrato_depth", c.vibrato_depth}};
}

void from_json(const nlohmann::json& j, SourceClass& c) {
  c.id = j.at("id");
  c.name = j.at("name");
  c.f0_lo = j.at("f0_lo");
  c.f0_hi = j.at("f0_hi");
  c.harmonics = j.at("harmonics").get<std::vector<double>>();
  c.attack = j.at("attack");
  c.decay = j.at("decay");
  c.vibrato_rate = j.at("vibrato_rate");
  c.vibrato_depth = j.at("vibrato_depth");
}

}  // namespace cosep::corpus
