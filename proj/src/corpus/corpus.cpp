#include "cosep/corpus/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "cosep/common/json_fields.hpp"

namespace cosep::corpus {
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string clip_name(const std::string& split, std::size_t idx) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu", split.c_str(), idx);
  return buf;
}

struct PlannedClip {
  ClipRecord rec;
  bool background = false;
};

}  // namespace

Clip make_clip(const std::vector<SourceClass>& classes, const std::vector<std::size_t>& tags,
               std::uint64_t seed, const ClipOptions& opt) {
  if (tags.empty()) throw std::invalid_argument("make_clip: empty tag set");
  if (tags.size() > 2) throw std::invalid_argument("make_clip: at most two tags per clip");
  if (tags.size() == 2 && tags[0] == tags[1]) {
    throw std::invalid_argument("make_clip: repeated tag " + std::to_string(tags[0]));
  }
  for (std::size_t t : tags) {
    if (t >= classes.size()) {
      throw std::invalid_argument("make_clip: tag " + std::to_string(t) + " out of range");
    }
  }
  Clip clip;
  clip.tags = tags;
  std::vector<dsp::Waveform> raw;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    raw.push_back(synth_source(classes[tags[i]], opt.seconds, splitmix(seed * 4 + i),
                               opt.sample_rate));
  }
  const std::size_t n = raw.front().size();
  std::vector<double> sum(n, 0.0);
  for (const auto& s : raw) {
    for (std::size_t i = 0; i < n; ++i) sum[i] += s.samples[i];
  }
  std::vector<double> noise;
  if (opt.background) {
    noise = pink_noise(n, splitmix(seed * 4 + 3));
    const double scale = dsp::rms(sum) / std::pow(10.0, opt.background_snr_db / 20.0);
    for (double& v : noise) v *= scale;
    for (std::size_t i = 0; i < n; ++i) sum[i] += noise[i];
  }
  double peak = 0.0;
  for (double v : sum) peak = std::max(peak, std::abs(v));
  // Leave room for the rounding of each stem onto the 16-bit grid.
  const double limit = 0.99 - 4.0 / 32767.0;
  const double gain = peak > limit ? limit / peak : 1.0;

  auto finish = [&](const std::vector<double>& x) {
    dsp::Waveform w;
    w.sample_rate = opt.sample_rate;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = dsp::quantize_16bit(gain * x[i]);
    return w;
  };
  for (const auto& s : raw) clip.stems.push_back(finish(s.samples));
  if (opt.background) clip.background = finish(noise);

  clip.mixture.sample_rate = opt.sample_rate;
  clip.mixture.samples.assign(n, 0.0);
  for (const auto& s : clip.stems) {
    for (std::size_t i = 0; i < n; ++i) clip.mixture.samples[i] += s.samples[i];
  }
  if (clip.background) {
    for (std::size_t i = 0; i < n; ++i) clip.mixture.samples[i] += clip.background->samples[i];
  }
  return clip;
}

void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"n_classes", c.n_classes},
       {"train_solo", c.train_solo},
       {"train_duet", c.train_duet},
       {"val_solo_per_class", c.val_solo_per_class},
       {"test_solo_per_class", c.test_solo_per_class},
       {"test_noisy_per_class", c.test_noisy_per_class},
       {"clip_seconds", c.clip_seconds},
       {"sample_rate", c.sample_rate},
       {"background_fraction", c.background_fraction},
       {"background_snr_db", c.background_snr_db},
       {"duet_only_classes", c.duet_only_classes},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
  FieldReader r(j, "corpus");
  r.opt("n_classes", c.n_classes);
  r.opt("train_solo", c.train_solo);
  r.opt("train_duet", c.train_duet);
  r.opt("val_solo_per_class", c.val_solo_per_class);
  r.opt("test_solo_per_class", c.test_solo_per_class);
  r.opt("test_noisy_per_class", c.test_noisy_per_class);
  r.opt("clip_seconds", c.clip_seconds);
  r.opt("sample_rate", c.sample_rate);
  r.opt("background_fraction", c.background_fraction);
  r.opt("background_snr_db", c.background_snr_db);
  r.opt("duet_only_classes", c.duet_only_classes);
  r.opt("seed", c.seed);
  r.finish();
}

std::vector<const ClipRecord*> Manifest::split(const std::string& name) const {
  std::vector<const ClipRecord*> out;
  for (const auto& c : clips) {
    if (c.split == name) out.push_back(&c);
  }
  return out;
}

void to_json(nlohmann::json& j, const Manifest& m) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : m.clips) {
    nlohmann::json stems = nlohmann::json::array();
    for (const auto& s : c.stems) {
      stems.push_back({{"class_id", s.class_id}, {"role", s.role}, {"path", s.path}});
    }
    clips.push_back({{"clip_id", c.clip_id},
                     {"split", c.split},
                     {"tags", c.tags},
                     {"mixture", c.mixture},
                     {"stems", stems},
                     {"detections", c.detections},
                     {"seed", c.seed}});
  }
  j = {{"format_version", m.format_version},
       {"sample_rate", m.sample_rate},
       {"clip_seconds", m.clip_seconds},
       {"classes", m.classes},
       {"config", m.config},
       {"clips", clips}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  m.format_version = j.at("format_version");
  if (m.format_version != kManifestVersion) {
    throw std::runtime_error("unsupported manifest version " + std::to_string(m.format_version));
  }
  m.sample_rate = j.at("sample_rate");
  m.clip_seconds = j.at("clip_seconds");
  m.classes = j.at("classes").get<std::vector<SourceClass>>();
  m.config = j.at("config").get<CorpusConfig>();
  m.clips.clear();
  for (const auto& c : j.at("clips")) {
    ClipRecord r;
    r.clip_id = c.at("clip_id");
    r.split = c.at("split");
    r.tags = c.at("tags").get<std::vector<std::size_t>>();
    r.mixture = c.at("mixture");
    for (const auto& s : c.at("stems")) {
      r.stems.push_back({s.at("class_id"), s.at("role"), s.at("path")});
    }
    r.detections = c.at("detections").get<std::vector<Detection>>();
    r.seed = c.at("seed");
    m.clips.push_back(std::move(r));
  }
}

void write_manifest(const fs::path& root, const Manifest& m) {
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
  out << nlohmann::json(m).dump(1) << "\n";
}

Manifest read_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw std::runtime_error("cannot read " + (root / "manifest.json").string());
  return nlohmann::json::parse(in).get<Manifest>();
}

Manifest generate_corpus(const CorpusConfig& cfg, const fs::path& root, unsigned threads) {
  const std::size_t C = cfg.n_classes;
  const std::size_t total = cfg.train_solo + cfg.train_duet +
                            C * (cfg.val_solo_per_class + cfg.test_solo_per_class +
                                 cfg.test_noisy_per_class);
  if (total == 0 || C == 0) throw std::invalid_argument("empty corpus");
  if (!(cfg.clip_seconds > 0.0)) throw std::invalid_argument("clip_seconds must be positive");
  std::vector<std::size_t> solo_classes;
  for (std::size_t c = 0; c < C; ++c) {
    if (std::find(cfg.duet_only_classes.begin(), cfg.duet_only_classes.end(), c) ==
        cfg.duet_only_classes.end()) {
      solo_classes.push_back(c);
    }
  }
  for (std::size_t c : cfg.duet_only_classes) {
    if (c >= C) throw std::invalid_argument("duet_only class " + std::to_string(c) + " out of range");
  }
  if (cfg.train_solo > 0 && solo_classes.empty()) {
    throw std::invalid_argument("every class is duet-only but solo clips were requested");
  }
  if (cfg.train_duet > 0 && C < 2) throw std::invalid_argument("duets need at least two classes");

  Manifest m;
  m.sample_rate = cfg.sample_rate;
  m.clip_seconds = cfg.clip_seconds;
  m.classes = default_classes(C);
  m.config = cfg;

  std::mt19937_64 rng(splitmix(cfg.seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PlannedClip> plan;
  auto add = [&](const std::string& split, std::size_t idx, std::vector<std::size_t> tags,
                 bool background) {
    PlannedClip p;
    p.rec.clip_id = clip_name(split, idx);
    p.rec.split = split;
    std::sort(tags.begin(), tags.end());
    p.rec.tags = std::move(tags);
    p.rec.seed = splitmix(cfg.seed * 1000003 + plan.size());
    p.background = background;
    plan.push_back(std::move(p));
  };

  std::vector<std::size_t> solo_order;
  for (std::size_t i = 0; i < cfg.train_solo; ++i) solo_order.push_back(solo_classes[i % solo_classes.size()]);
  std::shuffle(solo_order.begin(), solo_order.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t b = a + 1; b < C; ++b) pairs.emplace_back(a, b);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::size_t train_idx = 0;
  for (std::size_t c : solo_order) add("train", train_idx++, {c}, u(rng) < cfg.background_fraction);
  for (std::size_t i = 0; i < cfg.train_duet; ++i) {
    const auto& p = pairs[i % pairs.size()];
    add("train", train_idx++, {p.first, p.second}, u(rng) < cfg.background_fraction);
  }
  std::size_t idx = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < cfg.val_solo_per_class; ++k) add("val", idx++, {c}, false);
  idx = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < cfg.test_solo_per_class; ++k) add("test", idx++, {c}, false);
  idx = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < cfg.test_noisy_per_class; ++k) add("test_noisy", idx++, {c}, true);

  fs::create_directories(root / "stems");
  fs::create_directories(root / "mixtures");

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      try {
        PlannedClip& p = plan[i];
        ClipOptions opt;
        opt.seconds = cfg.clip_seconds;
        opt.sample_rate = cfg.sample_rate;
        opt.background = p.background;
        opt.background_snr_db = cfg.background_snr_db;
        Clip clip = make_clip(m.classes, p.rec.tags, p.rec.seed, opt);
        p.rec.mixture = "mixtures/" + p.rec.clip_id + ".wav";
        dsp::write_wav(root / p.rec.mixture, clip.mixture);
        for (std::size_t s = 0; s < clip.stems.size(); ++s) {
          StemRecord sr{p.rec.tags[s], "object",
                        "stems/" + p.rec.clip_id + "_c" + std::to_string(p.rec.tags[s]) + ".wav"};
          dsp::write_wav(root / sr.path, clip.stems[s]);
          p.rec.stems.push_back(sr);
        }
        if (clip.background) {
          StemRecord sr{C, "background", "stems/" + p.rec.clip_id + "_bg.wav"};
          dsp::write_wav(root / sr.path, *clip.background);
          p.rec.stems.push_back(sr);
        }
        std::mt19937_64 det_rng(splitmix(p.rec.seed ^ 0xd1b54a32d192ed03ULL));
        for (int attempt = 0;; ++attempt) {
          p.rec.detections = synth_detections(p.rec.tags, C, det_rng);
          if (detected_classes(filter_detections(p.rec.detections)) == p.rec.tags) break;
          if (attempt > 100) throw std::logic_error("cannot synthesize consistent detections");
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error.empty()) first_error = plan[i].rec.clip_id + ": " + e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error("corpus synthesis failed: " + first_error);

  for (auto& p : plan) m.clips.push_back(std::move(p.rec));
  write_manifest(root, m);
  const auto bad = validate_corpus(read_manifest(root), root);
  if (!bad.empty()) {
    std::string list;
    for (const auto& id : bad) list += (list.empty() ? "" : ", ") + id;
    throw std::runtime_error("corpus validation failed (mixture != sum of stems): " + list);
  }
  return m;
}

std::vector<std::string> validate_corpus(const Manifest& m, const fs::path& root, double tol) {
  std::vector<std::string> bad;
  for (const auto& c : m.clips) {
    try {
      const dsp::Waveform mix = dsp::read_wav(root / c.mixture);
      std::vector<double> sum(mix.size(), 0.0);
      bool ok = !c.stems.empty();
      for (const auto& s : c.stems) {
        const dsp::Waveform w = dsp::read_wav(root / s.path);
        if (w.size() != mix.size()) {
          ok = false;
          break;
        }
        for (std::size_t i = 0; i < w.size(); ++i) sum[i] += w.samples[i];
      }
      for (std::size_t i = 0; ok && i < sum.size(); ++i) ok = std::abs(sum[i] - mix.samples[i]) <= tol;
      if (!ok) bad.push_back(c.clip_id);
    } catch (const std::exception&) {
      bad.push_back(c.clip_id);
    }
  }
  return bad;
}

LoadedClip load_clip(const Manifest& m, const fs::path& root, const ClipRecord& rec,
                     bool with_stems) {
  LoadedClip out;
  out.record = &rec;
  out.mixture = dsp::read_wav(root / rec.mixture);
  if (out.mixture.sample_rate != m.sample_rate) {
    throw std::runtime_error("clip " + rec.clip_id + " has sample rate " +
                             std::to_string(out.mixture.sample_rate));
  }
  if (with_stems) {
    for (const auto& s : rec.stems) {
      if (s.role == "object") out.stems.push_back(dsp::read_wav(root / s.path));
    }
    if (out.stems.size() != rec.tags.size()) {
      throw std::runtime_error("clip " + rec.clip_id + " is missing object stems");
    }
  }
  return out;
}

}  // namespace cosep::corpus
