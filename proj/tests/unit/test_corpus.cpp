#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "cosep/common/json_fields.hpp"
#include "cosep/corpus/corpus.hpp"
#include "cosep/dsp/stft.hpp"
#include "detection_oracle.hpp"

using namespace cosep;
using namespace cosep::corpus;
namespace fs = std::filesystem;

namespace {

std::vector<double> mean_spectrum(const dsp::Waveform& w) {
  auto mag = dsp::magnitude(dsp::stft(w));
  std::vector<double> out(mag.freq, 0.0);
  for (std::size_t f = 0; f < mag.freq; ++f)
    for (std::size_t t = 0; t < mag.time; ++t) out[f] += mag.at(f, t);
  return out;
}

double dft_mag(const std::vector<double>& x, double hz, double sr) {
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double a = 2.0 * std::numbers::pi * hz * static_cast<double>(n) / sr;
    re += x[n] * std::cos(a);
    im -= x[n] * std::sin(a);
  }
  return std::hypot(re, im);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("default classes are pairwise distinguishable") {
  for (std::size_t n : {6u, 15u}) {
    auto cls = default_classes(n);
    REQUIRE(cls.size() == n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        CAPTURE(a);
        CAPTURE(b);
        CHECK(timbres_distinguishable(cls[a], cls[b]));
      }
  }
}

TEST_CASE("synth_source is deterministic, normalized and finite") {
  auto cls = default_classes(6);
  for (const auto& c : cls) {
    auto a = synth_source(c, 2.0, 42);
    auto b = synth_source(c, 2.0, 42);
    CHECK(a.samples == b.samples);
    CHECK(a.size() == 22050);
    CHECK(dsp::rms(a.samples) == doctest::Approx(0.1).epsilon(0.1));
    dsp::validate(a);
  }
  CHECK(synth_source(cls[0], 1.0, 1).samples != synth_source(cls[0], 1.0, 2).samples);
  CHECK_THROWS_AS(synth_source(cls[0], 0.0, 1), std::invalid_argument);
}

TEST_CASE("fixed 220 Hz class has harmonic peaks at multiples of 220 Hz") {
  SourceClass c = default_classes(6)[0];
  c.f0_lo = c.f0_hi = 220.0;
  c.vibrato_depth = 0.0;
  auto w = synth_source(c, 1.0, 3);
  const double sr = 11025.0, bin = sr / 1022.0;
  for (int k = 1; k <= 10; ++k) {
    CAPTURE(k);
    double best_hz = 0.0, best = -1.0;
    for (double hz = 220.0 * k - 30.0; hz <= 220.0 * k + 30.0; hz += 1.0) {
      const double m = dft_mag(w.samples, hz, sr);
      if (m > best) {
        best = m;
        best_hz = hz;
      }
    }
    CHECK(std::abs(best_hz - 220.0 * k) <= bin);
  }
}

TEST_CASE("different classes have dissimilar spectral envelopes") {
  auto cls = default_classes(6);
  std::vector<std::vector<double>> env;
  for (const auto& c : cls) {
    auto s = mean_spectrum(synth_source(c, 3.0, 7));
    double norm = 0.0;
    for (double v : s) norm += v * v;
    for (double& v : s) v /= std::sqrt(norm);
    env.push_back(s);
  }
  for (std::size_t a = 0; a < env.size(); ++a)
    for (std::size_t b = a + 1; b < env.size(); ++b) {
      double cos = 0.0;
      for (std::size_t f = 0; f < env[a].size(); ++f) cos += env[a][f] * env[b][f];
      CAPTURE(a);
      CAPTURE(b);
      CHECK(cos < 0.9);
    }
}

TEST_CASE("make_clip mixes stems exactly") {
  auto cls = default_classes(6);
  ClipOptions opt;
  opt.seconds = 2.0;
  Clip solo = make_clip(cls, {3}, 5, opt);
  CHECK(solo.mixture.samples == solo.stems[0].samples);
  Clip duet = make_clip(cls, {1, 4}, 6, opt);
  REQUIRE(duet.stems.size() == 2);
  double peak = 0.0;
  for (std::size_t i = 0; i < duet.mixture.size(); ++i) {
    CHECK(std::abs(duet.mixture.samples[i] - duet.stems[0].samples[i] - duet.stems[1].samples[i]) <=
          1e-9);
    peak = std::max(peak, std::abs(duet.mixture.samples[i]));
  }
  CHECK(peak <= 0.99);
  opt.background = true;
  Clip noisy = make_clip(cls, {2}, 7, opt);
  REQUIRE(noisy.background.has_value());
  for (std::size_t i = 0; i < noisy.mixture.size(); ++i) {
    CHECK(std::abs(noisy.mixture.samples[i] - noisy.stems[0].samples[i] -
                   noisy.background->samples[i]) <= 1e-9);
  }
  CHECK_THROWS_AS(make_clip(cls, {}, 1, opt), std::invalid_argument);
  CHECK_THROWS_AS(make_clip(cls, {1, 1}, 1, opt), std::invalid_argument);
  CHECK_THROWS_AS(make_clip(cls, {9}, 1, opt), std::invalid_argument);
}

TEST_CASE("filter_detections examples and oracle agreement") {
  Detection a{2, 0.95, {0.1, 0.1, 0.5, 0.5}, 0};
  Detection b{2, 0.80, {0.2, 0.2, 0.6, 0.6}, 0};
  CHECK(filter_detections({a, b}) == std::vector<Detection>{a});
  CHECK(filter_detections({}).empty());

  Detection c{3, 0.93, {0.11, 0.1, 0.5, 0.51}, 0};  // overlaps a, other class
  CHECK(filter_detections({c, a}) == std::vector<Detection>{a});
  c.frame_index = 1;
  CHECK(filter_detections({c, a}) == std::vector<Detection>{c, a});

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    auto ds = testing::random_detections(rng, 50);
    auto got = filter_detections(ds);
    CHECK(got == testing::oracle_filter(ds));
    CHECK(filter_detections(got) == got);
    CHECK(detected_classes(got).size() <= 2);
  }
  Detection bad{0, 0.99, {0.5, 0.1, 0.4, 0.2}, 0};
  CHECK_THROWS_AS(filter_detections({bad}), std::invalid_argument);
}

TEST_CASE("synthetic detections filter back to the tags") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::size_t> tags = {static_cast<std::size_t>(i % 6)};
    if (i % 3 == 0) tags.push_back((i + 1) % 6);
    std::sort(tags.begin(), tags.end());
    auto ds = synth_detections(tags, 6, rng);
    auto kept = detected_classes(filter_detections(ds));
    if (kept != tags) {
      // The generator retries in that case; just make sure it is rare.
      WARN(kept == tags);
    }
  }
}

TEST_CASE("corpus generation: splits, balance, validation, determinism") {
  const fs::path root = fs::temp_directory_path() / "cosep_corpus_test";
  fs::remove_all(root);
  CorpusConfig cfg;
  cfg.train_solo = 150;
  cfg.train_duet = 50;
  cfg.clip_seconds = 0.2;
  cfg.seed = 11;
  Manifest m = generate_corpus(cfg, root, 2);
  CHECK(m.split("train").size() == 200);
  CHECK(m.split("val").size() == 6);
  CHECK(m.split("test").size() == 12);
  CHECK(m.split("test_noisy").size() == 6);

  std::map<std::size_t, int> hist;
  for (const auto* c : m.split("train"))
    for (std::size_t t : c->tags) ++hist[t];
  double mean = 0.0;
  for (const auto& [k, v] : hist) mean += v;
  mean /= static_cast<double>(hist.size());
  CHECK(hist.size() == 6);
  for (const auto& [k, v] : hist) CHECK(std::abs(v - mean) <= 0.2 * mean);

  Manifest back = read_manifest(root);
  CHECK(nlohmann::json(back).dump() == nlohmann::json(m).dump());
  CHECK(validate_corpus(back, root).empty());
  for (const auto& c : back.clips) {
    CHECK(detected_classes(filter_detections(c.detections)) == c.tags);
  }

  const std::string manifest_bytes = slurp(root / "manifest.json");
  const std::string wav_bytes = slurp(root / back.clips[7].mixture);
  const fs::path root2 = fs::temp_directory_path() / "cosep_corpus_test2";
  fs::remove_all(root2);
  generate_corpus(cfg, root2, 1);
  CHECK(slurp(root2 / "manifest.json") == manifest_bytes);
  CHECK(slurp(root2 / back.clips[7].mixture) == wav_bytes);

  // Tamper with one stem: validation names the clip.
  dsp::Waveform w = dsp::read_wav(root / back.clips[3].stems[0].path);
  w.samples[10] += 0.01;
  dsp::write_wav(root / back.clips[3].stems[0].path, w);
  CHECK(validate_corpus(back, root) == std::vector<std::string>{back.clips[3].clip_id});

  CorpusConfig empty = cfg;
  empty.train_solo = empty.train_duet = 0;
  empty.val_solo_per_class = empty.test_solo_per_class = empty.test_noisy_per_class = 0;
  CHECK_THROWS_WITH_AS(generate_corpus(empty, root), "empty corpus", std::invalid_argument);
  fs::remove_all(root);
  fs::remove_all(root2);
}

TEST_CASE("duet-only classes never appear as training solos") {
  const fs::path root = fs::temp_directory_path() / "cosep_corpus_duet_only";
  fs::remove_all(root);
  CorpusConfig cfg;
  cfg.train_solo = 30;
  cfg.train_duet = 30;
  cfg.clip_seconds = 0.15;
  cfg.duet_only_classes = {5};
  Manifest m = generate_corpus(cfg, root);
  int duets_with_5 = 0;
  for (const auto* c : m.split("train")) {
    if (c->tags.size() == 1) CHECK(c->tags[0] != 5);
    if (c->tags.size() == 2 && (c->tags[0] == 5 || c->tags[1] == 5)) ++duets_with_5;
  }
  CHECK(duets_with_5 > 0);
  bool test_has_5 = false;
  for (const auto* c : m.split("test")) test_has_5 = test_has_5 || c->tags[0] == 5;
  CHECK(test_has_5);
  fs::remove_all(root);
}

TEST_CASE("corpus config parsing is strict") {
  CorpusConfig c = nlohmann::json{{"n_classes", 4}, {"seed", 9}}.get<CorpusConfig>();
  CHECK(c.n_classes == 4);
  CHECK(c.seed == 9);
  CHECK(c.train_solo == 300);
  CHECK_THROWS_AS((nlohmann::json{{"n_clases", 4}}.get<CorpusConfig>()), ConfigError);
}
