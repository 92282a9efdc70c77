#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosep/corpus/classes.hpp"
#include "cosep/corpus/detections.hpp"
#include "cosep/dsp/wav.hpp"

namespace cosep::corpus {

inline constexpr int kManifestVersion = 1;

struct ClipOptions {
  double seconds = 10.0;
  int sample_rate = dsp::kDefaultSampleRate;
  bool background = false;
  double background_snr_db = 10.0;  // object stems vs pink noise
};

// One rendered clip. Stems are in tag order, already scaled by the shared
// gain and rounded onto the 16-bit grid; mixture is their exact sum (plus
// the background, when present).
struct Clip {
  std::vector<std::size_t> tags;
  std::vector<dsp::Waveform> stems;
  std::optional<dsp::Waveform> background;
  dsp::Waveform mixture;
};

// Throws std::invalid_argument for an empty or oversized tag set, repeated
// tags, or tags outside the class list.
Clip make_clip(const std::vector<SourceClass>& classes, const std::vector<std::size_t>& tags,
               std::uint64_t seed, const ClipOptions& opt = {});

struct CorpusConfig {
  std::size_t n_classes = 6;
  std::size_t train_solo = 300;
  std::size_t train_duet = 100;
  std::size_t val_solo_per_class = 1;
  std::size_t test_solo_per_class = 2;
  std::size_t test_noisy_per_class = 1;  // solo + background, for denoising
  double clip_seconds = 10.0;
  int sample_rate = dsp::kDefaultSampleRate;
  double background_fraction = 0.2;  // of training clips
  double background_snr_db = 10.0;
  // Classes that never appear as training solos (only inside duets).
  std::vector<std::size_t> duet_only_classes;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
// Strict: unknown keys are rejected.
void from_json(const nlohmann::json& j, CorpusConfig& c);

struct StemRecord {
  std::size_t class_id = 0;  // n_classes for the background stem
  std::string role;          // "object" or "background"
  std::string path;          // relative to the corpus root
};

struct ClipRecord {
  std::string clip_id;
  std::string split;  // train, val, test, test_noisy
  std::vector<std::size_t> tags;
  std::string mixture;
  std::vector<StemRecord> stems;
  std::vector<Detection> detections;
  std::uint64_t seed = 0;
};

struct Manifest {
  int format_version = kManifestVersion;
  int sample_rate = dsp::kDefaultSampleRate;
  double clip_seconds = 10.0;
  std::vector<SourceClass> classes;
  CorpusConfig config;
  std::vector<ClipRecord> clips;

  std::size_t n_classes() const { return classes.size(); }
  std::vector<const ClipRecord*> split(const std::string& name) const;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

// Renders every clip, writes stems/, mixtures/ and manifest.json under
// `root`, then re-reads the files and checks mixture == sum of stems.
// Throws std::runtime_error listing offending clip ids on failure, and
// std::invalid_argument ("empty corpus") when no clips are requested.
Manifest generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& root,
                         unsigned threads = 1);

Manifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const Manifest& m);

// Clip ids whose mixture differs from the sum of stems by more than `tol`
// (or whose files are missing/unreadable).
std::vector<std::string> validate_corpus(const Manifest& m, const std::filesystem::path& root,
                                         double tol = 1e-9);

struct LoadedClip {
  const ClipRecord* record = nullptr;
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> stems;  // object stems in tag order
};

LoadedClip load_clip(const Manifest& m, const std::filesystem::path& root,
                     const ClipRecord& rec, bool with_stems);

}  // namespace cosep::corpus
