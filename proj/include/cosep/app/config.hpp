#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosep/corpus/corpus.hpp"
#include "cosep/cotrain/cotrain.hpp"
#include "cosep/sepnet/sepnet.hpp"

namespace cosep::app {

inline constexpr int kConfigVersion = 1;

struct EvalConfig {
  std::size_t filter_len = 512;
  std::uint64_t pair_seed = 1;
  std::size_t max_pairs = 0;      // 0: every eligible pair
  std::string split = "test";
  bool oracle = true;             // oracle ratio-mask upper bound
  bool mixture = true;            // mixture-as-estimate lower bound
  std::size_t val_max_pairs = 0;  // validation during training, 0: all

  bool operator==(const EvalConfig&) const = default;
};

struct RuntimeConfig {
  unsigned threads = 1;
  std::string kernel_isa = "auto";  // auto | scalar | avx2
  bool deterministic = true;

  bool operator==(const RuntimeConfig&) const = default;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  corpus::CorpusConfig corpus;
  sepnet::SepnetConfig model;
  cotrain::TrainConfig train;
  EvalConfig eval;
  RuntimeConfig runtime;

  // Cross-section checks (model classes = corpus classes + 1, ...).
  void validate() const;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);
void to_json(nlohmann::json& j, const RuntimeConfig& c);
void from_json(const nlohmann::json& j, RuntimeConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Strict; a missing section keeps its defaults, a missing or different
// version is rejected.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// Applies "dotted.key=value" overrides to a config document. The value is
// parsed as JSON when possible and taken as a string otherwise. When
// corpus.n_classes changes and model.n_classes is not set explicitly, the
// model follows (n_classes + 1).
nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& sets);

// Reads the file (or the defaults when `path` is empty), applies overrides,
// parses strictly and validates.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& sets = {});

}  // namespace cosep::app
