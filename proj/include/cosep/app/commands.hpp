#pragma once

// Entry points behind the command-line tool. Each returns a JSON summary
// that the tool prints on success; failures throw (ConfigError for bad
// configuration, std::runtime_error / std::invalid_argument otherwise).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosep/app/config.hpp"

namespace cosep::app {

// Selects the kernel ISA named in the runtime section.
void apply_runtime(const RuntimeConfig& rt);

// Training variants compared by the ablation runner.
inline const std::vector<std::string> kVariants = {"full", "cosep_only", "consistency_only",
                                                   "no_adaptable"};
void apply_variant(cotrain::TrainConfig& t, const std::string& variant);

// CRC-32 of a file's bytes, as 8 lowercase hex digits.
std::string file_crc32(const std::filesystem::path& path);

nlohmann::json cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Writes config.json, train_log.jsonl, model.ckpt (final), best.ckpt (best
// validation, when validating) and summary.json under out_dir.
nlohmann::json cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& corpus_dir,
                         const std::filesystem::path& out_dir, std::ostream& diag);

// An empty checkpoint path scores the baselines only.
nlohmann::json cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& corpus_dir,
                            const std::filesystem::path& out_dir);

// Classes are names or numeric ids; the adaptable residual is always added.
nlohmann::json cmd_separate(const std::filesystem::path& checkpoint,
                            const std::filesystem::path& wav_in,
                            const std::vector<std::string>& classes,
                            const std::filesystem::path& out_dir);

// Trains and evaluates each variant under out_dir/<variant>/ and writes
// ablation.csv and ablation.json.
nlohmann::json cmd_ablate(const ExperimentConfig& cfg, const std::filesystem::path& corpus_dir,
                          const std::filesystem::path& out_dir,
                          const std::vector<std::string>& variants, std::ostream& diag);

}  // namespace cosep::app
