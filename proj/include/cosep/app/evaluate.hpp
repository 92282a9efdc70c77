#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cosep/app/config.hpp"
#include "cosep/corpus/corpus.hpp"
#include "cosep/sepnet/sepnet.hpp"

namespace cosep::app {

struct TestPair {
  const corpus::ClipRecord* a = nullptr;
  const corpus::ClipRecord* b = nullptr;
  std::string id() const { return a->clip_id + "+" + b->clip_id; }
};

// Pairs of single-source clips of `split` whose classes differ. With
// clips_per_class clips of each of k classes this gives
// clips_per_class^2 * k(k-1)/2 pairs. When max_pairs > 0 a seeded subset
// of that size is kept, in enumeration order.
std::vector<TestPair> test_pairs(const corpus::Manifest& m, const std::string& split,
                                 std::uint64_t seed, std::size_t max_pairs);

struct SourceScore {
  std::string pair_id;
  std::string clip_id;
  std::size_t class_id = 0;
  std::string source;  // class name
  std::string method;  // model | model_best_perm | oracle_mask | mixture
  double sdr = 0.0, sir = 0.0, sar = 0.0;
  double nsdr = 0.0;   // sdr minus the mixture's sdr for this source
  bool capped = false;
};

struct Stat {
  double mean = 0.0;
  double stderr_ = 0.0;  // standard error of the mean
};

struct MethodSummary {
  std::string method;
  std::optional<std::size_t> class_id;  // unset: all sources
  std::size_t n = 0;
  Stat sdr, sir, sar, nsdr;
};

struct EvalReport {
  std::size_t n_pairs = 0;
  std::vector<SourceScore> sources;
  std::vector<MethodSummary> summary;  // per method, then per method and class
};

// Scores the model (grounded, and best permutation) and optionally the
// oracle-mask and mixture baselines on every pair. `net` may be null to
// score the baselines only. Throws std::runtime_error when a stem is missing.
EvalReport evaluate(sepnet::Sepnet* net, const corpus::Manifest& m,
                    const std::filesystem::path& root, const std::vector<TestPair>& pairs,
                    const EvalConfig& cfg, unsigned threads = 1);

std::vector<MethodSummary> summarize(const std::vector<SourceScore>& sources);
const MethodSummary* find_summary(const EvalReport& r, const std::string& method,
                                  std::optional<std::size_t> class_id = std::nullopt);

// scores.jsonl (one record per source), summary.csv and summary.json.
void write_report(const std::filesystem::path& dir, const EvalReport& r);

}  // namespace cosep::app
