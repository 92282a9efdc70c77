#pragma once

// Source-separation metrics computed with the bss_eval_sources
// decomposition: each estimate is split into a target part (projection onto
// filter_len delayed copies of its reference), an interference part (the
// extra projection gained by allowing all references) and an artifact
// residual. Metrics are computed on the full signal.

#include <cstddef>
#include <vector>

namespace cosep::bsseval {

inline constexpr double kCapDb = 60.0;
inline constexpr std::size_t kDefaultFilterLen = 512;

using Signal = std::vector<double>;

struct BssScores {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  bool capped = false;  // some ratio hit kCapDb
};

// Components have length n + filter_len - 1 (filter tails included); the
// estimate is compared after zero padding to the same length.
struct Decomposition {
  Signal target;
  Signal interference;
  Signal artifacts;
};

// Decomposes `estimate` against references[j]. Throws std::invalid_argument
// on length mismatch, an all-zero reference, filter_len == 0 or j out of range.
Decomposition decompose(const Signal& estimate, const std::vector<Signal>& references,
                        std::size_t j, std::size_t filter_len = kDefaultFilterLen);

BssScores scores_from(const Decomposition& d);

// estimates[i] is scored against references[i].
std::vector<BssScores> bss_eval(const std::vector<Signal>& estimates,
                                const std::vector<Signal>& references,
                                std::size_t filter_len = kDefaultFilterLen);

struct PermutationResult {
  std::vector<std::size_t> assignment;  // estimate index used for reference i
  std::vector<BssScores> scores;        // per reference
  double mean_sdr = 0.0;
};

// Tries every assignment of estimates to references (at most 4 sources) and
// keeps the one with the highest mean SDR; ties keep the earliest in
// lexicographic order.
PermutationResult best_permutation(const std::vector<Signal>& estimates,
                                   const std::vector<Signal>& references,
                                   std::size_t filter_len = kDefaultFilterLen);

// SDR(estimate, reference) - SDR(mixture, reference), single-source.
double nsdr(const Signal& estimate, const Signal& mixture, const Signal& reference,
            std::size_t filter_len = kDefaultFilterLen);

}  // namespace cosep::bsseval
