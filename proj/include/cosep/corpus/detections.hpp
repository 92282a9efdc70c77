#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include <json.hpp>

namespace cosep::corpus {

struct Detection {
  std::size_t class_id = 0;
  double confidence = 0.0;
  std::array<double, 4> bbox{};  // normalized x0, y0, x1, y1
  int frame_index = 0;

  bool operator==(const Detection&) const = default;
};

// Throws std::invalid_argument unless x0 < x1 and y0 < y1.
void validate(const Detection& d);

double iou(const Detection& a, const Detection& b);

inline constexpr double kMinConfidence = 0.9;
inline constexpr double kMaxOverlap = 0.7;

// Applies, in order:
//  1. drop detections with confidence <= 0.9;
//  2. greedy suppression in order of decreasing confidence (earlier element
//     first on ties): a detection is dropped if a kept detection of a
//     different class in the same frame overlaps it with IoU > 0.7;
//  3. keep only the two classes with the highest maximum confidence.
// Survivors keep their input order.
std::vector<Detection> filter_detections(const std::vector<Detection>& ds);

// Distinct class ids of a detection list in ascending order.
std::vector<std::size_t> detected_classes(const std::vector<Detection>& ds);

// Synthetic detections for a clip tagged with `tags`: confident boxes for
// each tag plus low-confidence and overlapping distractors of other classes
// that the filter removes.
std::vector<Detection> synth_detections(const std::vector<std::size_t>& tags,
                                        std::size_t n_classes, std::mt19937_64& rng);

void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);

}  // namespace cosep::corpus
