#include "cosep/corpus/detections.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace cosep::corpus {

void validate(const Detection& d) {
  const auto& b = d.bbox;
  if (!(b[0] < b[2]) || !(b[1] < b[3])) {
    throw std::invalid_argument("detection box must satisfy x0 < x1 and y0 < y1");
  }
}

double iou(const Detection& a, const Detection& b) {
  const double ix = std::max(0.0, std::min(a.bbox[2], b.bbox[2]) - std::max(a.bbox[0], b.bbox[0]));
  const double iy = std::max(0.0, std::min(a.bbox[3], b.bbox[3]) - std::max(a.bbox[1], b.bbox[1]));
  const double inter = ix * iy;
  const double area_a = (a.bbox[2] - a.bbox[0]) * (a.bbox[3] - a.bbox[1]);
  const double area_b = (b.bbox[2] - b.bbox[0]) * (b.bbox[3] - b.bbox[1]);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> filter_detections(const std::vector<Detection>& ds) {
  for (const auto& d : ds) validate(d);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].confidence > kMinConfidence) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds[a].confidence > ds[b].confidence;
  });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (ds[k].class_id != ds[i].class_id && ds[k].frame_index == ds[i].frame_index &&
          iou(ds[k], ds[i]) > kMaxOverlap) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }

  // `kept` is in priority order, so the first time a class appears is its
  // maximum confidence and class ranking follows first appearance.
  std::vector<std::size_t> top;
  for (std::size_t k : kept) {
    if (std::find(top.begin(), top.end(), ds[k].class_id) == top.end()) {
      top.push_back(ds[k].class_id);
      if (top.size() == 2) break;
    }
  }
  std::sort(kept.begin(), kept.end());
  std::vector<Detection> out;
  for (std::size_t k : kept) {
    if (std::find(top.begin(), top.end(), ds[k].class_id) != top.end()) out.push_back(ds[k]);
  }
  return out;
}

std::vector<std::size_t> detected_classes(const std::vector<Detection>& ds) {
  std::set<std::size_t> s;
  for (const auto& d : ds) s.insert(d.class_id);
  return {s.begin(), s.end()};
}

std::vector<Detection> synth_detections(const std::vector<std::size_t>& tags,
                                        std::size_t n_classes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> frame(0, 9);
  auto random_box = [&] {
    const double w = 0.15 + 0.4 * u(rng), h = 0.15 + 0.4 * u(rng);
    const double x0 = (1.0 - w) * u(rng), y0 = (1.0 - h) * u(rng);
    return std::array<double, 4>{x0, y0, x0 + w, y0 + h};
  };
  std::vector<Detection> out;
  for (std::size_t tag : tags) {
    const int n = 1 + static_cast<int>(u(rng) * 3.0);
    for (int i = 0; i < n; ++i) {
      out.push_back({tag, 0.92 + 0.07 * u(rng), random_box(), frame(rng)});
    }
  }
  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (std::find(tags.begin(), tags.end(), c) == tags.end()) others.push_back(c);
  }
  if (!others.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    const int weak = static_cast<int>(u(rng) * 4.0);
    for (int i = 0; i < weak; ++i) {
      out.push_back({others[pick(rng)], 0.3 + 0.6 * u(rng), random_box(), frame(rng)});
    }
    if (!out.empty() && u(rng) < 0.3) {
      // Confident but overlapping a stronger true detection in the same frame.
      std::uniform_int_distribution<std::size_t> pick_host(0, out.size() - 1);
      const Detection host = out[pick_host(rng)];
      if (host.confidence > kMinConfidence + 0.01) {
        Detection d = host;
        d.class_id = others[pick(rng)];
        d.confidence = kMinConfidence + 0.005 + (host.confidence - kMinConfidence - 0.01) * u(rng);
        const double sx = 0.03 * (host.bbox[2] - host.bbox[0]);
        const double sy = 0.03 * (host.bbox[3] - host.bbox[1]);
        d.bbox = {host.bbox[0] + sx, host.bbox[1] + sy, host.bbox[2] - sx, host.bbox[3] - sy};
        out.push_back(d);
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

void to_json(nlohmann::json& j, const Detection& d) {
  j = {{"class_id", d.class_id},
       {"confidence", d.confidence},
       {"bbox", d.bbox},
       {"frame_index", d.frame_index}};
}

void from_json(const nlohmann::json& j, Detection& d) {
  d.class_id = j.at("class_id");
  d.confidence = j.at("confidence");
  d.bbox = j.at("bbox").get<std::array<double, 4>>();
  d.frame_index = j.at("frame_index");
  validate(d);
}

}  // namespace cosep::corpus
