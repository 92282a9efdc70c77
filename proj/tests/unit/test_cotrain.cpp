#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "cosep/common/json_fields.hpp"
#include "cosep/corpus/corpus.hpp"
#include "cosep/cotrain/cotrain.hpp"
#include "cosep/cotrain/infer.hpp"
#include "cosep/dsp/masks.hpp"
#include "cosep/dsp/stft.hpp"
#include "cosep/dsp/warp.hpp"
#include "cosep/tensorcore/ops.hpp"
#include "gradcheck.hpp"

using namespace cosep;
using namespace cosep::cotrain;

namespace {

const std::vector<corpus::SourceClass>& classes() {
  static const auto c = corpus::default_classes(4);
  return c;
}

TrainClip clip(const std::string& id, std::vector<std::size_t> tags, std::uint64_t seed,
               double seconds = 2.5) {
  corpus::ClipOptions opt;
  opt.seconds = seconds;
  TrainClip c;
  c.clip_id = id;
  c.objects = tags;
  c.audio = corpus::make_clip(classes(), tags, seed, opt).mixture;
  return c;
}

sepnet::SepnetConfig small_net(std::size_t spec = 16) {
  sepnet::SepnetConfig c;
  c.spec_size = spec;
  c.base_channels = 8;
  c.cond_dim = 4;
  c.n_classes = 5;
  c.classifier_channels = 4;
  return c;
}

PairOptions popt(std::size_t spec = 16, bool adaptable = true) {
  return PairOptions{spec, adaptable, 4, 1e-4};
}

Batch small_batch(std::uint64_t seed) {
  const auto a = clip("a", {0}, seed), b = clip("b", {1, 2}, seed + 1);
  const auto c = clip("c", {3}, seed + 2), d = clip("d", {0}, seed + 3);
  return make_batch({make_pair(a, b, seed, popt()), make_pair(c, d, seed + 1, popt())}, 16);
}

}  // namespace

TEST_CASE("crop length gives exactly spec_size frames") {
  CHECK(crop_length(64) == 17150);
  CHECK(crop_length(256) == 66302);
  CHECK(dsp::num_frames(crop_length(64)) == 64);
}

TEST_CASE("make_pair builds object lists and an exact mixture") {
  const auto solo1 = clip("s1", {0}, 1), solo2 = clip("s2", {2}, 2), duet = clip("d", {1, 3}, 3);
  auto p = make_pair(solo1, solo2, 7, popt());
  CHECK(p.objects1 == std::vector<std::size_t>{0, 4});
  CHECK(p.objects2 == std::vector<std::size_t>{2, 4});
  auto q = make_pair(duet, solo1, 7, popt());
  CHECK(q.objects1 == std::vector<std::size_t>{1, 3, 4});
  CHECK(q.objects2 == std::vector<std::size_t>{0, 4});
  auto r = make_pair(duet, solo1, 7, popt(16, false));
  CHECK(r.objects1.size() == 2);
  CHECK(r.objects2.size() == 1);
  CHECK(p.x1.size() == crop_length(16));
  for (std::size_t i = 0; i < p.mixture.size(); ++i) {
    CHECK(p.mixture.samples[i] == p.x1.samples[i] + p.x2.samples[i]);
  }
  for (std::size_t i = 0; i < p.x1.size(); ++i) {
    REQUIRE(p.x1.samples[i] == solo1.audio.samples[p.offset1 + i]);
  }
}

TEST_CASE("make_pair crops are seeded") {
  const auto a = clip("a", {0}, 1), b = clip("b", {1}, 2);
  auto p1 = make_pair(a, b, 42, popt()), p2 = make_pair(a, b, 42, popt());
  CHECK(p1.offset1 == p2.offset1);
  CHECK(p1.offset2 == p2.offset2);
  std::set<std::size_t> offsets;
  for (std::uint64_t s = 0; s < 10; ++s) offsets.insert(make_pair(a, b, s, popt()).offset1);
  CHECK(offsets.size() > 1);
}

TEST_CASE("make_pair rejects silent crops and bad inputs") {
  auto a = clip("a", {0}, 1, 3.0);
  for (std::size_t i = 0; i < a.audio.size() / 2; ++i) a.audio.samples[i] = 0.0;
  const auto b = clip("b", {1}, 2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = make_pair(a, b, s, popt(64));
    CHECK(dsp::rms(p.x1.samples) >= 1e-4);
  }
  auto c = b;
  c.audio.sample_rate = 22050;
  CHECK_THROWS_AS(make_pair(a, c, 1, popt()), std::invalid_argument);
  auto shorty = b;
  shorty.audio.samples.resize(1000);
  CHECK_THROWS_AS(make_pair(a, shorty, 1, popt()), std::invalid_argument);
  auto empty = b;
  empty.objects.clear();
  CHECK_THROWS_AS(make_pair(a, empty, 1, popt()), std::invalid_argument);
}

TEST_CASE("pair features: normalized weight and complementary masks") {
  const auto a = clip("a", {0}, 1), b = clip("b", {2}, 2);
  const auto f = pair_features(make_pair(a, b, 3, popt(32)), 32);
  CHECK(f.mixture.size() == 32 * 32);
  double mean = 0.0;
  for (double w : f.weight) mean += w;
  CHECK(std::abs(mean / 1024.0 - 1.0) < 1e-12);
  for (std::size_t i = 0; i < f.gt1.size(); ++i) {
    const double s = f.gt1[i] + f.gt2[i];
    CHECK((s == 0.0 || std::abs(s - 1.0) < 1e-12));
  }
}

TEST_CASE("cosep loss hand values") {
  Graph g;
  const std::vector<std::size_t> video{0, 1};
  Tensor gt({2, 1, 2, 2}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    gt[i] = 0.1 * static_cast<double>(i + 1);
    gt[4 + i] = 1.0 - gt[i];
  }
  Tensor w({2, 1, 2, 2}, 1.0);
  Var exact = g.constant(gt);
  CHECK(cosep_loss(exact, video, gt, w).value()[0] == 0.0);
  Tensor off = gt;
  for (std::size_t i = 0; i < 4; ++i) off[i] += 0.25;
  CHECK(std::abs(cosep_loss(g.constant(off), video, gt, w).value()[0] - 0.25) < 1e-15);

  // Swapping the two clips (masks, targets and weights together) changes nothing.
  Tensor sw({2, 1, 2, 2}), gsw({2, 1, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    sw[i] = off[4 + i];
    sw[4 + i] = off[i];
    gsw[i] = gt[4 + i];
    gsw[4 + i] = gt[i];
  }
  CHECK(std::abs(cosep_loss(g.constant(sw), video, gsw, w).value()[0] - 0.25) < 1e-15);
}

TEST_CASE("cosep loss is zero iff each clip's masks sum to its target") {
  std::mt19937_64 rng(4);
  Graph g;
  const std::vector<std::size_t> video{0, 0, 1};  // duet clip, solo clip
  Tensor gt = testing::random_tensor({2, 1, 3, 3}, rng, 0.0, 1.0);
  Tensor w = testing::random_tensor({2, 1, 3, 3}, rng, 0.1, 2.0);
  Tensor masks({3, 1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) {
    masks[i] = 0.3 * gt[i];
    masks[9 + i] = 0.7 * gt[i];
    masks[18 + i] = gt[9 + i];
  }
  CHECK(std::abs(cosep_loss(g.constant(masks), video, gt, w).value()[0]) < 1e-15);
  masks[20] += 1e-3;
  CHECK(cosep_loss(g.constant(masks), video, gt, w).value()[0] > 0.0);
  CHECK_THROWS_AS(cosep_loss(g.constant(masks), video, gt, Tensor({2, 1, 3, 2}, 1.0)),
                  ShapeError);
}

TEST_CASE("cosep loss gradient") {
  std::mt19937_64 rng(5);
  const std::vector<std::size_t> video{0, 1, 1, 0};
  Tensor gt = testing::random_tensor({2, 1, 3, 3}, rng, 0.0, 1.0);
  Tensor w = testing::random_tensor({2, 1, 3, 3}, rng, 0.1, 2.0);
  auto r = testing::gradcheck(
      {testing::random_tensor({4, 1, 3, 3}, rng, 0.0, 1.0)},
      [&](Graph&, const std::vector<Var>& v) { return cosep_loss(v[0], video, gt, w); }, rng);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("the adaptable class removes the background floor") {
  // One clip holds only untagged background, so its object mask should be
  // zero. Without an adaptable entry the loss cannot drop below the
  // background's weighted mask mass; with one it can reach zero.
  Graph g;
  Tensor gt({2, 1, 2, 2}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    gt[i] = 0.4;
    gt[4 + i] = 0.6;
  }
  Tensor w({2, 1, 2, 2}, 1.0);
  Tensor without({2, 1, 2, 2}, 0.0);  // object of clip 0 (absent), object of clip 1
  for (std::size_t i = 0; i < 4; ++i) without[4 + i] = 0.6;
  const std::vector<std::size_t> v2{0, 1};
  CHECK(std::abs(cosep_loss(g.constant(without), v2, gt, w).value()[0] - 0.4) < 1e-15);
  Tensor with({3, 1, 2, 2}, 0.0);  // plus the adaptable entry of clip 0
  for (std::size_t i = 0; i < 4; ++i) {
    with[4 + i] = 0.6;
    with[8 + i] = 0.4;
  }
  const std::vector<std::size_t> v3{0, 1, 0};
  CHECK(cosep_loss(g.constant(with), v3, gt, w).value()[0] == 0.0);
}

TEST_CASE("consistency loss hand values") {
  Graph g;
  Tensor sat({1, 16}, 0.0);
  sat[3] = 30.0;
  const std::vector<std::size_t> l3{3};
  CHECK(consistency_loss(g.constant(sat), l3).value()[0] < 1e-9);
  const std::vector<std::size_t> l0{0};
  CHECK(std::abs(consistency_loss(g.constant(Tensor({1, 16}, 0.7)), l0).value()[0] -
                 std::log(16.0)) < 1e-12);

  std::mt19937_64 rng(6);
  Tensor logits = testing::random_tensor({4, 5}, rng);
  const std::vector<std::size_t> labels{1, 4, 0, 2};
  std::vector<double> each;
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor row({1, 5});
    for (std::size_t k = 0; k < 5; ++k) row[k] = logits[i * 5 + k];
    const std::vector<std::size_t> li{labels[i]};
    each.push_back(consistency_loss(g.constant(row), li).value()[0]);
  }
  const std::vector<std::size_t> two{1, 4};
  Tensor first2({2, 5});
  for (std::size_t k = 0; k < 10; ++k) first2[k] = logits[k];
  CHECK(std::abs(consistency_loss(g.constant(first2), two).value()[0] - (each[0] + each[1]) / 2) <
        1e-12);
  const std::vector<std::size_t> group{0, 1, 1, 1};
  const double want = (each[0] + (each[1] + each[2] + each[3]) / 3.0) / 2.0;
  CHECK(std::abs(consistency_loss(g.constant(logits), labels, group).value()[0] - want) < 1e-12);
  const std::vector<std::size_t> bad{5, 0, 0, 0};
  CHECK_THROWS_AS(consistency_loss(g.constant(logits), bad), std::out_of_range);
}

TEST_CASE("loss modes") {
  const Batch b = small_batch(10);
  sepnet::Sepnet net(small_net(), 1);
  TrainConfig full, cos, lam0, lam2;
  cos.loss_mode = LossMode::kCosepOnly;
  lam0.lambda = 0.0;
  lam2.lambda = 0.7;
  Graph g1, g2, g3, g4;
  const auto o_full = forward_batch(g1, net, b, full);
  const auto o_cos = forward_batch(g2, net, b, cos);
  const auto o_l0 = forward_batch(g3, net, b, lam0);
  const auto o_l2 = forward_batch(g4, net, b, lam2);
  CHECK(o_full.cosep == o_cos.cosep);
  CHECK(std::abs(o_l0.total - o_cos.total) < 1e-12);
  CHECK(std::abs((o_l2.total - o_full.total) - (0.7 - 0.05) * o_full.consistency) < 1e-12);
  CHECK(o_full.consistency > 0.0);
  CHECK(o_cos.consistency == 0.0);
  CHECK(o_full.masks.shape() == Shape{b.labels.size(), 1, 16, 16});
  CHECK(o_full.logits.shape() == Shape{b.labels.size(), 5});
}

TEST_CASE("cosep_only steps leave the classifier untouched") {
  const Batch b = small_batch(20);
  sepnet::Sepnet net(small_net(), 2);
  std::vector<Tensor> cls_before, sep_before;
  for (const Parameter* p : net.classifier_params()) cls_before.push_back(p->value);
  for (const Parameter* p : net.separator_params()) sep_before.push_back(p->value);
  TrainConfig cfg;
  cfg.loss_mode = LossMode::kCosepOnly;
  Adam adam({1e-3, 0.9, 0.999, 1e-8, 1e-4});
  const auto out = train_step(net, adam, b, cfg);
  CHECK(out.total == out.cosep);
  std::size_t i = 0;
  for (const Parameter* p : net.classifier_params()) CHECK(p->value.storage() == cls_before[i++].storage());
  i = 0;
  bool moved = false;
  for (const Parameter* p : net.separator_params()) moved = moved || p->value.storage() != sep_before[i++].storage();
  CHECK(moved);
}

TEST_CASE("non-finite losses abort with the pair ids") {
  Batch b = small_batch(30);
  b.weight[5] = std::numeric_limits<double>::quiet_NaN();
  sepnet::Sepnet net(small_net(), 3);
  Adam adam;
  try {
    train_step(net, adam, b, TrainConfig{});
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a+b") != std::string::npos);
    CHECK(msg.find("cosep") != std::string::npos);
  }
}

TEST_CASE("pair sampler: disjoint classes, no repeats within an epoch, seeded") {
  std::vector<std::vector<std::size_t>> objects{{0}, {1}, {2}, {0, 1}, {3}, {2, 3}, {1}, {0}};
  PairSampler s(objects, 5), t(objects, 5);
  std::set<std::size_t> seen;
  for (int k = 0; k < 40; ++k) {
    const auto [a, b] = s.next();
    CHECK(t.next() == std::make_pair(a, b));
    for (std::size_t x : objects[a])
      CHECK(std::find(objects[b].begin(), objects[b].end(), x) == objects[b].end());
    CHECK(a != b);
  }
  PairSampler u(objects, 9);
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = u.next();
    CHECK(seen.insert(a).second);
    CHECK(seen.insert(b).second);
  }
  CHECK_THROWS_AS(PairSampler({{0}, {0}, {0, 1}}, 1), std::invalid_argument);
}

TEST_CASE("training is deterministic and lowers the loss") {
  std::vector<TrainClip> clips;
  for (std::size_t i = 0; i < 8; ++i) clips.push_back(clip("c" + std::to_string(i), {i % 4}, 50 + i));
  clips.push_back(clip("d0", {0, 2}, 70));
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.batch_pairs = 2;
  cfg.lr = 3e-3;
  std::vector<double> runs[2];
  for (auto& r : runs) {
    sepnet::Sepnet net(small_net(), 11);
    r = train(net, clips, cfg).totals;
  }
  CHECK(runs[0] == runs[1]);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += runs[0][i];
    tail += runs[0][30 + i];
  }
  CHECK(tail < head);
}

TEST_CASE("train config JSON is strict and round trips") {
  TrainConfig c;
  c.loss_mode = LossMode::kConsistencyOnly;
  c.steps = 17;
  nlohmann::json j = c;
  CHECK(j.get<TrainConfig>() == c);
  j["extra"] = 1;
  CHECK_THROWS_AS(j.get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS((nlohmann::json{{"loss_mode", "both"}}.get<TrainConfig>()), ConfigError);
  CHECK_THROWS_AS((nlohmann::json{{"lambda", -1.0}}.get<TrainConfig>()), ConfigError);
}

TEST_CASE("sliding windows") {
  CHECK(window_starts(64, 64) == std::vector<std::size_t>{0});
  CHECK(window_starts(100, 64) == std::vector<std::size_t>{0, 16, 32, 36});
  CHECK(window_starts(96, 64) == std::vector<std::size_t>{0, 16, 32});
  CHECK_THROWS_AS(window_starts(63, 64), std::invalid_argument);
}

TEST_CASE("a one-window clip matches single-shot separation") {
  sepnet::Sepnet net(small_net(), 4);
  const auto a = clip("a", {1}, 5);
  dsp::Waveform w = a.audio;
  w.samples.resize(crop_length(16));
  const std::size_t cls[] = {1, 4};
  const auto sep = separate_clip(net, w, cls);
  const auto spec = dsp::stft(w);
  const auto mag = dsp::log_warp_for(16, spec.freq).warp(dsp::magnitude(spec));
  Graph g(false);
  Tensor x({2, 1, 16, 16});
  for (std::size_t r = 0; r < 2; ++r) std::copy(mag.values.begin(), mag.values.end(), x.ptr() + r * 256);
  const std::vector<std::size_t> ids{1, 4};
  const Tensor m = net.separate(g, g.constant(x), net.condition(g, ids)).value();
  for (std::size_t k = 0; k < 2; ++k) {
    dsp::RatioMask mk(16, 16, dsp::FreqAxis::kWarped);
    std::copy(m.ptr() + k * 256, m.ptr() + (k + 1) * 256, mk.values.begin());
    CHECK(sep.masks[k].values == mk.values);
    CHECK(sep.tracks[k].samples == dsp::reconstruct(mk, spec, w.size()).samples);
  }
}

TEST_CASE("windowed averaging of stationary input equals one window") {
  sepnet::Sepnet net(small_net(), 5);
  // Period 64 samples divides the hop, so every frame sees the same signal.
  dsp::Waveform w;
  const std::size_t n = dsp::samples_for_frames(40);
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(i % 64) / 64.0;
    w.samples.push_back(0.3 * std::sin(ph) + 0.1 * std::sin(5.0 * ph));
  }
  const std::size_t cls[] = {2};
  const auto whole = separate_clip(net, w, cls);
  dsp::Waveform one = w;
  one.samples.resize(crop_length(16));
  const auto single = separate_clip(net, one, cls);
  // Every window sees the same input, so frame t averages the single-window
  // mask at each local position t - s of the windows covering it.
  const auto starts = window_starts(40, 16);
  for (std::size_t f = 0; f < 16; ++f) {
    for (std::size_t t = 0; t < 40; ++t) {
      double acc = 0.0;
      int n = 0;
      for (std::size_t s : starts) {
        if (t >= s && t < s + 16) {
          acc += single.masks[0].at(f, t - s);
          ++n;
        }
      }
      CHECK(std::abs(whole.masks[0].at(f, t) - acc / n) < 1e-9);
    }
  }
}

TEST_CASE("inference output contracts") {
  sepnet::Sepnet net(small_net(), 6);
  const auto duet = clip("d", {0, 3}, 8);
  const std::size_t both[] = {0, 3};
  const auto tracks = infer_clip(net, duet.audio, both);
  REQUIRE(tracks.size() == 2);
  for (const auto& t : tracks) CHECK(t.size() == duet.audio.size());

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 0.1);
  dsp::Waveform noise;
  noise.samples.resize(duet.audio.size());
  for (double& v : noise.samples) v = nd(rng);
  const auto den = denoise(net, noise, 2);
  CHECK(den.size() == noise.size());
  CHECK(dsp::rms(den.samples) < dsp::rms(noise.samples));

  const std::size_t bad[] = {5};
  CHECK_THROWS_AS(infer_clip(net, duet.audio, bad), std::invalid_argument);
  CHECK_THROWS_AS(infer_clip(net, duet.audio, {}), std::invalid_argument);
  dsp::Waveform shorty = duet.audio;
  shorty.samples.resize(2000);
  const std::size_t one[] = {0};
  CHECK_THROWS_AS(infer_clip(net, shorty, one), std::invalid_argument);
}
