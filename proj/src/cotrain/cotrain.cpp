#include "cosep/cotrain/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cosep/common/json_fields.hpp"
#include "cosep/corpus/detections.hpp"
#include "cosep/dsp/masks.hpp"
#include "cosep/dsp/stft.hpp"
#include "cosep/dsp/warp.hpp"
#include "cosep/tensorcore/ops.hpp"

namespace cosep::cotrain {
namespace {

constexpr int kCropAttempts = 32;

bool disjoint(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) return false;
  return true;
}

std::vector<double> warped_magnitude(const dsp::ComplexSpectrogram& s, std::size_t spec_size) {
  return dsp::log_warp_for(spec_size, s.freq).warp(dsp::magnitude(s)).values;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string_view loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::kCosepOnly:
      return "cosep_only";
    case LossMode::kConsistencyOnly:
      return "consistency_only";
    case LossMode::kFull:
      return "full";
  }
  return "full";
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "cosep_only") return LossMode::kCosepOnly;
  if (s == "consistency_only") return LossMode::kConsistencyOnly;
  if (s == "full") return LossMode::kFull;
  throw ConfigError("unknown loss_mode '" + std::string(s) +
                    "' (expected cosep_only, consistency_only or full)");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(conditioner_lr_scale >= 0.0)) throw ConfigError("conditioner_lr_scale must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_pairs == 0) throw ConfigError("batch_pairs must be >= 1");
  if (!(silent_rms >= 0.0)) throw ConfigError("silent_rms must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lambda", c.lambda},
       {"lr", c.lr},
       {"conditioner_lr_scale", c.conditioner_lr_scale},
       {"weight_decay", c.weight_decay},
       {"batch_pairs", c.batch_pairs},
       {"steps", c.steps},
       {"seed", c.seed},
       {"use_adaptable", c.use_adaptable},
       {"loss_mode", std::string(loss_mode_name(c.loss_mode))},
       {"silent_rms", c.silent_rms},
       {"checkpoint_every", c.checkpoint_every},
       {"validate_every", c.validate_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  FieldReader r(j, "train");
  r.opt("lambda", c.lambda);
  r.opt("lr", c.lr);
  r.opt("conditioner_lr_scale", c.conditioner_lr_scale);
  r.opt("weight_decay", c.weight_decay);
  r.opt("batch_pairs", c.batch_pairs);
  r.opt("steps", c.steps);
  r.opt("seed", c.seed);
  r.opt("use_adaptable", c.use_adaptable);
  std::string mode(loss_mode_name(c.loss_mode));
  r.opt("loss_mode", mode);
  c.loss_mode = parse_loss_mode(mode);
  r.opt("silent_rms", c.silent_rms);
  r.opt("checkpoint_every", c.checkpoint_every);
  r.opt("validate_every", c.validate_every);
  r.finish();
  c.validate();
}

std::vector<TrainClip> load_train_clips(const corpus::Manifest& m,
                                        const std::filesystem::path& root,
                                        const std::string& split) {
  std::vector<TrainClip> out;
  for (const corpus::ClipRecord* rec : m.split(split)) {
    TrainClip c;
    c.clip_id = rec->clip_id;
    c.objects = corpus::detected_classes(corpus::filter_detections(rec->detections));
    std::sort(c.objects.begin(), c.objects.end());
    if (c.objects.empty()) continue;  // nothing to condition on
    c.audio = corpus::load_clip(m, root, *rec, false).mixture;
    out.push_back(std::move(c));
  }
  return out;
}

std::size_t crop_length(std::size_t spec_size) { return dsp::samples_for_frames(spec_size); }

TrainingPair make_pair(const TrainClip& a, const TrainClip& b, std::uint64_t seed,
                       const PairOptions& opt) {
  if (a.audio.sample_rate != b.audio.sample_rate) {
    throw std::invalid_argument("make_pair: sample rates differ (" +
                                std::to_string(a.audio.sample_rate) + " vs " +
                                std::to_string(b.audio.sample_rate) + ")");
  }
  if (a.objects.empty() || b.objects.empty()) {
    throw std::invalid_argument("make_pair: clip without objects");
  }
  const std::size_t len = crop_length(opt.spec_size);
  std::mt19937_64 rng(seed);
  auto crop = [&](const TrainClip& c, std::size_t& offset) {
    if (c.audio.size() < len) {
      throw std::invalid_argument("make_pair: clip " + c.clip_id + " shorter than a crop (" +
                                  std::to_string(len) + " samples)");
    }
    std::uniform_int_distribution<std::size_t> pick(0, c.audio.size() - len);
    dsp::Waveform w;
    w.sample_rate = c.audio.sample_rate;
    for (int attempt = 0; attempt < kCropAttempts; ++attempt) {
      offset = pick(rng);
      w.samples.assign(c.audio.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                       c.audio.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
      if (dsp::rms(w.samples) >= opt.silent_rms) break;
    }
    return w;
  };
  TrainingPair p;
  p.clip1 = a.clip_id;
  p.clip2 = b.clip_id;
  p.x1 = crop(a, p.offset1);
  p.x2 = crop(b, p.offset2);
  p.objects1 = a.objects;
  p.objects2 = b.objects;
  if (opt.use_adaptable) {
    p.objects1.push_back(opt.adaptable_class);
    p.objects2.push_back(opt.adaptable_class);
  }
  p.mixture = p.x1;
  for (std::size_t i = 0; i < len; ++i) p.mixture.samples[i] += p.x2.samples[i];
  return p;
}

PairFeatures pair_features(const TrainingPair& p, std::size_t spec_size) {
  const auto s1 = dsp::stft(p.x1), s2 = dsp::stft(p.x2), sm = dsp::stft(p.mixture);
  if (sm.time != spec_size) {
    throw std::invalid_argument("pair_features: crop gives " + std::to_string(sm.time) +
                                " frames, expected " + std::to_string(spec_size));
  }
  const dsp::LogWarp& warp = dsp::log_warp_for(spec_size, sm.freq);
  auto [m1, m2] = dsp::gt_ratio_masks(warp.warp(dsp::magnitude(s1)), warp.warp(dsp::magnitude(s2)));
  PairFeatures f;
  f.mixture = warped_magnitude(sm, spec_size);
  f.gt1 = std::move(m1.values);
  f.gt2 = std::move(m2.values);
  double mean = 0.0;
  for (double v : f.mixture) mean += v;
  mean /= static_cast<double>(f.mixture.size());
  f.weight.resize(f.mixture.size(), 1.0);
  if (mean > 0.0) {
    for (std::size_t i = 0; i < f.weight.size(); ++i) f.weight[i] = f.mixture[i] / mean;
  }
  return f;
}

Batch make_batch(const std::vector<TrainingPair>& pairs, std::size_t spec_size) {
  if (pairs.empty()) throw std::invalid_argument("make_batch: no pairs");
  const std::size_t px = spec_size * spec_size;
  Batch b;
  b.spec_size = spec_size;
  b.n_pairs = pairs.size();
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.objects1.size() + p.objects2.size();
  b.mixture = Tensor({n, 1, spec_size, spec_size});
  b.gt = Tensor({2 * pairs.size(), 1, spec_size, spec_size});
  b.weight = Tensor({2 * pairs.size(), 1, spec_size, spec_size});
  std::size_t row = 0;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const PairFeatures f = pair_features(pairs[pi], spec_size);
    std::copy(f.gt1.begin(), f.gt1.end(), b.gt.ptr() + (2 * pi) * px);
    std::copy(f.gt2.begin(), f.gt2.end(), b.gt.ptr() + (2 * pi + 1) * px);
    std::copy(f.weight.begin(), f.weight.end(), b.weight.ptr() + (2 * pi) * px);
    std::copy(f.weight.begin(), f.weight.end(), b.weight.ptr() + (2 * pi + 1) * px);
    const std::vector<std::size_t>* lists[2] = {&pairs[pi].objects1, &pairs[pi].objects2};
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t cls : *lists[c]) {
        std::copy(f.mixture.begin(), f.mixture.end(), b.mixture.ptr() + row * px);
        b.labels.push_back(cls);
        b.video.push_back(2 * pi + c);
        b.pair.push_back(pi);
        ++row;
      }
    }
    b.pair_ids.push_back(pairs[pi].clip1 + "+" + pairs[pi].clip2);
  }
  return b;
}

Var cosep_loss(Var masks, std::span<const std::size_t> video, const Tensor& gt,
               const Tensor& weight) {
  if (gt.shape() != weight.shape()) {
    throw ShapeError("cosep_loss: ground truth " + shape_str(gt.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  if (gt.shape().empty() || gt.shape()[0] % 2 != 0) {
    throw ShapeError("cosep_loss: ground truth must hold two clips per pair, got " +
                     shape_str(gt.shape()));
  }
  const std::size_t n_videos = gt.shape()[0];
  Var sums = ops::segment_sum(masks, video, n_videos);
  const double pixels = static_cast<double>(gt.size() / n_videos);
  return ops::weighted_l1(sums, gt, weight, 2.0 / (pixels * static_cast<double>(n_videos)));
}

Var consistency_loss(Var logits, std::span<const std::size_t> labels,
                     std::span<const std::size_t> group) {
  const auto& shape = logits.shape();
  if (shape.size() != 2) throw ShapeError("consistency_loss: logits must be N x K");
  for (std::size_t l : labels) {
    if (l >= shape[1]) {
      throw std::out_of_range("consistency_loss: label " + std::to_string(l) +
                              " outside 0.." + std::to_string(shape[1] - 1));
    }
  }
  if (group.empty()) return ops::softmax_cross_entropy(logits, labels);
  if (group.size() != labels.size()) {
    throw ShapeError("consistency_loss: " + std::to_string(group.size()) + " group ids for " +
                     std::to_string(labels.size()) + " rows");
  }
  const std::size_t n_groups = *std::max_element(group.begin(), group.end()) + 1;
  std::vector<double> count(n_groups, 0.0);
  for (std::size_t g : group) count[g] += 1.0;
  std::size_t used = 0;
  for (double c : count) used += c > 0.0;
  std::vector<double> w(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    w[i] = 1.0 / (count[group[i]] * static_cast<double>(used));
  }
  return ops::softmax_cross_entropy(logits, labels, w);
}

BatchOutput forward_batch(Graph& g, sepnet::Sepnet& net, const Batch& b, const TrainConfig& cfg,
                          Var* total_out) {
  BatchOutput out;
  Var mix = g.constant(b.mixture);
  Var masks = net.separate(g, mix, net.condition(g, b.labels));
  Var lc = cosep_loss(masks, b.video, b.gt, b.weight);
  out.cosep = lc.value()[0];
  out.masks = masks.value();
  Var total = lc;
  if (cfg.loss_mode != LossMode::kCosepOnly) {
    const auto cls = net.classify(g, ops::mul(masks, mix));
    Var lk = consistency_loss(cls.logits, b.labels, b.pair);
    out.consistency = lk.value()[0];
    out.logits = cls.logits.value();
    total = cfg.loss_mode == LossMode::kFull ? ops::add(lc, ops::scale(lk, cfg.lambda)) : lk;
  }
  out.total = total.value()[0];
  if (total_out != nullptr) *total_out = total;
  return out;
}

BatchOutput train_step(sepnet::Sepnet& net, Adam& adam, const Batch& b, const TrainConfig& cfg) {
  net.store().zero_grad();
  Graph g(true);
  Var total;
  BatchOutput out = forward_batch(g, net, b, cfg, &total);
  if (!std::isfinite(out.total) || !std::isfinite(out.cosep) ||
      !std::isfinite(out.consistency)) {
    std::string ids;
    for (const auto& id : b.pair_ids) ids += (ids.empty() ? "" : ", ") + id;
    throw std::runtime_error("non-finite loss (cosep " + fmt(out.cosep) + ", consistency " +
                             fmt(out.consistency) + ", total " + fmt(out.total) +
                             ") on pairs " + ids);
  }
  g.backward(total);
  adam.step(net.store());
  return out;
}

PairSampler::PairSampler(std::vector<std::vector<std::size_t>> objects, std::uint64_t seed)
    : objects_(std::move(objects)), rng_(seed) {
  bool any = false;
  for (std::size_t i = 0; i < objects_.size() && !any; ++i)
    for (std::size_t j = i + 1; j < objects_.size() && !any; ++j)
      any = disjoint(objects_[i], objects_[j]);
  if (!any) throw std::invalid_argument("no two training clips have disjoint object classes");
  reshuffle();
}

void PairSampler::reshuffle() {
  order_.resize(objects_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(order_[i - 1], order_[d(rng_)]);
  }
  pos_ = 0;
}

std::pair<std::size_t, std::size_t> PairSampler::next() {
  for (;;) {
    if (pos_ + 2 > order_.size()) reshuffle();
    const std::size_t a = order_[pos_];
    for (std::size_t k = pos_ + 1; k < order_.size(); ++k) {
      if (disjoint(objects_[a], objects_[order_[k]])) {
        std::swap(order_[pos_ + 1], order_[k]);
        pos_ += 2;
        return {a, order_[pos_ - 1]};
      }
    }
    // Nothing left in this epoch pairs with `a`; drop it from the epoch.
    ++pos_;
  }
}

TrainSummary train(sepnet::Sepnet& net, const std::vector<TrainClip>& clips,
                   const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (clips.size() < 2) throw std::invalid_argument("train: need at least two training clips");
  const auto& scfg = net.config();
  for (const auto& c : clips) {
    for (std::size_t o : c.objects) {
      if (o >= scfg.adaptable_class()) {
        throw std::invalid_argument("train: clip " + c.clip_id + " has class " +
                                    std::to_string(o) + " but the model knows " +
                                    std::to_string(scfg.adaptable_class()) + " classes");
      }
    }
  }
  net.store().param("cond.table").lr_scale = cfg.conditioner_lr_scale;
  Adam adam({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::vector<std::vector<std::size_t>> objects;
  for (const auto& c : clips) objects.push_back(c.objects);
  PairSampler sampler(std::move(objects), cfg.seed);
  PairOptions popt{scfg.spec_size, cfg.use_adaptable, scfg.adaptable_class(), cfg.silent_rms};

  TrainSummary sum;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<TrainingPair> pairs;
    for (std::size_t k = 0; k < cfg.batch_pairs; ++k) {
      const auto [i, j] = sampler.next();
      pairs.push_back(make_pair(clips[i], clips[j], sampler.rng()(), popt));
    }
    const BatchOutput out = train_step(net, adam, make_batch(pairs, scfg.spec_size), cfg);
    if (step == 1) sum.first_total = out.total;
    sum.last_total = out.total;
    sum.totals.push_back(out.total);
    sum.steps = step;
    if (hooks.log != nullptr) {
      nlohmann::json line = {{"step", step},
                             {"cosep", out.cosep},
                             {"consistency", out.consistency},
                             {"total", out.total},
                             {"lr", cfg.lr}};
      *hooks.log << line.dump() << '\n';
      hooks.log->flush();
    }
    bool best = false;
    if (cfg.validate_every > 0 && step % cfg.validate_every == 0 && hooks.validate) {
      const double score = hooks.validate(net);
      if (!sum.best_validation || score > *sum.best_validation) {
        sum.best_validation = score;
        sum.best_step = step;
        best = true;
      }
      if (hooks.log != nullptr) {
        *hooks.log << nlohmann::json{{"step", step}, {"validation", score}, {"best", best}}.dump()
                   << '\n';
      }
    }
    const bool periodic = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0;
    if ((best || periodic) && hooks.checkpoint) hooks.checkpoint(net, step, best, false);
  }
  if (hooks.checkpoint) hooks.checkpoint(net, sum.steps, false, true);
  return sum;
}

}  // namespace cosep::cotrain
