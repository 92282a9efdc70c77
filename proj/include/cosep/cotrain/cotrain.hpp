#pragma once

// Co-separation training: two clips are mixed, one mask is predicted per
// object of each clip, and the masks of a clip must add up to that clip's
// share of the mixture (co-separation loss) while each masked spectrogram
// stays classifiable as its object (consistency loss). An extra
// "adaptable" class per clip absorbs sound that belongs to no tagged object.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cosep/corpus/corpus.hpp"
#include "cosep/dsp/wav.hpp"
#include "cosep/sepnet/sepnet.hpp"
#include "cosep/tensorcore/adam.hpp"

namespace cosep::cotrain {

enum class LossMode { kCosepOnly, kConsistencyOnly, kFull };

std::string_view loss_mode_name(LossMode m);
LossMode parse_loss_mode(std::string_view s);  // throws ConfigError

struct TrainConfig {
  double lambda = 0.05;  // weight of the consistency loss
  double lr = 1e-4;
  double conditioner_lr_scale = 0.1;
  double weight_decay = 1e-4;
  std::size_t batch_pairs = 8;
  std::size_t steps = 1000;
  std::uint64_t seed = 1;
  bool use_adaptable = true;
  LossMode loss_mode = LossMode::kFull;
  double silent_rms = 1e-4;           // crops quieter than this are redrawn
  std::size_t checkpoint_every = 0;   // 0: final checkpoint only
  std::size_t validate_every = 0;     // 0: no periodic validation

  void validate() const;  // throws ConfigError
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);  // strict

// A training clip held in memory with the object list it is trained on.
struct TrainClip {
  std::string clip_id;
  std::vector<std::size_t> objects;  // sorted class ids, no adaptable entry
  dsp::Waveform audio;
};

// Training clips of `split`. Object lists come from the filtered detections
// of each clip.
std::vector<TrainClip> load_train_clips(const corpus::Manifest& m,
                                        const std::filesystem::path& root,
                                        const std::string& split = "train");

struct TrainingPair {
  std::string clip1, clip2;
  std::size_t offset1 = 0, offset2 = 0;  // crop starts in samples
  std::vector<std::size_t> objects1, objects2;  // adaptable entry last, if used
  dsp::Waveform x1, x2, mixture;                // mixture == x1 + x2
};

// Crop length in samples for which the STFT yields exactly spec_size frames.
std::size_t crop_length(std::size_t spec_size);

struct PairOptions {
  std::size_t spec_size = 64;
  bool use_adaptable = true;
  std::size_t adaptable_class = 0;
  double silent_rms = 1e-4;
};

// Random aligned crops of both clips (offsets redrawn while a crop is
// quieter than silent_rms, up to a fixed number of attempts). Throws on
// sample-rate mismatch, clips shorter than a crop or an empty object list.
TrainingPair make_pair(const TrainClip& a, const TrainClip& b, std::uint64_t seed,
                       const PairOptions& opt);

// Network-side view of a pair: warped spec_size x spec_size grids.
struct PairFeatures {
  std::vector<double> mixture;  // warped |X^M|
  std::vector<double> gt1, gt2; // ground-truth ratio masks of the two clips
  std::vector<double> weight;   // warped |X^M| normalized to mean 1
};
PairFeatures pair_features(const TrainingPair& p, std::size_t spec_size);

// All objects of a batch of pairs, flattened in order pair, clip, object.
struct Batch {
  std::size_t spec_size = 0;
  std::size_t n_pairs = 0;
  Tensor mixture;  // N x 1 x S x S, the object's pair mixture
  std::vector<std::size_t> labels;  // conditioning class per object
  std::vector<std::size_t> video;   // 2 * pair + clip per object
  std::vector<std::size_t> pair;    // pair index per object
  Tensor gt;      // 2P x 1 x S x S
  Tensor weight;  // 2P x 1 x S x S
  std::vector<std::string> pair_ids;
};
Batch make_batch(const std::vector<TrainingPair>& pairs, std::size_t spec_size);

// Sum over clips of the mean over pixels of weight * |sum of the clip's
// masks - ground truth|, averaged over pairs (n_videos / 2).
Var cosep_loss(Var masks, std::span<const std::size_t> video, const Tensor& gt,
               const Tensor& weight);

// Mean cross-entropy over the objects of each group, averaged over groups.
// An empty `group` treats all rows as one group. Labels must be < number of
// logit columns (std::out_of_range otherwise).
Var consistency_loss(Var logits, std::span<const std::size_t> labels,
                     std::span<const std::size_t> group = {});

struct BatchOutput {
  double cosep = 0.0;
  double consistency = 0.0;  // 0 when the mode never runs the classifier
  double total = 0.0;
  Tensor masks;   // N x 1 x S x S
  Tensor logits;  // N x n_classes (empty without classifier)
};

// Forward pass and losses without an optimizer step. `g` must be a
// training graph if gradients are wanted.
BatchOutput forward_batch(Graph& g, sepnet::Sepnet& net, const Batch& b, const TrainConfig& cfg,
                          Var* total_out = nullptr);

// Forward, backward and one Adam step. A non-finite loss throws
// std::runtime_error naming the pairs and the loss components.
BatchOutput train_step(sepnet::Sepnet& net, Adam& adam, const Batch& b, const TrainConfig& cfg);

// Pairs of clip indices drawn without replacement per epoch; a candidate
// sharing a class with the first clip is swapped for the next compatible
// clip of the epoch.
class PairSampler {
 public:
  PairSampler(std::vector<std::vector<std::size_t>> objects, std::uint64_t seed);
  std::pair<std::size_t, std::size_t> next();
  std::mt19937_64& rng() { return rng_; }

 private:
  void reshuffle();
  std::vector<std::vector<std::size_t>> objects_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct TrainHooks {
  std::ostream* log = nullptr;  // one JSON line per step
  // Called every validate_every steps; returns the score to maximize.
  std::function<double(sepnet::Sepnet&)> validate;
  // Called with the step and whether this is the best validation so far;
  // `final` marks the end of training.
  std::function<void(const sepnet::Sepnet&, std::size_t step, bool best, bool final)> checkpoint;
};

struct TrainSummary {
  std::size_t steps = 0;
  double first_total = 0.0;
  double last_total = 0.0;
  std::optional<double> best_validation;
  std::size_t best_step = 0;
  std::vector<double> totals;
};

TrainSummary train(sepnet::Sepnet& net, const std::vector<TrainClip>& clips,
                   const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace cosep::cotrain
