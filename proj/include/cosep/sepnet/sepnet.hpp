#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cosep/tensorcore/graph.hpp"
#include "cosep/tensorcore/params.hpp"

namespace cosep::sepnet {

struct SepnetConfig {
  std::size_t spec_size = 64;       // T = F of the network input
  std::size_t base_channels = 64;   // widest encoder layer
  std::size_t cond_dim = 64;
  std::size_t n_classes = 7;        // object classes + 1 adaptable
  std::size_t classifier_channels = 16;  // first classifier block; doubles, capped at 4x
  bool log_input = true;            // feed log(1 + magnitude)

  // log2(spec_size) - 1 stride-2 layers take spec_size down to 2x2.
  std::size_t n_layers() const;
  // Output channels of each encoder layer.
  std::vector<std::size_t> encoder_channels() const;
  std::size_t adaptable_class() const { return n_classes - 1; }
  // Throws ConfigError on violated invariants.
  void validate() const;

  bool operator==(const SepnetConfig&) const = default;
};

void to_json(nlohmann::json& j, const SepnetConfig& c);
void from_json(const nlohmann::json& j, SepnetConfig& c);  // strict

struct ClassifierOutput {
  Var logits;    // N x n_classes
  Var features;  // N x channels, pooled before the affine head
};

// Mask U-Net, class-embedding conditioner and audio classifier sharing one
// parameter store (prefixes "sep.", "cond.", "cls.").
class Sepnet {
 public:
  // `conditioner_lr_scale` multiplies the optimizer rate of the embedding.
  Sepnet(const SepnetConfig& cfg, std::uint64_t seed, double conditioner_lr_scale = 0.1);

  const SepnetConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  // Embedding rows for the given class ids (N x cond_dim).
  Var condition(Graph& g, std::span<const std::size_t> class_ids);

  // mag: N x 1 x S x S warped magnitudes; cond: N x cond_dim.
  // Returns masks of the same shape as mag, values in (0, 1).
  Var separate(Graph& g, Var mag, Var cond);

  // spec: N x 1 x S x S magnitudes (e.g. mask * mixture).
  ClassifierOutput classify(Graph& g, Var spec);

  // Parameters reachable from each head, for freezing and reporting.
  std::vector<const Parameter*> separator_params() const;
  std::vector<const Parameter*> classifier_params() const;

 private:
  Var conv_block(Graph& g, Var x, const std::string& prefix, bool leaky);
  Var bn(Graph& g, Var x, const std::string& prefix);

  SepnetConfig cfg_;
  ParameterStore store_;
  std::size_t classifier_blocks_ = 4;
};

// Checkpoint helpers: the config is stored in the metadata and compared on
// load (mismatch -> std::runtime_error).
void save_model(const std::string& path, const Sepnet& net, const nlohmann::json& extra = {});
nlohmann::json load_model(const std::string& path, Sepnet& net);
SepnetConfig read_model_config(const std::string& path);

}  // namespace cosep::sepnet
