#include "cosep/sepnet/sepnet.hpp"

#include <random>
#include <stdexcept>
#include <string>

#include "cosep/common/json_fields.hpp"
#include "cosep/tensorcore/checkpoint.hpp"
#include "cosep/tensorcore/ops.hpp"

namespace cosep::sepnet {
namespace {

constexpr std::size_t kKernel = 4;
const ops::Conv2dOptions kDown{2, 1};

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

std::size_t SepnetConfig::n_layers() const {
  std::size_t l = 0;
  for (std::size_t s = spec_size; s > 2; s /= 2) ++l;
  return l;
}

std::vector<std::size_t> SepnetConfig::encoder_channels() const {
  std::vector<std::size_t> ch;
  std::size_t c = std::max<std::size_t>(1, base_channels / 8);
  for (std::size_t i = 0; i < n_layers(); ++i) {
    ch.push_back(std::min(c, base_channels));
    c *= 2;
  }
  return ch;
}

void SepnetConfig::validate() const {
  if (!is_pow2(spec_size) || spec_size < 16) {
    throw ConfigError("sepnet.spec_size must be a power of two >= 16, got " +
                      std::to_string(spec_size));
  }
  if (base_channels < 1 || cond_dim < 1 || classifier_channels < 1) {
    throw ConfigError("sepnet channel counts must be positive");
  }
  if (n_classes < 2) throw ConfigError("sepnet.n_classes must be >= 2 (objects + adaptable)");
}

void to_json(nlohmann::json& j, const SepnetConfig& c) {
  j = {{"spec_size", c.spec_size},
       {"base_channels", c.base_channels},
       {"cond_dim", c.cond_dim},
       {"n_classes", c.n_classes},
       {"classifier_channels", c.classifier_channels},
       {"log_input", c.log_input}};
}

void from_json(const nlohmann::json& j, SepnetConfig& c) {
  FieldReader r(j, "sepnet");
  r.opt("spec_size", c.spec_size);
  r.opt("base_channels", c.base_channels);
  r.opt("cond_dim", c.cond_dim);
  r.opt("n_classes", c.n_classes);
  r.opt("classifier_channels", c.classifier_channels);
  r.opt("log_input", c.log_input);
  r.finish();
}

Sepnet::Sepnet(const SepnetConfig& cfg, std::uint64_t seed, double conditioner_lr_scale)
    : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  auto add_bn = [&](const std::string& p, std::size_t c) {
    store_.add(p + ".bn.gamma", Tensor({c}, 1.0));
    store_.add(p + ".bn.beta", Tensor({c}, 0.0));
    store_.add_buffer(p + ".bn.mean", Tensor({c}, 0.0));
    store_.add_buffer(p + ".bn.var", Tensor({c}, 1.0));
  };
  auto add_conv = [&](const std::string& p, std::size_t in, std::size_t out, bool with_bn) {
    store_.add(p + ".w", he_normal({out, in, kKernel, kKernel}, in * kKernel * kKernel, rng));
    store_.add(p + ".b", Tensor({out}, 0.0));
    if (with_bn) add_bn(p, out);
  };
  // Transposed 4x4 stride-2: each output pixel receives in * 4 weighted terms.
  auto add_tconv = [&](const std::string& p, std::size_t in, std::size_t out, bool with_bn) {
    store_.add(p + ".w", he_normal({in, out, kKernel, kKernel}, in * kKernel * kKernel / 4, rng));
    store_.add(p + ".b", Tensor({out}, 0.0));
    if (with_bn) add_bn(p, out);
  };

  const auto enc = cfg_.encoder_channels();
  const std::size_t L = enc.size();
  for (std::size_t i = 0; i < L; ++i) {
    add_conv("sep.enc" + std::to_string(i), i == 0 ? 1 : enc[i - 1], enc[i], true);
  }
  for (std::size_t d = 0; d < L; ++d) {
    const std::size_t in = d == 0 ? enc[L - 1] + cfg_.cond_dim : 2 * enc[L - 1 - d];
    const bool last = d + 1 == L;
    add_tconv("sep.dec" + std::to_string(d), in, last ? 1 : enc[L - 2 - d], !last);
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  Tensor table({cfg_.n_classes, cfg_.cond_dim});
  for (double& v : table.data()) v = unit(rng);
  store_.add("cond.table", std::move(table), conditioner_lr_scale);

  std::size_t in = 1, ch = cfg_.classifier_channels;
  for (std::size_t i = 0; i < classifier_blocks_; ++i) {
    const std::size_t out = std::min(ch, 4 * cfg_.classifier_channels);
    add_conv("cls.conv" + std::to_string(i), in, out, true);
    in = out;
    ch *= 2;
  }
  store_.add("cls.fc.w", he_normal({cfg_.n_classes, in}, in, rng));
  store_.add("cls.fc.b", Tensor({cfg_.n_classes}, 0.0));
}

Var Sepnet::bn(Graph& g, Var x, const std::string& p) {
  return ops::batch_norm(x, g.parameter(store_.param(p + ".bn.gamma")),
                         g.parameter(store_.param(p + ".bn.beta")),
                         store_.buffer(p + ".bn.mean").value, store_.buffer(p + ".bn.var").value,
                         {});
}

Var Sepnet::conv_block(Graph& g, Var x, const std::string& p, bool leaky) {
  Var y = ops::conv2d(x, g.parameter(store_.param(p + ".w")), g.parameter(store_.param(p + ".b")),
                      kDown);
  y = bn(g, y, p);
  return leaky ? ops::leaky_relu(y, 0.2) : ops::relu(y);
}

Var Sepnet::condition(Graph& g, std::span<const std::size_t> class_ids) {
  for (std::size_t id : class_ids) {
    if (id >= cfg_.n_classes) {
      throw std::out_of_range("condition: class id " + std::to_string(id) + " outside 0.." +
                              std::to_string(cfg_.n_classes - 1));
    }
  }
  return ops::gather_rows(g.parameter(store_.param("cond.table")), class_ids);
}

Var Sepnet::separate(Graph& g, Var mag, Var cond) {
  const Shape& s = mag.shape();
  const std::size_t S = cfg_.spec_size;
  if (s.size() != 4 || s[1] != 1 || s[2] != S || s[3] != S) {
    throw ShapeError("separate: expected N x 1 x " + std::to_string(S) + " x " +
                     std::to_string(S) + " input, got " + shape_str(s));
  }
  if (cond.shape() != Shape{s[0], cfg_.cond_dim}) {
    throw ShapeError("separate: condition " + shape_str(cond.shape()) + " does not match batch " +
                     std::to_string(s[0]) + " x " + std::to_string(cfg_.cond_dim));
  }
  Var x = cfg_.log_input ? ops::log1p(mag) : mag;
  const std::size_t L = cfg_.n_layers();
  std::vector<Var> skips;
  for (std::size_t i = 0; i < L; ++i) {
    x = conv_block(g, x, "sep.enc" + std::to_string(i), true);
    skips.push_back(x);
  }
  x = ops::concat_channels(x, ops::tile_spatial(cond, 2, 2));
  for (std::size_t d = 0; d < L; ++d) {
    const std::string p = "sep.dec" + std::to_string(d);
    x = ops::conv_transpose2d(x, g.parameter(store_.param(p + ".w")),
                              g.parameter(store_.param(p + ".b")), kDown);
    if (d + 1 == L) return ops::sigmoid(x);
    x = ops::relu(bn(g, x, p));
    x = ops::concat_channels(x, skips[L - 2 - d]);
  }
  return x;  // unreachable: L >= 3
}

ClassifierOutput Sepnet::classify(Graph& g, Var spec) {
  const Shape& s = spec.shape();
  const std::size_t S = cfg_.spec_size;
  if (s.size() != 4 || s[1] != 1 || s[2] != S || s[3] != S) {
    throw ShapeError("classify: expected N x 1 x " + std::to_string(S) + " x " +
                     std::to_string(S) + " input, got " + shape_str(s));
  }
  Var x = cfg_.log_input ? ops::log1p(spec) : spec;
  for (std::size_t i = 0; i < classifier_blocks_; ++i) {
    x = conv_block(g, x, "cls.conv" + std::to_string(i), false);
  }
  Var feat = ops::global_avg_pool(x);
  Var logits = ops::linear(feat, g.parameter(store_.param("cls.fc.w")),
                           g.parameter(store_.param("cls.fc.b")));
  return {logits, feat};
}

std::vector<const Parameter*> Sepnet::separator_params() const {
  std::vector<const Parameter*> out;
  for (const auto& p : store_.params()) {
    if (p.name.rfind("sep.", 0) == 0 || p.name.rfind("cond.", 0) == 0) out.push_back(&p);
  }
  return out;
}

std::vector<const Parameter*> Sepnet::classifier_params() const {
  std::vector<const Parameter*> out;
  for (const auto& p : store_.params()) {
    if (p.name.rfind("cls.", 0) == 0) out.push_back(&p);
  }
  return out;
}

void save_model(const std::string& path, const Sepnet& net, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["sepnet"] = net.config();
  save_checkpoint(path, net.store(), meta);
}

SepnetConfig read_model_config(const std::string& path) {
  const auto meta = read_checkpoint_meta(path);
  if (!meta.contains("sepnet")) throw std::runtime_error("checkpoint has no model config: " + path);
  return meta.at("sepnet").get<SepnetConfig>();
}

nlohmann::json load_model(const std::string& path, Sepnet& net) {
  if (read_model_config(path) != net.config()) {
    throw std::runtime_error("checkpoint " + path + " was written for a different model config");
  }
  return load_checkpoint(path, net.store());
}

}  // namespace cosep::sepnet
