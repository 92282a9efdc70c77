#include "cosep/app/config.hpp"

#include <fstream>

#include "cosep/common/json_fields.hpp"
#include "cosep/tensorcore/kernels.hpp"

namespace cosep::app {

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"filter_len", c.filter_len}, {"pair_seed", c.pair_seed}, {"max_pairs", c.max_pairs},
       {"split", c.split},           {"oracle", c.oracle},       {"mixture", c.mixture},
       {"val_max_pairs", c.val_max_pairs}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  FieldReader r(j, "eval");
  r.opt("filter_len", c.filter_len);
  r.opt("pair_seed", c.pair_seed);
  r.opt("max_pairs", c.max_pairs);
  r.opt("split", c.split);
  r.opt("oracle", c.oracle);
  r.opt("mixture", c.mixture);
  r.opt("val_max_pairs", c.val_max_pairs);
  r.finish();
  if (c.filter_len == 0) throw ConfigError("eval.filter_len must be >= 1");
}

void to_json(nlohmann::json& j, const RuntimeConfig& c) {
  j = {{"threads", c.threads}, {"kernel_isa", c.kernel_isa}, {"deterministic", c.deterministic}};
}

void from_json(const nlohmann::json& j, RuntimeConfig& c) {
  FieldReader r(j, "runtime");
  r.opt("threads", c.threads);
  r.opt("kernel_isa", c.kernel_isa);
  r.opt("deterministic", c.deterministic);
  r.finish();
  if (c.threads == 0) throw ConfigError("runtime.threads must be >= 1");
  try {
    kernels::parse_isa(c.kernel_isa);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("runtime.kernel_isa: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (version != kConfigVersion) {
    throw ConfigError("config version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  model.validate();
  train.validate();
  if (model.n_classes != corpus.n_classes + 1) {
    throw ConfigError("model.n_classes (" + std::to_string(model.n_classes) +
                      ") must be corpus.n_classes + 1 (" + std::to_string(corpus.n_classes + 1) +
                      ")");
  }
  if (corpus.sample_rate != dsp::kDefaultSampleRate) {
    throw ConfigError("corpus.sample_rate must be " + std::to_string(dsp::kDefaultSampleRate));
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"version", c.version}, {"corpus", c.corpus}, {"model", c.model},
       {"train", c.train},     {"eval", c.eval},     {"runtime", c.runtime}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  FieldReader r(j, "config");
  int version = 0;
  r.opt("version", version);
  if (version != kConfigVersion) {
    throw ConfigError("config: missing or unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kConfigVersion) + ")");
  }
  c.version = version;
  if (const auto* s = r.sub("corpus")) c.corpus = s->get<corpus::CorpusConfig>();
  if (const auto* s = r.sub("model")) c.model = s->get<sepnet::SepnetConfig>();
  if (const auto* s = r.sub("train")) c.train = s->get<cotrain::TrainConfig>();
  if (const auto* s = r.sub("eval")) c.eval = s->get<EvalConfig>();
  if (const auto* s = r.sub("runtime")) c.runtime = s->get<RuntimeConfig>();
  r.finish();
}

nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& sets) {
  bool model_classes_set = false;
  bool corpus_classes_set = false;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    const std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    nlohmann::json* node = &doc;
    std::size_t pos = 0;
    for (;;) {
      const auto dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (part.empty()) throw ConfigError("--set: malformed key '" + key + "'");
      if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    *node = value;
    model_classes_set = model_classes_set || key == "model.n_classes";
    corpus_classes_set = corpus_classes_set || key == "corpus.n_classes";
  }
  if (corpus_classes_set && !model_classes_set && doc["corpus"]["n_classes"].is_number_unsigned()) {
    doc["model"]["n_classes"] = doc["corpus"]["n_classes"].get<std::size_t>() + 1;
  }
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& sets) {
  nlohmann::json doc;
  if (path.empty()) {
    doc = ExperimentConfig{};
  } else {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
  }
  ExperimentConfig cfg = apply_overrides(std::move(doc), sets).get<ExperimentConfig>();
  cfg.validate();
  return cfg;
}

}  // namespace cosep::app
