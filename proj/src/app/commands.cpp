#include "cosep/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <stdexcept>

#include <zlib.h>

#include "cosep/app/evaluate.hpp"
#include "cosep/app/png.hpp"
#include "cosep/common/json_fields.hpp"
#include "cosep/cotrain/infer.hpp"
#include "cosep/dsp/resample.hpp"
#include "cosep/tensorcore/kernels.hpp"

namespace cosep::app {
namespace fs = std::filesystem;
namespace {

corpus::Manifest open_corpus(const ExperimentConfig& cfg, const fs::path& dir) {
  corpus::Manifest m = corpus::read_manifest(dir);
  if (m.n_classes() != cfg.corpus.n_classes || m.n_classes() + 1 != cfg.model.n_classes) {
    throw ConfigError("corpus/config mismatch: corpus has C=" + std::to_string(m.n_classes()) +
                      ", config has corpus.n_classes=" + std::to_string(cfg.corpus.n_classes) +
                      " and model.n_classes=" + std::to_string(cfg.model.n_classes));
  }
  return m;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::vector<std::string> class_names(const corpus::Manifest& m) {
  std::vector<std::string> out;
  for (const auto& c : m.classes) out.push_back(c.name);
  return out;
}

nlohmann::json summary_json(const EvalReport& r) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : r.summary) {
    if (s.class_id) continue;
    out[s.method] = {{"n", s.n},
                     {"sdr", s.sdr.mean},
                     {"sdr_se", s.sdr.stderr_},
                     {"sir", s.sir.mean},
                     {"sar", s.sar.mean},
                     {"nsdr", s.nsdr.mean}};
  }
  return out;
}

std::unique_ptr<sepnet::Sepnet> open_model(const fs::path& checkpoint, nlohmann::json* meta) {
  const auto mc = sepnet::read_model_config(checkpoint.string());
  auto net = std::make_unique<sepnet::Sepnet>(mc, 0);
  nlohmann::json m = sepnet::load_model(checkpoint.string(), *net);
  if (meta != nullptr) *meta = std::move(m);
  return net;
}

}  // namespace

void apply_runtime(const RuntimeConfig& rt) { kernels::set_active(kernels::parse_isa(rt.kernel_isa)); }

void apply_variant(cotrain::TrainConfig& t, const std::string& variant) {
  if (variant == "no_adaptable") {
    t.loss_mode = cotrain::LossMode::kFull;
    t.use_adaptable = false;
    return;
  }
  if (std::find(kVariants.begin(), kVariants.end(), variant) == kVariants.end()) {
    throw ConfigError("unknown variant '" + variant +
                      "' (expected full, cosep_only, consistency_only or no_adaptable)");
  }
  t.loss_mode = cotrain::parse_loss_mode(variant);
  t.use_adaptable = true;
}

std::string file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()),
                          static_cast<uInt>(bytes.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

nlohmann::json cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir) {
  apply_runtime(cfg.runtime);
  const corpus::Manifest m = corpus::generate_corpus(cfg.corpus, out_dir, cfg.runtime.threads);
  nlohmann::json splits = nlohmann::json::object();
  for (const char* s : {"train", "val", "test", "test_noisy"}) splits[s] = m.split(s).size();
  return {{"corpus", out_dir.string()},
          {"clips", m.clips.size()},
          {"splits", splits},
          {"manifest_crc32", file_crc32(out_dir / "manifest.json")}};
}

nlohmann::json cmd_train(const ExperimentConfig& cfg, const fs::path& corpus_dir,
                         const fs::path& out_dir, std::ostream& diag) {
  cfg.validate();
  apply_runtime(cfg.runtime);
  const corpus::Manifest m = open_corpus(cfg, corpus_dir);
  const auto clips = cotrain::load_train_clips(m, corpus_dir);
  fs::create_directories(out_dir);
  write_json(out_dir / "config.json", cfg);
  if (cfg.train.steps == 0) {
    diag << nlohmann::json{{"warning", "steps=0: writing an untrained checkpoint"}}.dump() << '\n';
  }

  sepnet::Sepnet net(cfg.model, cfg.train.seed, cfg.train.conditioner_lr_scale);
  const nlohmann::json meta_base = {{"classes", class_names(m)}, {"train", cfg.train}};
  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw std::runtime_error("cannot write " + (out_dir / "train_log.jsonl").string());

  cotrain::TrainHooks hooks;
  hooks.log = &log;
  std::vector<TestPair> val_pairs;
  if (cfg.train.validate_every > 0) {
    val_pairs = test_pairs(m, "val", cfg.eval.pair_seed, cfg.eval.val_max_pairs);
    if (val_pairs.empty()) throw std::runtime_error("validation requested but the val split has no pairs");
    hooks.validate = [&](sepnet::Sepnet& n) {
      EvalConfig ec = cfg.eval;
      ec.oracle = false;
      ec.mixture = false;
      const EvalReport r = evaluate(&n, m, corpus_dir, val_pairs, ec,
                                    cfg.runtime.deterministic ? 1 : cfg.runtime.threads);
      return find_summary(r, "model")->sdr.mean;
    };
  }
  hooks.checkpoint = [&](const sepnet::Sepnet& n, std::size_t step, bool best, bool final) {
    nlohmann::json meta = meta_base;
    meta["step"] = step;
    if (final) sepnet::save_model((out_dir / "model.ckpt").string(), n, meta);
    if (best) sepnet::save_model((out_dir / "best.ckpt").string(), n, meta);
    if (!final && !best) sepnet::save_model((out_dir / "checkpoint.ckpt").string(), n, meta);
  };
  const cotrain::TrainSummary s = cotrain::train(net, clips, cfg.train, hooks);
  nlohmann::json out = {{"steps", s.steps},
                        {"train_clips", clips.size()},
                        {"first_total", s.first_total},
                        {"last_total", s.last_total},
                        {"checkpoint", (out_dir / "model.ckpt").string()}};
  if (s.best_validation) {
    out["best_validation_sdr"] = *s.best_validation;
    out["best_step"] = s.best_step;
    out["best_checkpoint"] = (out_dir / "best.ckpt").string();
  }
  write_json(out_dir / "summary.json", out);
  return out;
}

nlohmann::json cmd_evaluate(const ExperimentConfig& cfg, const fs::path& checkpoint,
                            const fs::path& corpus_dir, const fs::path& out_dir) {
  apply_runtime(cfg.runtime);
  const corpus::Manifest m = corpus::read_manifest(corpus_dir);
  std::unique_ptr<sepnet::Sepnet> net;
  if (!checkpoint.empty()) {
    net = open_model(checkpoint, nullptr);
    if (net->config().n_classes != m.n_classes() + 1) {
      throw ConfigError("corpus/checkpoint mismatch: corpus has C=" + std::to_string(m.n_classes()) +
                        ", model has " + std::to_string(net->config().n_classes - 1) + " classes");
    }
  }
  const auto pairs = test_pairs(m, cfg.eval.split, cfg.eval.pair_seed, cfg.eval.max_pairs);
  if (pairs.empty()) throw std::runtime_error("split '" + cfg.eval.split + "' has no test pairs");
  const EvalReport r = evaluate(net.get(), m, corpus_dir, pairs, cfg.eval, cfg.runtime.threads);
  write_report(out_dir, r);
  return {{"pairs", r.n_pairs}, {"summary", summary_json(r)}, {"out", out_dir.string()}};
}

nlohmann::json cmd_separate(const fs::path& checkpoint, const fs::path& wav_in,
                            const std::vector<std::string>& classes, const fs::path& out_dir) {
  nlohmann::json meta;
  auto net = open_model(checkpoint, &meta);
  std::vector<std::string> names;
  if (meta.contains("classes")) names = meta.at("classes").get<std::vector<std::string>>();
  const std::size_t adaptable = net->config().adaptable_class();

  std::vector<std::size_t> ids;
  for (const std::string& c : classes) {
    std::size_t id = adaptable;
    const auto it = std::find(names.begin(), names.end(), c);
    if (it != names.end()) {
      id = static_cast<std::size_t>(it - names.begin());
    } else {
      std::size_t used = 0;
      try {
        id = std::stoul(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size() || id >= adaptable) {
        throw std::invalid_argument("unknown class '" + c + "'");
      }
    }
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  if (ids.empty()) throw std::invalid_argument("separate: no classes requested");
  ids.push_back(adaptable);

  const dsp::Waveform input = dsp::to_sample_rate(dsp::read_wav(wav_in));
  // Inputs shorter than one window are zero-padded and trimmed back.
  dsp::Waveform padded = input;
  const std::size_t min_len = cotrain::crop_length(net->config().spec_size);
  if (padded.size() < min_len) padded.samples.resize(min_len, 0.0);
  const cotrain::Separation sep = cotrain::separate_clip(*net, padded, ids);

  fs::create_directories(out_dir);
  write_grid_png(out_dir / "mixture.png", sep.mixture, true);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::string name = ids[k] == adaptable
                                 ? "adaptable"
                                 : (ids[k] < names.size() ? names[ids[k]] : "class" + std::to_string(ids[k]));
    dsp::Waveform w = sep.tracks[k];
    w.samples.resize(input.size());
    const fs::path wav = out_dir / (name + ".wav");
    dsp::write_wav(wav, w);
    write_grid_png(out_dir / ("mask_" + name + ".png"), sep.masks[k], false);
    files.push_back({{"class", name}, {"wav", wav.string()}, {"rms", dsp::rms(w.samples)}});
  }
  return {{"samples", input.size()}, {"outputs", files}};
}

nlohmann::json cmd_ablate(const ExperimentConfig& cfg, const fs::path& corpus_dir,
                          const fs::path& out_dir, const std::vector<std::string>& variants,
                          std::ostream& diag) {
  const std::vector<std::string>& list = variants.empty() ? kVariants : variants;
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "ablation.csv");
  csv << "variant,n,sdr_mean,sdr_se,sir_mean,sar_mean\n";
  nlohmann::json rows = nlohmann::json::array();
  bool baselines_written = false;
  for (const std::string& v : list) {
    ExperimentConfig c = cfg;
    apply_variant(c.train, v);
    const fs::path dir = out_dir / v;
    cmd_train(c, corpus_dir, dir, diag);
    c.eval.oracle = c.eval.mixture = !baselines_written;
    cmd_evaluate(c, dir / "model.ckpt", corpus_dir, dir / "eval");
    std::ifstream in(dir / "eval" / "scores.jsonl");
    std::vector<SourceScore> scores;
    for (std::string line; std::getline(in, line);) {
      const auto j = nlohmann::json::parse(line);
      SourceScore s;
      s.method = j.at("method");
      s.class_id = j.at("class_id");
      s.sdr = j.at("sdr");
      s.sir = j.at("sir");
      s.sar = j.at("sar");
      s.nsdr = j.at("nsdr");
      if (s.method == "model") s.method = v;
      if (s.method == "model_best_perm") continue;
      scores.push_back(std::move(s));
    }
    for (const auto& s : summarize(scores)) {
      if (s.class_id) continue;
      csv << s.method << ',' << s.n << ',' << s.sdr.mean << ',' << s.sdr.stderr_ << ','
          << s.sir.mean << ',' << s.sar.mean << '\n';
      rows.push_back({{"variant", s.method}, {"n", s.n}, {"sdr", s.sdr.mean},
                      {"sdr_se", s.sdr.stderr_}, {"sir", s.sir.mean}, {"sar", s.sar.mean}});
    }
    baselines_written = true;
  }
  write_json(out_dir / "ablation.json", rows);
  return {{"rows", rows}};
}

}  // namespace cosep::app
