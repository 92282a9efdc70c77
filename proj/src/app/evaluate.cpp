#include "cosep/app/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "cosep/bsseval/bsseval.hpp"
#include "cosep/cotrain/infer.hpp"
#include "cosep/dsp/masks.hpp"
#include "cosep/dsp/stft.hpp"

namespace cosep::app {
namespace {

Stat stat(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return s;
}

std::vector<SourceScore> score_pair(sepnet::Sepnet* net, const corpus::Manifest& m,
                                    const std::filesystem::path& root, const TestPair& p,
                                    const EvalConfig& cfg) {
  const corpus::LoadedClip ca = corpus::load_clip(m, root, *p.a, true);
  const corpus::LoadedClip cb = corpus::load_clip(m, root, *p.b, true);
  if (ca.stems.size() != 1 || cb.stems.size() != 1) {
    throw std::runtime_error("pair " + p.id() + ": expected one object stem per clip");
  }
  const std::vector<double>& ra = ca.stems[0].samples;
  const std::vector<double>& rb = cb.stems[0].samples;
  if (ra.size() != rb.size()) throw std::runtime_error("pair " + p.id() + ": length mismatch");
  dsp::Waveform mix = ca.mixture;
  for (std::size_t t = 0; t < mix.size(); ++t) mix.samples[t] += cb.mixture.samples[t];
  const std::vector<bsseval::Signal> refs{ra, rb};
  const std::size_t classes[2] = {p.a->tags.at(0), p.b->tags.at(0)};
  const std::string clip_ids[2] = {p.a->clip_id, p.b->clip_id};

  // The mixture scores are needed for nsdr whether or not they are reported.
  const auto mix_scores = bsseval::bss_eval({mix.samples, mix.samples}, refs, cfg.filter_len);

  std::vector<SourceScore> out;
  auto emit = [&](const std::string& method, const std::vector<bsseval::BssScores>& s) {
    for (std::size_t i = 0; i < 2; ++i) {
      SourceScore r;
      r.pair_id = p.id();
      r.clip_id = clip_ids[i];
      r.class_id = classes[i];
      r.source = m.classes.at(classes[i]).name;
      r.method = method;
      r.sdr = s[i].sdr;
      r.sir = s[i].sir;
      r.sar = s[i].sar;
      r.capped = s[i].capped;
      r.nsdr = s[i].sdr - mix_scores[i].sdr;
      out.push_back(std::move(r));
    }
  };
  if (net != nullptr) {
    const auto tracks = cotrain::infer_clip(*net, mix, classes);
    const std::vector<bsseval::Signal> est{tracks[0].samples, tracks[1].samples};
    emit("model", bsseval::bss_eval(est, refs, cfg.filter_len));
    emit("model_best_perm", bsseval::best_permutation(est, refs, cfg.filter_len).scores);
  }
  if (cfg.oracle) {
    const auto xm = dsp::stft(mix);
    auto [ma, mb] = dsp::gt_ratio_masks(dsp::magnitude(dsp::stft(ca.stems[0])),
                                        dsp::magnitude(dsp::stft(cb.stems[0])));
    const std::vector<bsseval::Signal> est{dsp::reconstruct(ma, xm, mix.size()).samples,
                                           dsp::reconstruct(mb, xm, mix.size()).samples};
    emit("oracle_mask", bsseval::bss_eval(est, refs, cfg.filter_len));
  }
  if (cfg.mixture) emit("mixture", mix_scores);
  return out;
}

}  // namespace

std::vector<TestPair> test_pairs(const corpus::Manifest& m, const std::string& split,
                                 std::uint64_t seed, std::size_t max_pairs) {
  std::vector<const corpus::ClipRecord*> solos;
  for (const corpus::ClipRecord* r : m.split(split)) {
    if (r->tags.size() == 1) solos.push_back(r);
  }
  std::vector<TestPair> pairs;
  for (std::size_t i = 0; i < solos.size(); ++i)
    for (std::size_t j = i + 1; j < solos.size(); ++j)
      if (solos[i]->tags[0] != solos[j]->tags[0]) pairs.push_back({solos[i], solos[j]});
  if (max_pairs > 0 && pairs.size() > max_pairs) {
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_pairs; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
      std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(max_pairs);
    std::sort(idx.begin(), idx.end());
    std::vector<TestPair> kept;
    for (std::size_t i : idx) kept.push_back(pairs[i]);
    pairs = std::move(kept);
  }
  return pairs;
}

std::vector<MethodSummary> summarize(const std::vector<SourceScore>& sources) {
  std::vector<std::string> methods;
  std::vector<std::size_t> classes;
  for (const auto& s : sources) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end())
      methods.push_back(s.method);
    if (std::find(classes.begin(), classes.end(), s.class_id) == classes.end())
      classes.push_back(s.class_id);
  }
  std::sort(classes.begin(), classes.end());
  auto make = [&](const std::string& method, std::optional<std::size_t> cls) {
    std::vector<double> sdr, sir, sar, nsdr;
    for (const auto& s : sources) {
      if (s.method != method || (cls && s.class_id != *cls)) continue;
      sdr.push_back(s.sdr);
      sir.push_back(s.sir);
      sar.push_back(s.sar);
      nsdr.push_back(s.nsdr);
    }
    return MethodSummary{method, cls, sdr.size(), stat(sdr), stat(sir), stat(sar), stat(nsdr)};
  };
  std::vector<MethodSummary> out;
  for (const auto& m : methods) out.push_back(make(m, std::nullopt));
  for (const auto& m : methods)
    for (std::size_t c : classes) out.push_back(make(m, c));
  return out;
}

const MethodSummary* find_summary(const EvalReport& r, const std::string& method,
                                  std::optional<std::size_t> class_id) {
  for (const auto& s : r.summary) {
    if (s.method == method && s.class_id == class_id) return &s;
  }
  return nullptr;
}

EvalReport evaluate(sepnet::Sepnet* net, const corpus::Manifest& m,
                    const std::filesystem::path& root, const std::vector<TestPair>& pairs,
                    const EvalConfig& cfg, unsigned threads) {
  std::vector<std::vector<SourceScore>> per_pair(pairs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      try {
        per_pair[i] = score_pair(net, m, root, pairs[i], cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(pairs.size())));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  EvalReport r;
  r.n_pairs = pairs.size();
  for (auto& v : per_pair)
    for (auto& s : v) r.sources.push_back(std::move(s));
  r.summary = summarize(r.sources);
  return r;
}

void write_report(const std::filesystem::path& dir, const EvalReport& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "scores.jsonl");
    for (const auto& s : r.sources) {
      out << nlohmann::json{{"pair_id", s.pair_id}, {"clip_id", s.clip_id},
                            {"source", s.source},   {"class_id", s.class_id},
                            {"method", s.method},   {"sdr", s.sdr},
                            {"sir", s.sir},         {"sar", s.sar},
                            {"nsdr", s.nsdr},       {"capped", s.capped}}
                 .dump()
          << '\n';
    }
  }
  std::ofstream csv(dir / "summary.csv");
  csv << "method,class,n,sdr_mean,sdr_se,sir_mean,sir_se,sar_mean,sar_se,nsdr_mean,nsdr_se\n";
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : r.summary) {
    csv << s.method << ',' << (s.class_id ? std::to_string(*s.class_id) : "all") << ',' << s.n
        << ',' << s.sdr.mean << ',' << s.sdr.stderr_ << ',' << s.sir.mean << ',' << s.sir.stderr_
        << ',' << s.sar.mean << ',' << s.sar.stderr_ << ',' << s.nsdr.mean << ','
        << s.nsdr.stderr_ << '\n';
    nlohmann::json e = {{"method", s.method},
                        {"n", s.n},
                        {"sdr", {{"mean", s.sdr.mean}, {"se", s.sdr.stderr_}}},
                        {"sir", {{"mean", s.sir.mean}, {"se", s.sir.stderr_}}},
                        {"sar", {{"mean", s.sar.mean}, {"se", s.sar.stderr_}}},
                        {"nsdr", {{"mean", s.nsdr.mean}, {"se", s.nsdr.stderr_}}}};
    e["class"] = s.class_id ? nlohmann::json(*s.class_id) : nlohmann::json("all");
    js.push_back(std::move(e));
  }
  std::ofstream(dir / "summary.json") << nlohmann::json{{"pairs", r.n_pairs}, {"summary", js}}.dump(1)
                                      << '\n';
}

}  // namespace cosep::app
