#include "cosep/bsseval/bsseval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cosep/dsp/fft.hpp"
#include "cosep/tensorcore/kernels.hpp"

namespace cosep::bsseval {
namespace {

using dsp::Complex;

constexpr double kRidge = 1e-10;  // relative to the mean Gram diagonal

std::size_t fft_size(std::size_t n) {
  std::size_t s = 1;
  while (s < n) s <<= 1;
  return s;
}

// Dense symmetric positive definite matrix, row-major, factored in place.
struct Cholesky {
  std::size_t n = 0;
  std::vector<double> l;  // lower triangle holds the factor

  explicit Cholesky(std::vector<double> a, std::size_t dim) : n(dim), l(std::move(a)) {
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += l[i * n + i];
    const double ridge = kRidge * diag / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) l[i * n + i] += ridge;
    const auto& kt = kernels::active();
    for (std::size_t j = 0; j < n; ++j) {
      double* rj = l.data() + j * n;
      const double d = rj[j] - kt.dot(rj, rj, j);
      if (!(d > 0.0)) throw std::runtime_error("bss_eval: Gram matrix is not positive definite");
      rj[j] = std::sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        double* ri = l.data() + i * n;
        ri[j] = (ri[j] - kt.dot(ri, rj, j)) / rj[j];
      }
    }
  }

  std::vector<double> solve(std::vector<double> b) const {
    for (std::size_t i = 0; i < n; ++i) {
      const double* ri = l.data() + i * n;
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= ri[k] * b[k];
      b[i] = s / ri[i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * b[k];
      b[i] = s / l[i * n + i];
    }
    return b;
  }
};

// Spectra and correlations shared by every decomposition against one set of
// references.
class Projector {
 public:
  Projector(const std::vector<Signal>& refs, std::size_t filter_len)
      : len_(filter_len) {
    if (refs.empty()) throw std::invalid_argument("bss_eval: no references");
    if (filter_len == 0) throw std::invalid_argument("bss_eval: filter_len must be >= 1");
    n_ = refs[0].size();
    for (const Signal& r : refs) {
      if (r.size() != n_) throw std::invalid_argument("bss_eval: reference lengths differ");
      if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; }))
        throw std::invalid_argument("bss_eval: zero reference");
    }
    nfft_ = fft_size(n_ + len_ - 1);
    fft_ = std::make_unique<dsp::RealFft>(nfft_);
    spec_.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) spec_[i] = spectrum(refs[i]);
  }

  std::size_t out_len() const { return n_ + len_ - 1; }
  std::size_t n() const { return n_; }

  std::vector<Complex> spectrum(const Signal& x) const {
    std::vector<double> buf(nfft_, 0.0);
    std::copy(x.begin(), x.end(), buf.begin());
    std::vector<Complex> out(fft_->bins());
    fft_->forward(buf.data(), out.data());
    return out;
  }

  // Circular cross-correlation r[d] = sum_t a(t + d) b(t), via a * conj(b).
  std::vector<double> xcorr(const std::vector<Complex>& a, const std::vector<Complex>& b) const {
    std::vector<Complex> p(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) p[k] = a[k] * std::conj(b[k]);
    std::vector<double> out(nfft_);
    fft_->inverse(p.data(), out.data());
    return out;
  }

  // r[(nfft - d) % nfft] for d = 0..L-1: correlation at lag -d.
  std::vector<double> negative_lags(const std::vector<double>& r) const {
    std::vector<double> out(len_);
    for (std::size_t d = 0; d < len_; ++d) out[d] = r[(nfft_ - d) % nfft_];
    return out;
  }

  // Gram matrix of the delayed copies of refs[ids], block (a, b) holding
  // <ref_a delayed by p, ref_b delayed by q> at (p, q).
  Cholesky gram(const std::vector<std::size_t>& ids) const {
    const std::size_t m = ids.size() * len_;
    std::vector<double> g(m * m);
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a; b < ids.size(); ++b) {
        const std::vector<double> r = xcorr(spec_[ids[a]], spec_[ids[b]]);
        for (std::size_t p = 0; p < len_; ++p) {
          for (std::size_t q = 0; q < len_; ++q) {
            // sum_t ref_a(t - p) ref_b(t - q) = r_ab[q - p]
            const double v = r[(nfft_ + q - p) % nfft_];
            g[(a * len_ + p) * m + b * len_ + q] = v;
            g[(b * len_ + q) * m + a * len_ + p] = v;
          }
        }
      }
    }
    return Cholesky(std::move(g), m);
  }

  // Least-squares projection of `est` onto the delayed copies of refs[ids].
  Signal project(const std::vector<Complex>& est_spec, const std::vector<std::size_t>& ids,
                 const Cholesky& chol) const {
    std::vector<double> rhs;
    rhs.reserve(ids.size() * len_);
    for (std::size_t id : ids) {
      // sum_t ref(t - d) est(t) = corr(ref, est) at lag -d
      const std::vector<double> lags = negative_lags(xcorr(spec_[id], est_spec));
      rhs.insert(rhs.end(), lags.begin(), lags.end());
    }
    const std::vector<double> coef = chol.solve(std::move(rhs));
    // sum over sources of the filter applied to the reference, via FFT.
    std::vector<Complex> acc(fft_->bins(), Complex(0.0, 0.0));
    for (std::size_t a = 0; a < ids.size(); ++a) {
      const std::vector<Complex> h =
          spectrum(Signal(coef.begin() + a * len_, coef.begin() + (a + 1) * len_));
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += h[k] * spec_[ids[a]][k];
    }
    std::vector<double> out(nfft_);
    fft_->inverse(acc.data(), out.data());
    out.resize(out_len());
    return out;
  }

 private:
  std::size_t len_;
  std::size_t n_ = 0;
  std::size_t nfft_ = 0;
  std::unique_ptr<dsp::RealFft> fft_;
  std::vector<std::vector<Complex>> spec_;
};

double energy(const Signal& x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

// 10 log10(num / den) capped at kCapDb; a vanishing denominator caps.
double ratio_db(double num, double den, bool& capped) {
  if (den <= 1e-12 * num) {
    capped = true;
    return kCapDb;
  }
  const double v = 10.0 * std::log10(num / den);
  if (v >= kCapDb) {
    capped = true;
    return kCapDb;
  }
  return v;
}

void check_estimate(const Signal& est, const Projector& p) {
  if (est.size() != p.n()) {
    throw std::invalid_argument("bss_eval: estimate length " + std::to_string(est.size()) +
                                " != reference length " + std::to_string(p.n()));
  }
}

Decomposition decompose_with(const Signal& est, const Projector& p, std::size_t j,
                             const Cholesky& own, const Cholesky& all,
                             const std::vector<std::size_t>& all_ids) {
  check_estimate(est, p);
  const auto spec = p.spectrum(est);
  Decomposition d;
  d.target = p.project(spec, {j}, own);
  Signal full = p.project(spec, all_ids, all);
  const std::size_t m = p.out_len();
  d.interference.resize(m);
  d.artifacts.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    const double e = t < est.size() ? est[t] : 0.0;
    d.interference[t] = full[t] - d.target[t];
    d.artifacts[t] = e - full[t];
  }
  return d;
}

// Scores of every estimate against every reference: out[i][j].
std::vector<std::vector<BssScores>> score_matrix(const std::vector<Signal>& estimates,
                                                 const std::vector<Signal>& references,
                                                 std::size_t filter_len) {
  Projector p(references, filter_len);
  std::vector<std::size_t> all_ids(references.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  const Cholesky all = p.gram(all_ids);
  std::vector<std::vector<BssScores>> out(estimates.size(),
                                          std::vector<BssScores>(references.size()));
  for (std::size_t j = 0; j < references.size(); ++j) {
    const Cholesky own = p.gram({j});
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      out[i][j] = scores_from(decompose_with(estimates[i], p, j, own, all, all_ids));
    }
  }
  return out;
}

}  // namespace

Decomposition decompose(const Signal& estimate, const std::vector<Signal>& references,
                        std::size_t j, std::size_t filter_len) {
  if (j >= references.size()) throw std::invalid_argument("bss_eval: source index out of range");
  Projector p(references, filter_len);
  std::vector<std::size_t> all_ids(references.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  return decompose_with(estimate, p, j, p.gram({j}), p.gram(all_ids), all_ids);
}

BssScores scores_from(const Decomposition& d) {
  const std::size_t m = d.target.size();
  Signal distortion(m), signal(m);
  for (std::size_t t = 0; t < m; ++t) {
    distortion[t] = d.interference[t] + d.artifacts[t];
    signal[t] = d.target[t] + d.interference[t];
  }
  const double target = energy(d.target);
  BssScores s;
  s.sdr = ratio_db(target, energy(distortion), s.capped);
  s.sir = ratio_db(target, energy(d.interference), s.capped);
  s.sar = ratio_db(energy(signal), energy(d.artifacts), s.capped);
  return s;
}

std::vector<BssScores> bss_eval(const std::vector<Signal>& estimates,
                                const std::vector<Signal>& references,
                                std::size_t filter_len) {
  if (estimates.size() != references.size()) {
    throw std::invalid_argument("bss_eval: " + std::to_string(estimates.size()) +
                                " estimates for " + std::to_string(references.size()) +
                                " references");
  }
  Projector p(references, filter_len);
  std::vector<std::size_t> all_ids(references.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  const Cholesky all = p.gram(all_ids);
  std::vector<BssScores> out;
  for (std::size_t j = 0; j < references.size(); ++j) {
    out.push_back(scores_from(decompose_with(estimates[j], p, j, p.gram({j}), all, all_ids)));
  }
  return out;
}

PermutationResult best_permutation(const std::vector<Signal>& estimates,
                                   const std::vector<Signal>& references,
                                   std::size_t filter_len) {
  if (estimates.size() != references.size()) {
    throw std::invalid_argument("best_permutation: count mismatch");
  }
  if (references.size() > 4) throw std::invalid_argument("best_permutation: more than 4 sources");
  const auto m = score_matrix(estimates, references, filter_len);
  std::vector<std::size_t> perm(references.size());
  std::iota(perm.begin(), perm.end(), 0);
  PermutationResult best;
  bool first = true;
  do {
    double mean = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) mean += m[perm[j]][j].sdr;
    mean /= static_cast<double>(perm.size());
    if (first || mean > best.mean_sdr) {
      best.assignment = perm;
      best.mean_sdr = mean;
      best.scores.clear();
      for (std::size_t j = 0; j < perm.size(); ++j) best.scores.push_back(m[perm[j]][j]);
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double nsdr(const Signal& estimate, const Signal& mixture, const Signal& reference,
            std::size_t filter_len) {
  const auto s = score_matrix({estimate, mixture}, {reference}, filter_len);
  return s[0][0].sdr - s[1][0].sdr;
}

}  // namespace cosep::bsseval
