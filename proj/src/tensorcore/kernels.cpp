#include "cosep/tensorcore/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosep::kernels {
namespace {

const KernelTable* initial_table() {
  return &table(best_available_isa());
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

// Block sizes for gemm(): a kc x nc panel of op(B) stays in L2 while the
// micro-kernel sweeps mc-row strips of op(A) over it.
constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 256;
constexpr std::size_t kBlockM = 64;

// Copies op(X)[r0 : r0+rows, c0 : c0+cols] into a dense row-major buffer.
// For Trans::kYes, op(X)[r][c] = x[c * ld + r].
void pack(const double* x, std::size_t ld, Trans t, std::size_t r0, std::size_t c0,
          std::size_t rows, std::size_t cols, double* out) {
  if (t == Trans::kNo) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = x + (r0 + r) * ld + c0;
      std::copy(src, src + cols, out + r * cols);
    }
    return;
  }
  for (std::size_t c = 0; c < cols; ++c) {
    const double* src = x + (c0 + c) * ld + r0;
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = src[r];
  }
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(COSEP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_available_isa() {
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "auto") return best_available_isa();
  throw std::invalid_argument("unknown kernel ISA '" + std::string(name) + "'");
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA '" + std::string(isa_name(isa)) +
                                "' is not available on this CPU/build");
  }
#if defined(COSEP_HAVE_AVX2)
  if (isa == Isa::kAvx2) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void set_active(Isa isa) { active_slot().store(&table(isa)); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemm(const GemmArgs& g) { gemm(active(), g); }

void gemm(const KernelTable& kt, const GemmArgs& g) {
  if (g.m == 0 || g.n == 0 || g.k == 0) return;
  // Each C entry still accumulates its k terms in increasing order, so the
  // blocking does not change results relative to a single gemm_nn call.
  std::vector<double> bp(std::min(g.k, kBlockK) * std::min(g.n, kBlockN));
  std::vector<double> ap(std::min(g.m, kBlockM) * std::min(g.k, kBlockK));
  for (std::size_t jc = 0; jc < g.n; jc += kBlockN) {
    const std::size_t nc = std::min(kBlockN, g.n - jc);
    for (std::size_t pc = 0; pc < g.k; pc += kBlockK) {
      const std::size_t kc = std::min(kBlockK, g.k - pc);
      pack(g.b, g.ldb, g.trans_b, pc, jc, kc, nc, bp.data());
      for (std::size_t ic = 0; ic < g.m; ic += kBlockM) {
        const std::size_t mc = std::min(kBlockM, g.m - ic);
        pack(g.a, g.lda, g.trans_a, ic, pc, mc, kc, ap.data());
        kt.gemm_nn(mc, nc, kc, ap.data(), kc, bp.data(), nc, g.c + ic * g.ldc + jc, g.ldc);
      }
    }
  }
}

}  // namespace cosep::kernels
