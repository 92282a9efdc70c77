#pragma once

// Arithmetic inner loops shared by the tensor ops, the DSP code and the
// projection solver. Every kernel has a portable scalar reference version;
// an AVX2/FMA variant is compiled separately and picked at runtime when the
// CPU supports it. Both variants are deterministic for a fixed selection.

#include <cstddef>
#include <span>
#include <string_view>

namespace cosep::kernels {

enum class Isa { kScalar, kAvx2 };

enum class Trans { kNo, kYes };

// C(m x n) += op(A) * op(B), all row-major with explicit leading dimensions.
struct GemmArgs {
  Trans trans_a = Trans::kNo;
  Trans trans_b = Trans::kNo;
  std::size_t m = 0, n = 0, k = 0;
  const double* a = nullptr;
  std::size_t lda = 0;
  const double* b = nullptr;
  std::size_t ldb = 0;
  double* c = nullptr;
  std::size_t ldc = 0;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // NN product only; gemm() packs blocks of op(A) and op(B) before dispatch.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);
};

bool isa_available(Isa isa);
Isa best_available_isa();
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // "scalar" | "avx2" | "auto"

const KernelTable& table(Isa isa);
const KernelTable& active();
// Throws std::invalid_argument if the ISA is not usable on this machine.
void set_active(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemm(const GemmArgs& args);
void gemm(const KernelTable& kt, const GemmArgs& args);

namespace detail {
const KernelTable& scalar_table();
#if defined(COSEP_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace cosep::kernels
