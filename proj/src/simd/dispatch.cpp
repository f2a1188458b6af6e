#include <cstdlib>
#include <string_view>

#include "mensp/simd/kernels.hpp"

namespace mensp::simd {
namespace {

constexpr KernelTable kScalar{Isa::scalar,      "scalar",        scalar::dot_f32,
                              scalar::dot_f64,  scalar::axpy_f32, scalar::gemm_nt,
                              scalar::gemm_nn,  scalar::gemm_tn};

#if defined(MENSP_HAVE_AVX2_TU)
constexpr KernelTable kAvx2{Isa::avx2,      "avx2",          avx2::dot_f32,
                            avx2::dot_f64,  avx2::axpy_f32,  avx2::gemm_nt,
                            avx2::gemm_nn,  avx2::gemm_tn};
#endif

const KernelTable& select() {
  if (const char* forced = std::getenv("MENSP_SIMD"); forced && std::string_view(forced) == "scalar")
    return kScalar;
#if defined(MENSP_HAVE_AVX2_TU)
  if (supported(Isa::avx2)) return kAvx2;
#endif
  return kScalar;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(MENSP_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
#if defined(MENSP_HAVE_AVX2_TU)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace mensp::simd
