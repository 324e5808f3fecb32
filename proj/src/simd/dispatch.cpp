#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"
#include "misuse/simd/kernels.hpp"

namespace misuse::simd {

const Kernels* avx2_kernels() {
#if defined(MISUSE_HAVE_AVX2)
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &detail::avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const Kernels& active_kernels() {
    static const Kernels& chosen = []() -> const Kernels& {
        const char* env = std::getenv("MISUSE_RISK_SIMD");
        const std::string_view want = env ? env : "auto";
        if (want == "scalar") {
            return scalar_kernels();
        }
        if (const Kernels* avx2 = avx2_kernels()) {
            return *avx2;
        }
        return scalar_kernels();
    }();
    return chosen;
}

}  // namespace misuse::simd
