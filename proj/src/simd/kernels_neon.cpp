#include "cai/simd/kernels.hpp"

#include <arm_neon.h>

namespace cai::simd::neon {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    std::size_t i = 0;
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    if (i + 2 <= n) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        i += 2;
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void dot_rows(const double* q, const double* rows, std::size_t nrows, std::size_t dim, double* out) noexcept {
    for (std::size_t r = 0; r < nrows; ++r) {
        out[r] = dot(q, rows + r * dim, dim);
    }
}

}  // namespace cai::simd::neon
