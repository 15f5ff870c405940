#include "cai/simd/kernels.hpp"

namespace cai::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void dot_rows(const double* q, const double* rows, std::size_t nrows, std::size_t dim, double* out) noexcept {
    for (std::size_t r = 0; r < nrows; ++r) {
        out[r] = dot(q, rows + r * dim, dim);
    }
}

}  // namespace cai::simd::scalar
