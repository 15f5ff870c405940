#pragma once

// Dot-product kernels behind cosine similarity and the top-k cluster scan.
//
// Each instruction set gets its own translation unit; the dispatcher picks the
// best one the running CPU supports on first use. The scalar kernels are the
// reference every vector variant is tested against. Setting the environment
// variable CAI_SIMD=scalar (or calling force_isa) pins the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace cai::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

bool isa_available(Isa isa);
Isa active_isa();
void force_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);

// out[r] = dot(query, rows[r*dim .. (r+1)*dim)). Each row uses the same
// reduction order as dot(), so results are bit-identical to per-row calls.
void dot_rows(std::span<const double> query, std::span<const double> rows, std::span<double> out);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void dot_rows(const double* q, const double* rows, std::size_t nrows, std::size_t dim, double* out) noexcept;
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void dot_rows(const double* q, const double* rows, std::size_t nrows, std::size_t dim, double* out) noexcept;
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void dot_rows(const double* q, const double* rows, std::size_t nrows, std::size_t dim, double* out) noexcept;
}  // namespace neon
#endif

}  // namespace cai::simd
