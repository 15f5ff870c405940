#include "cai/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "cai/error.hpp"

namespace cai::simd {

namespace {

struct KernelTable {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t) noexcept;
    void (*dot_rows)(const double*, const double*, std::size_t, std::size_t, double*) noexcept;
};

constexpr KernelTable kScalar{Isa::scalar, &scalar::dot, &scalar::dot_rows};
#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2{Isa::avx2, &avx2::dot, &avx2::dot_rows};
#endif
#if defined(__aarch64__)
constexpr KernelTable kNeon{Isa::neon, &neon::dot, &neon::dot_rows};
#endif

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar: return &kScalar;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return &kAvx2;
#else
            return nullptr;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return &kNeon;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* detect() {
    if (const char* env = std::getenv("CAI_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return &kScalar;
        if (want == "avx2" && isa_available(Isa::avx2)) return table_for(Isa::avx2);
        if (want == "neon" && isa_available(Isa::neon)) return table_for(Isa::neon);
    }
    if (isa_available(Isa::avx2)) return table_for(Isa::avx2);
    if (isa_available(Isa::neon)) return table_for(Isa::neon);
    return &kScalar;
}

std::atomic<const KernelTable*>& active() {
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() { return active().load(std::memory_order_acquire)->isa; }

void force_isa(Isa isa) {
    if (!isa_available(isa)) {
        throw Error(ErrorCode::invalid_argument, "instruction set not available: " + std::string(to_string(isa)));
    }
    active().store(table_for(isa), std::memory_order_release);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::invalid_argument, "dimension mismatch");
    }
    return active().load(std::memory_order_acquire)->dot(a.data(), b.data(), a.size());
}

void dot_rows(std::span<const double> query, std::span<const double> rows, std::span<double> out) {
    const std::size_t dim = query.size();
    if (dim == 0 || rows.size() != out.size() * dim) {
        throw Error(ErrorCode::invalid_argument, "dimension mismatch");
    }
    active().load(std::memory_order_acquire)->dot_rows(query.data(), rows.data(), out.size(), dim, out.data());
}

}  // namespace cai::simd
