#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cai {

/// Dense float64 sentence embedding. Construction rejects empty, non-finite
/// and zero-norm inputs, so every stored vector has a usable norm.
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    double norm() const noexcept { return norm_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    EmbeddingVector scaled(double factor) const;

    friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

using EmbeddingMap = std::map<std::string, EmbeddingVector, std::less<>>;

/// Normalized dot product. Throws on dimension mismatch.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

}  // namespace cai
