#include "cai/embedding.hpp"

#include <cmath>

#include "cai/error.hpp"
#include "cai/simd/kernels.hpp"

namespace cai {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw Error(ErrorCode::invalid_argument, "embedding must have dimension >= 1");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::invalid_argument, "embedding contains a non-finite value");
        }
    }
    norm_ = std::sqrt(simd::dot(values_, values_));
    if (!(norm_ > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "zero-norm embedding");
    }
}

EmbeddingVector EmbeddingVector::scaled(double factor) const {
    std::vector<double> out(values_);
    for (double& v : out) v *= factor;
    return EmbeddingVector(std::move(out));
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw Error(ErrorCode::invalid_argument,
                    "dimension mismatch: " + std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
    }
    return simd::dot(u.values(), v.values()) / (u.norm() * v.norm());
}

}  // namespace cai
