#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cai/annotation.hpp"
#include "cai/core.hpp"
#include "cai/embedding.hpp"

namespace cai {

struct StudentConfig {
    std::size_t top_k = 5;
    bool record_scores = false;
    // 0 picks std::thread::hardware_concurrency().
    std::size_t max_parallel = 0;
};

/// Per-dataset top-k used in the reference experiments, matched on the
/// dataset name with case and punctuation ignored. nullopt means "use 5".
std::optional<std::size_t> top_k_preset(std::string_view dataset);

/// Mean of the min(top_k, |cluster|) largest cosine similarities between e
/// and the cluster members.
double average_similarity(const EmbeddingVector& e, std::span<const EmbeddingVector> cluster, std::size_t top_k);
double average_similarity(const EmbeddingVector& e, const Cluster& cluster, std::size_t top_k);

struct Assignment {
    LabelId label;
    LabelScores scores;  // every cluster's average similarity
};

/// Label of the cluster with the highest average similarity. Exact ties go to
/// the smallest LabelId, i.e. the canonically first label.
Assignment assign_annotation(const EmbeddingVector& e, const PreferenceClusterSet& clusters, const StudentConfig& cfg);

AnnotationTrack annotate_student(std::span<const std::string> ids, const EmbeddingMap& embeddings,
                                 const PreferenceClusterSet& clusters, const StudentConfig& cfg);

}  // namespace cai
