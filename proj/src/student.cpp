#include "cai/student.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

#include "cai/error.hpp"
#include "cai/parallel.hpp"
#include "cai/simd/kernels.hpp"

namespace cai {

namespace {

std::string squash(std::string_view name) {
    std::string out;
    for (unsigned char c : name) {
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Sorting the selected scores makes the sum independent of member order.
double mean_of_top_k(std::vector<double>& scores, std::size_t top_k) {
    const std::size_t k = std::min(top_k, scores.size());
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end(),
                      std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += scores[i];
    return sum / static_cast<double>(k);
}

void check_top_k(std::size_t top_k) {
    if (top_k == 0) throw Error(ErrorCode::invalid_argument, "top_k must be >= 1");
}

}  // namespace

std::optional<std::size_t> top_k_preset(std::string_view dataset) {
    static const std::array<std::pair<std::string_view, std::size_t>, 8> kPresets{{
        {"clinc", 5},
        {"massivescenario", 5},
        {"mtopintent", 15},
        {"stackexchange", 5},
        {"banking77", 3},
        {"massiveintent", 20},
        {"fewrelnat", 30},
        {"reddit", 7},
    }};
    const std::string key = squash(dataset);
    for (const auto& [name, k] : kPresets) {
        if (name == key) return k;
    }
    return std::nullopt;
}

double average_similarity(const EmbeddingVector& e, std::span<const EmbeddingVector> cluster, std::size_t top_k) {
    check_top_k(top_k);
    if (cluster.empty()) throw Error(ErrorCode::invalid_argument, "empty cluster");
    std::vector<double> scores;
    scores.reserve(cluster.size());
    for (const auto& member : cluster) scores.push_back(cosine(e, member));
    return mean_of_top_k(scores, top_k);
}

double average_similarity(const EmbeddingVector& e, const Cluster& cluster, std::size_t top_k) {
    check_top_k(top_k);
    if (cluster.size() == 0) throw Error(ErrorCode::invalid_argument, "empty cluster");
    if (cluster.dim() != e.dim()) {
        throw Error(ErrorCode::invalid_argument, "dimension mismatch: " + std::to_string(e.dim()) + " vs " +
                                                     std::to_string(cluster.dim()));
    }
    std::vector<double> scores(cluster.size());
    simd::dot_rows(e.values(), cluster.rows(), scores);
    const auto norms = cluster.norms();
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] /= e.norm() * norms[i];
    return mean_of_top_k(scores, top_k);
}

Assignment assign_annotation(const EmbeddingVector& e, const PreferenceClusterSet& clusters, const StudentConfig& cfg) {
    Assignment out{kInvalidLabel, {}};
    double best = 0.0;
    // std::map iterates in LabelId order, so strict > keeps the first label on ties.
    for (const auto& [label, cluster] : clusters.clusters()) {
        const double score = average_similarity(e, cluster, cfg.top_k);
        out.scores.emplace(label, score);
        if (out.label == kInvalidLabel || score > best) {
            out.label = label;
            best = score;
        }
    }
    return out;
}

AnnotationTrack annotate_student(std::span<const std::string> ids, const EmbeddingMap& embeddings,
                                 const PreferenceClusterSet& clusters, const StudentConfig& cfg) {
    check_top_k(cfg.top_k);
    std::vector<const EmbeddingVector*> queries;
    queries.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) throw Error(ErrorCode::not_found, "missing embedding for id " + id);
        queries.push_back(&it->second);
    }
    std::vector<std::optional<Assignment>> results(ids.size());
    const std::size_t workers = cfg.max_parallel != 0 ? cfg.max_parallel
                                                      : std::max(1u, std::thread::hardware_concurrency());
    parallel_for(ids.size(), workers, [&](std::size_t i) { results[i] = assign_annotation(*queries[i], clusters, cfg); });

    AnnotationTrack track(TrackSource::student);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        track.set(ids[i], results[i]->label);
        if (cfg.record_scores) track.set_scores(ids[i], std::move(results[i]->scores));
    }
    return track;
}

}  // namespace cai
