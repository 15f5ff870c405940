#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cai/embedding.hpp"

namespace cai {

/// Position of a label in its LabelSpace. Lower ids win score ties.
using LabelId = std::uint32_t;
inline constexpr LabelId kInvalidLabel = std::numeric_limits<LabelId>::max();

/// Lowercased, whitespace-trimmed form used for every label comparison.
std::string canonical_label(std::string_view raw);

/// Ordered set of canonical labels. Order is lexicographic over the canonical
/// strings and doubles as the deterministic tie-break order downstream.
class LabelSpace {
public:
    LabelSpace() = default;

    /// Canonicalizes, sorts and rejects duplicates or an empty list.
    static LabelSpace from_declared(std::vector<std::string> labels);
    /// Canonicalizes, deduplicates and sorts; still rejects an empty result.
    static LabelSpace from_observed(std::span<const std::string> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& name(LabelId id) const;

    std::optional<LabelId> find(std::string_view raw) const;
    LabelId id(std::string_view raw) const;  // throws when absent

    friend bool operator==(const LabelSpace& a, const LabelSpace& b) { return a.labels_ == b.labels_; }

private:
    explicit LabelSpace(std::vector<std::string> sorted_unique);

    std::vector<std::string> labels_;
    std::map<std::string, LabelId, std::less<>> index_;
};

struct TextInstance {
    std::string id;
    std::string text;
    std::optional<LabelId> gold;
    std::optional<EmbeddingVector> vector;
};

class Corpus {
public:
    Corpus(std::vector<TextInstance> instances, LabelSpace label_space);

    const std::vector<TextInstance>& instances() const noexcept { return instances_; }
    const LabelSpace& label_space() const noexcept { return label_space_; }
    std::size_t size() const noexcept { return instances_.size(); }

    const TextInstance* find(std::string_view id) const;
    const TextInstance& at(std::string_view id) const;

    std::vector<std::string> ids() const;
    bool has_vectors() const;
    EmbeddingMap vectors() const;

private:
    std::vector<TextInstance> instances_;
    LabelSpace label_space_;
    std::unordered_map<std::string, std::size_t> position_;
};

/// Reads a label list either as `{"labels": [...]}` JSON or one label per line.
std::vector<std::string> read_label_list(const std::filesystem::path& path);

/// Parses corpus-jsonl. The label space is the union of an optional
/// `{"labels": [...]}` header line, the optional sidecar list and the observed
/// golds; when anything is declared, golds outside the declaration are errors.
Corpus load_corpus(const std::filesystem::path& path,
                   const std::optional<std::filesystem::path>& labels_sidecar = std::nullopt);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

enum class SplitStrategy { random, stratified };

std::string_view to_string(SplitStrategy s);
SplitStrategy parse_split_strategy(std::string_view s);
/// Stratified when any gold label exists, random otherwise.
SplitStrategy default_split_strategy(const Corpus& corpus);

using LabeledId = std::pair<std::string, LabelId>;

struct PreferenceSplit {
    std::vector<LabeledId> preference;  // corpus order
    std::vector<std::string> remainder;  // corpus order
};

/// Round-half-up of fraction * n, floored at the number of labels present.
std::size_t preference_size(std::size_t n, double fraction, std::size_t labels_present);

/// Draws the user-preference set. Only gold-labeled instances are eligible;
/// the size is computed over the whole corpus.
PreferenceSplit split_preference(const Corpus& corpus, double fraction, std::uint64_t seed,
                                 SplitStrategy strategy);

/// Members of one label's cluster, stored row-major for the dot kernels.
class Cluster {
public:
    Cluster(LabelId label, std::size_t dim);

    void add(std::string id, const EmbeddingVector& v);

    LabelId label() const noexcept { return label_; }
    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const double> rows() const noexcept { return rows_; }
    std::span<const double> norms() const noexcept { return norms_; }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(rows_).subspan(i * dim_, dim_); }

private:
    LabelId label_;
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<double> rows_;
    std::vector<double> norms_;
};

class PreferenceClusterSet {
public:
    explicit PreferenceClusterSet(std::map<LabelId, Cluster> clusters);

    const std::map<LabelId, Cluster>& clusters() const noexcept { return clusters_; }
    std::size_t total() const noexcept { return total_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    std::map<LabelId, Cluster> clusters_;
    std::size_t total_ = 0;
    std::size_t dim_ = 0;
};

PreferenceClusterSet build_clusters(std::span<const LabeledId> preference, const EmbeddingMap& embeddings);

/// Preference file: jsonl of `{"id":..., "label":...}`.
void save_preference(std::span<const LabeledId> preference, const LabelSpace& space,
                     const std::filesystem::path& path);
std::vector<LabeledId> load_preference(const std::filesystem::path& path, const LabelSpace& space);

}  // namespace cai
