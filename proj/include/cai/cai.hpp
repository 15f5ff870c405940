#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

#include "cai/annotation.hpp"
#include "cai/core.hpp"

namespace cai {

struct LabelTriple {
    LabelId student = kInvalidLabel;
    LabelId zero = kInvalidLabel;
    LabelId single = kInvalidLabel;

    /// All three agree and none is invalid.
    bool consistent() const noexcept {
        return student != kInvalidLabel && student == zero && zero == single;
    }
};

struct ConsistencyPartition {
    std::set<std::string, std::less<>> consistent;
    std::set<std::string, std::less<>> inconsistent;
    std::map<std::string, LabelTriple, std::less<>> triples;

    std::size_t size() const noexcept { return triples.size(); }
};

/// Partitions the shared id set of the student, zero-shot and single-shot
/// tracks. Throws when the three tracks cover different ids.
ConsistencyPartition identify(const AnnotationTrack& student, const AnnotationTrack& zero,
                              const AnnotationTrack& single);

/// N_C / N_IC. When N_IC is 0 the ratio is +infinity, which orders above
/// every finite ratio.
struct CaiRatio {
    std::size_t n_consistent = 0;
    std::size_t n_inconsistent = 0;
    double ratio = 0.0;

    bool infinite() const noexcept { return n_inconsistent == 0; }

    static CaiRatio from_counts(std::size_t n_consistent, std::size_t n_inconsistent);
    /// For tabulated ratios where only the value is known.
    static CaiRatio from_value(double ratio);

    friend std::partial_ordering operator<=>(const CaiRatio& a, const CaiRatio& b) { return a.ratio <=> b.ratio; }
    friend bool operator==(const CaiRatio& a, const CaiRatio& b) { return a.ratio == b.ratio; }
};

CaiRatio cai_ratio(const ConsistencyPartition& partition);

using GoldMap = std::map<std::string, LabelId, std::less<>>;

GoldMap gold_labels(const Corpus& corpus);

/// Accuracy in percent of `track` over ids; nullopt for an empty id set.
std::optional<double> accuracy(const AnnotationTrack& track, const GoldMap& gold,
                               const std::set<std::string, std::less<>>& ids);

struct StratifiedAccuracy {
    std::optional<double> consistent;    // percent; nullopt when the subset is empty
    std::optional<double> inconsistent;
};

StratifiedAccuracy stratified_accuracy(const ConsistencyPartition& partition, const AnnotationTrack& track,
                                       const GoldMap& gold);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
    std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

/// Partition export: {"id", "student", "zero", "single", "consistent"} per line.
std::string serialize_partition(const ConsistencyPartition& partition, const LabelSpace& space);

}  // namespace cai
