#include "cai/cai.hpp"

#include <cmath>

#include "cai/error.hpp"
#include "cai/io.hpp"

namespace cai {

ConsistencyPartition identify(const AnnotationTrack& student, const AnnotationTrack& zero,
                              const AnnotationTrack& single) {
    if (student.size() != zero.size() || student.size() != single.size()) {
        throw Error(ErrorCode::precondition, "tracks cover different id sets (" + std::to_string(student.size()) +
                                                 ", " + std::to_string(zero.size()) + ", " +
                                                 std::to_string(single.size()) + " ids)");
    }
    ConsistencyPartition out;
    auto z = zero.labels().begin();
    auto s = single.labels().begin();
    for (const auto& [id, label] : student.labels()) {
        if (z->first != id || s->first != id) {
            throw Error(ErrorCode::precondition, "tracks cover different id sets near id " + id);
        }
        const LabelTriple triple{label, z->second, s->second};
        (triple.consistent() ? out.consistent : out.inconsistent).insert(id);
        out.triples.emplace(id, triple);
        ++z;
        ++s;
    }
    return out;
}

CaiRatio CaiRatio::from_counts(std::size_t n_consistent, std::size_t n_inconsistent) {
    if (n_consistent + n_inconsistent == 0) {
        throw Error(ErrorCode::precondition, "CAI ratio of an empty partition");
    }
    CaiRatio r{n_consistent, n_inconsistent, 0.0};
    r.ratio = n_inconsistent == 0 ? std::numeric_limits<double>::infinity()
                                  : static_cast<double>(n_consistent) / static_cast<double>(n_inconsistent);
    return r;
}

CaiRatio CaiRatio::from_value(double ratio) {
    if (std::isnan(ratio) || ratio < 0.0) throw Error(ErrorCode::invalid_argument, "CAI ratio must be >= 0");
    return CaiRatio{0, std::isinf(ratio) ? 0u : 1u, ratio};
}

CaiRatio cai_ratio(const ConsistencyPartition& partition) {
    return CaiRatio::from_counts(partition.consistent.size(), partition.inconsistent.size());
}

GoldMap gold_labels(const Corpus& corpus) {
    GoldMap out;
    for (const auto& inst : corpus.instances()) {
        if (inst.gold) out.emplace(inst.id, *inst.gold);
    }
    return out;
}

std::optional<double> accuracy(const AnnotationTrack& track, const GoldMap& gold,
                               const std::set<std::string, std::less<>>& ids) {
    if (ids.empty()) return std::nullopt;
    std::size_t correct = 0;
    for (const auto& id : ids) {
        auto g = gold.find(id);
        if (g == gold.end()) throw Error(ErrorCode::precondition, "no gold label for id " + id);
        if (track.at(id) == g->second) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(ids.size());
}

StratifiedAccuracy stratified_accuracy(const ConsistencyPartition& partition, const AnnotationTrack& track,
                                       const GoldMap& gold) {
    return {accuracy(track, gold, partition.consistent), accuracy(track, gold, partition.inconsistent)};
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    out.n = values.size();
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return out;
}

std::string serialize_partition(const ConsistencyPartition& partition, const LabelSpace& space) {
    auto name = [&](LabelId l) { return l == kInvalidLabel ? io::Json(nullptr) : io::Json(space.name(l)); };
    std::string out;
    for (const auto& [id, t] : partition.triples) {
        io::Json j;
        j["id"] = id;
        j["student"] = name(t.student);
        j["zero"] = name(t.zero);
        j["single"] = name(t.single);
        j["consistent"] = t.consistent();
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace cai
