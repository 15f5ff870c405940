#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cai/core.hpp"

namespace cai {

enum class TrackSource { student, teacher_zero, teacher_single };

std::string_view to_string(TrackSource s);
TrackSource parse_track_source(std::string_view s);

using LabelScores = std::map<LabelId, double>;

/// One annotator's label per instance id. kInvalidLabel marks an output that
/// could not be mapped into the label space.
class AnnotationTrack {
public:
    explicit AnnotationTrack(TrackSource source) : source_(source) {}

    TrackSource source() const noexcept { return source_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    void set(std::string id, LabelId label);
    void set_scores(const std::string& id, LabelScores scores);

    bool contains(std::string_view id) const { return labels_.find(id) != labels_.end(); }
    LabelId at(std::string_view id) const;

    const std::map<std::string, LabelId, std::less<>>& labels() const noexcept { return labels_; }
    const std::map<std::string, LabelScores, std::less<>>& scores() const noexcept { return scores_; }

    friend bool operator==(const AnnotationTrack&, const AnnotationTrack&) = default;

private:
    TrackSource source_;
    std::map<std::string, LabelId, std::less<>> labels_;
    std::map<std::string, LabelScores, std::less<>> scores_;
};

/// annotations-jsonl, one line per id in id order:
/// {"id", "source", "label": name | null, "scores": {label: float}?}
std::string serialize_track(const AnnotationTrack& track, const LabelSpace& space);
void save_track(const AnnotationTrack& track, const LabelSpace& space, const std::filesystem::path& path);
AnnotationTrack load_track(const std::filesystem::path& path, const LabelSpace& space,
                           std::optional<TrackSource> expected = std::nullopt);

}  // namespace cai
