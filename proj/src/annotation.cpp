#include "cai/annotation.hpp"

#include "cai/error.hpp"
#include "cai/io.hpp"

namespace cai {

std::string_view to_string(TrackSource s) {
    switch (s) {
        case TrackSource::student: return "student";
        case TrackSource::teacher_zero: return "teacher-zero";
        case TrackSource::teacher_single: return "teacher-single";
    }
    return "unknown";
}

TrackSource parse_track_source(std::string_view s) {
    if (s == "student") return TrackSource::student;
    if (s == "teacher-zero") return TrackSource::teacher_zero;
    if (s == "teacher-single") return TrackSource::teacher_single;
    throw Error(ErrorCode::invalid_argument, "unknown track source: " + std::string(s));
}

void AnnotationTrack::set(std::string id, LabelId label) { labels_.insert_or_assign(std::move(id), label); }

void AnnotationTrack::set_scores(const std::string& id, LabelScores scores) {
    if (!contains(id)) throw Error(ErrorCode::invalid_argument, "scores for unannotated id " + id);
    scores_.insert_or_assign(id, std::move(scores));
}

LabelId AnnotationTrack::at(std::string_view id) const {
    auto it = labels_.find(id);
    if (it == labels_.end()) throw Error(ErrorCode::not_found, "track has no annotation for " + std::string(id));
    return it->second;
}

std::string serialize_track(const AnnotationTrack& track, const LabelSpace& space) {
    std::string out;
    for (const auto& [id, label] : track.labels()) {
        io::Json j;
        j["id"] = id;
        j["source"] = std::string(to_string(track.source()));
        j["label"] = label == kInvalidLabel ? io::Json(nullptr) : io::Json(space.name(label));
        if (auto it = track.scores().find(id); it != track.scores().end()) {
            io::Json scores = io::Json::object();
            for (const auto& [l, s] : it->second) scores[space.name(l)] = s;
            j["scores"] = std::move(scores);
        }
        out += j.dump() + "\n";
    }
    return out;
}

void save_track(const AnnotationTrack& track, const LabelSpace& space, const std::filesystem::path& path) {
    io::write_file(path, serialize_track(track, space));
}

AnnotationTrack load_track(const std::filesystem::path& path, const LabelSpace& space,
                           std::optional<TrackSource> expected) {
    std::optional<AnnotationTrack> track;
    io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
        const std::string where = path.string() + ": line " + std::to_string(line) + ": ";
        try {
            const auto source = parse_track_source(j.at("source").get<std::string>());
            if (!track) track.emplace(source);
            if (track->source() != source) throw Error(ErrorCode::parse, "mixed sources in one track");
            const auto id = j.at("id").get<std::string>();
            if (track->contains(id)) throw Error(ErrorCode::parse, "duplicate id " + id);
            const auto& label = j.at("label");
            track->set(id, label.is_null() ? kInvalidLabel : space.id(label.get<std::string>()));
            if (j.contains("scores")) {
                LabelScores scores;
                for (const auto& [name, value] : j.at("scores").items()) scores[space.id(name)] = value.get<double>();
                track->set_scores(id, std::move(scores));
            }
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, where + "malformed annotation record");
        } catch (const Error& e) {
            throw Error(e.code(), where + e.what());
        }
    });
    if (!track) {
        if (!expected) throw Error(ErrorCode::parse, path.string() + ": empty track file");
        track.emplace(*expected);
    }
    if (expected && track->source() != *expected) {
        throw Error(ErrorCode::parse, path.string() + ": expected a " + std::string(to_string(*expected)) + " track");
    }
    return std::move(*track);
}

}  // namespace cai
