#pragma once

// Run manifests and the stage commands the CLI exposes. Each stage reads its
// inputs from the manifest and the output directory, writes its outputs
// atomically and appends one line to <output_dir>/stages.jsonl.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cai/cai.hpp"
#include "cai/embed.hpp"
#include "cai/io.hpp"
#include "cai/stats.hpp"
#include "cai/student.hpp"
#include "cai/teacher.hpp"

namespace cai::pipeline {

struct EmbeddingSettings {
    std::string kind = "hash";                  // hash | file | remote
    std::size_t dim = 256;                      // hash
    std::uint64_t seed = 0;                     // hash
    std::optional<std::filesystem::path> path;  // file; corpus vectors when absent
    RemoteEmbeddingConfig remote;               // remote
};

struct TeacherRunSettings {
    double temperature = 0.0;
    std::int64_t seed = 0;
};

struct TeacherSettings {
    TeacherConfig base;  // temperature/seed overridden per run
    std::vector<TeacherRunSettings> runs;
    std::optional<std::filesystem::path> replay;
    std::optional<std::filesystem::path> cache;
};

struct RunManifest {
    std::filesystem::path source;  // manifest file; relative paths resolve against its directory
    std::string dataset;
    std::filesystem::path corpus;
    std::optional<std::filesystem::path> labels;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;

    double preference_fraction = 0.05;
    std::optional<SplitStrategy> preference_strategy;  // default chosen from the corpus
    std::optional<std::filesystem::path> preference_file;

    EmbeddingSettings embedding;
    StudentConfig student;
    bool include_preference = false;
    std::vector<TeacherSettings> teachers;

    const TeacherSettings& teacher(const std::string& model) const;
};

struct GlobalOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

/// Parses a manifest and checks that every referenced input file exists.
RunManifest load_manifest(const std::filesystem::path& path, const GlobalOverrides& overrides = {});
RunManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Filenames used inside the output directory.
std::string sanitize(std::string_view name);
std::filesystem::path student_track_path(const RunManifest& m);
std::filesystem::path preference_path(const RunManifest& m);
std::filesystem::path teacher_track_path(const RunManifest& m, const std::string& model, PromptMode mode,
                                         std::size_t run);
std::filesystem::path summary_path(const RunManifest& m, const std::string& model);

Corpus load_manifest_corpus(const RunManifest& m);

/// Preference set from the manifest's file, a previous split in the output
/// directory, or a fresh seeded split (which is then saved).
std::vector<LabeledId> resolve_preference(const RunManifest& m, const Corpus& corpus);

/// Ids the annotators label: the corpus minus the preference set unless
/// include_preference is set. Corpus order.
std::vector<std::string> target_ids(const RunManifest& m, const Corpus& corpus,
                                    std::span<const LabeledId> preference);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunManifest& m, const Corpus& corpus);

struct StudentStageResult {
    std::filesystem::path track;
    std::size_t annotated = 0;
    std::size_t clusters = 0;
};

StudentStageResult annotate_student_stage(const RunManifest& m);

struct TeacherStageResult {
    std::vector<std::filesystem::path> tracks;
    std::size_t client_calls = 0;  // requests that missed the cache
};

/// Runs every configured (temperature, seed) run of one model. `client` may
/// be supplied by tests; otherwise a replay or HTTP client is built from the
/// manifest.
TeacherStageResult annotate_teacher_stage(const RunManifest& m, const std::string& model, PromptMode mode,
                                          ChatClient* client = nullptr);

/// Per-run CAI ratios and (with golds) accuracies, written as a summary JSON
/// plus one partition export per run. Returns the summary.
io::Json cai_stage(const RunManifest& m, const std::string& model);

/// Summary JSON for one model given its tracks. Exposed for testing.
io::Json cai_summary(const std::string& dataset, const std::string& model, const AnnotationTrack& student,
                     std::span<const AnnotationTrack> zero_runs, std::span<const AnnotationTrack> single_runs,
                     std::span<const TeacherRunSettings> runs, const Corpus* corpus,
                     std::vector<ConsistencyPartition>* partitions = nullptr);

/// Observations from cai summaries: the run-mean CAI ratio and accuracy.
std::vector<stats::Observation> observations_from_summaries(std::span<const std::filesystem::path> paths);

io::Json correlation_json(std::span<const stats::CorrelationResult> results);

}  // namespace cai::pipeline
