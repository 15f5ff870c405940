// Writes a replay file for a manifest teacher: every prompt annotate-teacher
// would issue (both modes, each needs the student track for single mode) is
// answered with the gold label at the given accuracy.
//
//   cai-synth-replay --manifest run.json --model M --accuracy 0.8 --seed 1 > replay.jsonl

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/pipeline.hpp"

using namespace cai;

int main(int argc, char** argv) {
    CLI::App app{"Synthesize a replay file for offline teacher runs"};
    std::string manifest_path, model;
    double accuracy = 0.8;
    std::uint64_t seed = 0;
    app.add_option("--manifest", manifest_path)->required();
    app.add_option("--model", model)->required();
    app.add_option("--accuracy", accuracy)->check(CLI::Range(0.0, 1.0));
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    try {
        // The replay file this tool writes may not exist yet, so skip load_manifest's file checks.
        const std::filesystem::path path(manifest_path);
        const auto m = pipeline::parse_manifest(nlohmann::json::parse(io::read_file(path)), path.parent_path());
        const auto& settings = m.teacher(model);
        const Corpus corpus = pipeline::load_manifest_corpus(m);
        const auto ids = pipeline::target_ids(m, corpus, pipeline::resolve_preference(m, corpus));

        auto prompts = build_prompts(ids, corpus, PromptMode::zero, nullptr, settings.base.batch_size);
        const auto student_path = pipeline::student_track_path(m);
        if (std::filesystem::exists(student_path)) {
            const auto student = load_track(student_path, corpus.label_space(), TrackSource::student);
            auto single = build_prompts(ids, corpus, PromptMode::single, &student, settings.base.batch_size);
            prompts.insert(prompts.end(), single.begin(), single.end());
        }
        std::cout << synthesize_replay(prompts, corpus, accuracy, seed);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
