#include "cai/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <set>

#include "cai/error.hpp"

namespace cai::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw Error(ErrorCode::not_found, what + " not found: " + path.string());
}

http::RetryPolicy parse_retry(const json& j) {
    http::RetryPolicy r;
    if (j.is_object()) {
        r.max_attempts = j.value("max_attempts", r.max_attempts);
        r.base_backoff_ms = j.value("base_backoff_ms", r.base_backoff_ms);
        r.max_backoff_ms = j.value("max_backoff_ms", r.max_backoff_ms);
    }
    if (r.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "retry.max_attempts must be >= 1");
    return r;
}

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void log_stage(const RunManifest& m, const std::string& stage, const std::vector<fs::path>& outputs,
               io::Json extra = io::Json::object()) {
    io::Json j;
    j["stage"] = stage;
    j["outputs"] = io::Json::array();
    for (const auto& p : outputs) j["outputs"].push_back(p.string());
    for (auto& [k, v] : extra.items()) j[k] = v;
    j["ts"] = timestamp();
    io::append_line(m.output_dir / "stages.jsonl", j.dump());
}

io::Json ratio_json(const CaiRatio& r) { return r.infinite() ? io::Json("inf") : io::Json(r.ratio); }

io::Json opt_json(const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); }

}  // namespace

const TeacherSettings& RunManifest::teacher(const std::string& model) const {
    for (const auto& t : teachers) {
        if (t.base.model_name == model) return t;
    }
    throw Error(ErrorCode::not_found, "manifest has no teacher model " + model);
}

RunManifest parse_manifest(const json& j, const fs::path& base_dir) {
    RunManifest m;
    try {
        m.dataset = j.value("dataset", std::string("dataset"));
        m.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
        if (j.contains("labels")) m.labels = resolve(base_dir, j.at("labels").get<std::string>());
        m.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
        m.seed = j.value("seed", std::uint64_t{0});

        if (j.contains("preference")) {
            const auto& p = j.at("preference");
            m.preference_fraction = p.value("fraction", m.preference_fraction);
            if (p.contains("strategy")) m.preference_strategy = parse_split_strategy(p.at("strategy").get<std::string>());
            if (p.contains("file")) m.preference_file = resolve(base_dir, p.at("file").get<std::string>());
        }

        if (j.contains("embedding")) {
            const auto& e = j.at("embedding");
            auto& s = m.embedding;
            s.kind = e.value("kind", s.kind);
            if (s.kind == "hash") {
                s.dim = e.value("dim", s.dim);
                s.seed = e.value("seed", s.seed);
            } else if (s.kind == "file") {
                if (e.contains("path")) s.path = resolve(base_dir, e.at("path").get<std::string>());
            } else if (s.kind == "remote") {
                s.remote.url = e.at("url").get<std::string>();
                s.remote.model = e.at("model").get<std::string>();
                s.remote.api_key_env = e.value("api_key_env", std::string());
                s.remote.batch_size = e.value("batch_size", s.remote.batch_size);
                s.remote.max_parallel = e.value("max_parallel", s.remote.max_parallel);
                s.remote.retry = parse_retry(e.value("retry", json::object()));
            } else {
                throw Error(ErrorCode::invalid_argument, "unknown embedding kind: " + s.kind);
            }
        }

        m.student.top_k = top_k_preset(m.dataset).value_or(5);
        if (j.contains("student")) {
            const auto& s = j.at("student");
            m.student.top_k = s.value("top_k", m.student.top_k);
            m.student.record_scores = s.value("record_scores", m.student.record_scores);
            m.include_preference = s.value("include_preference", m.include_preference);
        }
        if (m.student.top_k < 1) throw Error(ErrorCode::invalid_argument, "student.top_k must be >= 1");

        for (const auto& t : j.value("teachers", json::array())) {
            TeacherSettings ts;
            ts.base.model_name = t.at("model").get<std::string>();
            ts.base.base_url = t.value("base_url", std::string());
            ts.base.api_key_env = t.value("api_key_env", std::string());
            ts.base.max_parallel = t.value("max_parallel", std::size_t{1});
            ts.base.batch_size = t.value("batch_size", std::size_t{1});
            ts.base.retry = parse_retry(t.value("retry", json::object()));
            ts.base.temperature = t.value("temperature", 0.0);
            ts.base.seed = t.value("seed", std::int64_t{0});
            if (t.contains("runs")) {
                for (const auto& r : t.at("runs")) {
                    ts.runs.push_back({r.value("temperature", ts.base.temperature), r.value("seed", ts.base.seed)});
                }
            } else {
                ts.runs.push_back({ts.base.temperature, ts.base.seed});
            }
            if (ts.runs.empty()) throw Error(ErrorCode::invalid_argument, "teacher " + ts.base.model_name + " has no runs");
            if (t.contains("replay")) ts.replay = resolve(base_dir, t.at("replay").get<std::string>());
            if (t.contains("cache")) ts.cache = resolve(base_dir, t.at("cache").get<std::string>());
            if (!ts.replay && ts.base.base_url.empty()) {
                throw Error(ErrorCode::invalid_argument,
                            "teacher " + ts.base.model_name + " needs either base_url or replay");
            }
            ts.base.validate();
            for (const auto& other : m.teachers) {
                if (other.base.model_name == ts.base.model_name) {
                    throw Error(ErrorCode::invalid_argument, "duplicate teacher model " + ts.base.model_name);
                }
            }
            m.teachers.push_back(std::move(ts));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("manifest: ") + e.what());
    }
    return m;
}

RunManifest load_manifest(const fs::path& path, const GlobalOverrides& overrides) {
    require_file(path, "manifest");
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error&) {
        throw Error(ErrorCode::parse, "manifest is not valid JSON: " + path.string());
    }
    RunManifest m = parse_manifest(j, path.parent_path());
    m.source = path;
    if (overrides.seed) m.seed = *overrides.seed;
    if (overrides.out) m.output_dir = *overrides.out;

    require_file(m.corpus, "corpus");
    if (m.labels) require_file(*m.labels, "label list");
    if (m.preference_file) require_file(*m.preference_file, "preference file");
    if (m.embedding.kind == "file" && m.embedding.path) require_file(*m.embedding.path, "embedding file");
    for (const auto& t : m.teachers) {
        if (t.replay) require_file(*t.replay, "replay file");
    }
    return m;
}

std::string sanitize(std::string_view name) {
    std::string out;
    for (unsigned char c : name) {
        out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? static_cast<char>(c) : '_');
    }
    return out;
}

fs::path student_track_path(const RunManifest& m) { return m.output_dir / "student.jsonl"; }
fs::path preference_path(const RunManifest& m) { return m.output_dir / "preference.jsonl"; }

fs::path teacher_track_path(const RunManifest& m, const std::string& model, PromptMode mode, std::size_t run) {
    const std::string source(to_string(mode == PromptMode::zero ? TrackSource::teacher_zero : TrackSource::teacher_single));
    return m.output_dir / (source + "." + sanitize(model) + ".run" + std::to_string(run) + ".jsonl");
}

fs::path summary_path(const RunManifest& m, const std::string& model) {
    return m.output_dir / ("cai." + sanitize(model) + ".json");
}

Corpus load_manifest_corpus(const RunManifest& m) { return load_corpus(m.corpus, m.labels); }

std::vector<LabeledId> resolve_preference(const RunManifest& m, const Corpus& corpus) {
    if (m.preference_file) return load_preference(*m.preference_file, corpus.label_space());
    const fs::path saved = preference_path(m);
    if (fs::exists(saved)) return load_preference(saved, corpus.label_space());
    const auto strategy = m.preference_strategy.value_or(default_split_strategy(corpus));
    auto split = split_preference(corpus, m.preference_fraction, m.seed, strategy);
    save_preference(split.preference, corpus.label_space(), saved);
    return split.preference;
}

std::vector<std::string> target_ids(const RunManifest& m, const Corpus& corpus, std::span<const LabeledId> preference) {
    std::set<std::string, std::less<>> excluded;
    if (!m.include_preference) {
        for (const auto& [id, label] : preference) excluded.insert(id);
    }
    std::vector<std::string> out;
    for (const auto& inst : corpus.instances()) {
        if (excluded.count(inst.id) == 0) out.push_back(inst.id);
    }
    return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunManifest& m, const Corpus& corpus) {
    const auto& e = m.embedding;
    if (e.kind == "hash") return std::make_unique<HashEmbeddingProvider>(e.dim, e.seed);
    if (e.kind == "file") {
        if (e.path) return std::make_unique<FileEmbeddingProvider>(FileEmbeddingProvider::from_jsonl(*e.path));
        return std::make_unique<FileEmbeddingProvider>(FileEmbeddingProvider::from_corpus(corpus, m.corpus.string()));
    }
    return std::make_unique<RemoteEmbeddingProvider>(e.remote);
}

StudentStageResult annotate_student_stage(const RunManifest& m) {
    const Corpus corpus = load_manifest_corpus(m);
    const auto preference = resolve_preference(m, corpus);
    const auto ids = target_ids(m, corpus, preference);

    std::vector<std::string> needed = ids;
    for (const auto& [id, label] : preference) needed.push_back(id);
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());

    auto provider = make_embedding_provider(m, corpus);
    const EmbeddingMap embeddings = embed_corpus(*provider, corpus, needed);
    const auto clusters = build_clusters(preference, embeddings);
    const AnnotationTrack track = annotate_student(ids, embeddings, clusters, m.student);

    StudentStageResult result{student_track_path(m), track.size(), clusters.clusters().size()};
    save_track(track, corpus.label_space(), result.track);
    log_stage(m, "annotate-student", {result.track},
              {{"embedding", std::string(provider->kind()) + ":" + provider->provenance()},
               {"top_k", m.student.top_k}});
    return result;
}

TeacherStageResult annotate_teacher_stage(const RunManifest& m, const std::string& model, PromptMode mode,
                                          ChatClient* client) {
    const TeacherSettings& settings = m.teacher(model);
    const Corpus corpus = load_manifest_corpus(m);

    std::optional<AnnotationTrack> student;
    if (mode == PromptMode::single) {
        if (!fs::exists(student_track_path(m))) {
            throw Error(ErrorCode::precondition, "missing D_s: run annotate-student before single-shot annotation");
        }
        student = load_track(student_track_path(m), corpus.label_space(), TrackSource::student);
    }
    const auto preference = resolve_preference(m, corpus);
    const auto ids = target_ids(m, corpus, preference);

    std::unique_ptr<ChatClient> owned;
    if (client == nullptr) {
        if (settings.replay) {
            owned = std::make_unique<ReplayChatClient>(ReplayChatClient::from_jsonl(*settings.replay));
        } else {
            owned = std::make_unique<HttpChatClient>(settings.base.base_url, settings.base.api_key_env,
                                                     settings.base.retry);
        }
        client = owned.get();
    }
    TeacherCache cache(settings.cache.value_or(m.output_dir / "cache" / (sanitize(model) + ".jsonl")));

    TeacherStageResult result;
    const std::size_t calls_before = client->calls();
    for (std::size_t r = 0; r < settings.runs.size(); ++r) {
        TeacherConfig cfg = settings.base;
        cfg.temperature = settings.runs[r].temperature;
        cfg.seed = settings.runs[r].seed;
        const fs::path track_path = teacher_track_path(m, model, mode, r);
        fs::path raw_path = m.output_dir / "raw" / track_path.filename();
        try {
            TeacherRun run = annotate_teacher(ids, corpus, mode, student ? &*student : nullptr, cfg, *client, cache);
            save_track(run.track, corpus.label_space(), track_path);
            io::write_file(raw_path, serialize_exchanges(run.exchanges));
        } catch (const TeacherRunError& e) {
            fs::path partial = track_path;
            partial.replace_extension(".partial.jsonl");
            save_track(e.partial().track, corpus.label_space(), partial);
            raw_path.replace_extension(".partial.jsonl");
            io::write_file(raw_path, serialize_exchanges(e.partial().exchanges));
            throw;
        }
        result.tracks.push_back(track_path);
    }
    result.client_calls = client->calls() - calls_before;
    log_stage(m, "annotate-teacher", result.tracks,
              {{"model", model}, {"mode", std::string(to_string(mode))}, {"client_calls", result.client_calls}});
    return result;
}

io::Json cai_summary(const std::string& dataset, const std::string& model, const AnnotationTrack& student,
                     std::span<const AnnotationTrack> zero_runs, std::span<const AnnotationTrack> single_runs,
                     std::span<const TeacherRunSettings> runs, const Corpus* corpus,
                     std::vector<ConsistencyPartition>* partitions) {
    if (zero_runs.size() != single_runs.size() || zero_runs.size() != runs.size() || runs.empty()) {
        throw Error(ErrorCode::invalid_argument, "need one zero-shot and one single-shot track per run");
    }
    std::optional<GoldMap> gold;
    if (corpus != nullptr) {
        GoldMap g = gold_labels(*corpus);
        const bool covered = std::all_of(student.labels().begin(), student.labels().end(),
                                         [&](const auto& kv) { return g.count(kv.first) != 0; });
        if (covered) gold = std::move(g);
    }

    io::Json summary;
    summary["dataset"] = dataset;
    summary["model"] = model;
    io::Json run_list = io::Json::array();
    std::size_t pooled_c = 0, pooled_ic = 0;
    std::vector<double> ratios, accuracies;
    std::size_t excluded = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        ConsistencyPartition partition = identify(student, zero_runs[r], single_runs[r]);
        const CaiRatio ratio = cai_ratio(partition);
        pooled_c += ratio.n_consistent;
        pooled_ic += ratio.n_inconsistent;
        if (ratio.infinite()) {
            ++excluded;
        } else {
            ratios.push_back(ratio.ratio);
        }

        io::Json entry;
        entry["run"] = r;
        entry["temperature"] = runs[r].temperature;
        entry["seed"] = runs[r].seed;
        entry["n_consistent"] = ratio.n_consistent;
        entry["n_inconsistent"] = ratio.n_inconsistent;
        entry["ratio"] = ratio_json(ratio);
        if (gold) {
            std::set<std::string, std::less<>> all;
            for (const auto& [id, t] : partition.triples) all.insert(id);
            const auto acc = accuracy(zero_runs[r], *gold, all);
            if (acc) accuracies.push_back(*acc);
            const auto zero_strat = stratified_accuracy(partition, zero_runs[r], *gold);
            const auto single_strat = stratified_accuracy(partition, single_runs[r], *gold);
            entry["accuracy"] = opt_json(acc);
            entry["zero_accuracy_consistent"] = opt_json(zero_strat.consistent);
            entry["zero_accuracy_inconsistent"] = opt_json(zero_strat.inconsistent);
            entry["single_accuracy_consistent"] = opt_json(single_strat.consistent);
            entry["single_accuracy_inconsistent"] = opt_json(single_strat.inconsistent);
        }
        run_list.push_back(std::move(entry));
        if (partitions) partitions->push_back(std::move(partition));
    }

    const CaiRatio pooled = CaiRatio::from_counts(pooled_c, pooled_ic);
    summary["n_consistent"] = pooled.n_consistent;
    summary["n_inconsistent"] = pooled.n_inconsistent;
    summary["ratio"] = ratio_json(pooled);
    if (ratios.empty()) {
        summary["cai_mean"] = "inf";
        summary["cai_std"] = nullptr;
    } else {
        const MeanStd ms = mean_std(ratios);
        summary["cai_mean"] = ms.mean;
        summary["cai_std"] = ms.std;
    }
    summary["runs_with_infinite_ratio"] = excluded;
    if (!accuracies.empty()) {
        const MeanStd ms = mean_std(accuracies);
        summary["accuracy_mean"] = ms.mean;
        summary["accuracy_std"] = ms.std;
    }
    summary["runs"] = std::move(run_list);
    return summary;
}

io::Json cai_stage(const RunManifest& m, const std::string& model) {
    const TeacherSettings& settings = m.teacher(model);
    const Corpus corpus = load_manifest_corpus(m);
    const auto& space = corpus.label_space();
    auto need = [](const fs::path& p) {
        if (!fs::exists(p)) throw Error(ErrorCode::precondition, "missing track " + p.string());
        return p;
    };
    const AnnotationTrack student = load_track(need(student_track_path(m)), space, TrackSource::student);
    std::vector<AnnotationTrack> zero, single;
    for (std::size_t r = 0; r < settings.runs.size(); ++r) {
        zero.push_back(load_track(need(teacher_track_path(m, model, PromptMode::zero, r)), space,
                                  TrackSource::teacher_zero));
        single.push_back(load_track(need(teacher_track_path(m, model, PromptMode::single, r)), space,
                                    TrackSource::teacher_single));
    }
    std::vector<ConsistencyPartition> partitions;
    io::Json summary = cai_summary(m.dataset, model, student, zero, single, settings.runs, &corpus, &partitions);

    std::vector<fs::path> outputs{summary_path(m, model)};
    io::write_file(outputs[0], summary.dump(2) + "\n");
    for (std::size_t r = 0; r < partitions.size(); ++r) {
        outputs.push_back(m.output_dir / ("partition." + sanitize(model) + ".run" + std::to_string(r) + ".jsonl"));
        io::write_file(outputs.back(), serialize_partition(partitions[r], space));
    }
    log_stage(m, "cai", outputs, {{"model", model}});
    return summary;
}

std::vector<stats::Observation> observations_from_summaries(std::span<const fs::path> paths) {
    std::vector<stats::Observation> out;
    for (const auto& path : paths) {
        json j;
        try {
            j = json::parse(io::read_file(path));
            stats::Observation obs;
            obs.dataset = j.at("dataset").get<std::string>();
            obs.model = j.at("model").get<std::string>();
            const auto& mean = j.at("cai_mean");
            obs.cai = CaiRatio::from_value(mean.is_string() ? std::numeric_limits<double>::infinity()
                                                            : mean.get<double>());
            if (j.contains("accuracy_mean")) obs.accuracy = j.at("accuracy_mean").get<double>();
            out.push_back(std::move(obs));
        } catch (const json::exception&) {
            throw Error(ErrorCode::parse, "malformed cai summary: " + path.string());
        }
    }
    return out;
}

io::Json correlation_json(std::span<const stats::CorrelationResult> results) {
    io::Json out = io::Json::array();
    for (const auto& r : results) {
        io::Json j;
        j["model"] = r.model;
        j["r"] = r.r;
        j["t"] = r.t;
        j["dof"] = r.dof;
        j["p"] = r.p;
        j["n"] = r.n;
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace cai::pipeline
