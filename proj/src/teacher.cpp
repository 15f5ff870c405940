#include "cai/teacher.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <sstream>

#include "cai/io.hpp"
#include "cai/parallel.hpp"
#include "cai/random.hpp"

namespace cai {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void TeacherConfig::validate() const {
    if (model_name.empty()) throw Error(ErrorCode::invalid_argument, "teacher model name is empty");
    if (!(temperature >= 0.0)) throw Error(ErrorCode::invalid_argument, "temperature must be >= 0");
    if (max_parallel < 1) throw Error(ErrorCode::invalid_argument, "max_parallel must be >= 1");
    if (retry.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
}

std::string_view to_string(PromptMode m) { return m == PromptMode::zero ? "zero" : "single"; }

PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "zero") return PromptMode::zero;
    if (s == "single") return PromptMode::single;
    throw Error(ErrorCode::invalid_argument, "mode must be zero or single, got " + std::string(s));
}

// ---------------------------------------------------------------- prompt

PromptRecord build_prompt(std::span<const TextInstance* const> instances, const LabelSpace& space, PromptMode mode,
                          const AnnotationTrack* student) {
    if (instances.empty()) throw Error(ErrorCode::invalid_argument, "prompt needs at least one instance");
    PromptRecord record;
    record.mode = mode;
    if (mode == PromptMode::single) {
        if (student == nullptr) throw Error(ErrorCode::precondition, "single-shot prompt needs student labels");
        for (const auto* inst : instances) {
            if (!student->contains(inst->id)) {
                throw Error(ErrorCode::precondition, "missing student label for id " + inst->id);
            }
            const LabelId label = student->at(inst->id);
            if (label == kInvalidLabel) {
                throw Error(ErrorCode::precondition, "student label for id " + inst->id + " is invalid");
            }
            record.student_labels.push_back(label);
        }
    }

    std::ostringstream out;
    out << "You are annotating text for a classification task.\n"
        << "Assign exactly one label to each instance below, chosen from the allowed labels.\n\n"
        << "Allowed labels:\n";
    for (const auto& label : space.labels()) out << "- " << label << "\n";
    out << "\nInstances:\n";
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto* inst = instances[i];
        record.ids.push_back(inst->id);
        out << "\n[" << inst->id << "]\n" << "Text: " << inst->text << "\n";
        if (mode == PromptMode::single) {
            out << "A preliminary annotation suggests: " << space.name(record.student_labels[i]) << "\n";
        }
    }
    out << "\nRespond with exactly one line per instance in the form `<id>: <label>`, "
        << "where <id> is the bracketed instance id without brackets and <label> is one of the allowed labels. "
        << "Output nothing else.\n";
    record.text = out.str();
    return record;
}

std::vector<PromptRecord> build_prompts(std::span<const std::string> ids, const Corpus& corpus, PromptMode mode,
                                        const AnnotationTrack* student, std::size_t batch_size) {
    if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
    std::vector<PromptRecord> prompts;
    for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
        std::vector<const TextInstance*> batch;
        for (std::size_t i = begin; i < std::min(ids.size(), begin + batch_size); ++i) {
            batch.push_back(&corpus.at(ids[i]));
        }
        prompts.push_back(build_prompt(batch, corpus.label_space(), mode, student));
    }
    return prompts;
}

// ---------------------------------------------------------------- clients

HttpChatClient::HttpChatClient(std::string base_url, std::string api_key_env, http::RetryPolicy retry,
                               std::chrono::seconds timeout)
    : url_(http::join_url(base_url, "/chat/completions")), headers_(http::auth_headers(api_key_env)) {
    http::parse_url(url_);
    options_.retry = retry;
    options_.timeout = timeout;
    options_.request_counter = &requests_;
}

std::string HttpChatClient::request_body(const ChatRequest& request) {
    io::Json body;
    body["model"] = request.model;
    body["messages"] = io::Json::array({io::Json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    return body.dump();
}

std::string HttpChatClient::extract_content(const std::string& response_body) {
    nlohmann::json response;
    try {
        response = nlohmann::json::parse(response_body);
    } catch (const nlohmann::json::parse_error&) {
        throw Error(ErrorCode::parse, "non-JSON chat completion response");
    }
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::parse, "chat completion response lacks choices[0].message.content");
    }
}

std::string HttpChatClient::do_complete(const ChatRequest& request) {
    return extract_content(http::post_json(url_, request_body(request), headers_, options_));
}

ReplayChatClient::ReplayChatClient(std::map<std::string, std::string> by_prompt_hash)
    : responses_(std::move(by_prompt_hash)) {}

ReplayChatClient ReplayChatClient::from_jsonl(const fs::path& path) {
    std::map<std::string, std::string> responses;
    io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
        try {
            responses.insert_or_assign(j.at("key").get<std::string>(), j.at("response").get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse,
                        path.string() + ": line " + std::to_string(line) + ": expected {\"key\", \"response\"}");
        }
    });
    return ReplayChatClient(std::move(responses));
}

std::string ReplayChatClient::prompt_key(std::string_view prompt) { return io::sha256_hex(prompt); }

std::string ReplayChatClient::do_complete(const ChatRequest& request) {
    const std::string key = prompt_key(request.prompt);
    auto it = responses_.find(key);
    if (it == responses_.end()) throw Error(ErrorCode::not_found, "no replay response for prompt " + key);
    return it->second;
}

// ---------------------------------------------------------------- cache

TeacherCache::TeacherCache(fs::path log_path) : log_path_(std::move(log_path)) {
    if (!fs::exists(*log_path_)) return;
    io::for_each_jsonl(*log_path_, [&](std::size_t line, const nlohmann::json& j) {
        try {
            entries_.insert_or_assign(j.at("key").get<std::string>(), j.at("response").get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse,
                        log_path_->string() + ": line " + std::to_string(line) + ": malformed cache entry");
        }
    });
}

std::string TeacherCache::key(const ChatRequest& request) {
    nlohmann::json material;
    material["model"] = request.model;
    material["prompt"] = request.prompt;
    material["temperature"] = request.temperature;
    material["seed"] = request.seed;
    return io::sha256_hex(material.dump());
}

std::optional<std::string> TeacherCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void TeacherCache::put(const std::string& key, const std::string& response) {
    std::lock_guard lock(mu_);
    entries_.insert_or_assign(key, response);
    if (log_path_) {
        io::Json j;
        j["key"] = key;
        j["response"] = response;
        j["ts"] = utc_timestamp();
        io::append_line(*log_path_, j.dump());
    }
}

std::string TeacherCache::get_or_compute(const std::string& key, const std::function<std::string()>& compute) {
    std::promise<std::string> promise;
    std::unique_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    if (auto it = in_flight_.find(key); it != in_flight_.end()) {
        auto shared = it->second;
        lock.unlock();
        return shared.get();
    }
    in_flight_.emplace(key, promise.get_future().share());
    lock.unlock();

    try {
        std::string value = compute();
        put(key, value);
        promise.set_value(value);
        std::lock_guard done(mu_);
        in_flight_.erase(key);
        return value;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard done(mu_);
        in_flight_.erase(key);
        throw;
    }
}

std::size_t TeacherCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::string query_teacher(ChatClient& client, const PromptRecord& prompt, const TeacherConfig& cfg,
                          TeacherCache& cache) {
    ChatRequest request{cfg.model_name, prompt.text, cfg.temperature, cfg.seed};
    return cache.get_or_compute(TeacherCache::key(request), [&] { return client.complete(request); });
}

// ---------------------------------------------------------------- parsing

std::string canonical_answer(std::string_view raw) {
    std::string s = canonical_label(raw);
    auto strip = [](char c) {
        return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' || c == '\'' ||
               c == '`' || c == '*' || c == ' ' || c == '\t';
    };
    while (!s.empty() && strip(s.back())) s.pop_back();
    std::size_t lead = 0;
    while (lead < s.size() && strip(s[lead])) ++lead;
    return s.substr(lead);
}

std::map<std::string, LabelId, std::less<>> parse_labels(std::string_view raw, std::span<const std::string> expected_ids,
                                                         const LabelSpace& space) {
    std::map<std::string, std::string, std::less<>> answers;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        const auto end = raw.find('\n', pos);
        std::string_view line = trim(raw.substr(pos, end == std::string_view::npos ? raw.npos : end - pos));
        pos = end == std::string_view::npos ? raw.size() + 1 : end + 1;

        while (!line.empty() && (line.front() == '-' || line.front() == '*' || line.front() == '`' ||
                                 line.front() == '[' || line.front() == ' ')) {
            line.remove_prefix(1);
        }
        for (const auto& id : expected_ids) {
            if (answers.count(id) != 0 || !line.starts_with(id)) continue;
            std::string_view rest = line.substr(id.size());
            if (!rest.empty() && rest.front() == ']') rest.remove_prefix(1);
            rest = trim(rest);
            if (rest.empty() || rest.front() != ':') continue;
            answers.emplace(id, std::string(rest.substr(1)));
            break;
        }
    }

    std::map<std::string, LabelId, std::less<>> out;
    for (const auto& id : expected_ids) {
        LabelId label = kInvalidLabel;
        if (auto it = answers.find(id); it != answers.end()) {
            const std::string answer = canonical_answer(it->second);
            if (auto exact = space.find(answer)) {
                label = *exact;
            } else if (!answer.empty()) {
                std::size_t hits = 0;
                for (LabelId l = 0; l < space.size(); ++l) {
                    if (answer.find(space.name(l)) != std::string::npos) {
                        ++hits;
                        label = l;
                    }
                }
                if (hits != 1) label = kInvalidLabel;
            }
        }
        out.emplace(id, label);
    }
    return out;
}

// ---------------------------------------------------------------- annotate

TeacherRun annotate_teacher(std::span<const std::string> ids, const Corpus& corpus, PromptMode mode,
                            const AnnotationTrack* student, const TeacherConfig& cfg, ChatClient& client,
                            TeacherCache& cache) {
    cfg.validate();
    if (mode == PromptMode::single && student == nullptr) {
        throw Error(ErrorCode::precondition, "single-shot annotation requires the student track (missing D_s)");
    }
    const TrackSource source = mode == PromptMode::zero ? TrackSource::teacher_zero : TrackSource::teacher_single;

    const auto prompts = build_prompts(ids, corpus, mode, student, cfg.batch_size);

    std::vector<std::optional<std::string>> responses(prompts.size());
    auto assemble = [&](std::size_t count) {
        TeacherRun run{AnnotationTrack(source), {}};
        for (std::size_t b = 0; b < count; ++b) {
            const auto& prompt = prompts[b];
            for (auto& [id, label] : parse_labels(*responses[b], prompt.ids, corpus.label_space())) {
                run.track.set(id, label);
            }
            run.exchanges.push_back(
                {TeacherCache::key({cfg.model_name, prompt.text, cfg.temperature, cfg.seed}), prompt.ids, *responses[b]});
        }
        return run;
    };

    try {
        parallel_for(prompts.size(), cfg.max_parallel,
                     [&](std::size_t b) { responses[b] = query_teacher(client, prompts[b], cfg, cache); });
    } catch (const Error& e) {
        std::size_t prefix = 0;
        while (prefix < responses.size() && responses[prefix]) ++prefix;
        throw TeacherRunError(e, assemble(prefix));
    }
    return assemble(prompts.size());
}

std::string serialize_exchanges(std::span<const RawExchange> exchanges) {
    std::string out;
    for (const auto& ex : exchanges) {
        io::Json j;
        j["key"] = ex.key;
        j["ids"] = ex.ids;
        j["response"] = ex.response;
        out += j.dump() + "\n";
    }
    return out;
}

std::string synthesize_replay(std::span<const PromptRecord> prompts, const Corpus& corpus, double accuracy,
                              std::uint64_t seed) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error(ErrorCode::invalid_argument, "accuracy must be in [0, 1]");
    const auto& space = corpus.label_space();
    std::string out;
    for (const auto& prompt : prompts) {
        std::string response;
        for (const auto& id : prompt.ids) {
            Rng rng(seed ^ mix64(fnv1a(id)), prompt.mode == PromptMode::zero ? 0 : 1);
            const auto& gold = corpus.at(id).gold;
            LabelId label;
            if (!gold) {
                label = static_cast<LabelId>(rng.below(space.size()));
            } else if (space.size() == 1 || rng.bernoulli(accuracy)) {
                label = *gold;
            } else {
                const auto wrong = static_cast<LabelId>(rng.below(space.size() - 1));
                label = wrong >= *gold ? wrong + 1 : wrong;
            }
            response += id + ": " + space.name(label) + "\n";
        }
        io::Json j;
        j["key"] = ReplayChatClient::prompt_key(prompt.text);
        j["response"] = response;
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace cai
