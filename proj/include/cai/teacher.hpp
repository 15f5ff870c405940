#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cai/annotation.hpp"
#include "cai/core.hpp"
#include "cai/error.hpp"
#include "cai/http.hpp"

namespace cai {

struct TeacherConfig {
    std::string model_name;
    std::string base_url;     // chat endpoint is base_url + "/chat/completions"
    std::string api_key_env;  // empty: no Authorization header
    double temperature = 0.0;
    std::int64_t seed = 0;
    std::size_t max_parallel = 1;
    http::RetryPolicy retry;
    std::size_t batch_size = 1;  // instances per prompt ("group prompting")

    void validate() const;
};

enum class PromptMode { zero, single };

std::string_view to_string(PromptMode m);
PromptMode parse_prompt_mode(std::string_view s);

struct PromptRecord {
    std::vector<std::string> ids;
    std::string text;
    PromptMode mode = PromptMode::zero;
    std::vector<LabelId> student_labels;  // parallel to ids in single mode, empty in zero mode
};

/// Renders the annotation prompt: task statement, every allowed label, one
/// id-tagged block per instance (plus the student's suggestion in single
/// mode) and the `<id>: <label>` answer format.
PromptRecord build_prompt(std::span<const TextInstance* const> instances, const LabelSpace& space, PromptMode mode,
                          const AnnotationTrack* student = nullptr);

/// Splits ids into consecutive groups of `batch_size` and renders one prompt
/// per group, exactly as annotate_teacher issues them.
std::vector<PromptRecord> build_prompts(std::span<const std::string> ids, const Corpus& corpus, PromptMode mode,
                                        const AnnotationTrack* student, std::size_t batch_size);

struct ChatRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    std::int64_t seed = 0;
};

/// Chat-completion backend returning the assistant message content.
class ChatClient {
public:
    ChatClient() = default;
    ChatClient(ChatClient&& other) noexcept : calls_(other.calls_.load()) {}
    ChatClient& operator=(ChatClient&&) = delete;
    virtual ~ChatClient() = default;

    std::string complete(const ChatRequest& request) {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return do_complete(request);
    }

    /// Number of complete() invocations so far.
    std::size_t calls() const { return calls_.load(); }

protected:
    virtual std::string do_complete(const ChatRequest& request) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

/// POSTs {"model", "messages": [{"role": "user", "content"}], "temperature"}
/// and returns choices[0].message.content.
class HttpChatClient final : public ChatClient {
public:
    HttpChatClient(std::string base_url, std::string api_key_env, http::RetryPolicy retry,
                   std::chrono::seconds timeout = std::chrono::seconds(120));

    std::size_t requests_sent() const { return requests_.load(); }

    static std::string request_body(const ChatRequest& request);
    static std::string extract_content(const std::string& response_body);

protected:
    std::string do_complete(const ChatRequest& request) override;

private:
    std::string url_;
    http::Headers headers_;
    http::PostOptions options_;
    std::atomic<std::size_t> requests_{0};
};

/// Offline teacher: canned responses keyed by SHA-256 of the prompt text,
/// stored in the same jsonl shape as the cache log.
class ReplayChatClient final : public ChatClient {
public:
    explicit ReplayChatClient(std::map<std::string, std::string> by_prompt_hash);
    static ReplayChatClient from_jsonl(const std::filesystem::path& path);

    static std::string prompt_key(std::string_view prompt);

protected:
    std::string do_complete(const ChatRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
};

/// Response cache keyed by SHA-256 over (model, prompt, temperature, seed).
/// Optionally backed by an append-only jsonl log {"key", "response", "ts"}.
/// Concurrent lookups of one missing key share a single computation.
class TeacherCache {
public:
    TeacherCache() = default;
    explicit TeacherCache(std::filesystem::path log_path);

    static std::string key(const ChatRequest& request);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& response);
    std::string get_or_compute(const std::string& key, const std::function<std::string()>& compute);

    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
    std::map<std::string, std::shared_future<std::string>> in_flight_;
    std::optional<std::filesystem::path> log_path_;
};

std::string query_teacher(ChatClient& client, const PromptRecord& prompt, const TeacherConfig& cfg,
                          TeacherCache& cache);

/// Lenient canonical form for teacher output: lowercase, trimmed, with
/// surrounding quotes and terminal punctuation stripped.
std::string canonical_answer(std::string_view raw);

/// Maps `<id>: <label>` lines to labels. Exact canonical match first, then a
/// label that is the only one occurring as a substring of the answer;
/// everything else (including missing ids) becomes kInvalidLabel.
std::map<std::string, LabelId, std::less<>> parse_labels(std::string_view raw, std::span<const std::string> expected_ids,
                                                         const LabelSpace& space);

struct RawExchange {
    std::string key;
    std::vector<std::string> ids;
    std::string response;
};

struct TeacherRun {
    AnnotationTrack track;
    std::vector<RawExchange> exchanges;  // batch order
};

/// Thrown when a batch fails; carries the contiguous completed prefix.
class TeacherRunError : public Error {
public:
    TeacherRunError(const Error& cause, TeacherRun partial)
        : Error(cause.code(), cause.what()), partial_(std::move(partial)) {}
    const TeacherRun& partial() const noexcept { return partial_; }

private:
    TeacherRun partial_;
};

TeacherRun annotate_teacher(std::span<const std::string> ids, const Corpus& corpus, PromptMode mode,
                            const AnnotationTrack* student, const TeacherConfig& cfg, ChatClient& client,
                            TeacherCache& cache);

std::string serialize_exchanges(std::span<const RawExchange> exchanges);

/// Builds replay-file content for offline runs: every prompt is answered
/// with the gold label with probability `accuracy`, otherwise with a
/// uniformly drawn wrong label (instances without gold get a uniform label).
/// Deterministic in (prompts, seed).
std::string synthesize_replay(std::span<const PromptRecord> prompts, const Corpus& corpus, double accuracy,
                              std::uint64_t seed);

}  // namespace cai
