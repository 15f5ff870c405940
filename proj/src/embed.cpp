#include "cai/embed.hpp"

#include <cctype>
#include <cmath>
#include <optional>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/parallel.hpp"
#include "cai/random.hpp"

namespace cai {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ASCII letters and digits plus any non-ASCII byte, so UTF-8 words stay whole.
bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

}  // namespace

EmbeddingVector hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw Error(ErrorCode::invalid_argument, "hash embedding dimension must be >= 2");
    std::vector<double> buckets(dim, 0.0);
    const std::uint64_t salt = mix64(seed);
    std::string token;
    std::size_t tokens = 0;
    auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t h = mix64(fnv1a(token) ^ salt);
        buckets[h % dim] += (h >> 63) ? -1.0 : 1.0;
        ++tokens;
        token.clear();
    };
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            token.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else {
            flush();
        }
    }
    flush();
    if (tokens == 0) throw Error(ErrorCode::invalid_argument, "cannot hash-embed empty text");

    double sq = 0.0;
    for (double b : buckets) sq += b * b;
    if (sq == 0.0) throw Error(ErrorCode::invalid_argument, "hashed features cancel to a zero vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& b : buckets) b *= inv;
    return EmbeddingVector(std::move(buckets));
}

// ---------------------------------------------------------------- file provider

FileEmbeddingProvider::FileEmbeddingProvider(EmbeddingMap vectors, std::string provenance)
    : vectors_(std::move(vectors)), provenance_(std::move(provenance)) {
    for (const auto& [id, v] : vectors_) {
        if (dim_ != 0 && v.dim() != dim_) {
            throw Error(ErrorCode::invalid_argument, "inconsistent embedding dimension at id " + id);
        }
        dim_ = v.dim();
    }
}

FileEmbeddingProvider FileEmbeddingProvider::from_jsonl(const fs::path& path) {
    EmbeddingMap vectors;
    io::for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
        const std::string where = path.string() + ": line " + std::to_string(line) + ": ";
        std::string id;
        std::vector<double> values;
        try {
            id = j.at("id").get<std::string>();
            values = j.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, where + "expected {\"id\": string, \"vector\": [numbers]}");
        }
        try {
            if (!vectors.emplace(id, EmbeddingVector(std::move(values))).second) {
                throw Error(ErrorCode::invalid_argument, "duplicate id " + id);
            }
        } catch (const Error& e) {
            throw Error(e.code(), where + e.what());
        }
    });
    return FileEmbeddingProvider(std::move(vectors), path.string());
}

FileEmbeddingProvider FileEmbeddingProvider::from_corpus(const Corpus& corpus, std::string provenance) {
    return FileEmbeddingProvider(corpus.vectors(), std::move(provenance));
}

std::vector<EmbeddingVector> FileEmbeddingProvider::embed(std::span<const TextInstance* const> instances) {
    std::vector<EmbeddingVector> out;
    out.reserve(instances.size());
    for (const auto* inst : instances) {
        auto it = vectors_.find(inst->id);
        if (it == vectors_.end()) {
            throw Error(ErrorCode::not_found, "no embedding for id " + inst->id + " in " + provenance_);
        }
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------- hash provider

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 2) throw Error(ErrorCode::invalid_argument, "hash embedding dimension must be >= 2");
}

std::string HashEmbeddingProvider::provenance() const {
    return "hash(dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_) + ")";
}

std::vector<EmbeddingVector> HashEmbeddingProvider::embed(std::span<const TextInstance* const> instances) {
    std::vector<EmbeddingVector> out;
    out.reserve(instances.size());
    for (const auto* inst : instances) {
        try {
            out.push_back(hash_embed(inst->text, dim_, seed_));
        } catch (const Error& e) {
            throw Error(e.code(), "id " + inst->id + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------- remote provider

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {
    if (config_.batch_size == 0) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
    if (config_.max_parallel == 0) throw Error(ErrorCode::invalid_argument, "max_parallel must be >= 1");
    http::parse_url(config_.url);
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed(std::span<const TextInstance* const> instances) {
    const http::Headers headers = http::auth_headers(config_.api_key_env);
    const std::size_t n_batches = (instances.size() + config_.batch_size - 1) / config_.batch_size;
    std::vector<std::vector<std::optional<EmbeddingVector>>> results(n_batches);

    http::PostOptions options;
    options.retry = config_.retry;
    options.request_counter = &requests_;

    parallel_for(n_batches, config_.max_parallel, [&](std::size_t b) {
        const std::size_t begin = b * config_.batch_size;
        const std::size_t end = std::min(instances.size(), begin + config_.batch_size);
        nlohmann::json request;
        request["model"] = config_.model;
        request["input"] = nlohmann::json::array();
        for (std::size_t i = begin; i < end; ++i) request["input"].push_back(instances[i]->text);

        const std::string body = http::post_json(config_.url, request.dump(), headers, options);
        auto& slot = results[b];
        slot.resize(end - begin);
        try {
            const auto response = nlohmann::json::parse(body);
            for (const auto& item : response.at("data")) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= slot.size()) {
                    throw Error(ErrorCode::parse, "embedding index out of range: " + std::to_string(index));
                }
                slot[index].emplace(item.at("embedding").get<std::vector<double>>());
            }
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::parse, "malformed embeddings response from " + config_.url);
        }
        for (std::size_t i = 0; i < slot.size(); ++i) {
            if (!slot[i]) {
                throw Error(ErrorCode::parse, "embeddings response lacks id " + instances[begin + i]->id);
            }
        }
    });

    std::vector<EmbeddingVector> out;
    out.reserve(instances.size());
    for (auto& batch : results) {
        for (auto& v : batch) out.push_back(std::move(*v));
    }
    return out;
}

// ---------------------------------------------------------------- corpus

EmbeddingMap embed_corpus(EmbeddingProvider& provider, const Corpus& corpus, std::span<const std::string> ids) {
    std::vector<const TextInstance*> wanted;
    if (ids.empty()) {
        for (const auto& inst : corpus.instances()) wanted.push_back(&inst);
    } else {
        for (const auto& id : ids) wanted.push_back(&corpus.at(id));
    }
    auto vectors = provider.embed(wanted);
    if (vectors.size() != wanted.size()) {
        throw Error(ErrorCode::invalid_argument, "provider returned the wrong number of vectors");
    }
    const std::size_t expected = provider.dim() != 0 ? provider.dim() : (vectors.empty() ? 0 : vectors[0].dim());
    EmbeddingMap out;
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        if (vectors[i].dim() != expected) {
            throw Error(ErrorCode::invalid_argument, "dimension mismatch for id " + wanted[i]->id + ": expected " +
                                                         std::to_string(expected) + ", got " +
                                                         std::to_string(vectors[i].dim()));
        }
        out.insert_or_assign(wanted[i]->id, std::move(vectors[i]));
    }
    return out;
}

void save_embeddings(const EmbeddingMap& embeddings, const fs::path& path) {
    std::string out;
    for (const auto& [id, v] : embeddings) {
        io::Json j;
        j["id"] = id;
        j["vector"] = std::vector<double>(v.values().begin(), v.values().end());
        out += j.dump() + "\n";
    }
    io::write_file(path, out);
}

}  // namespace cai
