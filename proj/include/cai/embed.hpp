#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cai/core.hpp"
#include "cai/embedding.hpp"
#include "cai/http.hpp"

namespace cai {

/// Feature-hashes lowercase word unigrams into `dim` signed buckets and
/// L2-normalizes. Deterministic in (text, dim, seed).
EmbeddingVector hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

/// Source of sentence embeddings for the student annotator.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string_view kind() const = 0;
    /// Model name or file path the vectors came from.
    virtual std::string provenance() const = 0;
    /// Expected dimension, or 0 when only known after the first response.
    virtual std::size_t dim() const = 0;

    /// One vector per instance, in input order.
    virtual std::vector<EmbeddingVector> embed(std::span<const TextInstance* const> instances) = 0;
};

/// Looks vectors up by instance id.
class FileEmbeddingProvider final : public EmbeddingProvider {
public:
    FileEmbeddingProvider(EmbeddingMap vectors, std::string provenance);

    /// Sidecar jsonl of `{"id": ..., "vector": [...]}` lines.
    static FileEmbeddingProvider from_jsonl(const std::filesystem::path& path);
    /// Uses the `vector` fields carried by the corpus itself.
    static FileEmbeddingProvider from_corpus(const Corpus& corpus, std::string provenance);

    std::string_view kind() const override { return "file"; }
    std::string provenance() const override { return provenance_; }
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed(std::span<const TextInstance* const> instances) override;

private:
    EmbeddingMap vectors_;
    std::string provenance_;
    std::size_t dim_ = 0;
};

class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    HashEmbeddingProvider(std::size_t dim, std::uint64_t seed);

    std::string_view kind() const override { return "hash"; }
    std::string provenance() const override;
    std::size_t dim() const override { return dim_; }
    std::vector<EmbeddingVector> embed(std::span<const TextInstance* const> instances) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

struct RemoteEmbeddingConfig {
    std::string url;          // full endpoint URL, e.g. http://host/v1/embeddings
    std::string model;
    std::string api_key_env;  // empty: no Authorization header
    std::size_t batch_size = 32;
    std::size_t max_parallel = 1;
    http::RetryPolicy retry;
};

/// Calls an embeddings endpoint: POST {"model", "input": [texts]} and reads
/// {"data": [{"index", "embedding"}]}. Batches run with bounded parallelism
/// and are reassembled in input order.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string_view kind() const override { return "remote"; }
    std::string provenance() const override { return config_.model; }
    std::size_t dim() const override { return 0; }
    std::vector<EmbeddingVector> embed(std::span<const TextInstance* const> instances) override;

    std::size_t requests_sent() const { return requests_.load(); }

private:
    RemoteEmbeddingConfig config_;
    std::atomic<std::size_t> requests_{0};
};

/// Embeds the given ids (all corpus ids when empty) and checks that every
/// vector shares one dimension.
EmbeddingMap embed_corpus(EmbeddingProvider& provider, const Corpus& corpus,
                          std::span<const std::string> ids = {});

/// Writes `{"id", "vector"}` jsonl, one line per entry, in id order.
void save_embeddings(const EmbeddingMap& embeddings, const std::filesystem::path& path);

}  // namespace cai
