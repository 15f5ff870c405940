#include <doctest.h>

#include <cmath>
#include <functional>

#include "cai/embed.hpp"
#include "cai/error.hpp"
#include "cai/io.hpp"
#include "unit/support.hpp"

using namespace cai;
using test_support::LocalServer;
using test_support::TempDir;

namespace {

Corpus corpus_of(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::vector<TextInstance> instances;
    for (const auto& [id, text] : rows) {
        TextInstance t;
        t.id = id;
        t.text = text;
        instances.push_back(std::move(t));
    }
    return Corpus(std::move(instances), LabelSpace::from_declared({"a", "b"}));
}

}  // namespace

TEST_CASE("embedding vectors reject degenerate input") {
    CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), Error);
    CHECK_THROWS_AS(EmbeddingVector({0.0, 0.0}), Error);
    CHECK_THROWS_AS(EmbeddingVector({1.0, NAN}), Error);
    const EmbeddingVector v({3.0, 4.0});
    CHECK(v.norm() == 5.0);
    CHECK(v.scaled(2.0).norm() == 10.0);
    CHECK_THROWS_AS(v.scaled(0.0), Error);
}

TEST_CASE("cosine on hand-computed pairs") {
    CHECK(cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0})) == 1.0);
    CHECK(cosine(EmbeddingVector({1, 0}), EmbeddingVector({0, 1})) == 0.0);
    // 24 / (5 * 5)
    CHECK(cosine(EmbeddingVector({3, 4}), EmbeddingVector({4, 3})) == doctest::Approx(0.96).epsilon(1e-15));
    CHECK_THROWS_AS(cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0, 0})), Error);
}

TEST_CASE("hash_embed is deterministic and count-proportional") {
    const auto a = hash_embed("hello world", 64, 7);
    const auto b = hash_embed("hello world", 64, 7);
    CHECK(a == b);
    CHECK(a.dim() == 64);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-15));

    // "hello hello" doubles every count, so the normalized vectors coincide.
    const auto h1 = hash_embed("hello", 64, 7);
    const auto h2 = hash_embed("hello hello", 64, 7);
    double dot = 0.0;
    for (std::size_t i = 0; i < 64; ++i) dot += h1[i] * h2[i];
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-15));

    CHECK(hash_embed("Hello, WORLD!", 64, 7) == a);
    CHECK_FALSE(hash_embed("hello world", 64, 8) == a);
    CHECK_THROWS_AS(hash_embed("", 64, 7), Error);
    CHECK_THROWS_AS(hash_embed("...", 64, 7), Error);
    CHECK_THROWS_AS(hash_embed("x", 1, 7), Error);
}

TEST_CASE("file provider serves stored vectors and names missing ids") {
    TempDir dir("embed");
    io::write_file(dir / "e.jsonl",
                   "{\"id\":\"x1\",\"vector\":[1,0]}\n"
                   "{\"id\":\"x2\",\"vector\":[0,2]}\n");
    auto provider = FileEmbeddingProvider::from_jsonl(dir / "e.jsonl");
    CHECK(provider.dim() == 2);

    const Corpus ok = corpus_of({{"x1", "a"}, {"x2", "b"}});
    const auto map = embed_corpus(provider, ok);
    REQUIRE(map.size() == 2);
    CHECK(map.at("x2") == EmbeddingVector({0, 2}));

    const Corpus missing = corpus_of({{"x1", "a"}, {"x9", "b"}});
    try {
        embed_corpus(provider, missing);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("x9") != std::string::npos);
    }
}

TEST_CASE("hash provider gives equal vectors for equal text") {
    HashEmbeddingProvider provider(32, 1);
    const Corpus c = corpus_of({{"a", "same text"}, {"b", "same text"}, {"c", "other"}});
    const auto map = embed_corpus(provider, c);
    CHECK(map.at("a") == map.at("b"));
    CHECK_FALSE(map.at("a") == map.at("c"));

    const std::vector<std::string> subset{"c"};
    CHECK(embed_corpus(provider, c, subset).size() == 1);
}

TEST_CASE("embeddings saved to jsonl load back identically") {
    TempDir dir("embed");
    HashEmbeddingProvider provider(16, 3);
    const Corpus c = corpus_of({{"a", "alpha beta"}, {"b", "gamma"}});
    const auto map = embed_corpus(provider, c);
    save_embeddings(map, dir / "e.jsonl");
    auto back = FileEmbeddingProvider::from_jsonl(dir / "e.jsonl");
    const auto again = embed_corpus(back, c);
    CHECK(again.at("a") == map.at("a"));
    CHECK(again.at("b") == map.at("b"));
}

TEST_CASE("remote provider batches requests and honours response indices") {
    LocalServer server("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        const auto& input = body.at("input");
        // Answer in reverse order; the client must use "index".
        for (std::size_t i = input.size(); i-- > 0;) {
            const double len = static_cast<double>(input[i].get<std::string>().size());
            data.push_back({{"index", i}, {"embedding", {len, 1.0}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });

    RemoteEmbeddingConfig cfg;
    cfg.url = server.origin() + "/v1/embeddings";
    cfg.model = "test-embedder";
    cfg.batch_size = 2;
    cfg.max_parallel = 2;
    RemoteEmbeddingProvider provider(cfg);
    const Corpus c = corpus_of({{"a", "x"}, {"b", "xx"}, {"c", "xxx"}, {"d", "xxxx"}, {"e", "xxxxx"}});
    const auto map = embed_corpus(provider, c);
    REQUIRE(map.size() == 5);
    CHECK(map.at("a") == EmbeddingVector({1, 1}));
    CHECK(map.at("e") == EmbeddingVector({5, 1}));
    CHECK(provider.requests_sent() == 3);
    CHECK(server.hits() == 3);
}

TEST_CASE("remote provider reports malformed responses") {
    LocalServer server("/emb", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nothing\":true}", "application/json");
    });
    RemoteEmbeddingConfig cfg;
    cfg.url = server.origin() + "/emb";
    cfg.model = "m";
    RemoteEmbeddingProvider provider(cfg);
    const Corpus c = corpus_of({{"a", "x"}});
    CHECK_THROWS_AS(embed_corpus(provider, c), Error);
}
