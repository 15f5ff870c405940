#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cai/error.hpp"
#include "cai/student.hpp"

using namespace cai;

namespace {

EmbeddingVector v2(double a, double b) { return EmbeddingVector({a, b}); }

PreferenceClusterSet two_axis_clusters() {
    EmbeddingMap emb;
    emb.emplace("pa", v2(1, 0));
    emb.emplace("pb", v2(0, 1));
    const std::vector<LabeledId> pref{{"pa", 0}, {"pb", 1}};
    return build_clusters(pref, emb);
}

}  // namespace

TEST_CASE("average similarity over the top-k cosines") {
    const std::vector<EmbeddingVector> cluster{v2(1, 0), v2(0, 1), v2(-1, 0)};
    // cosines {1, 0, -1}: top-2 mean is 0.5, k >= |C| averages all three
    CHECK(average_similarity(v2(1, 0), cluster, 2) == 0.5);
    CHECK(average_similarity(v2(1, 0), cluster, 5) == 0.0);
    CHECK(average_similarity(v2(1, 0), cluster, 1) == 1.0);

    const std::vector<EmbeddingVector> single{v2(3, 4)};
    for (std::size_t k : {1u, 2u, 10u}) {
        CHECK(average_similarity(v2(4, 3), single, k) == cosine(v2(4, 3), v2(3, 4)));
    }
    CHECK_THROWS_AS(average_similarity(v2(1, 0), cluster, 0), Error);
    CHECK_THROWS_AS(average_similarity(v2(1, 0), std::vector<EmbeddingVector>{}, 1), Error);
}

TEST_CASE("cluster and vector overloads agree bit for bit") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 2 + rng() % 20;
        const std::size_t size = 1 + rng() % 15;
        auto rand_vec = [&] {
            std::vector<double> v(dim);
            for (auto& x : v) x = n(rng);
            return EmbeddingVector(std::move(v));
        };
        std::vector<EmbeddingVector> members;
        Cluster cluster(0, dim);
        for (std::size_t i = 0; i < size; ++i) {
            members.push_back(rand_vec());
            cluster.add("m" + std::to_string(i), members.back());
        }
        const auto e = rand_vec();
        const std::size_t k = 1 + rng() % 12;
        CHECK(average_similarity(e, members, k) == average_similarity(e, cluster, k));
    }
}

TEST_CASE("assign_annotation picks the larger average similarity") {
    const auto clusters = two_axis_clusters();
    StudentConfig cfg;
    cfg.top_k = 5;
    const auto a = assign_annotation(v2(0.9, 0.1), clusters, cfg);
    CHECK(a.label == 0);
    const double norm = std::sqrt(0.82);
    CHECK(a.scores.at(0) == doctest::Approx(0.9 / norm).epsilon(1e-15));  // 0.9939
    CHECK(a.scores.at(1) == doctest::Approx(0.1 / norm).epsilon(1e-15));  // 0.1104

    const auto scaled = assign_annotation(v2(9, 1), clusters, cfg);
    CHECK(scaled.label == a.label);
    CHECK(scaled.scores.at(0) == doctest::Approx(a.scores.at(0)).epsilon(1e-15));
}

TEST_CASE("exact ties go to the canonically first label") {
    const auto clusters = two_axis_clusters();
    const double h = 1.0 / std::sqrt(2.0);
    const auto a = assign_annotation(v2(h, h), clusters, StudentConfig{});
    CHECK(a.scores.at(0) == a.scores.at(1));
    CHECK(a.label == 0);
}

TEST_CASE("annotate_student over ids") {
    EmbeddingMap emb;
    emb.emplace("p1", v2(1, 0));
    emb.emplace("q", v2(0.2, 0.7));
    const std::vector<LabeledId> one{{"p1", 3}};
    const auto single = build_clusters(one, emb);
    const std::vector<std::string> ids{"q"};
    const auto track = annotate_student(ids, emb, single, StudentConfig{});
    CHECK(track.source() == TrackSource::student);
    CHECK(track.at("q") == 3);

    CHECK(annotate_student(std::vector<std::string>{}, emb, single, StudentConfig{}).empty());
    const std::vector<std::string> unknown{"nope"};
    CHECK_THROWS_AS(annotate_student(unknown, emb, single, StudentConfig{}), Error);
}

TEST_CASE("preference members annotated with top_k 1 get their own label") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    EmbeddingMap emb;
    std::vector<LabeledId> pref;
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v(8);
        for (auto& x : v) x = n(rng);
        const std::string id = "p" + std::to_string(i);
        emb.emplace(id, EmbeddingVector(std::move(v)));
        pref.emplace_back(id, static_cast<LabelId>(i % 4));
        ids.push_back(id);
    }
    const auto clusters = build_clusters(pref, emb);
    StudentConfig cfg;
    cfg.top_k = 1;
    const auto track = annotate_student(ids, emb, clusters, cfg);
    for (const auto& [id, label] : pref) CHECK(track.at(id) == label);
}

TEST_CASE("parallel annotation matches sequential annotation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    EmbeddingMap emb;
    std::vector<LabeledId> pref;
    std::vector<std::string> ids;
    for (int i = 0; i < 300; ++i) {
        std::vector<double> v(16);
        for (auto& x : v) x = n(rng);
        const std::string id = "x" + std::to_string(i);
        emb.emplace(id, EmbeddingVector(std::move(v)));
        if (i < 30) {
            pref.emplace_back(id, static_cast<LabelId>(i % 5));
        } else {
            ids.push_back(id);
        }
    }
    const auto clusters = build_clusters(pref, emb);
    StudentConfig seq;
    seq.max_parallel = 1;
    seq.record_scores = true;
    StudentConfig par = seq;
    par.max_parallel = 8;
    const auto a = annotate_student(ids, emb, clusters, seq);
    const auto b = annotate_student(ids, emb, clusters, par);
    CHECK(a == b);
    CHECK(a.scores().size() == ids.size());
}

TEST_CASE("top_k presets by dataset name") {
    CHECK(top_k_preset("CLINC") == 5);
    CHECK(top_k_preset("MTOP Intent") == 15);
    CHECK(top_k_preset("banking77") == 3);
    CHECK(top_k_preset("Massive Intent") == 20);
    CHECK(top_k_preset("FewRel Nat") == 30);
    CHECK(top_k_preset("Reddit") == 7);
    CHECK_FALSE(top_k_preset("unknown-set").has_value());
}
