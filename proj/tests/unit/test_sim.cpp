#include <doctest.h>

#include <cmath>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/sim.hpp"
#include "unit/support.hpp"

using namespace cai;
using namespace cai::sim;
using test_support::TempDir;

namespace {

SimParams params(double a_s, double a_z, double a_t, std::size_t k, std::size_t n = 1000, std::uint64_t seed = 1) {
    SimParams p;
    p.acc_student = a_s;
    p.acc_zero = a_z;
    p.acc_single = a_t;
    p.n_labels = k;
    p.n_samples = n;
    p.seed = seed;
    return p;
}

// Sums the probability of every (gold, student, zero, single) outcome in
// which all three annotators agree.
double enumerate_consistency(const SimParams& p) {
    const std::size_t k = p.n_labels;
    auto prob = [&](double acc, std::size_t gold, std::size_t label) {
        return label == gold ? acc : (1.0 - acc) / static_cast<double>(k - 1);
    };
    double total = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        for (std::size_t s = 0; s < k; ++s) {
            for (std::size_t z = 0; z < k; ++z) {
                for (std::size_t t = 0; t < k; ++t) {
                    if (s != z || z != t) continue;
                    total += prob(p.acc_student, g, s) * prob(p.acc_zero, g, z) * prob(p.acc_single, g, t) /
                             static_cast<double>(k);
                }
            }
        }
    }
    return total;
}

}  // namespace

TEST_CASE("closed-form consistency probability matches enumeration") {
    CHECK(consistency_prob(params(1, 1, 1, 10)) == 1.0);
    CHECK(consistency_prob(params(0, 0, 0, 2)) == 1.0);
    CHECK(consistency_prob(params(0.9, 0.9, 0.9, 10)) == doctest::Approx(0.729 + 0.001 / 81).epsilon(1e-14));
    for (std::size_t k : {2u, 3u, 5u, 10u}) {
        for (double a : {0.0, 0.2, 0.5, 0.9, 1.0}) {
            for (double b : {0.1, 0.6, 1.0}) {
                const auto p = params(a, b, 0.7, k);
                CHECK(consistency_prob(p) == doctest::Approx(enumerate_consistency(p)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("perfect and forced annotators") {
    const auto perfect = simulate_run(params(1, 1, 1, 7, 200));
    for (const auto& [id, g] : perfect.gold) {
        CHECK(perfect.student.at(id) == g);
        CHECK(perfect.zero.at(id) == g);
        CHECK(perfect.single.at(id) == g);
    }
    const auto forced = simulate_run(params(1, 1, 0, 2, 200));
    for (const auto& [id, g] : forced.gold) CHECK(forced.single.at(id) == 1 - g);
}

TEST_CASE("runs are reproducible per seed and trial") {
    const auto p = params(0.6, 0.7, 0.8, 5, 500, 42);
    const auto a = simulate_run(p, 3);
    const auto b = simulate_run(p, 3);
    CHECK(a.student == b.student);
    CHECK(a.zero == b.zero);
    CHECK(a.single == b.single);
    CHECK_FALSE(simulate_run(p, 4).student == a.student);

    const auto part = identify(a.student, a.zero, a.single);
    const auto counts = simulate_counts(p, 3);
    CHECK(counts.first == part.consistent.size());
    CHECK(counts.second == part.inconsistent.size());
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(simulate_run(params(1.2, 0.5, 0.5, 10)), Error);
    CHECK_THROWS_AS(simulate_run(params(0.5, -0.1, 0.5, 10)), Error);
    CHECK_THROWS_AS(simulate_run(params(0.5, 0.5, 0.5, 1)), Error);
    CHECK_THROWS_AS(simulate_run(params(0.5, 0.5, 0.5, 10, 0)), Error);
    CHECK_THROWS_AS(law_of_consistency_check(params(0.5, 0.5, 0.5, 10), 0), Error);
}

TEST_CASE("single-sample runs at p = 0.5 win about half the time") {
    // Perfect teachers: the sample is consistent exactly when the student is right.
    auto p = params(0.5, 1.0, 1.0, 2, 1, 9);
    CHECK(consistency_prob(p) == 0.5);
    const double frac = law_of_consistency_check(p, 4000);
    // 4000 Bernoulli(0.5) trials: 4 sigma is about 0.032
    CHECK(std::fabs(frac - 0.5) < 0.032);
}

TEST_CASE("law check is independent of thread count") {
    const auto p = params(0.55, 0.6, 0.6, 3, 101, 5);
    CHECK(law_of_consistency_check(p, 64, 1) == law_of_consistency_check(p, 64, 8));
}

TEST_CASE("sweep cell with perfect annotators reports the infinite sentinel") {
    const auto row = sweep_cell(params(1, 1, 1, 4, 50));
    CHECK(row.cai.infinite());
    CHECK(std::isinf(row.expected_ratio));
    const std::vector<SweepRow> rows{row};
    const std::string csv = sweep_csv(rows);
    CHECK(csv.find(",50,0,inf,inf,100,,100,\n") != std::string::npos);
}

TEST_CASE("sweep CSV loading") {
    TempDir dir("sim");
    io::write_file(dir / "g.csv",
                   "n_labels,n_samples,acc_student,acc_zero,acc_single\n10,100,0.9,0.8,0.7\n5,10,0.5,0.5,0.5\n");
    const auto grid = load_sweep_csv(dir / "g.csv", 77);
    REQUIRE(grid.size() == 2);
    CHECK(grid[0].acc_single == 0.7);
    CHECK(grid[1].seed == 77);

    io::write_file(dir / "bad.csv", "n_labels,n_samples,acc_student,acc_zero,acc_single\n10,100,1.2,0.8,0.7\n");
    try {
        load_sweep_csv(dir / "bad.csv", 0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("sim label names sort in id order") {
    const auto space = sim_label_space(12);
    REQUIRE(space.size() == 12);
    CHECK(space.name(0) == "l00");
    CHECK(space.name(11) == "l11");
}
