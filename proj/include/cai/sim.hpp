#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cai/annotation.hpp"
#include "cai/cai.hpp"

namespace cai::sim {

/// Synthetic annotation setting: uniform gold over K labels and three
/// annotators that are independently correct with their own accuracy and
/// otherwise pick one of the K - 1 wrong labels uniformly.
struct SimParams {
    std::size_t n_labels = 10;
    std::size_t n_samples = 1000;
    double acc_student = 0.9;
    double acc_zero = 0.9;
    double acc_single = 0.9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SimRun {
    GoldMap gold;
    AnnotationTrack student{TrackSource::student};
    AnnotationTrack zero{TrackSource::teacher_zero};
    AnnotationTrack single{TrackSource::teacher_single};
};

/// Label space "l0".."l{K-1}" matching the simulator's label ids.
LabelSpace sim_label_space(std::size_t n_labels);

/// One run; `trial` selects an independent random stream under params.seed.
SimRun simulate_run(const SimParams& params, std::uint64_t trial = 0);

/// (N_C, N_IC) of the run simulate_run(params, trial) would produce, without
/// materializing tracks.
std::pair<std::size_t, std::size_t> simulate_counts(const SimParams& params, std::uint64_t trial = 0);

/// P(consistent) = aS aT aT' + (1 - aS)(1 - aT)(1 - aT') / (K - 1)^2.
double consistency_prob(const SimParams& params);

/// Fraction of `trials` independent runs with N_C > N_IC.
double law_of_consistency_check(const SimParams& params, std::size_t trials, std::size_t max_parallel = 0);

struct SweepRow {
    SimParams params;
    double analytic_p = 0.0;
    double empirical_p = 0.0;
    CaiRatio cai;
    double expected_ratio = 0.0;  // p / (1 - p), +inf when p = 1
    StratifiedAccuracy zero_accuracy;
    StratifiedAccuracy single_accuracy;
};

SweepRow sweep_cell(const SimParams& params);

/// Parameter grid CSV with columns n_labels, n_samples, acc_student,
/// acc_zero, acc_single and optionally seed (default_seed otherwise).
std::vector<SimParams> load_sweep_csv(const std::filesystem::path& path, std::uint64_t default_seed);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace cai::sim
