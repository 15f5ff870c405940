#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cai/cai.hpp"

namespace cai::stats {

/// Sample Pearson correlation. Requires equal lengths, n >= 3 and non-zero
/// variance in both series.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// r * sqrt((n - 2) / (1 - r^2)); |r| >= 1 is a degenerate correlation.
double t_statistic(double r, std::size_t n);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Two-tailed p-value of Student's t with `dof` degrees of freedom,
/// I_{dof/(dof+t^2)}(dof/2, 1/2).
double p_value(double t, std::size_t dof);

struct CorrelationResult {
    std::string model;
    double r = 0.0;
    std::size_t n = 0;
    double t = 0.0;
    std::size_t dof = 0;
    double p = 1.0;
};

CorrelationResult correlate(std::span<const double> cai, std::span<const double> accuracy);

/// One (dataset, model) measurement: a CAI ratio and, when golds exist, the
/// model's annotation accuracy in percent.
struct Observation {
    std::string dataset;
    std::string model;
    CaiRatio cai;
    std::optional<double> accuracy;
};

/// CSV with a header containing dataset, model, cai and optionally accuracy
/// columns (extra columns ignored). `inf` is accepted as a CAI value.
std::vector<Observation> load_observations_csv(const std::filesystem::path& path);

/// Correlates CAI with accuracy per model, in model-name order. Observations
/// with an infinite ratio or without accuracy are skipped and reported in
/// `warnings`.
std::vector<CorrelationResult> correlate_by_model(std::span<const Observation> observations,
                                                  std::vector<std::string>* warnings = nullptr);

struct DatasetSelection {
    std::string dataset;
    std::string best_cai_model;
    CaiRatio best_cai;
    std::optional<double> best_cai_accuracy;
    std::optional<std::string> best_accuracy_model;
    std::optional<double> best_accuracy;
    std::optional<bool> match;
    std::optional<double> accuracy_difference;  // best_cai accuracy - best accuracy, <= 0
};

/// Picks the highest-CAI model (infinite beats finite, ties go to the
/// lexicographically first model) and, when every model has an accuracy, the
/// most accurate one for comparison.
DatasetSelection select_model(const std::string& dataset, const std::map<std::string, CaiRatio>& cai_by_model,
                              const std::map<std::string, double>* accuracy_by_model = nullptr);

struct SelectionReport {
    std::vector<DatasetSelection> rows;  // first-appearance order of datasets
    std::size_t matches = 0;
    std::size_t compared = 0;

    std::optional<double> match_rate() const {
        if (compared == 0) return std::nullopt;
        return static_cast<double>(matches) / static_cast<double>(compared);
    }
};

SelectionReport select_models(std::span<const Observation> observations);

/// Table-shaped CSV: Dataset, Best CAI Model, Best CAI Accuracy (%), Best
/// Accuracy Model, Best Accuracy (%), Match, Accuracy Difference (%).
std::string selection_csv(const SelectionReport& report);

}  // namespace cai::stats
