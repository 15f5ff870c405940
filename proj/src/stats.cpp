#include "cai/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cai/error.hpp"
#include "cai/io.hpp"

namespace cai::stats {

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw Error(ErrorCode::invalid_argument, "pearson: length mismatch (" + std::to_string(xs.size()) + " vs " +
                                                     std::to_string(ys.size()) + ")");
    }
    const std::size_t n = xs.size();
    if (n < 3) throw Error(ErrorCode::invalid_argument, "pearson: need at least 3 pairs, got " + std::to_string(n));

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::invalid_argument, "pearson: zero variance");
    const double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
    return std::clamp(r, -1.0, 1.0);
}

double t_statistic(double r, std::size_t n) {
    if (n < 3) throw Error(ErrorCode::invalid_argument, "t statistic needs n >= 3");
    if (!(std::fabs(r) < 1.0)) throw Error(ErrorCode::invalid_argument, "degenerate correlation (|r| >= 1)");
    return r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
}

namespace {

constexpr double kTolerance = 1e-12;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 10'000;

// Continued fraction for I_x(a, b), evaluated by the modified Lentz method.
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kTolerance) return h;
    }
    throw Error(ErrorCode::invalid_argument, "incomplete beta continued fraction did not converge");
}

// x and its complement are passed separately so callers can supply an
// accurately computed 1 - x.
double incomplete_beta_split(double a, double b, double x, double one_minus_x) {
    if (x <= 0.0) return 0.0;
    if (one_minus_x <= 0.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(one_minus_x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::invalid_argument, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::invalid_argument, "incomplete beta needs x in [0, 1]");
    return incomplete_beta_split(a, b, x, 1.0 - x);
}

double p_value(double t, std::size_t dof) {
    if (dof < 1) throw Error(ErrorCode::invalid_argument, "p-value needs dof >= 1");
    if (!std::isfinite(t)) throw Error(ErrorCode::invalid_argument, "p-value of a non-finite t");
    if (t == 0.0) return 1.0;
    const double nu = static_cast<double>(dof);
    const double t2 = t * t;
    const double p = incomplete_beta_split(nu / 2.0, 0.5, nu / (nu + t2), t2 / (nu + t2));
    return std::clamp(p, 0.0, 1.0);
}

CorrelationResult correlate(std::span<const double> cai, std::span<const double> accuracy) {
    CorrelationResult out;
    out.r = pearson(cai, accuracy);
    out.n = cai.size();
    out.dof = out.n - 2;
    out.t = t_statistic(out.r, out.n);
    out.p = p_value(out.t, out.dof);
    return out;
}

// ---------------------------------------------------------------- observations

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        fields.push_back(first == std::string::npos ? std::string() : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(const std::string& text, const std::string& where) {
    if (text == "inf" || text == "+inf" || text == "Infinity") return std::numeric_limits<double>::infinity();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::parse, where + "not a number: '" + text + "'");
    }
    return value;
}

}  // namespace

std::vector<Observation> load_observations_csv(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> column;
    std::vector<Observation> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
        auto fields = split_csv_line(line);
        const std::string where = path.string() + ": line " + std::to_string(line_no) + ": ";
        if (column.empty()) {
            for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
            for (const char* required : {"dataset", "model", "cai"}) {
                if (column.count(required) == 0) throw Error(ErrorCode::parse, where + "missing column " + required);
            }
            continue;
        }
        if (fields.size() != column.size()) throw Error(ErrorCode::parse, where + "wrong number of fields");
        Observation obs{fields[column["dataset"]], fields[column["model"]],
                        CaiRatio::from_value(parse_number(fields[column["cai"]], where)), std::nullopt};
        if (auto it = column.find("accuracy"); it != column.end() && !fields[it->second].empty()) {
            obs.accuracy = parse_number(fields[it->second], where);
        }
        out.push_back(std::move(obs));
    }
    if (column.empty()) throw Error(ErrorCode::parse, path.string() + ": empty CSV");
    return out;
}

std::vector<CorrelationResult> correlate_by_model(std::span<const Observation> observations,
                                                  std::vector<std::string>* warnings) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
    for (const auto& obs : observations) {
        auto& [xs, ys] = series[obs.model];
        if (obs.cai.infinite()) {
            if (warnings) warnings->push_back("excluding " + obs.model + "/" + obs.dataset + ": infinite CAI ratio");
            continue;
        }
        if (!obs.accuracy) {
            if (warnings) warnings->push_back("excluding " + obs.model + "/" + obs.dataset + ": no accuracy");
            continue;
        }
        xs.push_back(obs.cai.ratio);
        ys.push_back(*obs.accuracy);
    }
    std::vector<CorrelationResult> out;
    for (const auto& [model, xy] : series) {
        try {
            auto result = correlate(xy.first, xy.second);
            result.model = model;
            out.push_back(std::move(result));
        } catch (const Error& e) {
            throw Error(e.code(), "model " + model + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------- selection

DatasetSelection select_model(const std::string& dataset, const std::map<std::string, CaiRatio>& cai_by_model,
                              const std::map<std::string, double>* accuracy_by_model) {
    if (cai_by_model.empty()) throw Error(ErrorCode::invalid_argument, "no models to select from for " + dataset);
    DatasetSelection out;
    out.dataset = dataset;
    bool first = true;
    for (const auto& [model, cai] : cai_by_model) {
        if (first || cai > out.best_cai) {
            out.best_cai_model = model;
            out.best_cai = cai;
            first = false;
        }
    }
    if (accuracy_by_model == nullptr) return out;

    for (const auto& [model, cai] : cai_by_model) {
        auto it = accuracy_by_model->find(model);
        if (it == accuracy_by_model->end()) return out;
        if (!out.best_accuracy || it->second > *out.best_accuracy) {
            out.best_accuracy_model = model;
            out.best_accuracy = it->second;
        }
    }
    out.best_cai_accuracy = accuracy_by_model->at(out.best_cai_model);
    out.match = out.best_cai_model == *out.best_accuracy_model;
    out.accuracy_difference = *out.match ? 0.0 : *out.best_cai_accuracy - *out.best_accuracy;
    return out;
}

SelectionReport select_models(std::span<const Observation> observations) {
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, CaiRatio>> cai;
    std::map<std::string, std::map<std::string, double>> acc;
    std::map<std::string, bool> complete;
    for (const auto& obs : observations) {
        if (cai.count(obs.dataset) == 0) {
            order.push_back(obs.dataset);
            complete[obs.dataset] = true;
        }
        if (!cai[obs.dataset].emplace(obs.model, obs.cai).second) {
            throw Error(ErrorCode::invalid_argument, "duplicate observation for " + obs.dataset + "/" + obs.model);
        }
        if (obs.accuracy) {
            acc[obs.dataset][obs.model] = *obs.accuracy;
        } else {
            complete[obs.dataset] = false;
        }
    }
    SelectionReport report;
    for (const auto& dataset : order) {
        const auto* accuracies = complete[dataset] ? &acc[dataset] : nullptr;
        report.rows.push_back(select_model(dataset, cai[dataset], accuracies));
        if (report.rows.back().match) {
            ++report.compared;
            if (*report.rows.back().match) ++report.matches;
        }
    }
    return report;
}

std::string selection_csv(const SelectionReport& report) {
    std::ostringstream out;
    out << "Dataset,Best CAI Model,Best CAI Accuracy (%),Best Accuracy Model,Best Accuracy (%),Match,"
           "Accuracy Difference (%)\n";
    auto opt = [](const std::optional<double>& v) { return v ? io::format_fixed(*v, 2) : std::string(); };
    for (const auto& row : report.rows) {
        out << row.dataset << ',' << row.best_cai_model << ',' << opt(row.best_cai_accuracy) << ','
            << row.best_accuracy_model.value_or("") << ',' << opt(row.best_accuracy) << ','
            << (row.match ? (*row.match ? "yes" : "no") : "") << ',' << opt(row.accuracy_difference) << '\n';
    }
    return out.str();
}

}  // namespace cai::stats
