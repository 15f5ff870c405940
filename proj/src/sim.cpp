#include "cai/sim.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/parallel.hpp"
#include "cai/random.hpp"

namespace cai::sim {

namespace {

struct Draw {
    LabelId gold, student, zero, single;
};

class Sampler {
public:
    Sampler(const SimParams& params, std::uint64_t trial) : params_(params), rng_(params.seed, trial) {}

    Draw next() {
        const auto k = params_.n_labels;
        const auto gold = static_cast<LabelId>(rng_.below(k));
        const LabelId s = annotate(gold, params_.acc_student);
        const LabelId z = annotate(gold, params_.acc_zero);
        const LabelId t = annotate(gold, params_.acc_single);
        return {gold, s, z, t};
    }

private:
    LabelId annotate(LabelId gold, double acc) {
        if (rng_.bernoulli(acc)) return gold;
        const auto wrong = static_cast<LabelId>(rng_.below(params_.n_labels - 1));
        return wrong >= gold ? wrong + 1 : wrong;
    }

    const SimParams& params_;
    Rng rng_;
};

std::string sample_id(std::size_t i, std::size_t n) {
    const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
    std::string digits = std::to_string(i);
    return "s" + std::string(width - digits.size(), '0') + digits;
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void SimParams::validate() const {
    if (n_labels < 2) throw Error(ErrorCode::invalid_argument, "simulation needs at least 2 labels");
    if (n_samples < 1) throw Error(ErrorCode::invalid_argument, "simulation needs at least 1 sample");
    if (!probability(acc_student) || !probability(acc_zero) || !probability(acc_single)) {
        throw Error(ErrorCode::invalid_argument, "annotator accuracies must be probabilities in [0, 1]");
    }
}

LabelSpace sim_label_space(std::size_t n_labels) {
    std::vector<std::string> names;
    const std::size_t width = std::to_string(n_labels > 0 ? n_labels - 1 : 0).size();
    for (std::size_t i = 0; i < n_labels; ++i) {
        std::string digits = std::to_string(i);
        names.push_back("l" + std::string(width - digits.size(), '0') + digits);
    }
    return LabelSpace::from_declared(std::move(names));
}

SimRun simulate_run(const SimParams& params, std::uint64_t trial) {
    params.validate();
    Sampler sampler(params, trial);
    SimRun run;
    for (std::size_t i = 0; i < params.n_samples; ++i) {
        const Draw d = sampler.next();
        std::string id = sample_id(i, params.n_samples);
        run.gold.emplace(id, d.gold);
        run.student.set(id, d.student);
        run.zero.set(id, d.zero);
        run.single.set(std::move(id), d.single);
    }
    return run;
}

std::pair<std::size_t, std::size_t> simulate_counts(const SimParams& params, std::uint64_t trial) {
    params.validate();
    Sampler sampler(params, trial);
    std::size_t consistent = 0;
    for (std::size_t i = 0; i < params.n_samples; ++i) {
        const Draw d = sampler.next();
        if (LabelTriple{d.student, d.zero, d.single}.consistent()) ++consistent;
    }
    return {consistent, params.n_samples - consistent};
}

double consistency_prob(const SimParams& params) {
    params.validate();
    const double k1 = static_cast<double>(params.n_labels - 1);
    return params.acc_student * params.acc_zero * params.acc_single +
           (1.0 - params.acc_student) * (1.0 - params.acc_zero) * (1.0 - params.acc_single) / (k1 * k1);
}

double law_of_consistency_check(const SimParams& params, std::size_t trials, std::size_t max_parallel) {
    params.validate();
    if (trials < 1) throw Error(ErrorCode::invalid_argument, "need at least one trial");
    std::vector<char> wins(trials, 0);
    const std::size_t workers = max_parallel != 0 ? max_parallel : std::max(1u, std::thread::hardware_concurrency());
    parallel_for(trials, workers, [&](std::size_t t) {
        const auto [nc, nic] = simulate_counts(params, t);
        wins[t] = nc > nic ? 1 : 0;
    });
    std::size_t count = 0;
    for (char w : wins) count += static_cast<std::size_t>(w);
    return static_cast<double>(count) / static_cast<double>(trials);
}

SweepRow sweep_cell(const SimParams& params) {
    SimRun run = simulate_run(params);
    const auto partition = identify(run.student, run.zero, run.single);
    SweepRow row;
    row.params = params;
    row.analytic_p = consistency_prob(params);
    row.empirical_p = static_cast<double>(partition.consistent.size()) / static_cast<double>(partition.size());
    row.cai = cai_ratio(partition);
    row.expected_ratio = row.analytic_p >= 1.0 ? std::numeric_limits<double>::infinity()
                                               : row.analytic_p / (1.0 - row.analytic_p);
    row.zero_accuracy = stratified_accuracy(partition, run.zero, run.gold);
    row.single_accuracy = stratified_accuracy(partition, run.single, run.gold);
    return row;
}

std::vector<SimParams> load_sweep_csv(const std::filesystem::path& path, std::uint64_t default_seed) {
    std::istringstream in(io::read_file(path));
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> column;
    std::vector<SimParams> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) {
            const auto a = f.find_first_not_of(" \t");
            const auto b = f.find_last_not_of(" \t");
            fields.push_back(a == std::string::npos ? "" : f.substr(a, b - a + 1));
        }
        const std::string where = path.string() + ": line " + std::to_string(line_no) + ": ";
        if (column.empty()) {
            for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
            for (const char* c : {"n_labels", "n_samples", "acc_student", "acc_zero", "acc_single"}) {
                if (column.count(c) == 0) throw Error(ErrorCode::parse, where + "missing column " + c);
            }
            continue;
        }
        if (fields.size() != column.size()) throw Error(ErrorCode::parse, where + "wrong number of fields");
        auto num = [&](const char* name) {
            const auto& text = fields[column.at(name)];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size()) {
                throw Error(ErrorCode::parse, where + "bad value for " + name + ": '" + text + "'");
            }
            return v;
        };
        SimParams p;
        p.n_labels = static_cast<std::size_t>(num("n_labels"));
        p.n_samples = static_cast<std::size_t>(num("n_samples"));
        p.acc_student = num("acc_student");
        p.acc_zero = num("acc_zero");
        p.acc_single = num("acc_single");
        p.seed = column.count("seed") ? static_cast<std::uint64_t>(num("seed")) : default_seed;
        try {
            p.validate();
        } catch (const Error& e) {
            throw Error(e.code(), where + e.what());
        }
        out.push_back(p);
    }
    return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "n_labels,n_samples,acc_student,acc_zero,acc_single,seed,analytic_p,empirical_p,n_consistent,"
           "n_inconsistent,ratio,expected_ratio,zero_acc_consistent,zero_acc_inconsistent,single_acc_consistent,"
           "single_acc_inconsistent\n";
    auto num = [](double v) { return std::isinf(v) ? std::string("inf") : io::format_double(v); };
    auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (const auto& r : rows) {
        out << r.params.n_labels << ',' << r.params.n_samples << ',' << num(r.params.acc_student) << ','
            << num(r.params.acc_zero) << ',' << num(r.params.acc_single) << ',' << r.params.seed << ','
            << num(r.analytic_p) << ',' << num(r.empirical_p) << ',' << r.cai.n_consistent << ','
            << r.cai.n_inconsistent << ',' << num(r.cai.ratio) << ',' << num(r.expected_ratio) << ','
            << opt(r.zero_accuracy.consistent) << ',' << opt(r.zero_accuracy.inconsistent) << ','
            << opt(r.single_accuracy.consistent) << ',' << opt(r.single_accuracy.inconsistent) << '\n';
    }
    return out.str();
}

}  // namespace cai::sim
