// Command-line front end for the annotation evaluation pipeline.
//
//   cai --manifest run.json annotate-student
//   cai --manifest run.json annotate-teacher --model M --mode zero|single
//   cai --manifest run.json cai --model M
//   cai correlate --fixture table.csv | cai correlate out/cai.*.json
//   cai select --fixture table.csv
//   cai simulate --labels 10 --samples 10000 --acc-student 0.9 ...
//
// Errors go to stderr as one JSON line {"error": code, "message": text}.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cai/error.hpp"
#include "cai/io.hpp"
#include "cai/pipeline.hpp"
#include "cai/sim.hpp"
#include "cai/stats.hpp"

namespace fs = std::filesystem;
using namespace cai;

namespace {

struct Globals {
    std::string manifest;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

pipeline::RunManifest manifest_from(const Globals& g) {
    if (g.manifest.empty()) throw Error(ErrorCode::invalid_argument, "--manifest is required for this command");
    pipeline::GlobalOverrides o;
    o.seed = g.seed;
    if (g.out) o.out = fs::path(*g.out);
    return pipeline::load_manifest(g.manifest, o);
}

std::vector<stats::Observation> gather_observations(const std::string& fixture, const std::vector<std::string>& summaries) {
    if (!fixture.empty() && !summaries.empty()) {
        throw Error(ErrorCode::invalid_argument, "give either --fixture or summary files, not both");
    }
    if (!fixture.empty()) return stats::load_observations_csv(fixture);
    if (summaries.empty()) throw Error(ErrorCode::invalid_argument, "no observations: pass --fixture or summary files");
    std::vector<fs::path> paths(summaries.begin(), summaries.end());
    return pipeline::observations_from_summaries(paths);
}

// Prints `text` and, with --out, also writes it to <out>/<name>.
void emit(const Globals& g, const std::string& name, const std::string& text) {
    std::cout << text;
    if (g.out) io::write_file(fs::path(*g.out) / name, text);
}

io::Json selection_json(const stats::SelectionReport& report) {
    auto opt = [](const auto& v) { return v ? io::Json(*v) : io::Json(nullptr); };
    io::Json rows = io::Json::array();
    for (const auto& r : report.rows) {
        io::Json j;
        j["dataset"] = r.dataset;
        j["best_cai_model"] = r.best_cai_model;
        j["best_cai"] = r.best_cai.infinite() ? io::Json("inf") : io::Json(r.best_cai.ratio);
        j["best_cai_accuracy"] = opt(r.best_cai_accuracy);
        j["best_accuracy_model"] = opt(r.best_accuracy_model);
        j["best_accuracy"] = opt(r.best_accuracy);
        j["match"] = opt(r.match);
        j["accuracy_difference"] = opt(r.accuracy_difference);
        rows.push_back(std::move(j));
    }
    io::Json out;
    out["rows"] = std::move(rows);
    out["matches"] = report.matches;
    out["compared"] = report.compared;
    out["match_rate"] = opt(report.match_rate());
    return out;
}

int fail(const std::string& code, const std::string& message) {
    io::Json j;
    j["error"] = code;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consistent/inconsistent annotation evaluation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--manifest", g.manifest, "Run manifest (JSON)");
    app.add_option("--seed", g.seed, "Override the manifest or simulation seed");
    app.add_option("--out", g.out, "Override the output directory");

    auto* student_cmd = app.add_subcommand("annotate-student", "Label the corpus with the embedding student");

    std::string model, mode = "zero";
    auto* teacher_cmd = app.add_subcommand("annotate-teacher", "Label the corpus with an LLM teacher");
    teacher_cmd->add_option("--model", model, "Teacher model from the manifest")->required();
    teacher_cmd->add_option("--mode", mode, "zero or single")->check(CLI::IsMember({"zero", "single"}));

    auto* cai_cmd = app.add_subcommand("cai", "Partition samples and compute the CAI ratio");
    cai_cmd->add_option("--model", model, "Teacher model from the manifest")->required();

    std::string fixture, format = "csv";
    std::vector<std::string> summaries;
    auto* corr_cmd = app.add_subcommand("correlate", "Pearson correlation of CAI ratio and accuracy per model");
    corr_cmd->add_option("--fixture", fixture, "Observation CSV (dataset,model,cai,accuracy)");
    corr_cmd->add_option("summaries", summaries, "cai summary JSON files");

    auto* select_cmd = app.add_subcommand("select", "Pick the highest-CAI model per dataset");
    select_cmd->add_option("--fixture", fixture, "Observation CSV (dataset,model,cai[,accuracy])");
    select_cmd->add_option("summaries", summaries, "cai summary JSON files");
    select_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    sim::SimParams params;
    std::string sweep;
    std::size_t trials = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "Synthetic annotators with known accuracies");
    sim_cmd->add_option("--labels", params.n_labels, "Number of labels K");
    sim_cmd->add_option("--samples", params.n_samples, "Samples per run");
    sim_cmd->add_option("--acc-student", params.acc_student, "Student accuracy");
    sim_cmd->add_option("--acc-zero", params.acc_zero, "Zero-shot teacher accuracy");
    sim_cmd->add_option("--acc-single", params.acc_single, "Single-shot teacher accuracy");
    sim_cmd->add_option("--sweep", sweep, "Parameter grid CSV");
    sim_cmd->add_option("--trials", trials, "Also report the fraction of runs with N_C > N_IC");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        if (*student_cmd) {
            const auto m = manifest_from(g);
            const auto r = pipeline::annotate_student_stage(m);
            io::Json j{{"track", r.track.string()}, {"annotated", r.annotated}, {"clusters", r.clusters}};
            std::cout << j.dump() << '\n';
        } else if (*teacher_cmd) {
            const auto m = manifest_from(g);
            const auto r = pipeline::annotate_teacher_stage(m, model, parse_prompt_mode(mode));
            io::Json tracks = io::Json::array();
            for (const auto& t : r.tracks) tracks.push_back(t.string());
            io::Json j{{"tracks", tracks}, {"client_calls", r.client_calls}};
            std::cout << j.dump() << '\n';
        } else if (*cai_cmd) {
            const auto m = manifest_from(g);
            std::cout << pipeline::cai_stage(m, model).dump(2) << '\n';
        } else if (*corr_cmd) {
            const auto obs = gather_observations(fixture, summaries);
            std::vector<std::string> warnings;
            const auto results = stats::correlate_by_model(obs, &warnings);
            io::Json j;
            j["results"] = pipeline::correlation_json(results);
            j["warnings"] = warnings;
            emit(g, "correlation.json", j.dump(2) + "\n");
        } else if (*select_cmd) {
            const auto obs = gather_observations(fixture, summaries);
            const auto report = stats::select_models(obs);
            if (format == "json") {
                emit(g, "selection.json", selection_json(report).dump(2) + "\n");
            } else {
                emit(g, "selection.csv", stats::selection_csv(report));
            }
        } else if (*sim_cmd) {
            const std::uint64_t seed = g.seed.value_or(0);
            std::vector<sim::SimParams> grid;
            if (!sweep.empty()) {
                grid = sim::load_sweep_csv(sweep, seed);
            } else {
                params.seed = seed;
                grid.push_back(params);
            }
            std::vector<sim::SweepRow> rows;
            for (const auto& p : grid) rows.push_back(sim::sweep_cell(p));
            std::string csv = sim::sweep_csv(rows);
            if (trials > 0) {
                // Append the law-of-consistency fraction as an extra column.
                std::string annotated;
                std::size_t line = 0, start = 0;
                for (std::size_t end; (end = csv.find('\n', start)) != std::string::npos; start = end + 1, ++line) {
                    annotated += csv.substr(start, end - start);
                    annotated += line == 0 ? std::string(",law_fraction")
                                           : "," + io::format_double(sim::law_of_consistency_check(grid[line - 1], trials));
                    annotated += '\n';
                }
                csv = std::move(annotated);
            }
            emit(g, "simulation.csv", csv);
        }
    } catch (const Error& e) {
        return fail(std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
