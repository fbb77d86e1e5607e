#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "snsce/harness.hpp"
#include "snsce/serialize.hpp"

using namespace snsce;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open spec '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
    }
    return spec_from_json(j);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

struct Overrides {
    int trials = 0;
    long long seed = -1;
    std::string algorithms;

    void apply(ExperimentSpec& s) const {
        if (trials > 0) s.trials = trials;
        if (seed >= 0) s.seed = static_cast<std::uint64_t>(seed);
        if (!algorithms.empty()) s.algorithms = split_list(algorithms);
        s.validate();
    }
};

// One scene at the first sweep value of the spec.
SensedScene first_scene(const ExperimentSpec& spec, std::uint64_t seed, PipelineOptions& po) {
    SystemConfig cfg = spec.config;
    ScenarioParams sp = spec.scenario;
    po = spec.pipeline;
    apply_sweep_value(spec.sweep_param, spec.sweep_values.front(), cfg, sp, po);
    Rng rng(derive_seed(seed, 1));
    return sense_scene(cfg, sp, po, rng);
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) std::cout << text;
    else write_file(out, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Near-field SnS channel estimation toolkit"};
    app.require_subcommand(1);

    std::string spec_path;
    Overrides ov;
    std::string out_dir = "results";
    int workers = 1;
    bool timing = false;

    auto* run = app.add_subcommand("run", "run an experiment spec");
    run->add_option("spec", spec_path, "experiment spec (JSON)")->required();
    run->add_option("--trials", ov.trials, "override the trial count");
    run->add_option("--seed", ov.seed, "override the master seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--workers", workers, "worker threads")->check(CLI::Range(1, 256));
    run->add_option("--algorithms", ov.algorithms, "comma-separated algorithm list");
    run->add_flag("--timing", timing, "fill the runtime_ms column");

    auto* list = app.add_subcommand("list-experiments", "list experiment ids");

    auto* validate = app.add_subcommand("validate", "check a spec without running it");
    validate->add_option("spec", spec_path)->required();
    validate->add_option("--trials", ov.trials);
    validate->add_option("--seed", ov.seed);
    validate->add_option("--algorithms", ov.algorithms);

    auto* seeds = app.add_subcommand("seed-report", "print the per-trial child seeds");
    seeds->add_option("spec", spec_path)->required();
    seeds->add_option("--trials", ov.trials);
    seeds->add_option("--seed", ov.seed);

    std::string out_file;
    std::string seg_alg = "pass";
    auto* segment = app.add_subcommand("segment", "sense one scene and dump the per-element segmentation trace");
    segment->add_option("spec", spec_path)->required();
    segment->add_option("--seed", ov.seed);
    segment->add_option("--out", out_file, "output CSV (stdout when omitted)");
    segment->add_option("--algorithm", seg_alg, "pass, rfem or afm")->check(CLI::IsMember({"pass", "rfem", "afm"}));

    auto* generate = app.add_subcommand("generate", "generate one scene and write it as JSON");
    generate->add_option("spec", spec_path)->required();
    generate->add_option("--seed", ov.seed);
    generate->add_option("--out", out_file, "output JSON (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const ExperimentInfo& e : experiment_list()) std::cout << e.id << "\t" << e.description << "\n";
            return 0;
        }

        ExperimentSpec spec = load_spec(spec_path);
        ov.apply(spec);

        if (validate->parsed()) {
            std::cout << "ok " << spec.experiment << " config_hash=" << config_hash(spec) << "\n";
            return 0;
        }
        if (seeds->parsed()) {
            std::cout << "sweep_index,sweep_value,trial,seed\n";
            for (std::size_t s = 0; s < spec.sweep_values.size(); ++s)
                for (int t = 0; t < spec.trials; ++t)
                    std::cout << s << ',' << spec.sweep_values[s] << ',' << t << ','
                              << trial_seed(spec.seed, static_cast<int>(s), t) << '\n';
            return 0;
        }
        if (segment->parsed()) {
            PipelineOptions po;
            SensedScene sc = first_scene(spec, trial_seed(spec.seed, 0, 0), po);
            const int W = po.W > 0 ? po.W : spec.config.SI_min;
            SegmentationResult r;
            if (seg_alg == "pass") r = pass_segment(sc.power, {W, 0});
            else if (seg_alg == "rfem") r = rfem_segment(sc.power);
            else r = afm_segment(sc.power);
            emit(out_file, segmentation_csv(sc.power, r));
            return 0;
        }
        if (generate->parsed()) {
            PipelineOptions po;
            SensedScene sc = first_scene(spec, trial_seed(spec.seed, 0, 0), po);
            emit(out_file, realization_to_json(sc.scene.cfg, sc.scene.total).dump(1) + "\n");
            return 0;
        }

        const auto t0 = std::chrono::steady_clock::now();
        const ResultTable table = run_experiment(spec, {workers});
        const double wall =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "results.csv", results_csv(table, timing));
        write_file(fs::path(out_dir) / "results.json", results_json(table, timing).dump(2) + "\n");
        write_file(fs::path(out_dir) / "meta.json", meta_json(table, spec).dump(2) + "\n");
        std::fprintf(stderr, "%s: %zu rows, %d/%d trials errored, %.0f ms -> %s\n", spec.experiment.c_str(),
                     table.rows.size(), table.errored_trials, table.total_trials, wall, out_dir.c_str());
        if (table.failed()) {
            for (const std::string& m : table.error_messages) std::fprintf(stderr, "  error: %s\n", m.c_str());
            return kExitFailure;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
