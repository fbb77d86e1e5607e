#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snsce/channel.hpp"
#include "snsce/dhbf.hpp"
#include "snsce/estimator.hpp"
#include "snsce/segmentation.hpp"

namespace snsce {

enum class Segmenter { pass, oracle, equal4, under, over, none };
enum class Architecture { dhbf_mef_gaa, dhbf_random, fully_connected };
enum class EstimatorKind { absbl_mmv, absbl, bsbl, somp, og_absbl_mmv };

/// Per-trial knobs that are not part of SystemConfig.
struct PipelineOptions {
    double snr_db = 10.0;
    int sensing_subcarriers = 100;  ///< power-sensor grid, independent of M
    int W = 0;                      ///< PASS window; 0 selects SI_min
    double eta_factor = 1.25;       ///< prune at eta_factor x sensor noise power per element
    int target_ue = 0;
    bool known_noise = true;        ///< SBL estimators use the true noise variance instead of learning it
    int somp_atoms = 0;             ///< SOMP iterations per subarray; 0 selects L
};

/// One entry of the algorithm registry; unset stages take the experiment default.
struct AlgorithmDef {
    std::string name;
    std::optional<Segmenter> segmenter;
    std::optional<Architecture> architecture;
    std::optional<EstimatorKind> estimator;
    bool segmentation_only = false;  ///< AUC algorithms (pass, rfem, afm)
};

const std::vector<AlgorithmDef>& algorithm_registry();
const AlgorithmDef& find_algorithm(const std::string& name);

struct ExperimentSpec {
    std::string experiment;
    std::string sweep_param;
    std::vector<double> sweep_values;
    int trials = 100;
    std::uint64_t seed = 1;
    std::vector<std::string> algorithms;
    SystemConfig config;
    ScenarioParams scenario;
    PipelineOptions pipeline;
    EstimatorConfig estimator;
    Segmenter default_segmenter = Segmenter::pass;
    Architecture default_architecture = Architecture::dhbf_mef_gaa;
    EstimatorKind default_estimator = EstimatorKind::absbl_mmv;

    /// Throws ConfigError on an invalid spec.
    void validate() const;
};

struct ExperimentInfo {
    std::string id;
    std::string description;
};

const std::vector<ExperimentInfo>& experiment_list();

/// Full-scale defaults for an experiment id, reduced to desk scale where noted.
ExperimentSpec default_spec(const std::string& experiment);

/// Applies one swept value to a copy of the spec's configuration.
void apply_sweep_value(const std::string& param, double value, SystemConfig& cfg, ScenarioParams& sp,
                       PipelineOptions& po);

std::uint64_t trial_seed(std::uint64_t seed, int sweep_index, int trial_index);

/// metric name -> value, per algorithm.
using TrialMetrics = std::map<std::string, std::map<std::string, double>>;

struct TrialOutcome {
    TrialMetrics metrics;
    std::map<std::string, double> runtime_ms;  ///< per algorithm
    std::optional<std::string> error;
};

TrialOutcome run_trial(const ExperimentSpec& spec, int sweep_index, int trial_index);

struct ResultRow {
    std::string sweep_param;
    double sweep_value = 0.0;
    std::string algorithm;
    std::string metric;
    double mean = 0.0;
    double stderr_ = 0.0;
    int trials = 0;
    double runtime_ms = 0.0;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    std::string experiment;
    int errored_trials = 0;
    int total_trials = 0;
    std::vector<std::string> error_messages;  ///< first few, for diagnostics

    bool failed() const { return total_trials > 0 && errored_trials * 10 > total_trials; }
};

struct RunOptions {
    int workers = 1;
};

/// Raw per-trial outcomes, indexed [sweep][trial].
std::vector<std::vector<TrialOutcome>> run_trials(const ExperimentSpec& spec, const RunOptions& opt);

ResultTable aggregate(const ExperimentSpec& spec, const std::vector<std::vector<TrialOutcome>>& outcomes);

ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& opt = {});

// ---------------------------------------------------------------------------
// Pipeline pieces, exposed for tests and the CLI.

struct SensedScene {
    Scene scene;
    CMatrix H;            ///< target UE channel, N x M
    std::vector<Path> target_paths;
    double noise_var = 0.0;        ///< per-measurement receiver noise
    RVector power;                 ///< sensed per-element power of the target UE
    double sensor_noise = 0.0;     ///< expected noise contribution per element of power
};

SensedScene sense_scene(const SystemConfig& cfg, const ScenarioParams& sp, const PipelineOptions& po, Rng& rng);

/// Breakpoints for the requested segmentation variant.
IndexList segment_profile(Segmenter seg, const SensedScene& s, int W);

/// Equal split into `parts` contiguous subarrays.
IndexList equal_breakpoints(int N, int parts);

/// Channel estimate for one sensed scene and one (segmentation, architecture, estimator) triple.
struct EstimateOutput {
    CMatrix H_hat;
    std::vector<CMatrix> trace;  ///< per-iteration estimates when requested
    double bcrb = -1.0;          ///< summed per-subarray bound, when requested
};

struct EstimateRequest {
    IndexList breakpoints;
    Architecture architecture = Architecture::dhbf_mef_gaa;
    EstimatorKind estimator = EstimatorKind::absbl_mmv;
    int P = 32;
    int N_RF = 4;
    bool known_noise = true;
    int somp_atoms = 3;
    bool prune = true;
    bool want_trace = false;
    bool want_bcrb = false;
    std::uint64_t combiner_seed = 1;
    std::uint64_t noise_seed = 2;
    std::uint64_t alloc_seed = 3;
};

EstimateOutput estimate_channel(const SensedScene& s, const EstimateRequest& req, const EstimatorConfig& ecfg,
                                double eta_factor);

}  // namespace snsce
