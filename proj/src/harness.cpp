#include "snsce/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

#include "snsce/bcrb.hpp"
#include "snsce/serialize.hpp"

namespace snsce {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double noise_for_snr(const CMatrix& H, double snr_db) {
    return H.cwiseAbs2().mean() * std::pow(10.0, -snr_db / 10.0);
}

}  // namespace

const std::vector<AlgorithmDef>& algorithm_registry() {
    using S = Segmenter;
    using A = Architecture;
    using E = EstimatorKind;
    static const std::vector<AlgorithmDef> reg = {
        // Estimators; segmentation and architecture follow the experiment.
        {"absbl_mmv", {}, {}, E::absbl_mmv, false},
        {"absbl", {}, {}, E::absbl, false},
        {"bsbl", {}, {}, E::bsbl, false},
        {"somp", {}, {}, E::somp, false},
        {"og_absbl_mmv", {}, {}, E::og_absbl_mmv, false},
        // PASS-segmented and equal-segmented pipelines.
        {"ss_absbl_mmv", S::pass, {}, E::absbl_mmv, false},
        {"ss_absbl", S::pass, {}, E::absbl, false},
        {"ss_bsbl", S::pass, {}, E::bsbl, false},
        {"ss_somp", S::pass, {}, E::somp, false},
        {"ss_og_absbl_mmv", S::pass, {}, E::og_absbl_mmv, false},
        {"es_absbl_mmv", S::equal4, {}, E::absbl_mmv, false},
        {"es_somp", S::equal4, {}, E::somp, false},
        // Receiver architectures.
        {"fully_connected", {}, A::fully_connected, {}, false},
        {"dhbf_random", {}, A::dhbf_random, {}, false},
        {"dhbf_mef_gaa", {}, A::dhbf_mef_gaa, {}, false},
        // Segmentation variants.
        {"oracle_seg", S::oracle, {}, {}, false},
        {"pass_seg", S::pass, {}, {}, false},
        {"equal_seg", S::equal4, {}, {}, false},
        {"under_seg", S::under, {}, {}, false},
        {"over_seg", S::over, {}, {}, false},
        // Birth-death point detectors.
        {"pass", {}, {}, {}, true},
        {"rfem", {}, {}, {}, true},
        {"afm", {}, {}, {}, true},
    };
    return reg;
}

const AlgorithmDef& find_algorithm(const std::string& name) {
    for (const AlgorithmDef& a : algorithm_registry())
        if (a.name == name) return a;
    throw ConfigError("unknown algorithm '" + name + "'");
}

const std::vector<ExperimentInfo>& experiment_list() {
    static const std::vector<ExperimentInfo> list = {
        {"nmse_vs_snr", "NMSE of the subarray estimators versus SNR"},
        {"nmse_vs_pilots", "NMSE versus pilot length"},
        {"nmse_vs_paths", "NMSE versus paths per UE"},
        {"nmse_vs_distance", "NMSE and BCRB versus UE distance without SnS (fully connected)"},
        {"convergence", "NMSE per EM iteration"},
        {"auc_vs_snr", "birth-death detection AUC versus SNR"},
        {"auc_vs_K", "birth-death detection AUC versus UE count"},
        {"auc_vs_td", "birth-death detection AUC versus diffraction intensity"},
        {"architecture_compare", "fully connected vs DHBF with random or MEF-GAA allocation"},
        {"segmentation_ablation", "oracle, PASS, equal, under- and over-segmented estimation"},
    };
    return list;
}

static bool is_auc_experiment(const std::string& id) { return id.rfind("auc_", 0) == 0; }

ExperimentSpec default_spec(const std::string& id) {
    ExperimentSpec s;
    s.experiment = id;
    s.config.N = 256;
    s.config.M = 5;
    s.config.K = 3;
    s.config.L = 3;
    s.config.P = 32;
    s.config.N_RF = 4;
    s.config.SI_min = 64;
    s.scenario.t_d = 1.0;
    s.trials = 100;

    if (id == "nmse_vs_snr") {
        s.sweep_param = "snr_db";
        s.sweep_values = {0, 5, 10, 15, 20};
        s.algorithms = {"ss_absbl_mmv", "ss_absbl", "ss_bsbl", "ss_somp"};
    } else if (id == "nmse_vs_pilots") {
        s.sweep_param = "P";
        s.sweep_values = {16, 32, 64};
        s.algorithms = {"ss_absbl_mmv", "ss_absbl", "ss_bsbl", "ss_somp"};
    } else if (id == "nmse_vs_paths") {
        s.sweep_param = "L";
        s.sweep_values = {2, 4, 6, 8, 10};
        s.pipeline.snr_db = 15.0;
        s.config.P = 64;
        s.algorithms = {"ss_absbl_mmv", "ss_absbl", "ss_bsbl", "ss_somp"};
    } else if (id == "nmse_vs_distance") {
        s.sweep_param = "distance";
        s.sweep_values = {1.5, 3.5, 7.5, 11.5, 15.5, 21.5, 31.5};
        s.config.N = 128;
        s.config.P = 20;
        s.config.K = 1;
        s.scenario.full_visibility = true;
        s.scenario.nonideal_prob = 0.0;
        s.default_segmenter = Segmenter::none;
        s.default_architecture = Architecture::fully_connected;
        s.algorithms = {"absbl_mmv", "absbl", "bsbl", "somp"};
    } else if (id == "convergence") {
        s.sweep_param = "snr_db";
        s.sweep_values = {10, 15};
        s.config.P = 40;
        s.estimator.T_ite = 60;
        s.estimator.delta1 = 1e-300;
        s.algorithms = {"ss_absbl_mmv", "ss_absbl"};
    } else if (is_auc_experiment(id)) {
        s.config.N = 512;
        s.config.K = 6;
        s.scenario.t_d = 1.5;
        s.pipeline.snr_db = 5.0;
        s.trials = 500;
        s.algorithms = {"pass", "rfem", "afm"};
        if (id == "auc_vs_snr") {
            s.sweep_param = "snr_db";
            s.sweep_values = {-5, 0, 5, 10, 15};
        } else if (id == "auc_vs_K") {
            s.sweep_param = "K";
            s.sweep_values = {2, 4, 6, 8, 10};
        } else if (id == "auc_vs_td") {
            s.sweep_param = "t_d";
            s.sweep_values = {0.5, 1.0, 1.5};
        } else {
            throw ConfigError("unknown experiment '" + id + "'");
        }
    } else if (id == "architecture_compare") {
        s.sweep_param = "P";
        s.sweep_values = {16, 32, 64};
        s.trials = 200;
        s.algorithms = {"fully_connected", "dhbf_random", "dhbf_mef_gaa"};
    } else if (id == "segmentation_ablation") {
        s.sweep_param = "snr_db";
        s.sweep_values = {10};
        s.trials = 200;
        s.algorithms = {"oracle_seg", "pass_seg", "equal_seg", "under_seg", "over_seg"};
    } else {
        throw ConfigError("unknown experiment '" + id + "'");
    }
    return s;
}

void apply_sweep_value(const std::string& param, double v, SystemConfig& cfg, ScenarioParams& sp,
                       PipelineOptions& po) {
    auto as_int = [&](const char* what) {
        const double r = std::round(v);
        if (std::abs(r - v) > 1e-9) throw ConfigError(std::string(what) + " must be an integer");
        return static_cast<int>(r);
    };
    if (param == "snr_db") po.snr_db = v;
    else if (param == "P") cfg.P = as_int("P");
    else if (param == "L") cfg.L = as_int("L");
    else if (param == "K") cfg.K = as_int("K");
    else if (param == "N") cfg.N = as_int("N");
    else if (param == "M") cfg.M = as_int("M");
    else if (param == "N_RF") cfg.N_RF = as_int("N_RF");
    else if (param == "SI_min") cfg.SI_min = as_int("SI_min");
    else if (param == "W") po.W = as_int("W");
    else if (param == "t_d") sp.t_d = v;
    else if (param == "distance") sp.fixed_distance = v;
    else if (param == "sensing_subcarriers") po.sensing_subcarriers = as_int("sensing_subcarriers");
    else throw ConfigError("unknown sweep parameter '" + param + "'");
}

void ExperimentSpec::validate() const {
    bool known = false;
    for (const ExperimentInfo& e : experiment_list()) known |= e.id == experiment;
    if (!known) throw ConfigError("unknown experiment '" + experiment + "'");
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (sweep_values.empty()) throw ConfigError("sweep values must not be empty");
    if (algorithms.empty()) throw ConfigError("no algorithms selected");
    std::set<std::string> seen;
    for (const std::string& a : algorithms) {
        const AlgorithmDef& def = find_algorithm(a);
        if (!seen.insert(a).second) throw ConfigError("algorithm '" + a + "' listed twice");
        if (def.segmentation_only != is_auc_experiment(experiment))
            throw ConfigError("algorithm '" + a + "' does not fit experiment '" + experiment + "'");
    }
    for (double v : sweep_values) {
        SystemConfig cfg = config;
        ScenarioParams sp = scenario;
        PipelineOptions po = pipeline;
        apply_sweep_value(sweep_param, v, cfg, sp, po);
        cfg.validate();
        if (po.sensing_subcarriers < 1) throw ConfigError("sensing_subcarriers must be positive");
        const int W = po.W > 0 ? po.W : cfg.SI_min;
        if (W % 4 != 0 || W < 4 || W > cfg.N) throw ConfigError("PASS window must be a multiple of 4 within N");
        if (cfg.P < 1) throw ConfigError("P must be positive");
        if (sp.fixed_distance && !(*sp.fixed_distance > 0.0)) throw ConfigError("distance must be positive");
        if (po.target_ue >= cfg.K) throw ConfigError("target UE out of range");
    }
    estimator.validate(std::max(1, config.N));
}

std::uint64_t trial_seed(std::uint64_t seed, int sweep_index, int trial_index) {
    return derive_seed(seed, static_cast<std::uint64_t>(sweep_index), static_cast<std::uint64_t>(trial_index));
}

// ---------------------------------------------------------------------------
// Pipeline

SensedScene sense_scene(const SystemConfig& cfg, const ScenarioParams& sp, const PipelineOptions& po, Rng& rng) {
    SensedScene s;
    s.scene = generate_scene(cfg, sp, rng);
    if (po.target_ue < 0) {
        s.H = s.scene.total.H;
        s.target_paths = s.scene.total.paths;
    } else {
        s.H = s.scene.ue_channels.at(po.target_ue);
        for (const Path& p : s.scene.total.paths)
            if (p.params.ue == po.target_ue) s.target_paths.push_back(p);
    }
    s.noise_var = noise_for_snr(s.H, po.snr_db);

    SystemConfig sense_cfg = cfg;
    sense_cfg.M = po.sensing_subcarriers;
    const CMatrix Hs = assemble_channel(sense_cfg, s.target_paths).H;
    const double sensor_var = noise_for_snr(Hs, po.snr_db);
    s.power = measure_power(Hs, sensor_var, rng);
    s.sensor_noise = sense_cfg.M * sensor_var;
    return s;
}

IndexList equal_breakpoints(int N, int parts) {
    parts = std::clamp(parts, 1, N);
    IndexList b;
    for (int i = 0; i <= parts; ++i) b.push_back(1 + static_cast<int>(static_cast<long>(N) * i / parts));
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

IndexList segment_profile(Segmenter seg, const SensedScene& s, int W) {
    const int N = static_cast<int>(s.power.size());
    switch (seg) {
        case Segmenter::none: return {1, N + 1};
        case Segmenter::oracle: return visibility_breakpoints(s.target_paths, N);
        case Segmenter::equal4: return equal_breakpoints(N, 4);
        case Segmenter::pass: return pass_segment(s.power, {W, 0}).breakpoints;
        case Segmenter::under: {
            // Drop every other interior breakpoint so neighbouring subarrays merge.
            const IndexList b = pass_segment(s.power, {W, 0}).breakpoints;
            IndexList out{1};
            for (std::size_t i = 2; i + 1 < b.size(); i += 2) out.push_back(b[i]);
            out.push_back(N + 1);
            return out;
        }
        case Segmenter::over: {
            const IndexList b = pass_segment(s.power, {W, 0}).breakpoints;
            IndexList out;
            for (std::size_t i = 0; i + 1 < b.size(); ++i) {
                const int len = b[i + 1] - b[i];
                for (int q = 0; q < 4; ++q) out.push_back(b[i] + len * q / 4);
            }
            out.push_back(N + 1);
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        }
    }
    throw ConfigError("unknown segmenter");
}

namespace {

struct SubarrayEstimate {
    CMatrix H;                    // subarray length x M
    std::vector<CMatrix> trace;   // per iteration, subarray length x M
    double bcrb = 0.0;
};

SubarrayEstimate estimate_subarray(const SubarrayObservation& o, EstimatorKind kind, EstimatorConfig ecfg,
                                   const EstimateRequest& req) {
    const bool want_trace = req.want_trace;
    const bool want_bcrb = req.want_bcrb;
    if (req.known_noise && o.noise_var > 0.0) {
        ecfg.learn_noise = false;
        ecfg.noise_init = o.noise_var;
    }
    const int len = o.range.second - o.range.first;
    const Codebook cb = dft_codebook(len);
    const CMatrix Psi = o.Phi * cb.D;
    SubarrayEstimate out;
    auto hook = [&](int, const SblResult& st) {
        if (want_trace) out.trace.push_back(cb.D * st.X);
    };
    switch (kind) {
        case EstimatorKind::absbl_mmv:
        case EstimatorKind::og_absbl_mmv: {
            const SblResult r = absbl_mmv(o.Y, Psi, ecfg, hook);
            out.H = cb.D * r.X;
            if (kind == EstimatorKind::og_absbl_mmv) out.H = offgrid_refine(o.Y, o.Phi, cb, r.X, ecfg).H;
            if (want_bcrb && r.noise_var > 0.0)
                out.bcrb = bcrb_bound({Psi, r.prior_covariance(), r.noise_var, static_cast<int>(o.Y.cols())}).bound;
            break;
        }
        case EstimatorKind::absbl:
        case EstimatorKind::bsbl: {
            CMatrix X(len, o.Y.cols());
            std::vector<CMatrix> tr;
            for (Eigen::Index m = 0; m < o.Y.cols(); ++m) {
                std::vector<CMatrix> col_trace;
                auto col_hook = [&](int, const SblResult& st) {
                    if (want_trace) col_trace.push_back(st.X);
                };
                const SblResult r = kind == EstimatorKind::absbl ? absbl_mmv(o.Y.col(m), Psi, ecfg, col_hook)
                                                                 : bsbl(o.Y.col(m), Psi, ecfg, col_hook);
                X.col(m) = r.X;
                if (want_trace) {
                    if (tr.size() < col_trace.size()) {
                        const CMatrix last = tr.empty() ? CMatrix::Zero(len, o.Y.cols()) : tr.back();
                        tr.resize(col_trace.size(), last);
                    }
                    for (std::size_t t = 0; t < tr.size(); ++t)
                        tr[t].col(m) = col_trace.empty() ? r.X : col_trace[std::min(t, col_trace.size() - 1)];
                }
            }
            out.H = cb.D * X;
            for (const CMatrix& x : tr) out.trace.push_back(cb.D * x);
            break;
        }
        case EstimatorKind::somp: {
            SompOptions so;
            so.max_atoms = std::clamp(req.somp_atoms, 1, static_cast<int>(o.Y.rows()));
            out.H = cb.D * somp(o.Y, Psi, so).X;
            break;
        }
    }
    return out;
}

}  // namespace

EstimateOutput estimate_channel(const SensedScene& s, const EstimateRequest& req, const EstimatorConfig& ecfg,
                                double eta_factor) {
    const int N = static_cast<int>(s.H.rows());
    const SegmentationResult seg = segmentation_from_breakpoints(req.breakpoints, N);
    const auto ranges = seg.ranges();

    IndexList on;
    if (req.prune) {
        on = prune_subarrays(s.power, seg, eta_factor * s.sensor_noise);
    } else {
        for (int i = 0; i < static_cast<int>(ranges.size()); ++i) on.push_back(i);
    }
    std::vector<ElementRange> on_ranges;
    std::vector<int> sizes;
    for (int i : on) {
        on_ranges.push_back(ranges[i]);
        sizes.push_back(ranges[i].second - ranges[i].first);
    }

    Rng crng(req.combiner_seed);
    Rng nrng(req.noise_seed);
    std::vector<SubarrayObservation> obs;
    if (req.architecture == Architecture::fully_connected) {
        obs = fully_connected_observations(s.H, on_ranges, req.N_RF, req.P, s.noise_var, crng, nrng);
    } else {
        RfAllocation alloc;
        if (req.architecture == Architecture::dhbf_random) {
            Rng arng(req.alloc_seed);
            alloc = random_allocation(sizes, req.N_RF, arng);
        } else {
            alloc = mef_gaa(sizes, req.N_RF);
        }
        const MeasurementPlan plan = build_combiners(alloc, on_ranges, N, req.P, s.noise_var, crng);
        obs = decouple(simulate_reception(s.H, plan, nrng), plan);
    }

    EstimateOutput out;
    out.H_hat = CMatrix::Zero(N, s.H.cols());
    std::vector<SubarrayEstimate> parts;
    std::size_t longest = 0;
    double bound = 0.0;
    for (const SubarrayObservation& o : obs) {
        parts.push_back(estimate_subarray(o, req.estimator, ecfg, req));
        out.H_hat.middleRows(o.range.first, o.range.second - o.range.first) = parts.back().H;
        longest = std::max(longest, parts.back().trace.size());
        bound += parts.back().bcrb;
    }
    if (req.want_bcrb) out.bcrb = bound;
    if (req.want_trace) {
        for (std::size_t t = 0; t < longest; ++t) {
            CMatrix Ht = CMatrix::Zero(N, s.H.cols());
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const auto& tr = parts[i].trace;
                const CMatrix& part = tr.empty() ? parts[i].H : tr[std::min(t, tr.size() - 1)];
                Ht.middleRows(obs[i].range.first, obs[i].range.second - obs[i].range.first) = part;
            }
            out.trace.push_back(std::move(Ht));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trials and aggregation

namespace {

TrialOutcome run_auc_trial(const ExperimentSpec& spec, const SystemConfig& cfg, const ScenarioParams& sp,
                           PipelineOptions po, std::uint64_t seed) {
    TrialOutcome out;
    po.target_ue = -1;
    const auto t_scene = Clock::now();
    Rng rng(derive_seed(seed, 1));
    const SensedScene s = sense_scene(cfg, sp, po, rng);
    const double shared_ms = elapsed_ms(t_scene) / spec.algorithms.size();
    const IndexList& truth = s.scene.total.truth_breakpoints;
    const int W = po.W > 0 ? po.W : cfg.SI_min;
    const int tol = std::max(1, W / 8);
    for (const std::string& name : spec.algorithms) {
        const auto t0 = Clock::now();
        SegmentationResult r;
        if (name == "pass") r = pass_segment(s.power, {W, 0});
        else if (name == "rfem") r = rfem_segment(s.power);
        else r = afm_segment(s.power);
        auto& m = out.metrics[name];
        m["auc"] = auc_score(r.roc_score, truth, tol).auc;
        m["auc_binary"] = auc_binary(r.breakpoints, truth, cfg.N, tol).auc;
        m["subarrays"] = r.subarray_count();
        out.runtime_ms[name] = elapsed_ms(t0) + shared_ms;
    }
    return out;
}

TrialOutcome run_estimation_trial(const ExperimentSpec& spec, const SystemConfig& cfg, const ScenarioParams& sp,
                                  const PipelineOptions& po, std::uint64_t seed) {
    TrialOutcome out;
    const auto t_scene = Clock::now();
    Rng rng(derive_seed(seed, 1));
    const SensedScene s = sense_scene(cfg, sp, po, rng);
    const double shared_ms = elapsed_ms(t_scene) / spec.algorithms.size();
    const int W = po.W > 0 ? po.W : cfg.SI_min;
    const bool want_trace = spec.experiment == "convergence";
    const bool want_bcrb = spec.experiment == "nmse_vs_distance";

    std::map<Segmenter, IndexList> seg_cache;
    for (const std::string& name : spec.algorithms) {
        const AlgorithmDef& def = find_algorithm(name);
        const Segmenter sg = def.segmenter.value_or(spec.default_segmenter);
        const auto t0 = Clock::now();
        auto it = seg_cache.find(sg);
        if (it == seg_cache.end()) it = seg_cache.emplace(sg, segment_profile(sg, s, W)).first;
        EstimateRequest req;
        req.breakpoints = it->second;
        req.architecture = def.architecture.value_or(spec.default_architecture);
        req.estimator = def.estimator.value_or(spec.default_estimator);
        req.P = cfg.P;
        req.N_RF = cfg.N_RF;
        req.known_noise = po.known_noise;
        req.somp_atoms = po.somp_atoms > 0 ? po.somp_atoms : cfg.L;
        req.want_trace = want_trace;
        req.want_bcrb = want_bcrb;
        req.combiner_seed = derive_seed(seed, 2);
        req.noise_seed = derive_seed(seed, 3);
        req.alloc_seed = derive_seed(seed, 4);
        const EstimateOutput est = estimate_channel(s, req, spec.estimator, po.eta_factor);

        auto& m = out.metrics[name];
        m["nmse"] = nmse(est.H_hat, s.H);
        m["subarrays"] = static_cast<double>(req.breakpoints.size() - 1);
        if (want_bcrb && est.bcrb >= 0.0) {
            // Normalized by the expected channel energy M L sigma_g^2 of one UE.
            m["bcrb"] = est.bcrb / (cfg.M * cfg.L * sp.gain_variance);
        }
        if (want_trace) {
            for (int t = 0; t < spec.estimator.T_ite; ++t) {
                const CMatrix& Ht = est.trace.empty() ? est.H_hat
                                                      : est.trace[std::min<std::size_t>(t, est.trace.size() - 1)];
                char key[32];
                std::snprintf(key, sizeof key, "nmse_iter_%03d", t + 1);
                m[key] = nmse(Ht, s.H);
            }
        }
        // Scene synthesis is shared, so each algorithm carries an equal slice of it.
        out.runtime_ms[name] = elapsed_ms(t0) + shared_ms;
    }
    return out;
}

}  // namespace

TrialOutcome run_trial(const ExperimentSpec& spec, int sweep_index, int trial_index) {
    const std::uint64_t seed = trial_seed(spec.seed, sweep_index, trial_index);
    SystemConfig cfg = spec.config;
    ScenarioParams sp = spec.scenario;
    PipelineOptions po = spec.pipeline;
    try {
        apply_sweep_value(spec.sweep_param, spec.sweep_values.at(sweep_index), cfg, sp, po);
        cfg.seed = seed;
        return is_auc_experiment(spec.experiment) ? run_auc_trial(spec, cfg, sp, po, seed)
                                                  : run_estimation_trial(spec, cfg, sp, po, seed);
    } catch (const std::exception& e) {
        TrialOutcome out;
        out.error = e.what();
        return out;
    }
}

std::vector<std::vector<TrialOutcome>> run_trials(const ExperimentSpec& spec, const RunOptions& opt) {
    spec.validate();
    const int S = static_cast<int>(spec.sweep_values.size());
    std::vector<std::vector<TrialOutcome>> out(S, std::vector<TrialOutcome>(spec.trials));
    const long total = static_cast<long>(S) * spec.trials;
    std::atomic<long> next{0};
    auto work = [&]() {
        for (long i = next++; i < total; i = next++) {
            const int s = static_cast<int>(i / spec.trials);
            const int t = static_cast<int>(i % spec.trials);
            out[s][t] = run_trial(spec, s, t);
        }
    };
    const int workers = std::clamp(opt.workers, 1, 256);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }
    return out;
}

ResultTable aggregate(const ExperimentSpec& spec, const std::vector<std::vector<TrialOutcome>>& outcomes) {
    ResultTable table;
    table.seed = spec.seed;
    table.version = SNSCE_VERSION;
    table.experiment = spec.experiment;
    table.config_hash = config_hash(spec);
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        for (const TrialOutcome& o : outcomes[s]) {
            ++table.total_trials;
            if (o.error) {
                ++table.errored_trials;
                if (table.error_messages.size() < 10) table.error_messages.push_back(*o.error);
            }
        }
        for (const std::string& alg : spec.algorithms) {
            std::map<std::string, std::vector<double>> values;
            double runtime = 0.0;
            int timed = 0;
            for (const TrialOutcome& o : outcomes[s]) {
                if (o.error) continue;
                auto it = o.metrics.find(alg);
                if (it == o.metrics.end()) continue;
                for (const auto& [metric, v] : it->second) values[metric].push_back(v);
                auto rt = o.runtime_ms.find(alg);
                if (rt != o.runtime_ms.end()) {
                    runtime += rt->second;
                    ++timed;
                }
            }
            for (const auto& [metric, v] : values) {
                ResultRow row;
                row.sweep_param = spec.sweep_param;
                row.sweep_value = spec.sweep_values[s];
                row.algorithm = alg;
                row.metric = metric;
                row.trials = static_cast<int>(v.size());
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= v.size();
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                row.mean = mean;
                row.stderr_ = v.size() > 1 ? std::sqrt(ss / (v.size() - 1) / v.size()) : 0.0;
                row.runtime_ms = timed ? runtime / timed : 0.0;
                table.rows.push_back(row);
            }
        }
    }
    return table;
}

ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& opt) {
    return aggregate(spec, run_trials(spec, opt));
}

}  // namespace snsce
