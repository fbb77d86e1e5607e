#include "snsce/serialize.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace snsce {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("bad type for '" + std::string(key) + "' in " + where);
    }
}

template <class T>
void read_opt(const Json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    T v{};
    read(j, key, v, where);
    out = v;
}

template <class E>
E enum_from(const std::string& name, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
    for (const auto& [n, e] : table)
        if (name == n) return e;
    throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
}

const std::initializer_list<std::pair<const char*, Segmenter>> kSegmenters = {
    {"pass", Segmenter::pass},     {"oracle", Segmenter::oracle}, {"equal4", Segmenter::equal4},
    {"under", Segmenter::under},   {"over", Segmenter::over},     {"none", Segmenter::none}};
const std::initializer_list<std::pair<const char*, Architecture>> kArchitectures = {
    {"dhbf_mef_gaa", Architecture::dhbf_mef_gaa},
    {"dhbf_random", Architecture::dhbf_random},
    {"fully_connected", Architecture::fully_connected}};
const std::initializer_list<std::pair<const char*, EstimatorKind>> kEstimators = {
    {"absbl_mmv", EstimatorKind::absbl_mmv}, {"absbl", EstimatorKind::absbl},
    {"bsbl", EstimatorKind::bsbl},           {"somp", EstimatorKind::somp},
    {"og_absbl_mmv", EstimatorKind::og_absbl_mmv}};

template <class E>
std::string enum_name(E e, std::initializer_list<std::pair<const char*, E>> table) {
    for (const auto& [n, v] : table)
        if (v == e) return n;
    return "?";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

Json cplx_json(cplx z) { return Json::array({z.real(), z.imag()}); }
cplx json_cplx(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Json rvec_json(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
RVector json_rvec(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const RVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json cmat_json(const CMatrix& A) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < A.cols(); ++k) row.push_back(cplx_json(A(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix json_cmat(const Json& j) {
    const Eigen::Index R = static_cast<Eigen::Index>(j.size());
    const Eigen::Index C = R ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    CMatrix A(R, C);
    for (Eigen::Index i = 0; i < R; ++i)
        for (Eigen::Index k = 0; k < C; ++k) A(i, k) = json_cplx(j.at(i).at(k));
    return A;
}

}  // namespace

std::string segmenter_name(Segmenter s) { return enum_name(s, kSegmenters); }
std::string architecture_name(Architecture a) { return enum_name(a, kArchitectures); }
std::string estimator_name(EstimatorKind e) { return enum_name(e, kEstimators); }

Json config_to_json(const SystemConfig& c) {
    return {{"N", c.N},   {"M", c.M},       {"K", c.K},   {"L", c.L},
            {"fc", c.fc}, {"B", c.B},       {"d", c.d},   {"c", c.c},
            {"N_RF", c.N_RF}, {"P", c.P}, {"SI_min", c.SI_min}, {"seed", c.seed}};
}

SystemConfig config_from_json(const Json& j) {
    SystemConfig c;
    const std::string w = "config";
    check_keys(j, {"N", "M", "K", "L", "fc", "B", "d", "c", "N_RF", "P", "SI_min", "seed"}, w);
    read(j, "N", c.N, w);
    read(j, "M", c.M, w);
    read(j, "K", c.K, w);
    read(j, "L", c.L, w);
    read(j, "fc", c.fc, w);
    read(j, "B", c.B, w);
    read(j, "d", c.d, w);
    read(j, "c", c.c, w);
    read(j, "N_RF", c.N_RF, w);
    read(j, "P", c.P, w);
    read(j, "SI_min", c.SI_min, w);
    read(j, "seed", c.seed, w);
    return c;
}

namespace {

void apply_config(const Json& j, SystemConfig& c) {
    Json merged = config_to_json(c);
    check_keys(j, {"N", "M", "K", "L", "fc", "B", "d", "c", "N_RF", "P", "SI_min", "seed"}, "config");
    merged.update(j);
    c = config_from_json(merged);
}

Json scenario_json(const ScenarioParams& s) {
    Json m = {{"p_stay_visible", s.markov.p_stay_visible},
              {"p_stay_blocked", s.markov.p_stay_blocked},
              {"max_resample", s.markov.max_resample}};
    m["initial_visible"] = s.markov.initial_visible ? Json(*s.markov.initial_visible) : Json(nullptr);
    Json j = {{"r_min", s.r_min},
              {"r_max", s.r_max},
              {"theta_max", s.theta_max},
              {"gain_variance", s.gain_variance},
              {"nonideal_prob", s.nonideal_prob},
              {"t_d", s.t_d},
              {"power_threshold", s.power_threshold},
              {"h_ref_wavelengths", s.h_ref_wavelengths},
              {"d1_fraction_min", s.d1_fraction_min},
              {"d1_fraction_max", s.d1_fraction_max},
              {"markov", m},
              {"full_visibility", s.full_visibility}};
    j["fixed_distance"] = s.fixed_distance ? Json(*s.fixed_distance) : Json(nullptr);
    return j;
}

void apply_scenario(const Json& j, ScenarioParams& s) {
    const std::string w = "scenario";
    check_keys(j,
               {"r_min", "r_max", "theta_max", "gain_variance", "nonideal_prob", "t_d", "power_threshold",
                "h_ref_wavelengths", "d1_fraction_min", "d1_fraction_max", "markov", "full_visibility",
                "fixed_distance"},
               w);
    read(j, "r_min", s.r_min, w);
    read(j, "r_max", s.r_max, w);
    read(j, "theta_max", s.theta_max, w);
    read(j, "gain_variance", s.gain_variance, w);
    read(j, "nonideal_prob", s.nonideal_prob, w);
    read(j, "t_d", s.t_d, w);
    read(j, "power_threshold", s.power_threshold, w);
    read(j, "h_ref_wavelengths", s.h_ref_wavelengths, w);
    read(j, "d1_fraction_min", s.d1_fraction_min, w);
    read(j, "d1_fraction_max", s.d1_fraction_max, w);
    read(j, "full_visibility", s.full_visibility, w);
    read_opt(j, "fixed_distance", s.fixed_distance, w);
    if (j.contains("markov")) {
        const Json& m = j.at("markov");
        const std::string wm = "scenario.markov";
        check_keys(m, {"p_stay_visible", "p_stay_blocked", "max_resample", "initial_visible"}, wm);
        read(m, "p_stay_visible", s.markov.p_stay_visible, wm);
        read(m, "p_stay_blocked", s.markov.p_stay_blocked, wm);
        read(m, "max_resample", s.markov.max_resample, wm);
        read_opt(m, "initial_visible", s.markov.initial_visible, wm);
    }
}

Json pipeline_json(const PipelineOptions& p) {
    return {{"snr_db", p.snr_db},
            {"sensing_subcarriers", p.sensing_subcarriers},
            {"W", p.W},
            {"eta_factor", p.eta_factor},
            {"target_ue", p.target_ue},
            {"known_noise", p.known_noise},
            {"somp_atoms", p.somp_atoms}};
}

void apply_pipeline(const Json& j, PipelineOptions& p) {
    const std::string w = "pipeline";
    check_keys(j, {"snr_db", "sensing_subcarriers", "W", "eta_factor", "target_ue", "known_noise", "somp_atoms"},
               w);
    read(j, "snr_db", p.snr_db, w);
    read(j, "sensing_subcarriers", p.sensing_subcarriers, w);
    read(j, "W", p.W, w);
    read(j, "eta_factor", p.eta_factor, w);
    read(j, "target_ue", p.target_ue, w);
    read(j, "known_noise", p.known_noise, w);
    read(j, "somp_atoms", p.somp_atoms, w);
}

Json estimator_json(const EstimatorConfig& e) {
    Json j = {{"U", e.U},
              {"T_ite", e.T_ite},
              {"delta1", e.delta1},
              {"alm_c", e.alm_c},
              {"alm_alpha", e.alm_alpha},
              {"alm_iters", e.alm_iters},
              {"learn_correlation", e.learn_correlation},
              {"p_shrink", e.p_shrink},
              {"learn_noise", e.learn_noise},
              {"prune_rel", e.prune_rel},
              {"eps_pd", e.eps_pd},
              {"noise_floor", e.noise_floor},
              {"support_fraction", e.support_fraction},
              {"R_ite", e.R_ite},
              {"delta2", e.delta2},
              {"armijo_shrink", e.armijo_shrink},
              {"armijo_c", e.armijo_c},
              {"max_backtracks", e.max_backtracks}};
    j["noise_init"] = e.noise_init ? Json(*e.noise_init) : Json(nullptr);
    return j;
}

void apply_estimator(const Json& j, EstimatorConfig& e) {
    const std::string w = "estimator";
    check_keys(j,
               {"U", "T_ite", "delta1", "alm_c", "alm_alpha", "alm_iters", "learn_correlation", "p_shrink", "learn_noise",
                "prune_rel", "eps_pd", "noise_floor", "support_fraction", "R_ite", "delta2", "armijo_shrink",
                "armijo_c", "max_backtracks", "noise_init"},
               w);
    read(j, "U", e.U, w);
    read(j, "T_ite", e.T_ite, w);
    read(j, "delta1", e.delta1, w);
    read(j, "alm_c", e.alm_c, w);
    read(j, "alm_alpha", e.alm_alpha, w);
    read(j, "alm_iters", e.alm_iters, w);
    read(j, "learn_correlation", e.learn_correlation, w);
    read(j, "p_shrink", e.p_shrink, w);
    read(j, "learn_noise", e.learn_noise, w);
    read(j, "prune_rel", e.prune_rel, w);
    read(j, "eps_pd", e.eps_pd, w);
    read(j, "noise_floor", e.noise_floor, w);
    read(j, "support_fraction", e.support_fraction, w);
    read(j, "R_ite", e.R_ite, w);
    read(j, "delta2", e.delta2, w);
    read(j, "armijo_shrink", e.armijo_shrink, w);
    read(j, "armijo_c", e.armijo_c, w);
    read(j, "max_backtracks", e.max_backtracks, w);
    read_opt(j, "noise_init", e.noise_init, w);
}

}  // namespace

ExperimentSpec spec_from_json(const Json& j) {
    check_keys(j,
               {"experiment", "sweep", "trials", "seed", "algorithms", "config", "scenario", "pipeline",
                "estimator", "defaults"},
               "spec");
    if (!j.contains("experiment") || !j.at("experiment").is_string())
        throw ConfigError("spec needs an 'experiment' string");
    ExperimentSpec s = default_spec(j.at("experiment").get<std::string>());
    const std::string w = "spec";
    if (j.contains("sweep")) {
        const Json& sw = j.at("sweep");
        check_keys(sw, {"param", "values"}, "sweep");
        read(sw, "param", s.sweep_param, "sweep");
        read(sw, "values", s.sweep_values, "sweep");
    }
    read(j, "trials", s.trials, w);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
            throw ConfigError("seed must be a non-negative integer");
        s.seed = j.at("seed").get<std::uint64_t>();
    }
    read(j, "algorithms", s.algorithms, w);
    if (j.contains("config")) apply_config(j.at("config"), s.config);
    if (j.contains("scenario")) apply_scenario(j.at("scenario"), s.scenario);
    if (j.contains("pipeline")) apply_pipeline(j.at("pipeline"), s.pipeline);
    if (j.contains("estimator")) apply_estimator(j.at("estimator"), s.estimator);
    if (j.contains("defaults")) {
        const Json& d = j.at("defaults");
        check_keys(d, {"segmenter", "architecture", "estimator"}, "defaults");
        std::string name;
        if (d.contains("segmenter")) {
            read(d, "segmenter", name, "defaults");
            s.default_segmenter = enum_from(name, kSegmenters, "segmenter");
        }
        if (d.contains("architecture")) {
            read(d, "architecture", name, "defaults");
            s.default_architecture = enum_from(name, kArchitectures, "architecture");
        }
        if (d.contains("estimator")) {
            read(d, "estimator", name, "defaults");
            s.default_estimator = enum_from(name, kEstimators, "estimator");
        }
    }
    s.validate();
    return s;
}

Json spec_to_json(const ExperimentSpec& s) {
    return {{"experiment", s.experiment},
            {"sweep", {{"param", s.sweep_param}, {"values", s.sweep_values}}},
            {"trials", s.trials},
            {"seed", s.seed},
            {"algorithms", s.algorithms},
            {"config", config_to_json(s.config)},
            {"scenario", scenario_json(s.scenario)},
            {"pipeline", pipeline_json(s.pipeline)},
            {"estimator", estimator_json(s.estimator)},
            {"defaults",
             {{"segmenter", segmenter_name(s.default_segmenter)},
              {"architecture", architecture_name(s.default_architecture)},
              {"estimator", estimator_name(s.default_estimator)}}}};
}

std::string config_hash(const ExperimentSpec& spec) {
    const std::string text = spec_to_json(spec).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string results_csv(const ResultTable& t, bool timing) {
    std::ostringstream os;
    os << "sweep_param,sweep_value,algorithm,metric,mean,stderr,trials,runtime_ms\n";
    for (const ResultRow& r : t.rows) {
        os << r.sweep_param << ',' << fmt(r.sweep_value) << ',' << r.algorithm << ',' << r.metric << ','
           << fmt(r.mean) << ',' << fmt(r.stderr_) << ',' << r.trials << ',';
        if (timing) os << fmt(r.runtime_ms);
        os << '\n';
    }
    return os.str();
}

Json results_json(const ResultTable& t, bool timing) {
    Json rows = Json::array();
    for (const ResultRow& r : t.rows) {
        Json row = {{"sweep_param", r.sweep_param}, {"sweep_value", r.sweep_value}, {"algorithm", r.algorithm},
                    {"metric", r.metric},           {"mean", r.mean},               {"stderr", r.stderr_},
                    {"trials", r.trials}};
        row["runtime_ms"] = timing ? Json(r.runtime_ms) : Json(nullptr);
        rows.push_back(std::move(row));
    }
    return {{"experiment", t.experiment}, {"rows", rows}};
}

Json meta_json(const ResultTable& t, const ExperimentSpec& spec) {
    return {{"config_hash", t.config_hash},
            {"seed", t.seed},
            {"version", t.version},
            {"experiment", t.experiment},
            {"trials", spec.trials},
            {"total_trials", t.total_trials},
            {"errored_trials", t.errored_trials},
            {"errors", t.error_messages},
            {"spec", spec_to_json(spec)}};
}

Json realization_to_json(const SystemConfig& cfg, const ChannelRealization& r) {
    Json paths = Json::array();
    for (const Path& p : r.paths) {
        Json pj = {{"g", cplx_json(p.params.g)},
                   {"r", p.params.r},
                   {"theta", p.params.theta},
                   {"kind", p.params.kind == PathKind::ideal ? "ideal" : "non_ideal"},
                   {"t_d", p.params.t_d},
                   {"ue", p.params.ue},
                   {"mask", {{"s", rvec_json(p.mask.s)}, {"blocks", p.mask.blocks}, {"warning", p.mask.warning}}}};
        if (p.params.obstacle)
            pj["obstacle"] = {{"h_ref", p.params.obstacle->h_ref},
                              {"d1_ref", p.params.obstacle->d1_ref},
                              {"d2_ref", p.params.obstacle->d2_ref}};
        paths.push_back(std::move(pj));
    }
    return {{"config", config_to_json(cfg)},
            {"paths", paths},
            {"H", cmat_json(r.H)},
            {"power", rvec_json(r.power)},
            {"freqs", rvec_json(r.freqs)},
            {"truth_breakpoints", r.truth_breakpoints}};
}

ChannelRealization realization_from_json(const Json& j, SystemConfig* cfg) {
    try {
        if (cfg) *cfg = config_from_json(j.at("config"));
        ChannelRealization r;
        for (const Json& pj : j.at("paths")) {
            Path p;
            p.params.g = json_cplx(pj.at("g"));
            p.params.r = pj.at("r").get<double>();
            p.params.theta = pj.at("theta").get<double>();
            p.params.kind = pj.at("kind").get<std::string>() == "ideal" ? PathKind::ideal : PathKind::non_ideal;
            p.params.t_d = pj.at("t_d").get<double>();
            p.params.ue = pj.at("ue").get<int>();
            if (pj.contains("obstacle")) {
                const Json& o = pj.at("obstacle");
                p.params.obstacle = Obstacle{o.at("h_ref").get<double>(), o.at("d1_ref").get<double>(),
                                             o.at("d2_ref").get<double>()};
            }
            const Json& m = pj.at("mask");
            p.mask.s = json_rvec(m.at("s"));
            p.mask.blocks = m.at("blocks").get<std::vector<int>>();
            p.mask.warning = m.at("warning").get<bool>();
            r.paths.push_back(std::move(p));
        }
        r.H = json_cmat(j.at("H"));
        r.power = json_rvec(j.at("power"));
        r.freqs = json_rvec(j.at("freqs"));
        r.truth_breakpoints = j.at("truth_breakpoints").get<IndexList>();
        return r;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed realization: ") + e.what());
    }
}

Json segmentation_to_json(const SegmentationResult& r) {
    return {{"breakpoints", r.breakpoints},
            {"scores", rvec_json(r.scores)},
            {"flags", r.flags},
            {"os", rvec_json(r.os)},
            {"roc_score", rvec_json(r.roc_score)}};
}

std::string segmentation_csv(const RVector& power, const SegmentationResult& r) {
    std::ostringstream os;
    os << "n,power,score,flag,os\n";
    for (Eigen::Index n = 0; n < power.size(); ++n) {
        os << n + 1 << ',' << fmt(power(n)) << ',' << fmt(n < r.scores.size() ? r.scores(n) : 0.0) << ','
           << (n < static_cast<Eigen::Index>(r.flags.size()) ? r.flags[n] : 0) << ','
           << fmt(n < r.os.size() ? r.os(n) : 0.0) << '\n';
    }
    return os.str();
}

Json plan_to_json(const MeasurementPlan& plan) {
    Json subs = Json::array();
    for (const auto& [b, e] : plan.subarrays) subs.push_back({b, e});
    return {{"N", plan.N},
            {"P", plan.P},
            {"noise_var", plan.noise_var},
            {"subarrays", subs},
            {"classes", plan.alloc.classes},
            {"schedule", plan.schedule},
            {"effective_pilots", plan.effective_pilots}};
}

}  // namespace snsce
