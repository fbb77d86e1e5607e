#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "snsce/dhbf.hpp"
#include "snsce/estimator.hpp"
#include "snsce/harness.hpp"
#include "snsce/segmentation.hpp"
#include "snsce/serialize.hpp"

namespace py = pybind11;
using namespace snsce;

namespace {

ExperimentSpec parse_spec(const std::string& text) { return spec_from_json(Json::parse(text)); }

py::dict seg_dict(const SegmentationResult& r) {
    py::dict d;
    d["breakpoints"] = r.breakpoints;
    d["scores"] = r.scores;
    d["flags"] = r.flags;
    d["os"] = r.os;
    d["roc_score"] = r.roc_score;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SnS channel estimation core";
    m.attr("__version__") = SNSCE_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<PilotError>(m, "PilotError", PyExc_RuntimeError);
    py::register_exception<EmptySceneError>(m, "EmptySceneError", PyExc_RuntimeError);

    m.def("list_experiments", [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const ExperimentInfo& e : experiment_list()) out.emplace_back(e.id, e.description);
        return out;
    });
    m.def("default_spec_json", [](const std::string& id) { return spec_to_json(default_spec(id)).dump(2); },
          py::arg("experiment"));
    m.def("config_hash", [](const std::string& spec) { return config_hash(parse_spec(spec)); }, py::arg("spec_json"));
    m.def("trial_seed", &trial_seed, py::arg("seed"), py::arg("sweep_index"), py::arg("trial_index"));

    m.def(
        "run_spec_json",
        [](const std::string& spec_text, int workers, bool timing) {
            const ExperimentSpec spec = parse_spec(spec_text);
            ResultTable t;
            {
                py::gil_scoped_release release;
                t = run_experiment(spec, {workers});
            }
            py::dict d;
            d["csv"] = results_csv(t, timing);
            d["json"] = results_json(t, timing).dump();
            d["meta"] = meta_json(t, spec).dump();
            d["errored_trials"] = t.errored_trials;
            d["total_trials"] = t.total_trials;
            return d;
        },
        py::arg("spec_json"), py::arg("workers") = 1, py::arg("timing") = false);

    m.def("dft_codebook", [](int n) { return dft_codebook(n).D; }, py::arg("n_sub"));
    m.def(
        "mef_gaa",
        [](const std::vector<int>& sizes, int n_rf) { return mef_gaa(sizes, n_rf).classes; }, py::arg("sizes"),
        py::arg("n_rf"));
    m.def(
        "pass_segment",
        [](const RVector& p, int W, int h) { return seg_dict(pass_segment(p, {W, h})); }, py::arg("power"),
        py::arg("W") = 32, py::arg("h") = 0);
    m.def("rfem_segment", [](const RVector& p) { return seg_dict(rfem_segment(p)); }, py::arg("power"));
    m.def("afm_segment", [](const RVector& p) { return seg_dict(afm_segment(p)); }, py::arg("power"));
    m.def("nmse", &nmse, py::arg("h_hat"), py::arg("h"));
}
