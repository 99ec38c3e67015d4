#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "detbench/bench.hpp"
#include "detbench/builder.hpp"
#include "detbench/profiler.hpp"
#include "detbench/specs.hpp"

namespace py = pybind11;
using namespace detbench;

namespace {

// Preset name or ModelSpec JSON text (the python wrapper reads files).
ModelSpec resolve(const std::string& what) {
    std::string t = what;
    size_t b = t.find_first_not_of(" \t\r\n");
    if (b != std::string::npos && t[b] == '{') return model_spec_from_json(t);
    return preset(what);
}

Tensor tensor_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
    py::buffer_info info = arr.request();
    if (info.ndim != 4)
        throw std::invalid_argument("input must be a (n, c, h, w) float array");
    Tensor t(static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1]),
             static_cast<int>(info.shape[2]), static_cast<int>(info.shape[3]));
    std::memcpy(t.data.data(), info.ptr, t.data.size() * sizeof(float));
    return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    py::array_t<float> arr({t.n, t.c, t.h, t.w});
    std::memcpy(arr.mutable_data(), t.data.data(),
                t.data.size() * sizeof(float));
    return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CPU toolkit for one-stage detector architectures: build, "
              "profile, benchmark";

    m.def("list_presets", &preset_names, "All model preset names");
    m.def("preset_group_names", &preset_group_names);
    m.def("preset_group", &preset_group, py::arg("group"));
    m.def("default_tables_path", &default_tables_path);

    m.def(
        "spec_json",
        [](const std::string& what) { return to_json(resolve(what)); },
        py::arg("model"), "Resolved model spec as JSON text");

    m.def(
        "analyze_json",
        [](const std::string& what, int input_size, bool attach_map) {
            ModelSpec spec = resolve(what);
            if (input_size > 0) spec.input_size = input_size;
            AnalysisReport rep = analyze(compile(spec));
            if (attach_map && is_preset(what)) {
                try {
                    attach_map_metadata(rep, load_paper_tables(default_tables_path()), what);
                } catch (const std::exception&) {
                    // metadata is optional; analysis stands on its own
                }
            }
            return report_to_json(rep);
        },
        py::arg("model"), py::arg("input_size") = 0,
        py::arg("attach_map") = true,
        "Static parameter/Gflops breakdown as JSON text");

    m.def(
        "bench_json",
        [](const std::string& what, int warmup, int iters, unsigned seed,
           int input_size) {
            ModelSpec spec = resolve(what);
            if (input_size > 0) spec.input_size = input_size;
            BenchConfig cfg;
            cfg.warmup_iters = warmup;
            cfg.measure_iters = iters;
            cfg.seed = seed;
            cfg.input_size = spec.input_size;
            return latency_report_to_json(run_bench(compile(spec), cfg));
        },
        py::arg("model"), py::arg("warmup") = 50, py::arg("iters") = 300,
        py::arg("seed") = 42, py::arg("input_size") = 0,
        "Single-thread CPU latency report as JSON text");

    m.def(
        "verify_tables_json",
        [](const std::string& tables_path) {
            VerifyResult r = verify_tables(
                tables_path.empty() ? default_tables_path() : tables_path);
            return py::make_tuple(r.all_pass, verify_result_to_json(r));
        },
        py::arg("tables_path") = std::string(),
        "(all_pass, report JSON) for the published params/Gflops cells");

    m.def(
        "forward_taps",
        [](const std::string& what, py::array_t<float, py::array::c_style | py::array::forcecast> input) {
            Graph g = compile(resolve(what)).fold_batchnorm();
            Tensor x = tensor_from_array(input);
            std::map<std::string, Tensor> taps = g.forward_taps(x);
            py::dict out;
            for (auto& [name, t] : taps)
                out[py::str(name)] = array_from_tensor(t);
            return out;
        },
        py::arg("model"), py::arg("input"),
        "Run the network; returns named output maps (backbone taps, fpn "
        "levels, head maps)");

    m.def(
        "decode",
        [](const std::string& what, py::array_t<float, py::array::c_style | py::array::forcecast> input) {
            Graph g = compile(resolve(what)).fold_batchnorm();
            std::map<std::string, Tensor> taps =
                g.forward_taps(tensor_from_array(input));
            std::vector<Detection> dets = decode_predictions(taps);
            int classes =
                dets.empty() ? 0 : static_cast<int>(dets[0].class_scores.size());
            py::array_t<float> out(
                {static_cast<int>(dets.size()), 6 + classes});
            float* p = out.mutable_data();
            for (const Detection& d : dets) {
                *p++ = d.cx;
                *p++ = d.cy;
                *p++ = d.w;
                *p++ = d.h;
                *p++ = d.objectness;
                *p++ = static_cast<float>(d.stride);
                for (float s : d.class_scores) *p++ = s;
            }
            return out;
        },
        py::arg("model"), py::arg("input"),
        "Decode head maps to one row per anchor point: cx, cy, w, h, "
        "objectness, stride, then per-class scores");

    m.def(
        "structure_signature",
        [](const std::string& what) {
            return compile(resolve(what)).structure_signature();
        },
        py::arg("model"),
        "Canonical structural description; equal strings mean isomorphic "
        "networks");
}
