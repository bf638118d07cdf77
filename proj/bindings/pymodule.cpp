#include "rapper/config.hpp"
#include "rapper/detector.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace rapper;

namespace {

Window window_from_matrix(const Eigen::MatrixXd& values) {
    Window w;
    w.values = values;
    return w;
}

TraceSeries series_from_string(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

std::string series_to_string(const TraceSeries& series) {
    std::ostringstream out;
    emit_trace(series, out);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_rapper, m) {
    m.doc() = "two-stage performance-counter anomaly detector core";

    py::class_<Sample>(m, "Sample")
        .def(py::init<>())
        .def_readwrite("t_ms", &Sample::t_ms)
        .def_property(
            "counts",
            [](const Sample& s) {
                return std::vector<std::int64_t>(s.counts, s.counts + kEventCount);
            },
            [](Sample& s, const std::vector<std::int64_t>& v) {
                if (v.size() != kEventCount) throw py::value_error("expected 5 counts");
                std::copy(v.begin(), v.end(), s.counts);
            });

    py::class_<TraceSeries>(m, "TraceSeries")
        .def(py::init<>())
        .def_readwrite("interval_ms", &TraceSeries::interval_ms)
        .def_readwrite("samples", &TraceSeries::samples)
        .def_readwrite("label", &TraceSeries::label)
        .def("__len__", [](const TraceSeries& s) { return s.samples.size(); });

    py::class_<Window>(m, "Window")
        .def(py::init(&window_from_matrix), py::arg("values"))
        .def_readwrite("values", &Window::values)
        .def_readwrite("start_index", &Window::start_index)
        .def_readwrite("spans_gap", &Window::spans_gap);

    py::class_<GeneratorParams>(m, "GeneratorParams")
        .def(py::init<>())
        .def_readwrite("noise_level", &GeneratorParams::noise_level)
        .def_readwrite("heavy_mean_scale", &GeneratorParams::heavy_mean_scale)
        .def_readwrite("heavy_noise_scale", &GeneratorParams::heavy_noise_scale)
        .def_readwrite("period", &GeneratorParams::period)
        .def_readwrite("burst_len", &GeneratorParams::burst_len)
        .def_readwrite("burst_scale", &GeneratorParams::burst_scale)
        .def_readwrite("delay", &GeneratorParams::delay);

    m.def("parse_trace", &series_from_string, py::arg("text"));
    m.def("emit_trace", &series_to_string, py::arg("series"));
    m.def("sliding_windows", &sliding_windows, py::arg("series"), py::arg("w"),
          py::arg("stride") = 1);

    m.def("synth_benign", &synth_benign, py::arg("seed"), py::arg("n"),
          py::arg("params") = GeneratorParams{}, py::arg("interval_ms") = kDefaultIntervalMs);
    m.def("synth_heavy", &synth_heavy, py::arg("seed"), py::arg("n"),
          py::arg("params") = GeneratorParams{}, py::arg("interval_ms") = kDefaultIntervalMs);
    m.def("synth_ransomware", &synth_ransomware, py::arg("seed"), py::arg("n"),
          py::arg("params") = GeneratorParams{}, py::arg("interval_ms") = kDefaultIntervalMs);

    m.def(
        "dft_magnitudes",
        [](const Eigen::MatrixXd& values) {
            return dft_magnitudes(window_from_matrix(values)).magnitudes;
        },
        py::arg("values"));

    m.def(
        "reconstruction_error",
        [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& xhat) {
            return reconstruction_error(window_from_matrix(x), window_from_matrix(xhat));
        },
        py::arg("x"), py::arg("xhat"));

    py::class_<Threshold>(m, "Threshold")
        .def_readonly("value", &Threshold::value)
        .def_readonly("mean", &Threshold::source_mean)
        .def_readonly("stddev", &Threshold::source_stddev);

    py::class_<AutoencoderModel>(m, "AutoencoderModel")
        .def_property_readonly("input_dim", &AutoencoderModel::input_dim)
        .def_property_readonly("latent_dim", &AutoencoderModel::latent_dim)
        .def("save",
             [](const AutoencoderModel& model, const std::string& path) {
                 save_model_file(model, path);
             })
        .def_static("load", &load_model_file);

    m.def(
        "forward",
        [](const AutoencoderModel& model, const Eigen::MatrixXd& x) {
            auto [recon, latent] = forward(model, window_from_matrix(x));
            return py::make_tuple(recon.values, latent.states);
        },
        py::arg("model"), py::arg("x"));

    py::class_<OfflineResult>(m, "OfflineResult")
        .def_readonly("stage1", &OfflineResult::stage1)
        .def_readonly("stage2", &OfflineResult::stage2)
        .def_readonly("stage1_threshold", &OfflineResult::stage1_threshold)
        .def_readonly("stage2_threshold", &OfflineResult::stage2_threshold)
        .def_readonly("stage1_loss_history", &OfflineResult::stage1_loss_history)
        .def_readonly("stage2_loss_history", &OfflineResult::stage2_loss_history);

    m.def(
        "offline_pipeline",
        [](const TraceSeries& series, int w, int epochs, std::uint64_t seed) {
            OfflineConfig cfg;
            cfg.w = w;
            cfg.stage1_train.epochs = epochs;
            cfg.stage1_train.seed = seed;
            cfg.stage2_train.epochs = epochs;
            cfg.stage2_train.seed = seed;
            return offline_pipeline(series, cfg);
        },
        py::arg("series"), py::arg("w") = kDefaultWindowLength, py::arg("epochs") = 5,
        py::arg("seed") = 0);

    m.def(
        "replay",
        [](const TraceSeries& series, const OfflineResult& models, int confirm_k) {
            DetectorConfig cfg;
            cfg.interval_ms = series.interval_ms;
            cfg.stage1 = models.stage1;
            cfg.stage2 = models.stage2;
            cfg.stage1_threshold = models.stage1_threshold;
            cfg.stage2_threshold = models.stage2_threshold;
            cfg.confirm_k = confirm_k;
            auto stream = replay_stream(series);
            RunResult result = run(*stream, cfg);
            py::dict out;
            out["windows_scored"] = result.windows_scored;
            out["suspects"] = result.suspects;
            out["alarms"] = result.alarms;
            if (result.latency) out["total_ms"] = result.latency->total_ms();
            return out;
        },
        py::arg("series"), py::arg("models"), py::arg("confirm_k") = 1);

    py::class_<LatencyReport>(m, "LatencyReport")
        .def(py::init<>())
        .def_readwrite("first_window_ms", &LatencyReport::first_window_ms)
        .def_readwrite("windows_until_suspect", &LatencyReport::windows_until_suspect)
        .def_readwrite("interval_ms", &LatencyReport::interval_ms)
        .def_readwrite("stage1_test_ms", &LatencyReport::stage1_test_ms)
        .def_readwrite("fft_ms", &LatencyReport::fft_ms)
        .def_readwrite("stage2_test_ms", &LatencyReport::stage2_test_ms)
        .def("total_ms", &LatencyReport::total_ms);

    m.attr("EVENT_COUNT") = kEventCount;
    m.attr("DEFAULT_WINDOW") = kDefaultWindowLength;
    m.attr("DEFAULT_INTERVAL_MS") = kDefaultIntervalMs;
}
