#include "rapper/config.hpp"
#include "rapper/detector.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace rapper;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "flat key=value config file");
    cmd->add_option("--set", args.overrides,
                    "override a config key, e.g. --set seed=7 (repeatable, wins over file)");
}

PipelineConfig resolve_config(const CommonArgs& args, const KeyValueMap& extra_flags = {}) {
    KeyValueMap file_values;
    if (!args.config_path.empty()) file_values = parse_config_file(args.config_path);
    KeyValueMap flags = extra_flags;
    for (const std::string& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got `" + kv + "`");
        flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return build_pipeline_config(file_values, flags);
}

TraceSeries collect(SampleStream& stream, std::size_t max_samples) {
    TraceSeries series;
    series.interval_ms = stream.interval_ms();
    while (max_samples == 0 || series.samples.size() < max_samples) {
        auto s = stream.next();
        if (!s) break;
        series.samples.push_back(*s);
    }
    return series;
}

nlohmann::json config_header(const PipelineConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : cfg.resolved) j[key] = value;
    return j;
}

int cmd_record(const CommonArgs& common, const std::string& out_path, std::size_t count) {
    KeyValueMap flags;
    if (count > 0) flags["count"] = std::to_string(count);
    PipelineConfig cfg = resolve_config(common, flags);
    auto stream = open_source(cfg.source);
    TraceSeries series = collect(*stream, cfg.source.count);
    series.label = to_string(cfg.source.kind);
    emit_trace_file(series, out_path);
    std::cerr << "recorded " << series.samples.size() << " samples ("
              << to_string(cfg.source.kind) << ") to " << out_path;
    if (stream->dropped() > 0) std::cerr << ", dropped " << stream->dropped();
    std::cerr << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& trace_path,
              const std::string& report_path, bool recalibrate_only) {
    PipelineConfig cfg = resolve_config(common);
    TraceSeries series = parse_trace_file(trace_path);

    OfflineResult result;
    if (recalibrate_only) {
        result.stage1 = load_model_file(cfg.stage1_model_path);
        result.stage2 = load_model_file(cfg.stage2_model_path);
        auto windows = sliding_windows(series, cfg.w, 1);
        std::vector<Window> usable;
        for (Window& w : windows)
            if (!w.spans_gap) usable.push_back(std::move(w));
        const NormStats stats1 = result.stage1.norm_stats();
        SpectrumNormStats stats2{result.stage2.norm_mean, result.stage2.norm_scale};
        std::vector<double> e1, e2;
        for (const Window& w : usable) {
            e1.push_back(score_stage1(result.stage1, stats1, w));
            e2.push_back(score_stage2(result.stage2, stats2, w));
        }
        result.stage1_distribution = make_error_distribution(std::move(e1));
        result.stage2_distribution = make_error_distribution(std::move(e2));
        result.stage1_threshold =
            threshold(result.stage1_distribution, ThresholdStage::kTimeDomain);
        result.stage2_threshold =
            threshold(result.stage2_distribution, ThresholdStage::kFrequencyDomain);
    } else {
        result = offline_pipeline(series, cfg.offline);
        save_model_file(result.stage1, cfg.stage1_model_path);
        save_model_file(result.stage2, cfg.stage2_model_path);
    }
    write_thresholds_file(cfg.thresholds_path, result.stage1_threshold,
                          result.stage2_threshold);

    nlohmann::json report{
        {"v", 1},
        {"config", config_header(cfg)},
        {"trace", trace_path},
        {"windows", result.stage1_distribution.count()},
        {"stage1",
         {{"threshold", result.stage1_threshold.value},
          {"mean", result.stage1_distribution.mean},
          {"stddev", result.stage1_distribution.stddev},
          {"loss_history", result.stage1_loss_history}}},
        {"stage2",
         {{"threshold", result.stage2_threshold.value},
          {"mean", result.stage2_distribution.mean},
          {"stddev", result.stage2_distribution.stddev},
          {"loss_history", result.stage2_loss_history}}},
    };
    if (report_path.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::ofstream out(report_path);
        if (!out) throw ConfigError("cannot write report: " + report_path);
        out << report.dump(2) << "\n";
    }
    return 0;
}

int run_detection(const PipelineConfig& cfg, SampleStream& stream,
                  const std::string& events_path, const std::string& latency_path) {
    DetectorConfig dcfg;
    dcfg.w = cfg.w;
    dcfg.interval_ms = cfg.source.interval_ms;
    dcfg.stage1 = load_model_file(cfg.stage1_model_path);
    dcfg.stage2 = load_model_file(cfg.stage2_model_path);
    std::tie(dcfg.stage1_threshold, dcfg.stage2_threshold) =
        read_thresholds_file(cfg.thresholds_path);
    dcfg.confirm_k = cfg.confirm_k;
    dcfg.stop_on_alarm = cfg.stop_on_alarm;

    RunResult result = run(stream, dcfg);

    std::ofstream events_out(events_path);
    if (!events_out) throw ConfigError("cannot write event log: " + events_path);
    for (const DetectionEvent& event : result.events) write_event(events_out, event);

    if (result.latency) {
        std::ofstream latency_out(latency_path);
        if (!latency_out) throw ConfigError("cannot write latency report: " + latency_path);
        write_latency_report(latency_out, *result.latency);
    }

    std::cerr << "windows=" << result.windows_scored << " suspects=" << result.suspects
              << " alarms=" << result.alarms;
    if (result.dropped_samples > 0) std::cerr << " dropped=" << result.dropped_samples;
    std::cerr << "\n";
    if (result.alarms > 0) return 3;
    return result.suspects > 0 ? 2 : 0;
}

int cmd_monitor(const CommonArgs& common, const std::string& events_path,
                const std::string& latency_path, const std::string& replay_path) {
    KeyValueMap flags;
    if (!replay_path.empty()) {
        flags["source"] = "replay";
        flags["replay_path"] = replay_path;
    }
    PipelineConfig cfg = resolve_config(common, flags);
    auto stream = open_source(cfg.source);
    return run_detection(cfg, *stream, events_path, latency_path);
}

int cmd_report(const std::string& events_path, const std::string& out_dir,
               const std::string& trace_path, std::size_t spectrum_start) {
    std::ifstream in(events_path);
    if (!in) throw ConfigError("cannot open event log: " + events_path);
    const auto events = read_event_log(in);

    std::size_t windows = 0, suspects = 0, alarms = 0, gaps = 0;
    std::optional<std::size_t> first_alarm_window;
    for (const DetectionEvent& e : events) {
        switch (e.kind) {
            case EventKind::kWindowScored: ++windows; break;
            case EventKind::kSuspect: ++suspects; break;
            case EventKind::kRansomwareAlarm:
                ++alarms;
                if (!first_alarm_window) first_alarm_window = e.window_index;
                break;
            case EventKind::kGapWarning: ++gaps; break;
            case EventKind::kCleared: break;
        }
    }
    std::cout << "# rapper report for " << events_path << "\n"
              << "windows_scored: " << windows << "\n"
              << "suspects: " << suspects << "\n"
              << "alarms: " << alarms << "\n"
              << "gap_warnings: " << gaps << "\n";
    if (first_alarm_window) std::cout << "first_alarm_window: " << *first_alarm_window << "\n";

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream s1(std::filesystem::path(out_dir) / "stage1_errors.csv");
        s1 << "window_index,t_ms,stage1_error\n";
        std::ofstream s2(std::filesystem::path(out_dir) / "stage2_errors.csv");
        s2 << "window_index,t_ms,stage2_error\n";
        for (const DetectionEvent& e : events) {
            if (e.kind == EventKind::kWindowScored)
                s1 << e.window_index << ',' << e.t_ms << ',' << e.stage1_error << '\n';
            if (e.kind == EventKind::kSuspect)
                s2 << e.window_index << ',' << e.t_ms << ',' << *e.stage2_error << '\n';
        }
        if (!trace_path.empty()) {
            TraceSeries series = parse_trace_file(trace_path);
            auto windows_vec = sliding_windows(series, kDefaultWindowLength, 1);
            if (spectrum_start >= windows_vec.size())
                throw ConfigError("spectrum window start index out of range");
            SpectrumWindow spec = dft_magnitudes(windows_vec[spectrum_start]);
            std::ofstream sp(std::filesystem::path(out_dir) / "spectrum.csv");
            sp << "bin";
            for (int e = 0; e < kEventCount; ++e) sp << ',' << kEventNames[e];
            sp << '\n';
            for (int k = 0; k < spec.bins(); ++k) {
                sp << k;
                for (int e = 0; e < kEventCount; ++e) sp << ',' << spec.magnitudes(k, e);
                sp << '\n';
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage performance-counter ransomware anomaly detector"};
    app.require_subcommand(1);

    CommonArgs record_args, simulate_args, train_args, calibrate_args, monitor_args,
        replay_args;
    std::string out_path, trace_path, report_path, events_path = "events.jsonl",
                latency_path = "latency.json", out_dir;
    std::size_t count = 0, spectrum_start = 0;

    auto* record = app.add_subcommand("record", "sample a source into a trace CSV");
    add_common(record, record_args);
    record->add_option("-o,--out", out_path, "output trace file")->required();
    record->add_option("-n,--count", count, "samples to record");

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic workload trace");
    add_common(simulate, simulate_args);
    simulate->add_option("-o,--out", out_path, "output trace file")->required();
    simulate->add_option("-n,--count", count, "samples to generate");

    auto* train = app.add_subcommand("train", "train both stages and calibrate thresholds");
    add_common(train, train_args);
    train->add_option("-t,--trace", trace_path, "benign training trace")->required();
    train->add_option("-r,--report", report_path, "calibration report JSON (default stdout)");

    auto* calibrate =
        app.add_subcommand("calibrate", "recompute thresholds for existing models");
    add_common(calibrate, calibrate_args);
    calibrate->add_option("-t,--trace", trace_path, "calibration trace")->required();
    calibrate->add_option("-r,--report", report_path, "calibration report JSON");

    auto* monitor = app.add_subcommand("monitor", "run the online detector on a live source");
    add_common(monitor, monitor_args);
    monitor->add_option("-e,--events", events_path, "event log output (JSON Lines)");
    monitor->add_option("-l,--latency", latency_path, "latency report output (on alarm)");

    auto* replay = app.add_subcommand("replay", "run the online detector over a trace file");
    add_common(replay, replay_args);
    replay->add_option("-t,--trace", trace_path, "trace to replay")->required();
    replay->add_option("-e,--events", events_path, "event log output (JSON Lines)");
    replay->add_option("-l,--latency", latency_path, "latency report output (on alarm)");

    auto* report = app.add_subcommand("report", "summarize an event log, emit plot CSVs");
    report->add_option("-e,--events", events_path, "event log to summarize")->required();
    report->add_option("-d,--out-dir", out_dir, "directory for plot-ready CSVs");
    report->add_option("-t,--trace", trace_path, "trace for a spectrum dump");
    report->add_option("--spectrum-window", spectrum_start,
                       "start index of the window to dump the spectrum of");

    CLI11_PARSE(app, argc, argv);

    try {
        if (record->parsed()) return cmd_record(record_args, out_path, count);
        if (simulate->parsed()) return cmd_record(simulate_args, out_path, count);
        if (train->parsed()) return cmd_train(train_args, trace_path, report_path, false);
        if (calibrate->parsed())
            return cmd_train(calibrate_args, trace_path, report_path, true);
        if (monitor->parsed())
            return cmd_monitor(monitor_args, events_path, latency_path, "");
        if (replay->parsed())
            return cmd_monitor(replay_args, events_path, latency_path, trace_path);
        if (report->parsed())
            return cmd_report(events_path, out_dir, trace_path, spectrum_start);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
