#include "rapper/detector.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <istream>
#include <ostream>

namespace rapper {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Window spectrum_as_window(const SpectrumWindow& spec) {
    Window w;
    w.values = spec.magnitudes;
    w.start_index = spec.start_index;
    return w;
}

}  // namespace

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::kWindowScored: return "WindowScored";
        case EventKind::kSuspect: return "Suspect";
        case EventKind::kRansomwareAlarm: return "RansomwareAlarm";
        case EventKind::kCleared: return "Cleared";
        case EventKind::kGapWarning: return "GapWarning";
    }
    return "unknown";
}

Window spectrum_input(const Window& raw_window, const SpectrumNormStats& stats) {
    SpectrumWindow shaped = shape_normalize(dft_magnitudes(raw_window));
    return spectrum_as_window(normalize_spectrum(shaped, stats));
}

SpectrumNormStats fit_spectrum_stats(const std::vector<Window>& raw_windows) {
    std::vector<SpectrumWindow> shaped;
    shaped.reserve(raw_windows.size());
    for (const Window& w : raw_windows) shaped.push_back(shape_normalize(dft_magnitudes(w)));
    return spectrum_normalizer(shaped);
}

double score_stage1(const AutoencoderModel& model, const NormStats& stats, const Window& raw) {
    Window normed = normalize(raw, stats);
    auto [recon, latent] = forward(model, normed, ForwardMode::kInfer);
    return reconstruction_error(normed, recon);
}

double score_stage2(const AutoencoderModel& model, const SpectrumNormStats& stats,
                    const Window& raw) {
    Window input = spectrum_input(raw, stats);
    auto [recon, latent] = forward(model, input, ForwardMode::kInfer);
    return reconstruction_error(input, recon);
}

Detector::Detector(DetectorConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.confirm_k < 1) throw DetectorError("confirm_k must be >= 1");
    if (cfg_.w < 1 || cfg_.interval_ms < 1)
        throw DetectorError("window length and interval must be positive");
    if (cfg_.stage1.input_dim() != kEventCount)
        throw DetectorError("stage-1 model input dimension does not match event count");
    if (cfg_.stage2.input_dim() != kEventCount)
        throw DetectorError("stage-2 model input dimension does not match event count");
    stage1_stats_ = cfg_.stage1.norm_stats();
    if (cfg_.stage2.norm_mean.rows() != cfg_.w || cfg_.stage2.norm_mean.cols() != kEventCount)
        throw DetectorError("stage-2 model does not carry per-bin spectrum stats for this w");
    stage2_stats_.mean = cfg_.stage2.norm_mean;
    stage2_stats_.scale = cfg_.stage2.norm_scale;
}

Window Detector::current_window() const {
    Window w;
    w.start_index = windows_scored_;  // index of the oldest sample
    w.values.resize(cfg_.w, kEventCount);
    int i = 0;
    for (const RingEntry& entry : ring_) {
        for (int e = 0; e < kEventCount; ++e)
            w.values(i, e) = static_cast<double>(entry.sample.counts[e]);
        if (i > 0 && entry.gap_before) w.spans_gap = true;
        ++i;
    }
    return w;
}

std::vector<DetectionEvent> Detector::step(const Sample& sample) {
    std::vector<DetectionEvent> events;

    bool gap_before = false;
    if (last_t_ms_) {
        if (sample.t_ms <= *last_t_ms_)
            throw DetectorError("non-monotonic sample timestamp");
        if (2 * (sample.t_ms - *last_t_ms_) > 3 * cfg_.interval_ms) {
            gap_before = true;
            DetectionEvent gap;
            gap.kind = EventKind::kGapWarning;
            gap.window_index = windows_scored_;
            gap.t_ms = sample.t_ms;
            events.push_back(gap);
        }
    }
    last_t_ms_ = sample.t_ms;

    ring_.push_back({sample, gap_before});
    if (ring_.size() > static_cast<std::size_t>(cfg_.w)) ring_.pop_front();
    if (ring_.size() < static_cast<std::size_t>(cfg_.w)) return events;

    const Window raw = current_window();
    ++windows_scored_;

    DetectionEvent scored;
    scored.kind = EventKind::kWindowScored;
    scored.window_index = windows_scored_;
    scored.t_ms = sample.t_ms;
    const auto s1_start = Clock::now();
    scored.stage1_error = score_stage1(cfg_.stage1, stage1_stats_, raw);
    scored.stage1_ms = elapsed_ms(s1_start);
    events.push_back(scored);

    if (scored.stage1_error <= cfg_.stage1_threshold.value) {
        consecutive_exceedances_ = 0;
        return events;
    }

    // stage-1 exceedance: forward this window to the FFT path
    ++suspects_;
    ++stage2_invocations_;
    DetectionEvent suspect = scored;
    suspect.kind = EventKind::kSuspect;
    const auto fft_start = Clock::now();
    Window spec_input = spectrum_input(raw, stage2_stats_);
    suspect.fft_ms = elapsed_ms(fft_start);
    const auto s2_start = Clock::now();
    auto [recon, latent] = forward(cfg_.stage2, spec_input, ForwardMode::kInfer);
    suspect.stage2_error = reconstruction_error(spec_input, recon);
    suspect.stage2_ms = elapsed_ms(s2_start);
    events.push_back(suspect);

    if (*suspect.stage2_error > cfg_.stage2_threshold.value) {
        if (++consecutive_exceedances_ >= cfg_.confirm_k) {
            ++alarms_;
            DetectionEvent alarm = suspect;
            alarm.kind = EventKind::kRansomwareAlarm;
            events.push_back(alarm);
        }
    } else {
        consecutive_exceedances_ = 0;
        DetectionEvent cleared = suspect;
        cleared.kind = EventKind::kCleared;
        events.push_back(cleared);
    }
    return events;
}

RunResult run(SampleStream& stream, const DetectorConfig& cfg) {
    Detector detector(cfg);
    RunResult result;
    bool stop = false;
    while (!stop) {
        auto sample = stream.next();
        if (!sample) break;
        auto events = detector.step(*sample);
        for (const DetectionEvent& event : events) {
            result.events.push_back(event);
            if (event.kind == EventKind::kRansomwareAlarm && !result.latency) {
                LatencyReport report;
                report.first_window_ms =
                    static_cast<double>(cfg.w) * cfg.interval_ms;
                report.windows_until_suspect = event.window_index;
                report.interval_ms = static_cast<double>(cfg.interval_ms);
                report.stage1_test_ms = event.stage1_ms;
                report.fft_ms = event.fft_ms;
                report.stage2_test_ms = event.stage2_ms;
                result.latency = report;
                if (cfg.stop_on_alarm) stop = true;
            }
        }
    }
    result.windows_scored = detector.windows_scored();
    result.suspects = detector.suspects();
    result.alarms = detector.alarms();
    result.dropped_samples = stream.dropped();
    return result;
}

OfflineResult offline_pipeline(const TraceSeries& benign_series, const OfflineConfig& cfg) {
    std::vector<Window> all = sliding_windows(benign_series, cfg.w, 1);

    std::vector<Window> train_raw;
    train_raw.reserve(all.size());
    for (Window& w : all)
        if (!w.spans_gap) train_raw.push_back(std::move(w));
    if (train_raw.size() < 2)
        throw DetectorError("offline_pipeline: insufficient gap-free training windows");

    std::size_t calib_start = 0;
    if (cfg.calibration_holdout_fraction > 0.0) {
        const auto holdout = static_cast<std::size_t>(
            cfg.calibration_holdout_fraction * static_cast<double>(train_raw.size()));
        if (train_raw.size() - holdout < 2 || holdout < 2)
            throw DetectorError("offline_pipeline: calibration holdout leaves too few windows");
        calib_start = train_raw.size() - holdout;
    }
    const std::size_t fit_end = calib_start ? calib_start : train_raw.size();
    const std::vector<Window> fit_raw(train_raw.begin(),
                                      train_raw.begin() + static_cast<long>(fit_end));
    const std::vector<Window> calibration(train_raw.begin() + static_cast<long>(calib_start),
                                          train_raw.end());

    OfflineResult result;

    // stage 1: time domain
    const NormStats stats1 = fit_normalizer(fit_raw);
    std::vector<Window> normed;
    normed.reserve(fit_raw.size());
    for (const Window& w : fit_raw) normed.push_back(normalize(w, stats1));
    auto [model1, history1] = train(normed, cfg.stage1_train);
    model1.bind_norm_stats(stats1);
    result.stage1 = std::move(model1);
    result.stage1_loss_history = std::move(history1);

    std::vector<double> errors1;
    errors1.reserve(calibration.size());
    const NormStats bound1 = result.stage1.norm_stats();
    for (const Window& w : calibration)
        errors1.push_back(score_stage1(result.stage1, bound1, w));
    result.stage1_distribution = make_error_distribution(std::move(errors1));
    result.stage1_threshold =
        threshold(result.stage1_distribution, ThresholdStage::kTimeDomain);

    // stage 2: frequency domain
    const SpectrumNormStats stats2 = fit_spectrum_stats(fit_raw);
    std::vector<Window> spec_inputs;
    spec_inputs.reserve(fit_raw.size());
    for (const Window& w : fit_raw) spec_inputs.push_back(spectrum_input(w, stats2));
    auto [model2, history2] = train(spec_inputs, cfg.stage2_train);
    model2.norm_mean = stats2.mean;
    model2.norm_scale = stats2.scale;
    result.stage2 = std::move(model2);
    result.stage2_loss_history = std::move(history2);

    std::vector<double> errors2;
    errors2.reserve(calibration.size());
    for (const Window& w : calibration)
        errors2.push_back(score_stage2(result.stage2, stats2, w));
    result.stage2_distribution = make_error_distribution(std::move(errors2));
    result.stage2_threshold =
        threshold(result.stage2_distribution, ThresholdStage::kFrequencyDomain);

    return result;
}

void write_event(std::ostream& out, const DetectionEvent& event) {
    nlohmann::json j{
        {"v", 1},
        {"kind", to_string(event.kind)},
        {"window_index", event.window_index},
        {"t_ms", event.t_ms},
        {"stage1_error", event.stage1_error},
        {"stage1_ms", event.stage1_ms},
    };
    if (event.stage2_error) {
        j["stage2_error"] = *event.stage2_error;
        j["fft_ms"] = event.fft_ms;
        j["stage2_ms"] = event.stage2_ms;
    }
    out << j.dump() << '\n';
}

std::vector<DetectionEvent> read_event_log(std::istream& in) {
    std::vector<DetectionEvent> events;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DetectorError("malformed event log at line " + std::to_string(row) + ": " +
                                e.what());
        }
        DetectionEvent event;
        const std::string kind = j.at("kind");
        if (kind == "WindowScored") event.kind = EventKind::kWindowScored;
        else if (kind == "Suspect") event.kind = EventKind::kSuspect;
        else if (kind == "RansomwareAlarm") event.kind = EventKind::kRansomwareAlarm;
        else if (kind == "Cleared") event.kind = EventKind::kCleared;
        else if (kind == "GapWarning") event.kind = EventKind::kGapWarning;
        else throw DetectorError("unknown event kind in log: " + kind);
        event.window_index = j.at("window_index").get<std::size_t>();
        event.t_ms = j.at("t_ms").get<std::int64_t>();
        event.stage1_error = j.at("stage1_error").get<double>();
        event.stage1_ms = j.value("stage1_ms", 0.0);
        if (j.contains("stage2_error")) {
            event.stage2_error = j["stage2_error"].get<double>();
            event.fft_ms = j.value("fft_ms", 0.0);
            event.stage2_ms = j.value("stage2_ms", 0.0);
        }
        events.push_back(event);
    }
    return events;
}

void write_latency_report(std::ostream& out, const LatencyReport& report) {
    nlohmann::json j{
        {"v", 1},
        {"first_window_ms", report.first_window_ms},
        {"windows_until_suspect", report.windows_until_suspect},
        {"interval_ms", report.interval_ms},
        {"stage1_test_ms", report.stage1_test_ms},
        {"fft_ms", report.fft_ms},
        {"stage2_test_ms", report.stage2_test_ms},
        {"total_ms", report.total_ms()},
    };
    out << j.dump(2) << '\n';
}

}  // namespace rapper
