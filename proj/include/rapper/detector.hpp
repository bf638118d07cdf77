#pragma once

#include "rapper/calibrate.hpp"
#include "rapper/fft.hpp"
#include "rapper/nn.hpp"
#include "rapper/sampler.hpp"

#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rapper {

struct DetectorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DetectorConfig {
    int w = kDefaultWindowLength;
    int interval_ms = kDefaultIntervalMs;
    AutoencoderModel stage1;  // time-domain model, per-event stats (1 x E)
    AutoencoderModel stage2;  // spectrum model, per-bin stats (W x E)
    Threshold stage1_threshold;  // time_domain
    Threshold stage2_threshold;  // frequency_domain
    int confirm_k = 1;           // consecutive stage-2 exceedances per alarm
    bool stop_on_alarm = true;
};

enum class EventKind { kWindowScored, kSuspect, kRansomwareAlarm, kCleared, kGapWarning };

std::string to_string(EventKind kind);

struct DetectionEvent {
    EventKind kind = EventKind::kWindowScored;
    std::size_t window_index = 0;  // 1-based; first full window is 1
    std::int64_t t_ms = 0;
    double stage1_error = 0.0;
    std::optional<double> stage2_error;  // Suspect / Alarm / Cleared only
    double stage1_ms = 0.0;              // per-stage processing durations
    double fft_ms = 0.0;
    double stage2_ms = 0.0;
};

struct LatencyReport {
    double first_window_ms = 0.0;
    std::size_t windows_until_suspect = 0;
    double interval_ms = 0.0;
    double stage1_test_ms = 0.0;
    double fft_ms = 0.0;
    double stage2_test_ms = 0.0;

    // first_window + (windows_until_suspect - 1) * interval + per-stage costs
    double total_ms() const {
        return first_window_ms +
               static_cast<double>(windows_until_suspect - 1) * interval_ms +
               stage1_test_ms + fft_ms + stage2_test_ms;
    }
};

class Detector {
  public:
    explicit Detector(DetectorConfig cfg);

    // Consumes one sample; returns the events it produced.
    std::vector<DetectionEvent> step(const Sample& sample);

    std::size_t windows_scored() const { return windows_scored_; }
    std::size_t suspects() const { return suspects_; }
    std::size_t alarms() const { return alarms_; }
    std::size_t stage2_invocations() const { return stage2_invocations_; }
    const DetectorConfig& config() const { return cfg_; }

  private:
    struct RingEntry {
        Sample sample;
        bool gap_before = false;
    };

    Window current_window() const;

    DetectorConfig cfg_;
    NormStats stage1_stats_;
    SpectrumNormStats stage2_stats_;
    std::deque<RingEntry> ring_;
    std::optional<std::int64_t> last_t_ms_;
    std::size_t windows_scored_ = 0;
    std::size_t suspects_ = 0;
    std::size_t alarms_ = 0;
    std::size_t stage2_invocations_ = 0;
    int consecutive_exceedances_ = 0;
};

struct RunResult {
    std::vector<DetectionEvent> events;
    std::optional<LatencyReport> latency;
    std::size_t windows_scored = 0;
    std::size_t suspects = 0;
    std::size_t alarms = 0;
    std::size_t dropped_samples = 0;
};

RunResult run(SampleStream& stream, const DetectorConfig& cfg);

struct OfflineConfig {
    int w = kDefaultWindowLength;
    TrainConfig stage1_train;  // hidden_dim 32
    TrainConfig stage2_train;  // hidden_dim 64
    // 0 calibrates on the training windows themselves; > 0 reserves the
    // trailing fraction of windows for calibration only.
    double calibration_holdout_fraction = 0.0;

    OfflineConfig() {
        stage1_train.hidden_dim = 32;
        stage2_train.hidden_dim = 64;
    }
};

struct OfflineResult {
    AutoencoderModel stage1;
    AutoencoderModel stage2;
    Threshold stage1_threshold;
    Threshold stage2_threshold;
    ErrorDistribution stage1_distribution;
    ErrorDistribution stage2_distribution;
    std::vector<double> stage1_loss_history;
    std::vector<double> stage2_loss_history;
};

// Offline phase: windows -> normalize -> stage-1 model + threshold, and the
// same windows -> amplitude spectra -> normalize -> stage-2 model + threshold.
OfflineResult offline_pipeline(const TraceSeries& benign_series, const OfflineConfig& cfg);

// Stage-2 input representation: scale-free spectrum shape, z-scored per bin.
Window spectrum_input(const Window& raw_window, const SpectrumNormStats& stats);

// Fits the per-bin spectrum stats over the shape spectra of raw windows.
SpectrumNormStats fit_spectrum_stats(const std::vector<Window>& raw_windows);

double score_stage1(const AutoencoderModel& model, const NormStats& stats, const Window& raw);
double score_stage2(const AutoencoderModel& model, const SpectrumNormStats& stats,
                    const Window& raw);

// JSON Lines event log and JSON latency report (schema v1).
void write_event(std::ostream& out, const DetectionEvent& event);
std::vector<DetectionEvent> read_event_log(std::istream& in);
void write_latency_report(std::ostream& out, const LatencyReport& report);

}  // namespace rapper
