// Acceptance gate: one pass/fail line per criterion, non-zero exit when any
// criterion fails. The end-to-end criteria train a full pipeline on ten
// minutes of synthetic benign traffic, so this binary runs for several
// minutes.

#include "rapper/calibrate.hpp"
#include "rapper/config.hpp"
#include "rapper/detector.hpp"
#include "rapper/fft.hpp"
#include "rapper/nn.hpp"
#include "rapper/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace rapper;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n" << std::flush;
    if (!ok) ++failures;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Window random_window(std::mt19937_64& rng, int w, int e_dim, double scale = 0.8) {
    Window win;
    win.values.resize(w, e_dim);
    for (int i = 0; i < w; ++i)
        for (int e = 0; e < e_dim; ++e) win.values(i, e) = scale * (2.0 * uniform01(rng) - 1.0);
    return win;
}

// ---------------------------------------------------------------- criterion 1

bool latency_formula() {
    LatencyReport r;
    r.first_window_ms = 1000.0;
    r.windows_until_suspect = 245;  // 244 windows after the first
    r.interval_ms = 10.0;
    r.stage1_test_ms = 1.321;
    r.fft_ms = 0.0003;
    r.stage2_test_ms = 1.699;
    return r.total_ms() == 3443.0203;
}

// ---------------------------------------------------------------- criterion 2

bool threshold_formula(const std::optional<OfflineResult>& pipeline, std::string& detail) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 500);
        std::vector<double> errors;
        errors.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) errors.push_back(uniform01(rng) * 10.0);
        ErrorDistribution d = make_error_distribution(errors);
        const double expected = d.mean + 3.0 * d.stddev;
        if (std::abs(threshold(d).value - expected) > 1e-12) {
            detail = "formula deviates at trial " + std::to_string(trial);
            return false;
        }
    }
    if (!pipeline) {
        detail = "no trained pipeline to check the Chebyshev bound on";
        return false;
    }
    for (const auto* dist : {&pipeline->stage1_distribution, &pipeline->stage2_distribution}) {
        const double cut = dist->mean + 3.0 * dist->stddev;
        std::size_t above = 0;
        for (double e : dist->errors)
            if (e > cut) ++above;
        if (9 * above > dist->count()) {
            detail = "more than 1/9 of calibration errors above threshold";
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 3

bool gradient_correctness(std::string& detail) {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int w = 2 + static_cast<int>(rng() % 4);
        const int e_dim = 1 + static_cast<int>(rng() % 3);
        const int h = 1 + static_cast<int>(rng() % 4);
        AutoencoderModel model =
            init_model(e_dim, h, 5000 + static_cast<std::uint64_t>(trial), 0.0);
        // modest input amplitude keeps the loss small, so finite-difference
        // roundoff stays far below the tolerance even for near-zero gradients
        Window x = random_window(rng, w, e_dim, 0.4);
        const double disc = grad_check(model, x, 1e-5);
        worst = std::max(worst, disc);
        if (disc >= 1e-4) {
            detail = "discrepancy " + std::to_string(disc) + " at trial " +
                     std::to_string(trial);
            return false;
        }
        const double corrupted = grad_check_corrupted(model, x, 1e-5, 0.10);
        if (corrupted <= 1e-2) {
            detail = "mutation not detected at trial " + std::to_string(trial);
            return false;
        }
    }
    std::ostringstream out;
    out << "worst discrepancy " << worst;
    detail = out.str();
    return true;
}

// ---------------------------------------------------------------- criterion 4

bool dft_correctness(std::string& detail) {
    std::mt19937_64 rng(4);

    // random channels vs the textbook transform
    for (int trial = 0; trial < 5; ++trial) {
        Window win = random_window(rng, 100, kEventCount, 900.0);
        SpectrumWindow spec = dft_magnitudes(win);
        for (int e = 0; e < kEventCount; ++e) {
            double time_energy = 0.0, freq_energy = 0.0;
            for (int k = 0; k < 100; ++k) {
                std::complex<double> acc = 0.0;
                for (int t = 0; t < 100; ++t)
                    acc += win.values(t, e) *
                           std::polar(1.0, -2.0 * std::numbers::pi * k * t / 100.0);
                if (std::abs(spec.magnitudes(k, e) - std::abs(acc) / 100.0) > 1e-9) {
                    detail = "oracle mismatch";
                    return false;
                }
                freq_energy += 100.0 * spec.magnitudes(k, e) * spec.magnitudes(k, e);
            }
            time_energy = win.values.col(e).squaredNorm();
            if (std::abs(freq_energy - time_energy) > 1e-9 * time_energy) {
                detail = "Parseval violated";
                return false;
            }
        }
    }

    // constant input: everything in the DC bin
    Window flat;
    flat.values = Eigen::MatrixXd::Constant(100, 1, 3.25);
    SpectrumWindow flat_spec = dft_magnitudes(flat);
    if (std::abs(flat_spec.magnitudes(0, 0) - 3.25) > 1e-12 ||
        flat_spec.magnitudes.col(0).tail(99).cwiseAbs().maxCoeff() > 1e-12) {
        detail = "constant identity violated";
        return false;
    }

    // unit tone: half the amplitude in bin k, half in bin W-k
    for (int tone : {1, 7, 49}) {
        Window win;
        win.values.resize(100, 1);
        for (int n = 0; n < 100; ++n)
            win.values(n, 0) = std::cos(2.0 * std::numbers::pi * tone * n / 100.0);
        SpectrumWindow spec = dft_magnitudes(win);
        if (std::abs(spec.magnitudes(tone, 0) - 0.5) > 1e-12 ||
            std::abs(spec.magnitudes(100 - tone, 0) - 0.5) > 1e-12) {
            detail = "tone identity violated";
            return false;
        }
    }

    // circular shifts leave the magnitudes unchanged
    Window base = random_window(rng, 100, kEventCount, 50.0);
    SpectrumWindow ref = dft_magnitudes(base);
    for (int shift : {1, 37, 99}) {
        Window shifted = base;
        for (int i = 0; i < 100; ++i)
            shifted.values.row(i) = base.values.row((i + shift) % 100);
        if ((dft_magnitudes(shifted).magnitudes - ref.magnitudes).cwiseAbs().maxCoeff() >
            1e-9) {
            detail = "shift invariance violated";
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- criterion 5

bool shape_fidelity(std::string& detail) {
    std::mt19937_64 rng(5);
    Window x = random_window(rng, 100, kEventCount);

    AutoencoderModel stage1 = init_model(kEventCount, 32, 1);
    auto [r1, l1] = forward(stage1, x);
    if (r1.values.rows() != 100 || r1.values.cols() != 5 || l1.states.rows() != 100 ||
        l1.states.cols() != 32) {
        detail = "stage-1 shapes wrong";
        return false;
    }

    SpectrumWindow spec = dft_magnitudes(x);
    if (spec.magnitudes.rows() != 100 || spec.magnitudes.cols() != 5) {
        detail = "spectrum shape wrong";
        return false;
    }

    AutoencoderModel stage2 = init_model(kEventCount, 64, 2);
    Window spec_in;
    spec_in.values = spec.magnitudes;
    auto [r2, l2] = forward(stage2, spec_in);
    if (r2.values.rows() != 100 || r2.values.cols() != 5 || l2.states.rows() != 100 ||
        l2.states.cols() != 64) {
        detail = "stage-2 shapes wrong";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------- criterion 6

constexpr int kWindow = 100;
constexpr std::uint64_t kTrainSeed = 101;

std::optional<OfflineResult> train_pipeline(std::string& detail) {
    try {
        const auto start = Clock::now();
        TraceSeries benign = synth_benign(kTrainSeed, 60000);
        OfflineConfig cfg;
        cfg.w = kWindow;
        cfg.stage1_train.epochs = 2;
        cfg.stage1_train.batch_size = 64;
        cfg.stage1_train.seed = 7;
        cfg.stage2_train.epochs = 1;
        cfg.stage2_train.batch_size = 64;
        cfg.stage2_train.seed = 7;
        // thresholds must generalize to unseen streams, so calibrate on
        // windows the models never trained on
        cfg.calibration_holdout_fraction = 0.2;
        OfflineResult result = offline_pipeline(benign, cfg);
        std::ostringstream out;
        out << "trained in "
            << std::chrono::duration<double>(Clock::now() - start).count() << " s";
        detail = out.str();
        return result;
    } catch (const std::exception& e) {
        detail = std::string("training failed: ") + e.what();
        return std::nullopt;
    }
}

DetectorConfig detector_config(const OfflineResult& models, bool stop_on_alarm) {
    DetectorConfig cfg;
    cfg.w = kWindow;
    cfg.stage1 = models.stage1;
    cfg.stage2 = models.stage2;
    cfg.stage1_threshold = models.stage1_threshold;
    cfg.stage2_threshold = models.stage2_threshold;
    cfg.stop_on_alarm = stop_on_alarm;
    return cfg;
}

RunResult replay_series(TraceSeries series, const DetectorConfig& cfg) {
    auto stream = replay_stream(std::move(series));
    return run(*stream, cfg);
}

bool end_to_end_separation(const std::optional<OfflineResult>& pipeline, std::string& detail) {
    if (!pipeline) {
        detail = "pipeline training failed";
        return false;
    }
    const std::uint64_t eval_seeds[] = {201, 202, 203, 204, 205};
    std::ostringstream log;

    // (a) fresh benign streams: suspects within the Chebyshev allowance
    const DetectorConfig keep_going = detector_config(*pipeline, false);
    for (std::uint64_t seed : eval_seeds) {
        RunResult r = replay_series(synth_benign(seed, 1000), keep_going);
        if (9 * r.suspects > r.windows_scored) {
            detail = "benign seed " + std::to_string(seed) + ": " +
                     std::to_string(r.suspects) + " suspects in " +
                     std::to_string(r.windows_scored) + " windows";
            return false;
        }
        log << "benign@" << seed << "=" << r.suspects << "s/" << r.alarms << "a ";
    }

    // (b) heavy load: flagged by stage 1, always cleared by stage 2. The
    // zero-alarm clause is checked over every seed and reported in aggregate:
    // heavy is an amplitude-scaled copy of benign, so its stage-2 errors follow
    // the benign calibration distribution and a mean + 3 sigma threshold is
    // crossed by roughly the top 0.1-1% of windows on any long enough stream.
    bool heavy_clean = true;
    std::size_t heavy_alarm_windows = 0, heavy_windows = 0;
    int heavy_alarm_seeds = 0;
    for (std::uint64_t seed : eval_seeds) {
        RunResult r = replay_series(synth_heavy(seed, 1000), keep_going);
        heavy_windows += r.windows_scored;
        if (r.suspects < 1) {
            detail = "heavy seed " + std::to_string(seed) + " produced no suspects";
            return false;
        }
        if (r.alarms != 0) {
            heavy_clean = false;
            heavy_alarm_windows += r.alarms;
            ++heavy_alarm_seeds;
        }
        log << "heavy@" << seed << "=" << r.suspects << "s/" << r.alarms << "a ";
    }

    // (c) immediate ransomware: alarm on the very first full window
    const DetectorConfig stop_early = detector_config(*pipeline, true);
    for (std::uint64_t seed : eval_seeds) {
        RunResult r = replay_series(synth_ransomware(seed, 300), stop_early);
        if (r.alarms != 1 || !r.latency || r.latency->windows_until_suspect != 1) {
            detail = "ransomware seed " + std::to_string(seed) + " did not alarm at window 1";
            return false;
        }
    }

    // (d) delayed ransomware: alarm within delay + w + 50 samples
    const int delay = 500;
    GeneratorParams delayed;
    delayed.delay = delay;
    for (std::uint64_t seed : eval_seeds) {
        RunResult r = replay_series(synth_ransomware(seed, 1200, delayed), stop_early);
        std::optional<std::size_t> alarm_window;
        for (const DetectionEvent& e : r.events)
            if (e.kind == EventKind::kRansomwareAlarm) {
                alarm_window = e.window_index;
                break;
            }
        // window k covers samples k-1 .. k+w-2, so the alarm sample index is
        // k + w - 1; the bound "within d + w + 50 samples" caps k at d + 51
        if (!alarm_window || *alarm_window > static_cast<std::size_t>(delay + 51)) {
            detail = "delayed ransomware seed " + std::to_string(seed) +
                     (alarm_window ? " alarmed late at window " + std::to_string(*alarm_window)
                                   : " never alarmed");
            return false;
        }
        log << "delayed@" << seed << "=w" << *alarm_window << " ";
    }

    if (!heavy_clean) {
        std::ostringstream out;
        out << "heavy zero-alarm clause: " << heavy_alarm_seeds << "/5 seeds cross the "
            << "stage-2 threshold on " << heavy_alarm_windows << "/" << heavy_windows
            << " windows; these are benign-distribution tail windows (3-5 sigma), not "
               "ransomware structure, and a 3-sigma threshold cannot yield zero false "
               "alarms over streams this long (all other clauses pass: "
            << log.str() << ")";
        detail = out.str();
        return false;
    }
    detail = log.str();
    return true;
}

// ---------------------------------------------------------------- criterion 7

bool throughput_budget(const std::optional<OfflineResult>& pipeline, std::string& detail) {
    if (!pipeline) {
        detail = "pipeline training failed";
        return false;
    }
    double budget_ms = 10.0;
    if (const char* env = std::getenv("RAPPER_ACCEPT_BUDGET_MS"))
        budget_ms = std::strtod(env, nullptr);

    TraceSeries series = synth_benign(777, 1099);
    auto windows = sliding_windows(series, kWindow, 1);
    const NormStats stats1 = pipeline->stage1.norm_stats();
    SpectrumNormStats stats2{pipeline->stage2.norm_mean, pipeline->stage2.norm_scale};

    std::vector<double> stage1_times, full_times;
    stage1_times.reserve(windows.size());
    full_times.reserve(windows.size());
    volatile double sink = 0.0;
    for (const Window& w : windows) {
        auto t0 = Clock::now();
        sink = sink + score_stage1(pipeline->stage1, stats1, w);
        auto t1 = Clock::now();
        sink = sink + score_stage2(pipeline->stage2, stats2, w);
        auto t2 = Clock::now();
        stage1_times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        full_times.push_back(std::chrono::duration<double, std::milli>(t2 - t0).count());
    }
    auto median = [](std::vector<double>& v) {
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const double stage1_median = median(stage1_times);
    const double full_median = median(full_times);
    std::ostringstream out;
    out << "stage1 median " << stage1_median << " ms, full path median " << full_median
        << " ms over " << windows.size() << " windows, budget " << budget_ms << " ms";
    detail = out.str();
    return stage1_median < budget_ms && full_median < budget_ms;
}

// ---------------------------------------------------------------- criterion 8

std::string model_bytes(const AutoencoderModel& model) {
    std::ostringstream out;
    save_model(model, out);
    return out.str();
}

std::string events_bytes(const std::vector<DetectionEvent>& events) {
    std::ostringstream out;
    for (const DetectionEvent& e : events) {
        // timings vary run to run by design; compare the decisions
        DetectionEvent stripped = e;
        stripped.stage1_ms = 0.0;
        stripped.fft_ms = 0.0;
        stripped.stage2_ms = 0.0;
        write_event(out, stripped);
    }
    return out.str();
}

bool determinism_and_persistence(std::string& detail) {
    OfflineConfig cfg;
    cfg.w = kWindow;
    cfg.stage1_train.epochs = 1;
    cfg.stage1_train.batch_size = 64;
    cfg.stage1_train.hidden_dim = 8;
    cfg.stage1_train.seed = 9;
    cfg.stage2_train.epochs = 1;
    cfg.stage2_train.batch_size = 64;
    cfg.stage2_train.hidden_dim = 8;
    cfg.stage2_train.seed = 9;

    auto run_once = [&cfg]() {
        TraceSeries benign = synth_benign(55, 2000);
        OfflineResult models = offline_pipeline(benign, cfg);
        DetectorConfig dcfg;
        dcfg.w = kWindow;
        dcfg.stage1 = models.stage1;
        dcfg.stage2 = models.stage2;
        dcfg.stage1_threshold = models.stage1_threshold;
        dcfg.stage2_threshold = models.stage2_threshold;
        dcfg.stop_on_alarm = false;
        auto stream = replay_stream(synth_ransomware(56, 600));
        RunResult result = run(*stream, dcfg);
        return std::make_pair(std::move(models), std::move(result));
    };

    auto [models_a, run_a] = run_once();
    auto [models_b, run_b] = run_once();

    if (model_bytes(models_a.stage1) != model_bytes(models_b.stage1) ||
        model_bytes(models_a.stage2) != model_bytes(models_b.stage2)) {
        detail = "rerun produced different model bytes";
        return false;
    }
    if (models_a.stage1_threshold.value != models_b.stage1_threshold.value ||
        models_a.stage2_threshold.value != models_b.stage2_threshold.value) {
        detail = "rerun produced different thresholds";
        return false;
    }
    if (events_bytes(run_a.events) != events_bytes(run_b.events)) {
        detail = "rerun produced different event logs";
        return false;
    }

    // save/load preserves every score bit for bit
    std::stringstream buffer;
    save_model(models_a.stage1, buffer);
    AutoencoderModel reloaded = load_model(buffer);
    const NormStats stats = models_a.stage1.norm_stats();
    auto windows = sliding_windows(synth_benign(57, 400), kWindow, 1);
    for (const Window& w : windows)
        if (score_stage1(models_a.stage1, stats, w) != score_stage1(reloaded, stats, w)) {
            detail = "reloaded model scores differ";
            return false;
        }
    return true;
}

}  // namespace

int main() {
    report(1, "latency total reproduces the reference 3443.0203 ms", latency_formula());

    std::string detail;
    const bool grad_ok = gradient_correctness(detail);
    report(3, "BPTT gradients match finite differences; mutations detected", grad_ok, detail);

    detail.clear();
    report(4, "DFT matches oracle, Parseval, tone identities, shift invariance",
           dft_correctness(detail), detail);

    detail.clear();
    report(5, "model and spectrum shapes match the reference architecture",
           shape_fidelity(detail), detail);

    detail.clear();
    std::optional<OfflineResult> pipeline = train_pipeline(detail);
    std::cout << "-- end-to-end pipeline: " << detail << "\n" << std::flush;

    detail.clear();
    report(2, "threshold is mean + 3 sigma; Chebyshev bound on calibration errors",
           threshold_formula(pipeline, detail), detail);

    detail.clear();
    report(6, "benign / heavy / ransomware streams separate end to end",
           end_to_end_separation(pipeline, detail), detail);

    detail.clear();
    report(7, "per-window detection fits the sampling budget", throughput_budget(pipeline, detail),
           detail);

    detail.clear();
    report(8, "fixed seeds reproduce models, thresholds, and event logs bitwise",
           determinism_and_persistence(detail), detail);

    if (failures > 0) {
        std::cout << failures << " criteria failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
