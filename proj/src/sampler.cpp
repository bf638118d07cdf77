#include "rapper/sampler.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rapper {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller from explicit uniforms; bit-reproducible for a fixed seed.
double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t to_count(double value) {
    return value <= 0.0 ? 0 : static_cast<std::int64_t>(std::llround(value));
}

class SeriesStream final : public SampleStream {
  public:
    explicit SeriesStream(TraceSeries series) : series_(std::move(series)) {}

    std::optional<Sample> next() override {
        if (pos_ >= series_.samples.size()) return std::nullopt;
        return series_.samples[pos_++];
    }

    int interval_ms() const override { return series_.interval_ms; }

  private:
    TraceSeries series_;
    std::size_t pos_ = 0;
};

void check_synth(const SourceConfig& cfg) {
    if (cfg.count < 1) throw SamplerError("synthetic source needs count >= 1");
    if (cfg.interval_ms <= 0) throw SamplerError("interval_ms must be positive");
}

}  // namespace

SourceKind source_kind_from_string(const std::string& name) {
    if (name == "os_counters") return SourceKind::kOsCounters;
    if (name == "replay") return SourceKind::kReplay;
    if (name == "synth_benign") return SourceKind::kSynthBenign;
    if (name == "synth_heavy") return SourceKind::kSynthHeavy;
    if (name == "synth_ransomware") return SourceKind::kSynthRansomware;
    throw SamplerError("unknown source kind: " + name);
}

std::string to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::kOsCounters: return "os_counters";
        case SourceKind::kReplay: return "replay";
        case SourceKind::kSynthBenign: return "synth_benign";
        case SourceKind::kSynthHeavy: return "synth_heavy";
        case SourceKind::kSynthRansomware: return "synth_ransomware";
    }
    return "unknown";
}

TraceSeries synth_benign(std::uint64_t seed, std::size_t n, const GeneratorParams& params,
                         int interval_ms) {
    if (n < 1) throw SamplerError("synth_benign: n must be >= 1");
    std::mt19937_64 rng(seed);
    TraceSeries series;
    series.interval_ms = interval_ms;
    series.label = "benign";
    series.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.t_ms = static_cast<std::int64_t>(i) * interval_ms;
        for (int e = 0; e < kEventCount; ++e) {
            const double base = params.baselines[e];
            s.counts[e] = to_count(base + params.noise_level * base * gaussian(rng));
        }
        series.samples.push_back(s);
    }
    return series;
}

TraceSeries synth_heavy(std::uint64_t seed, std::size_t n, const GeneratorParams& params,
                        int interval_ms) {
    if (n < 1) throw SamplerError("synth_heavy: n must be >= 1");
    std::mt19937_64 rng(seed);
    TraceSeries series;
    series.interval_ms = interval_ms;
    series.label = "heavy";
    series.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.t_ms = static_cast<std::int64_t>(i) * interval_ms;
        for (int e = 0; e < kEventCount; ++e) {
            const double base = params.baselines[e];
            const double mean = params.heavy_mean_scale * base;
            const double sigma = params.heavy_noise_scale * params.noise_level * base;
            s.counts[e] = to_count(mean + sigma * gaussian(rng));
        }
        series.samples.push_back(s);
    }
    return series;
}

TraceSeries synth_ransomware(std::uint64_t seed, std::size_t n, const GeneratorParams& params,
                             int interval_ms) {
    if (n < 1) throw SamplerError("synth_ransomware: n must be >= 1");
    if (params.period < 2 || params.burst_len < 1 || params.burst_len >= params.period)
        throw SamplerError("synth_ransomware: need period >= 2 and 1 <= burst_len < period");
    std::mt19937_64 rng(seed);
    TraceSeries series;
    series.interval_ms = interval_ms;
    series.label = "ransomware";
    series.samples.reserve(n);
    const int io_len = std::max(2, params.burst_len / 4);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.t_ms = static_cast<std::int64_t>(i) * interval_ms;
        double burst[kEventCount] = {0, 0, 0, 0, 0};
        if (static_cast<std::int64_t>(i) >= params.delay) {
            const int phase =
                static_cast<int>((static_cast<std::int64_t>(i) - params.delay) % params.period);
            if (phase < params.burst_len) {
                // encryption phase: compute-bound
                burst[0] = params.burst_scale * params.baselines[0];
                burst[3] = params.burst_scale * params.baselines[3];
                burst[4] = 0.5 * params.burst_scale * params.baselines[4];
            } else if (phase < params.burst_len + io_len) {
                // file open/close phase: cache traffic
                burst[1] = params.burst_scale * params.baselines[1];
                burst[2] = params.burst_scale * params.baselines[2];
            }
        }
        for (int e = 0; e < kEventCount; ++e) {
            const double base = params.baselines[e];
            s.counts[e] =
                to_count(base + burst[e] + params.noise_level * base * gaussian(rng));
        }
        series.samples.push_back(s);
    }
    return series;
}

std::unique_ptr<SampleStream> replay_stream(TraceSeries series) {
    return std::make_unique<SeriesStream>(std::move(series));
}

std::unique_ptr<SampleStream> open_source(const SourceConfig& cfg) {
    switch (cfg.kind) {
        case SourceKind::kOsCounters:
            return open_os_counters(cfg);
        case SourceKind::kReplay:
            if (cfg.replay_path.empty())
                throw SamplerError("replay source needs a trace path");
            return replay_stream(parse_trace_file(cfg.replay_path));
        case SourceKind::kSynthBenign:
            check_synth(cfg);
            return replay_stream(
                synth_benign(cfg.seed, cfg.count, cfg.params, cfg.interval_ms));
        case SourceKind::kSynthHeavy:
            check_synth(cfg);
            return replay_stream(
                synth_heavy(cfg.seed, cfg.count, cfg.params, cfg.interval_ms));
        case SourceKind::kSynthRansomware:
            check_synth(cfg);
            return replay_stream(
                synth_ransomware(cfg.seed, cfg.count, cfg.params, cfg.interval_ms));
    }
    throw SamplerError("unknown source kind");
}

}  // namespace rapper
