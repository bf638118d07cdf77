#pragma once

#include "rapper/trace.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace rapper {

struct SamplerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SourceKind { kOsCounters, kReplay, kSynthBenign, kSynthHeavy, kSynthRansomware };

SourceKind source_kind_from_string(const std::string& name);
std::string to_string(SourceKind kind);

// Knobs for the three synthetic behavioral regimes. Defaults are the
// calibrated set the acceptance suite runs under.
struct GeneratorParams {
    // per-interval baselines: instructions, cache refs, cache misses,
    // branches, branch misses
    double baselines[kEventCount] = {50000.0, 8000.0, 1200.0, 10000.0, 500.0};
    double noise_level = 0.25;  // benign sigma as a fraction of baseline

    double heavy_mean_scale = 2.0;   // heavy mean = scale * baseline
    // heavy sigma = scale * benign sigma; at 2.0 the relative noise matches
    // benign, so heavy differs in time-domain level but not in spectral shape
    double heavy_noise_scale = 2.0;

    int period = 20;           // ransomware burst cycle length, samples
    int burst_len = 8;         // encryption phase within each cycle
    double burst_scale = 6.0;  // burst amplitude as a multiple of baseline
    int delay = 0;             // benign-like prefix before bursts start
};

struct SourceConfig {
    SourceKind kind = SourceKind::kSynthBenign;
    int interval_ms = kDefaultIntervalMs;
    std::uint64_t seed = 0;
    std::size_t count = 0;  // samples to produce (synth kinds; must be >= 1)
    std::string replay_path;
    bool cpu_wide = true;  // os_counters scope: whole-cpu vs calling process
    GeneratorParams params;
};

// Pull-based sample source owned by a single consumer.
class SampleStream {
  public:
    virtual ~SampleStream() = default;
    virtual std::optional<Sample> next() = 0;
    virtual int interval_ms() const = 0;
    // Samples lost to back-pressure (os_counters only; 0 elsewhere).
    virtual std::size_t dropped() const { return 0; }
};

std::unique_ptr<SampleStream> open_source(const SourceConfig& cfg);
std::unique_ptr<SampleStream> replay_stream(TraceSeries series);

TraceSeries synth_benign(std::uint64_t seed, std::size_t n, const GeneratorParams& params = {},
                         int interval_ms = kDefaultIntervalMs);
TraceSeries synth_heavy(std::uint64_t seed, std::size_t n, const GeneratorParams& params = {},
                        int interval_ms = kDefaultIntervalMs);
TraceSeries synth_ransomware(std::uint64_t seed, std::size_t n,
                             const GeneratorParams& params = {},
                             int interval_ms = kDefaultIntervalMs);

// Linux perf_event backend; throws SamplerError when the platform or
// privilege level does not expose the five events.
std::unique_ptr<SampleStream> open_os_counters(const SourceConfig& cfg);

}  // namespace rapper
