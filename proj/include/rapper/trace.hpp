#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rapper {

// The five hardware events observed per sampling interval.
constexpr int kEventCount = 5;
constexpr int kDefaultWindowLength = 100;
constexpr int kDefaultIntervalMs = 10;

extern const char* const kEventNames[kEventCount];

struct TraceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One per-interval reading of the five counter deltas.
struct Sample {
    std::int64_t t_ms = 0;
    std::int64_t counts[kEventCount] = {0, 0, 0, 0, 0};

    std::int64_t instructions() const { return counts[0]; }
    std::int64_t cache_references() const { return counts[1]; }
    std::int64_t cache_misses() const { return counts[2]; }
    std::int64_t branches() const { return counts[3]; }
    std::int64_t branch_misses() const { return counts[4]; }

    // Cross-event consistency (misses <= references) is diagnostic only;
    // counter multiplexing produces such artifacts and samples are kept.
    bool consistent() const {
        return counts[2] <= counts[1] && counts[4] <= counts[3];
    }

    bool operator==(const Sample& o) const;
};

struct TraceSeries {
    int interval_ms = kDefaultIntervalMs;
    std::vector<Sample> samples;
    std::string label = "unknown";

    // Indices i where t_ms[i] - t_ms[i-1] > 1.5 * interval_ms.
    std::vector<std::size_t> gap_indices() const;
};

// W x E block of consecutive samples, oldest row first.
struct Window {
    Eigen::MatrixXd values;       // W rows, E cols
    std::size_t start_index = 0;
    bool spans_gap = false;

    int length() const { return static_cast<int>(values.rows()); }
    int events() const { return static_cast<int>(values.cols()); }
};

// Per-event affine scaling fitted on a training population.
struct NormStats {
    Eigen::VectorXd mean;   // E
    Eigen::VectorXd scale;  // E, strictly positive

    bool operator==(const NormStats& o) const {
        return mean.size() == o.mean.size() && scale.size() == o.scale.size() &&
               (mean.array() == o.mean.array()).all() &&
               (scale.array() == o.scale.array()).all();
    }
};

TraceSeries parse_trace(std::istream& in);
TraceSeries parse_trace_file(const std::string& path);
void emit_trace(const TraceSeries& series, std::ostream& out);
void emit_trace_file(const TraceSeries& series, const std::string& path);

std::vector<Window> sliding_windows(const TraceSeries& series, int w, int stride = 1);

NormStats fit_normalizer(const std::vector<Window>& windows);
Window normalize(const Window& window, const NormStats& stats);
Window denormalize(const Window& window, const NormStats& stats);

}  // namespace rapper
