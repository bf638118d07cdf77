#include "rapper/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rapper {

const char* const kEventNames[kEventCount] = {
    "instructions", "cache_references", "cache_misses", "branches", "branch_misses"};

namespace {

constexpr const char* kHeaderPrefix = "# rapper-trace v1 interval_ms=";
constexpr const char* kColumnHeader =
    "t_ms,instructions,cache_references,cache_misses,branches,branch_misses";

std::int64_t parse_count(std::string_view field, std::size_t row, int col) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        std::ostringstream msg;
        msg << "non-numeric field at row " << row << ", column `"
            << (col == 0 ? "t_ms" : kEventNames[col - 1]) << "`: \"" << field << '"';
        throw TraceError(msg.str());
    }
    if (col > 0 && value < 0) {
        std::ostringstream msg;
        msg << "negative count at row " << row << ", column `" << kEventNames[col - 1]
            << "`: " << value;
        throw TraceError(msg.str());
    }
    return value;
}

}  // namespace

bool Sample::operator==(const Sample& o) const {
    if (t_ms != o.t_ms) return false;
    for (int e = 0; e < kEventCount; ++e)
        if (counts[e] != o.counts[e]) return false;
    return true;
}

std::vector<std::size_t> TraceSeries::gap_indices() const {
    std::vector<std::size_t> gaps;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (2 * (samples[i].t_ms - samples[i - 1].t_ms) > 3 * interval_ms)
            gaps.push_back(i);
    }
    return gaps;
}

TraceSeries parse_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kHeaderPrefix, 0) != 0)
        throw TraceError("malformed header: expected `# rapper-trace v1 interval_ms=<int>`");
    TraceSeries series;
    {
        std::string_view rest(line);
        rest.remove_prefix(std::string_view(kHeaderPrefix).size());
        int interval = 0;
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), interval);
        if (ec != std::errc{} || ptr != rest.data() + rest.size() || interval <= 0)
            throw TraceError("malformed header: bad interval_ms `" + std::string(rest) + "`");
        series.interval_ms = interval;
    }
    if (!std::getline(in, line) || line != kColumnHeader)
        throw TraceError("malformed header: bad column header line");

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Sample s;
        std::string_view rest(line);
        for (int col = 0; col < 1 + kEventCount; ++col) {
            auto comma = rest.find(',');
            bool last = (col == kEventCount);
            if (last != (comma == std::string_view::npos)) {
                std::ostringstream msg;
                msg << "row " << row << ": expected 6 comma-separated fields";
                throw TraceError(msg.str());
            }
            std::string_view field = last ? rest : rest.substr(0, comma);
            std::int64_t v = parse_count(field, row, col);
            if (col == 0)
                s.t_ms = v;
            else
                s.counts[col - 1] = v;
            if (!last) rest.remove_prefix(comma + 1);
        }
        if (!series.samples.empty() && s.t_ms <= series.samples.back().t_ms) {
            std::ostringstream msg;
            msg << "non-monotonic timestamp at row " << row << ": " << s.t_ms
                << " after " << series.samples.back().t_ms;
            throw TraceError(msg.str());
        }
        series.samples.push_back(s);
        ++row;
    }
    return series;
}

TraceSeries parse_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceError("cannot open trace file: " + path);
    return parse_trace(in);
}

void emit_trace(const TraceSeries& series, std::ostream& out) {
    out << kHeaderPrefix << series.interval_ms << '\n' << kColumnHeader << '\n';
    for (const Sample& s : series.samples) {
        out << s.t_ms;
        for (int e = 0; e < kEventCount; ++e) out << ',' << s.counts[e];
        out << '\n';
    }
}

void emit_trace_file(const TraceSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceError("cannot open output file: " + path);
    emit_trace(series, out);
}

std::vector<Window> sliding_windows(const TraceSeries& series, int w, int stride) {
    if (w <= 0) throw TraceError("window length must be positive");
    if (stride <= 0) throw TraceError("stride must be positive");
    const std::size_t n = series.samples.size();
    if (n < static_cast<std::size_t>(w))
        throw TraceError("series shorter than window length");

    const auto gaps = series.gap_indices();
    std::vector<Window> windows;
    const std::size_t count = (n - w) / stride + 1;
    windows.reserve(count);
    std::size_t gap_cursor = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * stride;
        Window win;
        win.start_index = start;
        win.values.resize(w, kEventCount);
        for (int i = 0; i < w; ++i)
            for (int e = 0; e < kEventCount; ++e)
                win.values(i, e) = static_cast<double>(series.samples[start + i].counts[e]);
        while (gap_cursor < gaps.size() && gaps[gap_cursor] <= start) ++gap_cursor;
        for (std::size_t g = gap_cursor; g < gaps.size() && gaps[g] < start + w; ++g)
            win.spans_gap = true;
        windows.push_back(std::move(win));
    }
    return windows;
}

NormStats fit_normalizer(const std::vector<Window>& windows) {
    if (windows.empty()) throw TraceError("fit_normalizer: empty training set");
    const int e_dim = windows.front().events();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(e_dim);
    std::size_t n = 0;
    for (const Window& w : windows) {
        sum += w.values.colwise().sum().transpose();
        n += static_cast<std::size_t>(w.values.rows());
    }
    NormStats stats;
    stats.mean = sum / static_cast<double>(n);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(e_dim);
    for (const Window& w : windows) {
        Eigen::MatrixXd centered = w.values.rowwise() - stats.mean.transpose();
        sq += centered.array().square().colwise().sum().matrix().transpose();
    }
    stats.scale = (sq / static_cast<double>(n)).array().sqrt();
    constexpr double kEps = 1e-12;
    for (int e = 0; e < e_dim; ++e)
        if (stats.scale(e) < kEps) stats.scale(e) = 1.0;
    return stats;
}

Window normalize(const Window& window, const NormStats& stats) {
    Window out = window;
    out.values = (window.values.rowwise() - stats.mean.transpose()).array().rowwise() /
                 stats.scale.transpose().array();
    return out;
}

Window denormalize(const Window& window, const NormStats& stats) {
    Window out = window;
    out.values = (window.values.array().rowwise() * stats.scale.transpose().array())
                     .matrix()
                     .rowwise() +
                 stats.mean.transpose();
    return out;
}

}  // namespace rapper
