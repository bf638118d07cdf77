#include "rapper/queue.hpp"
#include "rapper/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

#if defined(__linux__)
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

namespace rapper {

#if defined(__linux__)

namespace {

constexpr std::size_t kQueueCapacity = 64;

constexpr std::uint64_t kEventIds[kEventCount] = {
    PERF_COUNT_HW_INSTRUCTIONS,     PERF_COUNT_HW_CACHE_REFERENCES,
    PERF_COUNT_HW_CACHE_MISSES,     PERF_COUNT_HW_BRANCH_INSTRUCTIONS,
    PERF_COUNT_HW_BRANCH_MISSES,
};

long perf_event_open(perf_event_attr* attr, pid_t pid, int cpu, int group_fd,
                     unsigned long flags) {
    return syscall(SYS_perf_event_open, attr, pid, cpu, group_fd, flags);
}

// Cadence-driven producer delivering per-interval deltas into a bounded
// queue; overflow increments the drop counter instead of blocking.
class PerfStream final : public SampleStream {
  public:
    explicit PerfStream(const SourceConfig& cfg)
        : interval_ms_(cfg.interval_ms), queue_(kQueueCapacity) {
        const pid_t pid = cfg.cpu_wide ? -1 : 0;
        const int cpu = cfg.cpu_wide ? 0 : -1;
        for (int e = 0; e < kEventCount; ++e) {
            perf_event_attr attr{};
            attr.type = PERF_TYPE_HARDWARE;
            attr.size = sizeof(attr);
            attr.config = kEventIds[e];
            attr.disabled = 1;
            attr.exclude_kernel = cfg.cpu_wide ? 0 : 1;
            attr.exclude_hv = 1;
            const long fd = perf_event_open(&attr, pid, cpu, -1, 0);
            if (fd < 0) {
                const int err = errno;
                close_fds();
                throw SamplerError(std::string("perf_event_open failed for ") +
                                   kEventNames[e] + ": " + std::strerror(err) +
                                   " (hardware counters unavailable at this privilege level)");
            }
            fds_[e] = static_cast<int>(fd);
        }
        for (int fd : fds_) ioctl(fd, PERF_EVENT_IOC_RESET, 0);
        for (int fd : fds_) ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
        producer_ = std::thread([this] { run(); });
    }

    ~PerfStream() override {
        stop_.store(true);
        queue_.close();
        if (producer_.joinable()) producer_.join();
        close_fds();
    }

    std::optional<Sample> next() override { return queue_.pop(); }
    int interval_ms() const override { return interval_ms_; }
    std::size_t dropped() const override { return dropped_.load(); }

  private:
    void run() {
        using clock = std::chrono::steady_clock;
        std::uint64_t prev[kEventCount] = {};
        for (int e = 0; e < kEventCount; ++e) prev[e] = read_counter(fds_[e]);
        const auto start = clock::now();
        auto deadline = start;
        while (!stop_.load()) {
            deadline += std::chrono::milliseconds(interval_ms_);
            std::this_thread::sleep_until(deadline);
            Sample s;
            s.t_ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start)
                         .count();
            for (int e = 0; e < kEventCount; ++e) {
                const std::uint64_t now = read_counter(fds_[e]);
                s.counts[e] = static_cast<std::int64_t>(now - prev[e]);
                prev[e] = now;
            }
            if (!queue_.try_push(s)) dropped_.fetch_add(1);
        }
    }

    static std::uint64_t read_counter(int fd) {
        std::uint64_t value = 0;
        if (read(fd, &value, sizeof(value)) != sizeof(value)) return 0;
        return value;
    }

    void close_fds() {
        for (int& fd : fds_)
            if (fd >= 0) {
                close(fd);
                fd = -1;
            }
    }

    int interval_ms_;
    int fds_[kEventCount] = {-1, -1, -1, -1, -1};
    BoundedQueue<Sample> queue_;
    std::atomic<bool> stop_{false};
    std::atomic<std::size_t> dropped_{0};
    std::thread producer_;
};

}  // namespace

std::unique_ptr<SampleStream> open_os_counters(const SourceConfig& cfg) {
    if (cfg.interval_ms <= 0) throw SamplerError("interval_ms must be positive");
    return std::make_unique<PerfStream>(cfg);
}

#else

std::unique_ptr<SampleStream> open_os_counters(const SourceConfig&) {
    throw SamplerError("os_counters source is only available on Linux");
}

#endif

}  // namespace rapper
