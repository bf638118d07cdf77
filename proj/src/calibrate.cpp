#include "rapper/calibrate.hpp"

#include <cmath>
#include <stdexcept>

namespace rapper {

ErrorDistribution make_error_distribution(std::vector<double> errors) {
    if (errors.size() < 2)
        throw std::invalid_argument("error distribution needs at least 2 samples");
    ErrorDistribution dist;
    dist.errors = std::move(errors);
    double sum = 0.0;
    for (double e : dist.errors) sum += e;
    dist.mean = sum / static_cast<double>(dist.errors.size());
    double sq = 0.0;
    for (double e : dist.errors) sq += (e - dist.mean) * (e - dist.mean);
    // population stddev
    dist.stddev = std::sqrt(sq / static_cast<double>(dist.errors.size()));
    return dist;
}

ErrorDistribution error_distribution(const AutoencoderModel& model,
                                     const std::vector<Window>& windows) {
    if (windows.size() < 2)
        throw std::invalid_argument("error_distribution needs at least 2 windows");
    std::vector<double> errors;
    errors.reserve(windows.size());
    for (const Window& w : windows) {
        auto [recon, latent] = forward(model, w, ForwardMode::kInfer);
        errors.push_back(reconstruction_error(w, recon));
    }
    return make_error_distribution(std::move(errors));
}

Threshold threshold(const ErrorDistribution& dist, ThresholdStage stage) {
    Threshold t;
    t.value = dist.mean + 3.0 * dist.stddev;
    t.stage = stage;
    t.source_mean = dist.mean;
    t.source_stddev = dist.stddev;
    t.source_count = dist.count();
    return t;
}

}  // namespace rapper
