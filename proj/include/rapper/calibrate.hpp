#pragma once

#include "rapper/nn.hpp"

#include <vector>

namespace rapper {

enum class ThresholdStage { kTimeDomain, kFrequencyDomain };

// Reconstruction errors of a calibration population with their population
// mean and standard deviation.
struct ErrorDistribution {
    std::vector<double> errors;
    double mean = 0.0;
    double stddev = 0.0;

    std::size_t count() const { return errors.size(); }
};

struct Threshold {
    double value = 0.0;
    ThresholdStage stage = ThresholdStage::kTimeDomain;
    double source_mean = 0.0;
    double source_stddev = 0.0;
    std::size_t source_count = 0;
};

ErrorDistribution make_error_distribution(std::vector<double> errors);

// Scores every window with the model in infer mode; needs >= 2 windows.
ErrorDistribution error_distribution(const AutoencoderModel& model,
                                     const std::vector<Window>& windows);

// Three-sigma rule: value = mean + 3 * stddev.
Threshold threshold(const ErrorDistribution& dist,
                    ThresholdStage stage = ThresholdStage::kTimeDomain);

}  // namespace rapper
