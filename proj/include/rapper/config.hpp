#pragma once

#include "rapper/detector.hpp"
#include "rapper/sampler.hpp"

#include <map>
#include <string>

namespace rapper {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key-value config file: one `key = value` per line, `#` comments.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::istream& in);
KeyValueMap parse_config_file(const std::string& path);

struct PipelineConfig {
    SourceConfig source;
    int w = kDefaultWindowLength;
    int confirm_k = 1;
    bool stop_on_alarm = true;
    OfflineConfig offline;

    std::string stage1_model_path = "stage1.rapnn";
    std::string stage2_model_path = "stage2.rapnn";
    std::string thresholds_path = "thresholds.json";

    // every key consumed while building this config, for report headers
    KeyValueMap resolved;
};

// Applies config-file values, then flag overrides (flags win).
PipelineConfig build_pipeline_config(const KeyValueMap& file_values,
                                     const KeyValueMap& flag_overrides);

// RAPPER_SEED fallback when no seed is configured anywhere.
std::uint64_t global_seed_fallback();

void write_thresholds_file(const std::string& path, const Threshold& stage1,
                           const Threshold& stage2);
std::pair<Threshold, Threshold> read_thresholds_file(const std::string& path);

}  // namespace rapper
