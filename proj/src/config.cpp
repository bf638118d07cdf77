#include "rapper/config.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rapper {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const std::string v = trim(value);
    if constexpr (std::is_floating_point_v<T>) {
        char* end = nullptr;
        out = static_cast<T>(std::strtod(v.c_str(), &end));
        if (end != v.c_str() + v.size() || v.empty())
            throw ConfigError("bad numeric value for " + key + ": `" + value + "`");
    } else {
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            throw ConfigError("bad integer value for " + key + ": `" + value + "`");
    }
    return out;
}

class Resolver {
  public:
    Resolver(const KeyValueMap& file, const KeyValueMap& flags) : file_(file), flags_(flags) {}

    bool has(const std::string& key) const {
        return flags_.count(key) > 0 || file_.count(key) > 0;
    }

    std::string get(const std::string& key, const std::string& fallback) {
        std::string value = fallback;
        if (auto it = file_.find(key); it != file_.end()) value = it->second;
        if (auto it = flags_.find(key); it != flags_.end()) value = it->second;
        resolved[key] = value;
        return value;
    }

    template <class T>
    T get_num(const std::string& key, T fallback) {
        if (!has(key)) {
            resolved[key] = to_string_value(fallback);
            return fallback;
        }
        return parse_number<T>(key, get(key, ""));
    }

    KeyValueMap resolved;

  private:
    template <class T>
    static std::string to_string_value(T v) {
        std::ostringstream out;
        out << v;
        return out.str();
    }

    const KeyValueMap& file_;
    const KeyValueMap& flags_;
};

}  // namespace

KeyValueMap parse_key_values(std::istream& in) {
    KeyValueMap values;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(row) + ": expected `key = value`");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(row) + ": empty key");
        values[key] = value;
    }
    return values;
}

KeyValueMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_key_values(in);
}

std::uint64_t global_seed_fallback() {
    if (const char* env = std::getenv("RAPPER_SEED"))
        return parse_number<std::uint64_t>("RAPPER_SEED", env);
    return 0;
}

PipelineConfig build_pipeline_config(const KeyValueMap& file_values,
                                     const KeyValueMap& flag_overrides) {
    Resolver r(file_values, flag_overrides);
    PipelineConfig cfg;

    cfg.source.kind = source_kind_from_string(r.get("source", "synth_benign"));
    cfg.source.interval_ms = r.get_num<int>("interval_ms", kDefaultIntervalMs);
    cfg.source.seed = r.has("seed") ? r.get_num<std::uint64_t>("seed", 0)
                                    : global_seed_fallback();
    cfg.source.count = r.get_num<std::size_t>("count", 3000);
    cfg.source.replay_path = r.get("replay_path", "");
    cfg.source.cpu_wide = r.get_num<int>("cpu_wide", 1) != 0;

    GeneratorParams& p = cfg.source.params;
    p.noise_level = r.get_num<double>("noise_level", p.noise_level);
    p.heavy_mean_scale = r.get_num<double>("heavy_mean_scale", p.heavy_mean_scale);
    p.heavy_noise_scale = r.get_num<double>("heavy_noise_scale", p.heavy_noise_scale);
    p.period = r.get_num<int>("period", p.period);
    p.burst_len = r.get_num<int>("burst_len", p.burst_len);
    p.burst_scale = r.get_num<double>("burst_scale", p.burst_scale);
    p.delay = r.get_num<int>("delay", p.delay);
    for (int e = 0; e < kEventCount; ++e)
        p.baselines[e] = r.get_num<double>(std::string("baseline.") + kEventNames[e],
                                           p.baselines[e]);

    cfg.w = r.get_num<int>("w", kDefaultWindowLength);
    cfg.confirm_k = r.get_num<int>("confirm_k", 1);
    cfg.stop_on_alarm = r.get_num<int>("stop_on_alarm", 1) != 0;

    cfg.offline.w = cfg.w;
    cfg.offline.calibration_holdout_fraction =
        r.get_num<double>("calibration_holdout", 0.0);
    auto fill_train = [&](const std::string& prefix, TrainConfig& t) {
        t.epochs = r.get_num<int>(prefix + ".epochs", t.epochs);
        t.batch_size = r.get_num<int>(prefix + ".batch_size", t.batch_size);
        t.hidden_dim = r.get_num<int>(prefix + ".hidden_dim", t.hidden_dim);
        t.learning_rate = r.get_num<double>(prefix + ".learning_rate", t.learning_rate);
        t.dropout_rate = r.get_num<double>(prefix + ".dropout", t.dropout_rate);
        t.patience = r.get_num<int>(prefix + ".patience", t.patience);
        t.seed = cfg.source.seed;
    };
    fill_train("stage1", cfg.offline.stage1_train);
    fill_train("stage2", cfg.offline.stage2_train);

    cfg.stage1_model_path = r.get("stage1_model", cfg.stage1_model_path);
    cfg.stage2_model_path = r.get("stage2_model", cfg.stage2_model_path);
    cfg.thresholds_path = r.get("thresholds", cfg.thresholds_path);

    cfg.resolved = std::move(r.resolved);
    return cfg;
}

namespace {

nlohmann::json threshold_to_json(const Threshold& t) {
    return {
        {"value", t.value},
        {"stage",
         t.stage == ThresholdStage::kTimeDomain ? "time_domain" : "frequency_domain"},
        {"mean", t.source_mean},
        {"stddev", t.source_stddev},
        {"count", t.source_count},
    };
}

Threshold threshold_from_json(const nlohmann::json& j) {
    Threshold t;
    t.value = j.at("value").get<double>();
    t.stage = j.at("stage").get<std::string>() == "frequency_domain"
                  ? ThresholdStage::kFrequencyDomain
                  : ThresholdStage::kTimeDomain;
    t.source_mean = j.at("mean").get<double>();
    t.source_stddev = j.at("stddev").get<double>();
    t.source_count = j.at("count").get<std::size_t>();
    return t;
}

}  // namespace

void write_thresholds_file(const std::string& path, const Threshold& stage1,
                           const Threshold& stage2) {
    nlohmann::json j{
        {"v", 1},
        {"stage1", threshold_to_json(stage1)},
        {"stage2", threshold_to_json(stage2)},
    };
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write thresholds file: " + path);
    out << j.dump(2) << '\n';
}

std::pair<Threshold, Threshold> read_thresholds_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open thresholds file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed thresholds file " + path + ": " + e.what());
    }
    auto stage1 = threshold_from_json(j.at("stage1"));
    auto stage2 = threshold_from_json(j.at("stage2"));
    if (stage1.stage != ThresholdStage::kTimeDomain ||
        stage2.stage != ThresholdStage::kFrequencyDomain)
        throw ConfigError("thresholds file has mismatched stage tags: " + path);
    return {stage1, stage2};
}

}  // namespace rapper
