#pragma once

#include "rapper/trace.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rapper {

struct NnError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum Gate { kGateIn = 0, kGateForget = 1, kGateOut = 2, kGateCand = 3, kGateCount = 4 };

// One LSTM layer: per-gate input weights, recurrent weights, biases.
struct LstmLayerParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Eigen::MatrixXd w[kGateCount];  // hidden_dim x input_dim
    Eigen::MatrixXd u[kGateCount];  // hidden_dim x hidden_dim
    Eigen::VectorXd b[kGateCount];  // hidden_dim

    static LstmLayerParams zeros(int input_dim, int hidden_dim);
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    int hidden_dim = 32;
    double learning_rate = 1e-3;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;
    int patience = 10;              // early stop on held-out loss
    double holdout_fraction = 0.1;  // 0 disables the held-out split
};

// Encoder-decoder LSTM pair. The decoder consumes the encoder hidden-state
// sequence step by step and its hidden states are the reconstruction.
struct AutoencoderModel {
    LstmLayerParams encoder;  // E -> H
    LstmLayerParams decoder;  // H -> E
    double dropout_rate = 0.2;

    // Input scaling bound at training time: 1 x E for per-event time-domain
    // stats, W x E for per-bin spectrum stats. Empty until bound.
    Eigen::MatrixXd norm_mean;
    Eigen::MatrixXd norm_scale;

    std::vector<std::pair<std::string, std::string>> hyper_record;

    int input_dim() const { return encoder.input_dim; }
    int latent_dim() const { return encoder.hidden_dim; }

    NormStats norm_stats() const;
    void bind_norm_stats(const NormStats& stats);
};

// Encoder hidden state per time step; the learned sequence representation.
struct LatentSequence {
    Eigen::MatrixXd states;  // W x H
};

enum class ForwardMode { kTrain, kInfer };

std::pair<Window, LatentSequence> forward(const AutoencoderModel& model, const Window& x,
                                          ForwardMode mode = ForwardMode::kInfer,
                                          std::uint64_t seed = 0);

// Mean of squared entrywise differences over all W x E entries.
double reconstruction_error(const Window& x, const Window& xhat);

// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             std::mt19937_64& rng);

AutoencoderModel init_model(int input_dim, int hidden_dim, std::uint64_t seed,
                            double dropout_rate = 0.2);

std::pair<AutoencoderModel, std::vector<double>> train(const std::vector<Window>& windows,
                                                       const TrainConfig& cfg);

// Continues training from an already-initialized model (same contract as train).
std::pair<AutoencoderModel, std::vector<double>> train_with_model(
    const std::vector<Window>& windows, const TrainConfig& cfg, AutoencoderModel model);

// Max relative discrepancy between BPTT gradients and central finite
// differences over every parameter entry. Small models only.
double grad_check(const AutoencoderModel& model, const Window& x, double epsilon = 1e-5);

// Same comparison but with the analytic gradient entry of largest magnitude
// corrupted by the given factor before comparison; exercises the check itself.
double grad_check_corrupted(const AutoencoderModel& model, const Window& x, double epsilon,
                            double corruption);

void save_model(const AutoencoderModel& model, std::ostream& out);
void save_model_file(const AutoencoderModel& model, const std::string& path);
AutoencoderModel load_model(std::istream& in);
AutoencoderModel load_model_file(const std::string& path);

}  // namespace rapper
