#include "rapper/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace rapper {

namespace {

double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw; identical across platforms for a given seed
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd uniform_matrix(int rows, int cols, double limit, std::mt19937_64& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    return m;
}

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& a) {
    return 1.0 / (1.0 + (-a).exp());
}

// Sequence batch: T entries of dim x B.
using SeqBatch = std::vector<Eigen::MatrixXd>;

struct LayerCache {
    SeqBatch x;                      // inputs
    SeqBatch gate[kGateCount];       // post-activation gate values
    SeqBatch c;                      // cell states
    SeqBatch tanh_c;
    SeqBatch h;                      // hidden states (layer output)
};

void layer_forward(const LstmLayerParams& p, const SeqBatch& xs, LayerCache& cache) {
    const int t_len = static_cast<int>(xs.size());
    const int batch = static_cast<int>(xs.front().cols());
    const int h_dim = p.hidden_dim;

    cache.x = xs;
    cache.c.resize(t_len);
    cache.tanh_c.resize(t_len);
    cache.h.resize(t_len);
    for (int g = 0; g < kGateCount; ++g) cache.gate[g].resize(t_len);

    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(h_dim, batch);
    Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(h_dim, batch);
    for (int t = 0; t < t_len; ++t) {
        Eigen::MatrixXd pre[kGateCount];
        for (int g = 0; g < kGateCount; ++g)
            pre[g] = (p.w[g] * xs[t] + p.u[g] * h_prev).colwise() + p.b[g];
        cache.gate[kGateIn][t] = sigmoid(pre[kGateIn].array());
        cache.gate[kGateForget][t] = sigmoid(pre[kGateForget].array());
        cache.gate[kGateOut][t] = sigmoid(pre[kGateOut].array());
        cache.gate[kGateCand][t] = pre[kGateCand].array().tanh();

        cache.c[t] = cache.gate[kGateForget][t].cwiseProduct(c_prev) +
                     cache.gate[kGateIn][t].cwiseProduct(cache.gate[kGateCand][t]);
        cache.tanh_c[t] = cache.c[t].array().tanh();
        cache.h[t] = cache.gate[kGateOut][t].cwiseProduct(cache.tanh_c[t]);
        if (!cache.h[t].allFinite())
            throw NnError("non-finite LSTM activation (exploding state)");
        h_prev = cache.h[t];
        c_prev = cache.c[t];
    }
}

// dh_out[t]: gradient w.r.t. h_t arriving from outside the layer.
// Returns gradient w.r.t. the layer inputs; accumulates parameter grads.
SeqBatch layer_backward(const LstmLayerParams& p, const LayerCache& cache,
                        const SeqBatch& dh_out, LstmLayerParams& grads) {
    const int t_len = static_cast<int>(cache.x.size());
    const int batch = static_cast<int>(cache.x.front().cols());
    const int h_dim = p.hidden_dim;

    SeqBatch dx(t_len);
    Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h_dim, batch);
    Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h_dim, batch);
    for (int t = t_len - 1; t >= 0; --t) {
        const Eigen::MatrixXd& gi = cache.gate[kGateIn][t];
        const Eigen::MatrixXd& gf = cache.gate[kGateForget][t];
        const Eigen::MatrixXd& go = cache.gate[kGateOut][t];
        const Eigen::MatrixXd& gg = cache.gate[kGateCand][t];
        const Eigen::MatrixXd& tc = cache.tanh_c[t];
        const Eigen::MatrixXd c_prev =
            t > 0 ? cache.c[t - 1] : Eigen::MatrixXd::Zero(h_dim, batch);
        const Eigen::MatrixXd h_prev =
            t > 0 ? cache.h[t - 1] : Eigen::MatrixXd::Zero(h_dim, batch);

        Eigen::MatrixXd dh = dh_out[t] + dh_next;
        Eigen::MatrixXd dc =
            dc_next + (dh.array() * go.array() * (1.0 - tc.array().square())).matrix();

        Eigen::MatrixXd da[kGateCount];
        da[kGateOut] = (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
        da[kGateIn] = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
        da[kGateForget] =
            (dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
        da[kGateCand] = (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();

        dx[t] = Eigen::MatrixXd::Zero(p.input_dim, batch);
        dh_next.setZero();
        for (int g = 0; g < kGateCount; ++g) {
            grads.w[g].noalias() += da[g] * cache.x[t].transpose();
            grads.u[g].noalias() += da[g] * h_prev.transpose();
            grads.b[g] += da[g].rowwise().sum();
            dx[t].noalias() += p.w[g].transpose() * da[g];
            dh_next.noalias() += p.u[g].transpose() * da[g];
        }
        dc_next = dc.cwiseProduct(gf);
    }
    return dx;
}

struct ModelCache {
    LayerCache enc;
    LayerCache dec;
    SeqBatch dropout_mask;  // empty in infer mode
};

// xs: T entries of E x B. Reconstruction is the decoder hidden sequence.
SeqBatch model_forward(const AutoencoderModel& model, const SeqBatch& xs, ForwardMode mode,
                       std::mt19937_64* rng, ModelCache& cache) {
    layer_forward(model.encoder, xs, cache.enc);
    SeqBatch dec_in = cache.enc.h;
    cache.dropout_mask.clear();
    if (mode == ForwardMode::kTrain && model.dropout_rate > 0.0) {
        cache.dropout_mask.resize(dec_in.size());
        for (std::size_t t = 0; t < dec_in.size(); ++t) {
            cache.dropout_mask[t] =
                dropout_mask(dec_in[t].rows(), dec_in[t].cols(), model.dropout_rate, *rng);
            dec_in[t] = dec_in[t].cwiseProduct(cache.dropout_mask[t]);
        }
    }
    layer_forward(model.decoder, dec_in, cache.dec);
    return cache.dec.h;
}

struct ModelGrads {
    LstmLayerParams encoder;
    LstmLayerParams decoder;
};

void model_backward(const AutoencoderModel& model, const ModelCache& cache,
                    const SeqBatch& dh_recon, ModelGrads& grads) {
    SeqBatch d_dec_in = layer_backward(model.decoder, cache.dec, dh_recon, grads.decoder);
    if (!cache.dropout_mask.empty())
        for (std::size_t t = 0; t < d_dec_in.size(); ++t)
            d_dec_in[t] = d_dec_in[t].cwiseProduct(cache.dropout_mask[t]);
    layer_backward(model.encoder, cache.enc, d_dec_in, grads.encoder);
}

SeqBatch windows_to_batch(const std::vector<Window>& windows, const std::vector<std::size_t>& idx) {
    const int t_len = windows[idx[0]].length();
    const int e_dim = windows[idx[0]].events();
    SeqBatch xs(static_cast<std::size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
        xs[static_cast<std::size_t>(t)].resize(e_dim, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t b = 0; b < idx.size(); ++b)
            xs[static_cast<std::size_t>(t)].col(static_cast<Eigen::Index>(b)) =
                windows[idx[b]].values.row(t).transpose();
    }
    return xs;
}

template <class F>
void visit_params(LstmLayerParams& p, F&& f) {
    for (int g = 0; g < kGateCount; ++g) f(p.w[g]);
    for (int g = 0; g < kGateCount; ++g) f(p.u[g]);
    for (int g = 0; g < kGateCount; ++g) f(p.b[g]);
}

template <class F>
void visit_params(AutoencoderModel& m, ModelGrads& g, F&& f) {
    int slot = 0;
    auto pair_visit = [&](LstmLayerParams& p, LstmLayerParams& pg) {
        for (int gate = 0; gate < kGateCount; ++gate) f(slot++, p.w[gate], pg.w[gate]);
        for (int gate = 0; gate < kGateCount; ++gate) f(slot++, p.u[gate], pg.u[gate]);
        for (int gate = 0; gate < kGateCount; ++gate) f(slot++, p.b[gate], pg.b[gate]);
    };
    pair_visit(m.encoder, g.encoder);
    pair_visit(m.decoder, g.decoder);
}

struct AdamState {
    std::vector<Eigen::ArrayXd> m;
    std::vector<Eigen::ArrayXd> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

double batch_loss_and_grads(AutoencoderModel& model, const std::vector<Window>& windows,
                            const std::vector<std::size_t>& idx, std::mt19937_64& rng,
                            ModelGrads& grads) {
    SeqBatch xs = windows_to_batch(windows, idx);
    ModelCache cache;
    SeqBatch recon = model_forward(model, xs, ForwardMode::kTrain, &rng, cache);
    const int t_len = static_cast<int>(xs.size());
    const int e_dim = static_cast<int>(xs.front().rows());
    const double batch = static_cast<double>(idx.size());
    const double denom = static_cast<double>(t_len) * e_dim * batch;
    double loss = 0.0;
    SeqBatch dh(static_cast<std::size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
        Eigen::MatrixXd diff = recon[static_cast<std::size_t>(t)] - xs[static_cast<std::size_t>(t)];
        loss += diff.squaredNorm();
        dh[static_cast<std::size_t>(t)] = (2.0 / denom) * diff;
    }
    loss /= denom;
    model_backward(model, cache, dh, grads);
    return loss;
}

double eval_loss(const AutoencoderModel& model, const std::vector<Window>& windows,
                 const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t i : idx) {
        auto [recon, latent] = forward(model, windows[i], ForwardMode::kInfer);
        total += reconstruction_error(windows[i], recon);
    }
    return total / static_cast<double>(idx.size());
}

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
void write_f64(std::ostream& out, double v) { write_bytes(out, &v, 8); }

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    write_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw NnError("truncated model stream");
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v;
    read_bytes(in, &v, 4);
    return v;
}

double read_f64(std::istream& in) {
    double v;
    read_bytes(in, &v, 8);
    return v;
}

Eigen::MatrixXd read_matrix(std::istream& in) {
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    if (rows > 1u << 20 || cols > 1u << 20) throw NnError("implausible matrix dimensions");
    Eigen::MatrixXd m(rows, cols);
    read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
}

constexpr char kMagic[6] = {'R', 'A', 'P', 'N', 'N', '1'};

void write_layer(std::ostream& out, const LstmLayerParams& p) {
    write_u32(out, static_cast<std::uint32_t>(p.input_dim));
    write_u32(out, static_cast<std::uint32_t>(p.hidden_dim));
    for (int g = 0; g < kGateCount; ++g) write_matrix(out, p.w[g]);
    for (int g = 0; g < kGateCount; ++g) write_matrix(out, p.u[g]);
    for (int g = 0; g < kGateCount; ++g) write_matrix(out, p.b[g]);
}

LstmLayerParams read_layer(std::istream& in) {
    LstmLayerParams p;
    p.input_dim = static_cast<int>(read_u32(in));
    p.hidden_dim = static_cast<int>(read_u32(in));
    for (int g = 0; g < kGateCount; ++g) p.w[g] = read_matrix(in);
    for (int g = 0; g < kGateCount; ++g) p.u[g] = read_matrix(in);
    for (int g = 0; g < kGateCount; ++g) p.b[g] = read_matrix(in);
    for (int g = 0; g < kGateCount; ++g) {
        if (p.w[g].rows() != p.hidden_dim || p.w[g].cols() != p.input_dim ||
            p.u[g].rows() != p.hidden_dim || p.u[g].cols() != p.hidden_dim ||
            p.b[g].rows() != p.hidden_dim || p.b[g].cols() != 1)
            throw NnError("inconsistent layer dimensions in model stream");
    }
    return p;
}

}  // namespace

LstmLayerParams LstmLayerParams::zeros(int input_dim, int hidden_dim) {
    LstmLayerParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (int g = 0; g < kGateCount; ++g) {
        p.w[g] = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
        p.u[g] = Eigen::MatrixXd::Zero(hidden_dim, hidden_dim);
        p.b[g] = Eigen::VectorXd::Zero(hidden_dim);
    }
    return p;
}

NormStats AutoencoderModel::norm_stats() const {
    if (norm_mean.rows() != 1) throw NnError("model does not carry per-event stats");
    NormStats s;
    s.mean = norm_mean.row(0).transpose();
    s.scale = norm_scale.row(0).transpose();
    return s;
}

void AutoencoderModel::bind_norm_stats(const NormStats& stats) {
    norm_mean = stats.mean.transpose();
    norm_scale = stats.scale.transpose();
}

std::pair<Window, LatentSequence> forward(const AutoencoderModel& model, const Window& x,
                                          ForwardMode mode, std::uint64_t seed) {
    if (x.events() != model.encoder.input_dim)
        throw NnError("forward: window width does not match model input dimension");
    std::vector<Window> one{x};
    std::vector<std::size_t> idx{0};
    SeqBatch xs = windows_to_batch(one, idx);
    ModelCache cache;
    std::mt19937_64 rng(seed);
    SeqBatch recon = model_forward(model, xs, mode, &rng, cache);

    Window out;
    out.start_index = x.start_index;
    out.spans_gap = x.spans_gap;
    out.values.resize(x.length(), x.events());
    LatentSequence latent;
    latent.states.resize(x.length(), model.encoder.hidden_dim);
    for (int t = 0; t < x.length(); ++t) {
        out.values.row(t) = recon[static_cast<std::size_t>(t)].col(0).transpose();
        latent.states.row(t) = cache.enc.h[static_cast<std::size_t>(t)].col(0).transpose();
    }
    return {std::move(out), std::move(latent)};
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             std::mt19937_64& rng) {
    const double keep_scale = 1.0 / (1.0 - p);
    Eigen::MatrixXd mask(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            mask(r, c) = uniform01(rng) < p ? 0.0 : keep_scale;
    return mask;
}

double reconstruction_error(const Window& x, const Window& xhat) {
    if (x.values.rows() != xhat.values.rows() || x.values.cols() != xhat.values.cols())
        throw NnError("reconstruction_error: dimension mismatch");
    return (x.values - xhat.values).squaredNorm() /
           static_cast<double>(x.values.size());
}

AutoencoderModel init_model(int input_dim, int hidden_dim, std::uint64_t seed,
                            double dropout_rate) {
    std::mt19937_64 rng(seed);
    AutoencoderModel m;
    m.dropout_rate = dropout_rate;
    auto init_layer = [&](int in_dim, int h_dim) {
        LstmLayerParams p = LstmLayerParams::zeros(in_dim, h_dim);
        const double w_lim = 1.0 / std::sqrt(static_cast<double>(in_dim));
        const double u_lim = 1.0 / std::sqrt(static_cast<double>(h_dim));
        for (int g = 0; g < kGateCount; ++g) {
            p.w[g] = uniform_matrix(h_dim, in_dim, w_lim, rng);
            p.u[g] = uniform_matrix(h_dim, h_dim, u_lim, rng);
        }
        p.b[kGateForget].setConstant(1.0);  // open forget gates at start
        return p;
    };
    m.encoder = init_layer(input_dim, hidden_dim);
    m.decoder = init_layer(hidden_dim, input_dim);
    return m;
}

std::pair<AutoencoderModel, std::vector<double>> train(const std::vector<Window>& windows,
                                                       const TrainConfig& cfg) {
    if (windows.empty()) throw NnError("train: empty window set");
    if (cfg.epochs < 1 || cfg.learning_rate <= 0.0 || cfg.dropout_rate < 0.0 ||
        cfg.dropout_rate >= 1.0 || cfg.batch_size < 1)
        throw NnError("train: invalid configuration");

    const int e_dim = windows.front().events();
    return train_with_model(windows, cfg,
                            init_model(e_dim, cfg.hidden_dim, cfg.seed, cfg.dropout_rate));
}

std::pair<AutoencoderModel, std::vector<double>> train_with_model(
    const std::vector<Window>& windows, const TrainConfig& cfg, AutoencoderModel model) {
    if (windows.empty()) throw NnError("train: empty window set");

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    // deterministic Fisher-Yates
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(order[i - 1], order[j]);
    }

    std::size_t holdout_n = 0;
    if (cfg.holdout_fraction > 0.0 && windows.size() >= 10)
        holdout_n = static_cast<std::size_t>(cfg.holdout_fraction *
                                             static_cast<double>(windows.size()));
    std::vector<std::size_t> holdout(order.begin(), order.begin() + holdout_n);
    std::vector<std::size_t> train_idx(order.begin() + holdout_n, order.end());

    ModelGrads grads;
    grads.encoder = LstmLayerParams::zeros(model.encoder.input_dim, model.encoder.hidden_dim);
    grads.decoder = LstmLayerParams::zeros(model.decoder.input_dim, model.decoder.hidden_dim);

    AdamState adam;
    visit_params(model, grads, [&](int, auto& p, auto&) {
        adam.m.push_back(Eigen::ArrayXd::Zero(p.size()));
        adam.v.push_back(Eigen::ArrayXd::Zero(p.size()));
    });

    std::vector<double> loss_history;
    double best_holdout = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i) {
            std::size_t j = rng() % i;
            std::swap(train_idx[i - 1], train_idx[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(train_idx.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> batch(train_idx.begin() + start, train_idx.begin() + end);
            visit_params(model, grads, [](int, auto&, auto& g) { g.setZero(); });
            double loss = batch_loss_and_grads(model, windows, batch, rng, grads);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << ", batch " << batches;
                throw NnError(msg.str());
            }
            epoch_loss += loss;
            ++batches;

            ++adam.step;
            const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
            const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
            visit_params(model, grads, [&](int slot, auto& p, auto& g) {
                Eigen::Map<Eigen::ArrayXd> pv(p.data(), p.size());
                Eigen::Map<const Eigen::ArrayXd> gv(g.data(), g.size());
                adam.m[slot] = adam.beta1 * adam.m[slot] + (1.0 - adam.beta1) * gv;
                adam.v[slot] = adam.beta2 * adam.v[slot] + (1.0 - adam.beta2) * gv.square();
                pv -= cfg.learning_rate * (adam.m[slot] / bc1) /
                      ((adam.v[slot] / bc2).sqrt() + adam.eps);
            });
        }
        loss_history.push_back(epoch_loss / static_cast<double>(batches));

        if (!holdout.empty()) {
            const double hl = eval_loss(model, windows, holdout);
            if (hl < best_holdout - 1e-12) {
                best_holdout = hl;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }

    model.dropout_rate = cfg.dropout_rate;
    model.hyper_record = {
        {"epochs", std::to_string(cfg.epochs)},
        {"epochs_run", std::to_string(loss_history.size())},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"learning_rate", std::to_string(cfg.learning_rate)},
        {"dropout_rate", std::to_string(cfg.dropout_rate)},
        {"seed", std::to_string(cfg.seed)},
        {"optimizer", "adam"},
    };
    return {std::move(model), std::move(loss_history)};
}

namespace {

// Analytic gradient of mean reconstruction error for a single window,
// dropout disabled.
ModelGrads analytic_grads(const AutoencoderModel& model, const Window& x) {
    std::vector<Window> one{x};
    std::vector<std::size_t> idx{0};
    SeqBatch xs = windows_to_batch(one, idx);
    ModelCache cache;
    SeqBatch recon = model_forward(model, xs, ForwardMode::kInfer, nullptr, cache);
    const double denom = static_cast<double>(x.values.size());
    SeqBatch dh(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t)
        dh[t] = (2.0 / denom) * (recon[t] - xs[t]);
    ModelGrads grads;
    grads.encoder = LstmLayerParams::zeros(model.encoder.input_dim, model.encoder.hidden_dim);
    grads.decoder = LstmLayerParams::zeros(model.decoder.input_dim, model.decoder.hidden_dim);
    model_backward(model, cache, dh, grads);
    return grads;
}

double loss_at(const AutoencoderModel& model, const Window& x) {
    auto [recon, latent] = forward(model, x, ForwardMode::kInfer);
    return reconstruction_error(x, recon);
}

double grad_check_impl(const AutoencoderModel& model, const Window& x, double epsilon,
                       double corruption) {
    ModelGrads grads = analytic_grads(model, x);
    AutoencoderModel probe = model;
    ModelGrads probe_grads = grads;

    if (corruption != 0.0) {
        // corrupt the analytic entry of largest magnitude
        double best = -1.0;
        double* target = nullptr;
        visit_params(probe, probe_grads, [&](int, auto&, auto& g) {
            for (Eigen::Index i = 0; i < g.size(); ++i)
                if (std::abs(g.data()[i]) > best) {
                    best = std::abs(g.data()[i]);
                    target = g.data() + i;
                }
        });
        if (target) *target *= 1.0 + corruption;
    }

    double worst = 0.0;
    visit_params(probe, probe_grads, [&](int, auto& p, auto& g) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + epsilon;
            const double up = loss_at(probe, x);
            p.data()[i] = saved - epsilon;
            const double down = loss_at(probe, x);
            p.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = g.data()[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, rel);
        }
    });
    return worst;
}

}  // namespace

double grad_check(const AutoencoderModel& model, const Window& x, double epsilon) {
    return grad_check_impl(model, x, epsilon, 0.0);
}

double grad_check_corrupted(const AutoencoderModel& model, const Window& x, double epsilon,
                            double corruption) {
    return grad_check_impl(model, x, epsilon, corruption);
}

void save_model(const AutoencoderModel& model, std::ostream& out) {
    write_bytes(out, kMagic, sizeof(kMagic));
    write_layer(out, model.encoder);
    write_layer(out, model.decoder);
    write_f64(out, model.dropout_rate);
    write_matrix(out, model.norm_mean);
    write_matrix(out, model.norm_scale);
    write_u32(out, static_cast<std::uint32_t>(model.hyper_record.size()));
    for (const auto& [key, value] : model.hyper_record) {
        write_u32(out, static_cast<std::uint32_t>(key.size()));
        write_bytes(out, key.data(), key.size());
        write_u32(out, static_cast<std::uint32_t>(value.size()));
        write_bytes(out, value.data(), value.size());
    }
}

void save_model_file(const AutoencoderModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NnError("cannot open model file for writing: " + path);
    save_model(model, out);
}

AutoencoderModel load_model(std::istream& in) {
    char magic[6];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw NnError("bad model magic: not a RAPNN1 stream");
    AutoencoderModel model;
    model.encoder = read_layer(in);
    model.decoder = read_layer(in);
    model.dropout_rate = read_f64(in);
    model.norm_mean = read_matrix(in);
    model.norm_scale = read_matrix(in);
    const std::uint32_t n = read_u32(in);
    if (n > 1u << 16) throw NnError("implausible hyper_record size");
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string key(read_u32(in), '\0');
        read_bytes(in, key.data(), key.size());
        std::string value(read_u32(in), '\0');
        read_bytes(in, value.data(), value.size());
        model.hyper_record.emplace_back(std::move(key), std::move(value));
    }
    return model;
}

AutoencoderModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NnError("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace rapper
