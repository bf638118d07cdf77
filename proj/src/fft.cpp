#include "rapper/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace rapper {

namespace {

// Twiddle table for one transform length, built on first use per length.
struct TwiddleTable {
    std::vector<double> cosv;
    std::vector<double> sinv;

    explicit TwiddleTable(int n) : cosv(static_cast<std::size_t>(n) * n), sinv(cosv.size()) {
        const double step = -2.0 * std::numbers::pi / n;
        for (int k = 0; k < n; ++k) {
            for (int t = 0; t < n; ++t) {
                // reduce k*t mod n first so large products do not lose phase accuracy
                const long long kt = static_cast<long long>(k) * t % n;
                const double angle = step * static_cast<double>(kt);
                cosv[static_cast<std::size_t>(k) * n + t] = std::cos(angle);
                sinv[static_cast<std::size_t>(k) * n + t] = std::sin(angle);
            }
        }
    }
};

const TwiddleTable& table_for(int n) {
    static std::unordered_map<int, TwiddleTable> tables;
    auto it = tables.find(n);
    if (it == tables.end()) it = tables.emplace(n, TwiddleTable(n)).first;
    return it->second;
}

}  // namespace

std::vector<std::complex<double>> dft_channel(const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    if (n == 0) throw std::invalid_argument("dft_channel: empty input");
    if (!x.allFinite()) throw std::invalid_argument("dft_channel: non-finite input");
    const TwiddleTable& tw = table_for(n);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        const double* cr = &tw.cosv[static_cast<std::size_t>(k) * n];
        const double* ci = &tw.sinv[static_cast<std::size_t>(k) * n];
        for (int t = 0; t < n; ++t) {
            re += x(t) * cr[t];
            im += x(t) * ci[t];
        }
        out[static_cast<std::size_t>(k)] = {re, im};
    }
    return out;
}

SpectrumWindow dft_magnitudes(const Window& window) {
    const int w = window.length();
    const int e_dim = window.events();
    if (w == 0 || e_dim == 0) throw std::invalid_argument("dft_magnitudes: empty window");
    if (!window.values.allFinite())
        throw std::invalid_argument("dft_magnitudes: non-finite input");
    SpectrumWindow spec;
    spec.start_index = window.start_index;
    spec.magnitudes.resize(w, e_dim);
    for (int e = 0; e < e_dim; ++e) {
        auto bins = dft_channel(window.values.col(e));
        for (int k = 0; k < w; ++k)
            spec.magnitudes(k, e) = std::abs(bins[static_cast<std::size_t>(k)]) / w;
    }
    return spec;
}

SpectrumWindow shape_normalize(const SpectrumWindow& spectrum, double eps) {
    SpectrumWindow out = spectrum;
    for (int e = 0; e < spectrum.events(); ++e) {
        const double denom = std::max(spectrum.magnitudes.col(e).mean(), eps);
        out.magnitudes.col(e) /= denom;
    }
    return out;
}

SpectrumNormStats spectrum_normalizer(const std::vector<SpectrumWindow>& spectra) {
    if (spectra.empty())
        throw std::invalid_argument("spectrum_normalizer: empty training set");
    const auto rows = spectra.front().magnitudes.rows();
    const auto cols = spectra.front().magnitudes.cols();
    SpectrumNormStats stats;
    stats.mean = Eigen::MatrixXd::Zero(rows, cols);
    for (const SpectrumWindow& s : spectra) stats.mean += s.magnitudes;
    stats.mean /= static_cast<double>(spectra.size());
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(rows, cols);
    for (const SpectrumWindow& s : spectra)
        sq += (s.magnitudes - stats.mean).array().square().matrix();
    stats.scale = (sq / static_cast<double>(spectra.size())).array().sqrt();
    constexpr double kEps = 1e-12;
    for (auto k = 0; k < rows; ++k)
        for (auto e = 0; e < cols; ++e)
            if (stats.scale(k, e) < kEps) stats.scale(k, e) = 1.0;
    return stats;
}

SpectrumWindow normalize_spectrum(const SpectrumWindow& spectrum, const SpectrumNormStats& stats) {
    SpectrumWindow out = spectrum;
    out.magnitudes = ((spectrum.magnitudes - stats.mean).array() / stats.scale.array()).matrix();
    return out;
}

SpectrumWindow denormalize_spectrum(const SpectrumWindow& spectrum,
                                    const SpectrumNormStats& stats) {
    SpectrumWindow out = spectrum;
    out.magnitudes = (spectrum.magnitudes.array() * stats.scale.array()).matrix() + stats.mean;
    return out;
}

}  // namespace rapper
