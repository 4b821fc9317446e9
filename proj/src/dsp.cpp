#include "moodpipe/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "moodpipe/checkpoint.hpp"

namespace moodpipe {

namespace {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor stft_power(const PcmSignal& signal, std::size_t n_fft, std::size_t hop,
                  Window window) {
    if (!is_pow2(n_fft)) throw std::invalid_argument("stft_power: n_fft must be a power of two");
    if (hop == 0 || hop > n_fft) throw std::invalid_argument("stft_power: require 0 < hop <= n_fft");
    if (signal.samples.size() < n_fft) throw std::invalid_argument("stft_power: signal too short");

    std::vector<double> win(n_fft, 1.0);
    if (window == Window::Hann)
        for (std::size_t i = 0; i < n_fft; ++i)
            win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n_fft));

    const std::size_t n_bins = n_fft / 2 + 1;
    const std::size_t T = (signal.samples.size() - n_fft) / hop + 1;
    Tensor out = Tensor::zeros({T, n_bins});
    std::vector<std::complex<double>> buf(n_fft);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < n_fft; ++i)
            buf[i] = signal.samples[t * hop + i] * win[i];
        fft(buf);
        for (std::size_t k = 0; k < n_bins; ++k)
            out.data[t * n_bins + k] = std::norm(buf[k]);
    }
    return out;
}

Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate,
                      double f_min, double f_max) {
    if (f_max <= 0.0) f_max = sample_rate / 2.0;
    if (n_mels < 2) throw std::invalid_argument("mel_filterbank: n_mels must be >= 2");
    if (!(0.0 <= f_min && f_min < f_max && f_max <= sample_rate / 2.0))
        throw std::invalid_argument("mel_filterbank: require 0 <= f_min < f_max <= nyquist");

    const std::size_t n_bins = n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                          static_cast<double>(n_mels + 1));

    Tensor bank = Tensor::zeros({n_mels, n_bins});
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
            double w = 0.0;
            if (f > lo && f < center)
                w = (f - lo) / (center - lo);
            else if (f >= center && f < hi)
                w = (hi - f) / (hi - center);
            bank.data[m * n_bins + k] = w;
        }
    }
    return bank;
}

LogMelSpectrogram log_mel(const PcmSignal& signal, const DspConfig& cfg) {
    const Tensor power = stft_power(signal, cfg.n_fft, cfg.hop, cfg.window);
    const Tensor bank =
        mel_filterbank(cfg.n_mels, cfg.n_fft, signal.sample_rate, cfg.f_min, cfg.f_max);
    const std::size_t T = power.rows(), B = power.cols(), M = cfg.n_mels;
    LogMelSpectrogram spec;
    spec.frames = Tensor::zeros({T, M});
    spec.frame_hop_s = static_cast<double>(cfg.hop) / signal.sample_rate;
    spec.n_mels = M;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t m = 0; m < M; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < B; ++k)
                acc += bank.data[m * B + k] * power.data[t * B + k];
            spec.frames.data[t * M + m] = std::log(std::max(acc, cfg.log_floor));
        }
    return spec;
}

void save_logmel(const std::string& path, const LogMelSpectrogram& spec) {
    save_checkpoint(path, {{"logmel", spec.frames}});
}

LogMelSpectrogram load_logmel(const std::string& path, double frame_hop_s) {
    ParamMap records = load_checkpoint(path);
    auto it = records.find("logmel");
    if (it == records.end())
        throw std::runtime_error("logmel cache: missing 'logmel' record in " + path);
    LogMelSpectrogram spec;
    spec.frames = it->second;
    spec.n_mels = spec.frames.cols();
    spec.frame_hop_s = frame_hop_s;
    return spec;
}

}  // namespace moodpipe
