#pragma once

#include <string>

#include "moodpipe/tensor.hpp"
#include "moodpipe/wav.hpp"

namespace moodpipe {

enum class Window { Hann, Rectangular };

struct DspConfig {
    std::size_t n_fft = 1024;
    std::size_t hop = 512;
    Window window = Window::Hann;
    std::size_t n_mels = 80;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 means sample_rate / 2
    double log_floor = 1e-10;
};

struct LogMelSpectrogram {
    Tensor frames;      // T x n_mels, time-major
    double frame_hop_s = 0.0;
    std::size_t n_mels = 0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Power spectrogram: row t = |DFT(window . samples[t*hop : t*hop+n_fft])|^2
// over the n_fft/2+1 non-negative bins. T = floor((len - n_fft)/hop) + 1.
Tensor stft_power(const PcmSignal& signal, std::size_t n_fft, std::size_t hop,
                  Window window);

// Triangular filters with centers uniform on the mel scale, unnormalized,
// shape n_mels x (n_fft/2+1).
Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate,
                      double f_min, double f_max);

LogMelSpectrogram log_mel(const PcmSignal& signal, const DspConfig& cfg);

// Spectrogram cache: one checkpoint-format record named "logmel".
void save_logmel(const std::string& path, const LogMelSpectrogram& spec);
LogMelSpectrogram load_logmel(const std::string& path, double frame_hop_s = 0.0);

}  // namespace moodpipe
