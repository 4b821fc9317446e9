#pragma once

#include <string>
#include <vector>

namespace moodpipe {

// Mono audio, samples in [-1, 1].
struct PcmSignal {
    std::vector<double> samples;
    int sample_rate = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// PCM 16-bit mono only; other encodings are rejected.
PcmSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const PcmSignal& signal);

}  // namespace moodpipe
