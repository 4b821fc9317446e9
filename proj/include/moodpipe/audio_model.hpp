#pragma once

#include <cstdint>
#include <vector>

#include "moodpipe/adam.hpp"
#include "moodpipe/autograd.hpp"
#include "moodpipe/harness.hpp"
#include "moodpipe/rng.hpp"

namespace moodpipe {

enum class Mode { Train, Eval };

struct CnnConfig {
    std::size_t n_layers = 4;
    std::size_t filters = 64;
    std::size_t kernel_width = 75;
    std::size_t stride = 1;
    std::size_t pool_size = 2;
    double l2_lambda = 0.01;
    double dropout = 0.5;
    std::size_t fc_units = 64;
    std::size_t n_classes = 2;
    std::size_t in_channels = 80;  // mel bands
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    std::size_t min_frames() const {  // three halvings must leave >= 1 frame
        std::size_t n = 1;
        for (std::size_t i = 0; i + 1 < n_layers; ++i) n *= pool_size;
        return n;
    }
};

struct CnnParams {
    CnnConfig cfg;
    ParamMap weights;        // conv kernels/biases, bn scale/shift, fc, output
    ParamMap running_stats;  // bn running mean/var, updated in train mode

    static CnnParams init(const CnnConfig& cfg, Rng& rng);
};

struct CnnForward {
    Var logits;   // 1 x n_classes, pre-softmax
    Var feature;  // 1 x fc_units
};

// Records the full forward pass on the caller's tape. Train mode uses
// per-sample batch statistics and live dropout; eval mode is deterministic.
// When param_vars is given, parameters become trainable leaves reported there.
CnnForward cnn_forward_tape(Tape& tape, const Tensor& logmel, CnnParams& params,
                            Mode mode, Rng& rng,
                            std::map<std::string, Var>* param_vars = nullptr);

struct CnnOutput {
    Tensor logits;
    Tensor probs;
    Tensor feature;
};

CnnOutput cnn_forward(const Tensor& logmel, CnnParams& params, Mode mode);

struct AudioSample {
    Tensor logmel;
    Label label = Label::NotDepressed;
    int source_id = 0;
    bool augmented = false;
};

struct TrainOptions {
    double learning_rate = 6.25e-4;
    int batch_size = 30;
    int epochs = 1;
    std::uint64_t seed = 0;
};

std::pair<CnnParams, EvalReport> train_audio(const std::vector<AudioSample>& train_set,
                                             const std::vector<AudioSample>& dev_set,
                                             const CnnConfig& cfg,
                                             const TrainOptions& opts);

EvalReport evaluate_audio(CnnParams& params, const std::vector<AudioSample>& eval_set);

}  // namespace moodpipe
