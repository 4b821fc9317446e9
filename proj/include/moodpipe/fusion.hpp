#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moodpipe/audio_model.hpp"
#include "moodpipe/text_model.hpp"

namespace moodpipe {

// concat(text feature, audio feature); 512 + 64 = 576 at full scale
struct FusedFeature {
    Tensor features;  // 1 x (d_model + fc_units)
    Label label = Label::NotDepressed;
    int source_id = 0;
};

FusedFeature extract_features(TransformerParams& text_params, CnnParams& audio_params,
                              const std::vector<std::size_t>& tokens,
                              const Tensor& logmel, Label label, int source_id);

enum class Activation { Relu, Linear };

struct FusionConfig {
    std::size_t n_hidden_layers = 0;   // {0, 1, 2, 3}
    std::size_t hidden_units = 64;     // {32, 64, 128}
    double dropout = 0.0;              // {0, 0.1, 0.5}
    Activation activation = Activation::Relu;
    double learning_rate = 6.25e-5;    // {6.25e-3, 6.25e-4, 6.25e-5, 6.25e-6}
    int epochs = 10;                   // {1, 5, 10}
    double p = 0.01;                   // L2 regularization weight
    int batch_size = 30;
    std::size_t in_dim = 576;
    std::size_t n_classes = 2;

    std::map<std::string, std::string> as_map() const;
};

struct FusionParams {
    FusionConfig cfg;
    ParamMap weights;  // h{i}.w/b ... out.w/b, chaining in_dim -> ... -> 2

    static FusionParams init(const FusionConfig& cfg, Rng& rng);
    std::size_t param_count() const;
};

Var fusion_forward_tape(Tape& tape, const Tensor& features, FusionParams& params,
                        Mode mode, Rng& rng,
                        std::map<std::string, Var>* param_vars = nullptr);

Tensor fusion_probs(const Tensor& features, FusionParams& params);

// SUM of cross-entropies over the batch plus (p/2)·Σ‖W‖² over weight matrices
double fusion_loss(FusionParams& params, const std::vector<FusedFeature>& batch,
                   double p);

std::pair<FusionParams, EvalReport> train_fusion(
    const std::vector<FusedFeature>& features_train,
    const std::vector<FusedFeature>& features_dev, const FusionConfig& cfg,
    std::uint64_t seed);

EvalReport evaluate_fusion(FusionParams& params,
                           const std::vector<FusedFeature>& eval_set);

// the 864-combination hyperparameter grid, in enumeration order:
// hidden layers, dropout, units, activation, learning rate, epochs
std::vector<FusionConfig> full_grid(std::size_t in_dim = 576, double p = 0.01);

struct GridResult {
    FusionConfig best;
    std::size_t best_index = 0;
    std::vector<EvalReport> reports;  // one per config, enumeration order
};

// ties broken by higher precision, then lower parameter count, then first in
// enumeration order; per-config sub-seeds derived from (seed, config index)
GridResult grid_search(const std::vector<FusedFeature>& features_train,
                       const std::vector<FusedFeature>& features_dev,
                       const std::vector<FusionConfig>& grid, std::uint64_t seed);

std::string write_grid_tsv(const std::vector<FusionConfig>& grid,
                           const GridResult& result);

}  // namespace moodpipe
