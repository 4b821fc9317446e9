#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moodpipe/augment.hpp"
#include "moodpipe/fusion.hpp"

namespace moodpipe {

enum class Modality { Audio, Text, Fusion };
enum class Variant { Full, Topic, Augm };

const char* modality_name(Modality m);
const char* variant_name(Variant v);
std::optional<Modality> modality_from_name(const std::string& name);
std::optional<Variant> variant_from_name(const std::string& name);

// Table-style run label: CNN-Augm, Trf-Full, Trf+CNN-Topic, ...
std::string run_label(Modality m, Variant v);

struct PipelineConfig {
    DspConfig dsp;
    // per-mel-band standardization with statistics from the training split
    bool standardize = false;
    std::size_t topic_window = 3;
    std::size_t augment_m = 2;
    // auto mode balances classes toward twice the majority-class count;
    // otherwise the explicit per-class counts are used
    bool augment_auto = true;
    int augment_n_dep = 0;
    int augment_n_non = 0;
    std::size_t max_words = 10000;
    CnnConfig cnn;
    TransformerConfig transformer;
    FusionConfig fusion;
    bool fusion_grid = false;  // run the full hyperparameter grid
    double audio_lr = 6.25e-4;
    int audio_epochs = 1;
    double text_lr = 6.25e-6;
    int text_epochs = 1;
    int batch_size = 30;

    std::map<std::string, std::string> as_map() const;
};

struct PreparedData {
    std::vector<ParticipantFeatures> train;
    std::vector<ParticipantFeatures> dev;
    Vocab vocab;                            // training split only
    std::vector<AugmentedSample> augmented;  // training split only
};

PreparedData prepare_data(const Corpus& corpus, const PipelineConfig& cfg,
                          std::uint64_t seed);

// one sample carrying both modality views, so fusion stays aligned
struct PairedSample {
    std::vector<std::size_t> tokens;
    Tensor logmel;
    Label label = Label::NotDepressed;
    int source_id = 0;
    bool augmented = false;
};

// Full = whole interview; Topic = concatenated topic segments; Augm = Topic
// plus augmented samples on the training split (evaluation sets are never
// augmented).
std::vector<PairedSample> paired_dataset(const PreparedData& data, Variant variant,
                                         Split split, const PipelineConfig& cfg);

std::vector<AudioSample> audio_view(const std::vector<PairedSample>& samples);
std::vector<TextSample> text_view(const std::vector<PairedSample>& samples);

struct TrainedModels {
    std::optional<CnnParams> audio;
    std::optional<TransformerParams> text;
    std::optional<FusionParams> fusion;
    EvalReport report;
};

TrainedModels train_models(const PreparedData& data, const PipelineConfig& cfg,
                           Modality modality, Variant variant, std::uint64_t seed);

EvalReport run_single(const PreparedData& data, const PipelineConfig& cfg,
                      Modality modality, Variant variant, std::uint64_t seed);

// flat checkpoint layout with audio.w. / audio.rs. / text.w. / fusion.w. prefixes
void save_models(const std::string& path, const TrainedModels& models);
void load_models(const std::string& path, TrainedModels& models,
                 const PipelineConfig& cfg, std::size_t vocab_size);

EvalReport evaluate_models(TrainedModels& models, const PreparedData& data,
                           const PipelineConfig& cfg, Modality modality,
                           Variant variant, std::uint64_t seed);

struct RunSpec {
    Modality modality = Modality::Audio;
    Variant variant = Variant::Full;
};

struct Manifest {
    std::vector<RunSpec> runs;
    std::uint64_t seed = 0;
};

struct ReportBundle {
    std::vector<EvalReport> reports;
    std::string table;                       // aligned, Table-1 columns
    std::string json;                        // one JSON object per line
    std::vector<std::string> leakage_audit;  // one line per run
};

ReportBundle run_experiment(const Corpus& corpus, const PipelineConfig& cfg,
                            const Manifest& manifest);

}  // namespace moodpipe
