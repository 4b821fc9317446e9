#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moodpipe/pipeline.hpp"

using namespace moodpipe;

namespace {

PipelineConfig desk_config() {
    PipelineConfig cfg;
    cfg.dsp.n_fft = 512;
    cfg.dsp.hop = 512;
    cfg.dsp.n_mels = 16;
    cfg.cnn.n_layers = 2;
    cfg.cnn.filters = 6;
    cfg.cnn.kernel_width = 5;
    cfg.cnn.fc_units = 8;
    cfg.cnn.dropout = 0.1;
    cfg.transformer.n_layers = 1;
    cfg.transformer.n_heads = 2;
    cfg.transformer.d_model = 16;
    cfg.transformer.max_seq_len = 96;
    cfg.transformer.dropout = 0.0;
    cfg.audio_lr = 1e-3;
    cfg.audio_epochs = 3;
    cfg.text_lr = 1e-3;
    cfg.text_epochs = 3;
    cfg.fusion.n_hidden_layers = 0;
    cfg.fusion.learning_rate = 0.01;
    cfg.fusion.epochs = 20;
    cfg.fusion.p = 1e-3;
    return cfg;
}

}  // namespace

TEST_CASE("prepare_data: splits, vocab from training only, balanced augmentation") {
    Corpus corpus = synth_corpus(11, 4, 8, 3, 4);
    PipelineConfig cfg = desk_config();
    PreparedData data = prepare_data(corpus, cfg, 5);
    CHECK(data.train.size() == 12);
    CHECK(data.dev.size() == 7);
    CHECK(data.vocab.size() > Vocab::kNumSpecials);

    int dep = 0, non = 0;
    for (const auto& a : data.augmented)
        (a.label == Label::Depressed ? dep : non) += 1;
    const double frac = static_cast<double>(dep) / (dep + non);
    CHECK(frac > 0.35);
    CHECK(frac < 0.65);
    CHECK(data.augmented.size() > data.train.size());  // originals plus new samples
}

TEST_CASE("paired_dataset: variants differ, eval sets never augmented") {
    Corpus corpus = synth_corpus(12, 3, 5, 2, 3);
    PipelineConfig cfg = desk_config();
    PreparedData data = prepare_data(corpus, cfg, 6);

    auto full = paired_dataset(data, Variant::Full, Split::Train, cfg);
    auto topic = paired_dataset(data, Variant::Topic, Split::Train, cfg);
    auto augm = paired_dataset(data, Variant::Augm, Split::Train, cfg);
    CHECK(full.size() == 8);
    CHECK(topic.size() == 8);
    CHECK(augm.size() > topic.size());
    // topic view drops non-topical audio, so it is never longer
    for (std::size_t i = 0; i < full.size(); ++i)
        CHECK(topic[i].logmel.rows() <= full[i].logmel.rows());
    for (const auto& s : full) {
        CHECK(s.tokens.front() == Vocab::kStart);
        CHECK(s.tokens.back() == Vocab::kExtract);
    }

    for (Variant v : {Variant::Full, Variant::Topic, Variant::Augm}) {
        auto dev = paired_dataset(data, v, Split::Dev, cfg);
        CHECK(dev.size() == 5);
        for (const auto& s : dev) CHECK_FALSE(s.augmented);
    }
}

TEST_CASE("run_experiment: structure, leakage audit, byte-identical rerun") {
    Corpus corpus = synth_corpus(13, 4, 6, 3, 4);
    PipelineConfig cfg = desk_config();
    Manifest m;
    m.seed = 9;
    m.runs.push_back({Modality::Audio, Variant::Augm});
    m.runs.push_back({Modality::Text, Variant::Topic});

    ReportBundle a = run_experiment(corpus, cfg, m);
    CHECK(a.reports.size() == 2);
    CHECK(a.reports[0].variant == "CNN-Augm");
    CHECK(a.reports[1].variant == "Trf-Topic");
    CHECK(a.leakage_audit.size() == 2);
    for (const auto& line : a.leakage_audit)
        CHECK(line.find(" OK") != std::string::npos);
    CHECK(a.json.find("\"modality\":\"audio\"") != std::string::npos);

    ReportBundle b = run_experiment(corpus, cfg, m);
    CHECK(a.json == b.json);
    CHECK(a.table == b.table);
}

TEST_CASE("standardize: training band means zero, statistics shared with dev") {
    Corpus corpus = synth_corpus(14, 3, 3, 2, 2);
    PipelineConfig cfg = desk_config();
    cfg.standardize = true;
    PreparedData data = prepare_data(corpus, cfg, 3);
    const std::size_t M = cfg.dsp.n_mels;
    std::vector<double> sum(M, 0.0);
    std::size_t n = 0;
    for (const auto& p : data.train) {
        for (std::size_t t = 0; t < p.full_logmel.rows(); ++t)
            for (std::size_t m = 0; m < M; ++m) sum[m] += p.full_logmel.at(t, m);
        n += p.full_logmel.rows();
    }
    for (std::size_t m = 0; m < M; ++m)
        CHECK(std::abs(sum[m] / static_cast<double>(n)) < 1e-9);
    // dev is transformed with the training statistics, not its own
    double dev_mean0 = 0.0;
    std::size_t dn = 0;
    for (const auto& p : data.dev) {
        for (std::size_t t = 0; t < p.full_logmel.rows(); ++t) dev_mean0 += p.full_logmel.at(t, 0);
        dn += p.full_logmel.rows();
    }
    CHECK(std::abs(dev_mean0 / static_cast<double>(dn)) > 1e-12);
}

TEST_CASE("run label and name parsing round trips") {
    CHECK(run_label(Modality::Fusion, Variant::Augm) == "Trf+CNN-Augm");
    CHECK(run_label(Modality::Audio, Variant::Full) == "CNN-Full");
    CHECK(modality_from_name("text") == Modality::Text);
    CHECK_FALSE(modality_from_name("bogus").has_value());
    CHECK(variant_from_name("topic") == Variant::Topic);
    CHECK_FALSE(variant_from_name("").has_value());
}
