#include "moodpipe/pipeline.hpp"

#include "moodpipe/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace moodpipe {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Audio: return "audio";
        case Modality::Text: return "text";
        case Modality::Fusion: return "fusion";
    }
    return "?";
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::Topic: return "topic";
        case Variant::Augm: return "augm";
    }
    return "?";
}

std::optional<Modality> modality_from_name(const std::string& name) {
    if (name == "audio") return Modality::Audio;
    if (name == "text") return Modality::Text;
    if (name == "fusion") return Modality::Fusion;
    return std::nullopt;
}

std::optional<Variant> variant_from_name(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "topic") return Variant::Topic;
    if (name == "augm") return Variant::Augm;
    return std::nullopt;
}

std::string run_label(Modality m, Variant v) {
    std::string base;
    switch (m) {
        case Modality::Audio: base = "CNN"; break;
        case Modality::Text: base = "Trf"; break;
        case Modality::Fusion: base = "Trf+CNN"; break;
    }
    switch (v) {
        case Variant::Full: return base + "-Full";
        case Variant::Topic: return base + "-Topic";
        case Variant::Augm: return base + "-Augm";
    }
    return base;
}

std::map<std::string, std::string> PipelineConfig::as_map() const {
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    std::map<std::string, std::string> m = {
        {"dsp.n_fft", std::to_string(dsp.n_fft)},
        {"dsp.hop", std::to_string(dsp.hop)},
        {"dsp.n_mels", std::to_string(dsp.n_mels)},
        {"dsp.f_min", fmt(dsp.f_min)},
        {"dsp.f_max", fmt(dsp.f_max)},
        {"dsp.standardize", standardize ? "1" : "0"},
        {"topics.window", std::to_string(topic_window)},
        {"augment.m", std::to_string(augment_m)},
        {"augment.auto", augment_auto ? "1" : "0"},
        {"augment.n_dep", std::to_string(augment_n_dep)},
        {"augment.n_non", std::to_string(augment_n_non)},
        {"text.max_words", std::to_string(max_words)},
        {"cnn.layers", std::to_string(cnn.n_layers)},
        {"cnn.filters", std::to_string(cnn.filters)},
        {"cnn.kernel_width", std::to_string(cnn.kernel_width)},
        {"cnn.fc_units", std::to_string(cnn.fc_units)},
        {"cnn.dropout", fmt(cnn.dropout)},
        {"cnn.l2_lambda", fmt(cnn.l2_lambda)},
        {"trf.layers", std::to_string(transformer.n_layers)},
        {"trf.heads", std::to_string(transformer.n_heads)},
        {"trf.d_model", std::to_string(transformer.d_model)},
        {"trf.max_seq_len", std::to_string(transformer.max_seq_len)},
        {"trf.dropout", fmt(transformer.dropout)},
        {"train.audio_lr", fmt(audio_lr)},
        {"train.audio_epochs", std::to_string(audio_epochs)},
        {"train.text_lr", fmt(text_lr)},
        {"train.text_epochs", std::to_string(text_epochs)},
        {"train.batch", std::to_string(batch_size)},
        {"fusion.grid", fusion_grid ? "1" : "0"},
    };
    for (auto& [k, v] : fusion.as_map()) m[k] = v;
    return m;
}

namespace {

Label require_label(const ParticipantFeatures& p) {
    if (!p.label)
        throw std::runtime_error("participant " + std::to_string(p.id) +
                                 " has no label");
    return *p.label;
}

Tensor concat_time(const std::vector<Tensor>& parts) {
    std::size_t rows = 0, cols = 0;
    for (const auto& t : parts) {
        if (t.size() == 0) continue;
        rows += t.rows();
        cols = t.cols();
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::size_t r = 0;
    for (const auto& t : parts) {
        if (t.size() == 0) continue;
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + r * cols);
        r += t.rows();
    }
    return out;
}

std::vector<std::string> participant_texts(const ParticipantFeatures& p) {
    std::vector<std::string> texts;
    for (const auto& u : p.participant_utterances) texts.push_back(u.text);
    return texts;
}

}  // namespace

PreparedData prepare_data(const Corpus& corpus, const PipelineConfig& cfg,
                          std::uint64_t seed) {
    PreparedData data;
    const TopicLexicon lexicon = default_lexicon();
    for (const auto& p : corpus.participants) {
        ParticipantFeatures f =
            compute_features(p, lexicon, cfg.topic_window, cfg.dsp);
        if (p.split == Split::Train)
            data.train.push_back(std::move(f));
        else if (p.split == Split::Dev)
            data.dev.push_back(std::move(f));
    }
    if (data.train.empty()) throw std::runtime_error("prepare_data: empty training split");

    if (cfg.standardize) {
        // band statistics from the training split only
        const std::size_t M = cfg.dsp.n_mels;
        std::vector<double> sum(M, 0.0), sumsq(M, 0.0);
        std::size_t n = 0;
        for (const auto& p : data.train) {
            for (std::size_t t = 0; t < p.full_logmel.rows(); ++t)
                for (std::size_t m = 0; m < M; ++m) {
                    const double v = p.full_logmel.at(t, m);
                    sum[m] += v;
                    sumsq[m] += v * v;
                }
            n += p.full_logmel.rows();
        }
        if (n == 0) throw std::runtime_error("prepare_data: no training frames");
        std::vector<double> mean(M), inv_std(M);
        for (std::size_t m = 0; m < M; ++m) {
            mean[m] = sum[m] / static_cast<double>(n);
            const double var = sumsq[m] / static_cast<double>(n) - mean[m] * mean[m];
            inv_std[m] = 1.0 / std::sqrt(std::max(var, 1e-12));
        }
        auto apply = [&](Tensor& t) {
            for (std::size_t r = 0; r < t.rows(); ++r)
                for (std::size_t m = 0; m < M; ++m)
                    t.at(r, m) = (t.at(r, m) - mean[m]) * inv_std[m];
        };
        for (auto* group : {&data.train, &data.dev})
            for (auto& p : *group) {
                apply(p.full_logmel);
                for (auto& seg : p.segment_logmels) apply(seg);
            }
    }

    std::vector<std::string> train_texts;
    for (const auto& p : data.train)
        for (const auto& t : participant_texts(p)) train_texts.push_back(t);
    data.vocab = Vocab::build(train_texts, cfg.max_words);

    AugmentConfig acfg;
    acfg.m = cfg.augment_m;
    acfg.seed = Rng::derive(seed, 0xa46);
    if (cfg.augment_auto) {
        int orig_dep = 0, orig_non = 0, elig_dep = 0, elig_non = 0;
        for (const auto& p : data.train) {
            const bool dep = require_label(p) == Label::Depressed;
            (dep ? orig_dep : orig_non) += 1;
            if (eligible(p, cfg.augment_m)) (dep ? elig_dep : elig_non) += 1;
        }
        // per-class target: twice the majority class
        const int total = 4 * std::max(orig_dep, orig_non);
        acfg.n_per_class =
            auto_n_per_class(total, elig_dep, elig_non, orig_dep, orig_non);
    } else {
        acfg.n_per_class = {{Label::Depressed, cfg.augment_n_dep},
                            {Label::NotDepressed, cfg.augment_n_non}};
    }
    data.augmented = augment_corpus(data.train, acfg);
    return data;
}

std::vector<PairedSample> paired_dataset(const PreparedData& data, Variant variant,
                                         Split split, const PipelineConfig& cfg) {
    const std::size_t max_len = cfg.transformer.max_seq_len;
    std::vector<PairedSample> out;
    const auto& participants = split == Split::Train ? data.train : data.dev;

    auto topic_sample = [&](const ParticipantFeatures& p) {
        PairedSample s;
        s.label = require_label(p);
        s.source_id = p.id;
        s.tokens = tokenize({}, p.segments, TextVariant::Topic, data.vocab, max_len);
        s.logmel = concat_time(p.segment_logmels);
        return s;
    };

    if (variant == Variant::Full) {
        for (const auto& p : participants) {
            PairedSample s;
            s.label = require_label(p);
            s.source_id = p.id;
            s.tokens = tokenize(participant_texts(p), {}, TextVariant::Full,
                                data.vocab, max_len);
            s.logmel = p.full_logmel;
            out.push_back(std::move(s));
        }
        return out;
    }

    if (variant == Variant::Topic || split != Split::Train) {
        // evaluation sets are never augmented
        for (const auto& p : participants) out.push_back(topic_sample(p));
        return out;
    }

    for (const auto& a : data.augmented) {
        PairedSample s;
        s.label = a.label;
        s.source_id = a.source_id;
        s.augmented = !a.is_original;
        std::vector<TopicSegment> segs;
        for (const auto& [topic, text] : a.parts) {
            TopicSegment seg;
            seg.topic = topic;
            seg.text = text;
            segs.push_back(std::move(seg));
        }
        s.tokens = tokenize({}, segs, TextVariant::Topic, data.vocab, max_len);
        s.logmel = a.logmel;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AudioSample> audio_view(const std::vector<PairedSample>& samples) {
    std::vector<AudioSample> out;
    for (const auto& s : samples)
        out.push_back({s.logmel, s.label, s.source_id, s.augmented});
    return out;
}

std::vector<TextSample> text_view(const std::vector<PairedSample>& samples) {
    std::vector<TextSample> out;
    for (const auto& s : samples)
        out.push_back({s.tokens, s.label, s.source_id, s.augmented});
    return out;
}

namespace {

std::uint64_t run_salt(Modality m, Variant v) {
    return 0x90000 + 16 * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(v);
}

EvalReport finish_report(EvalReport r, const PipelineConfig& cfg, Modality m,
                         Variant v, std::uint64_t seed) {
    auto fp = cfg.as_map();
    fp["run.modality"] = modality_name(m);
    fp["run.variant"] = variant_name(v);
    r.modality = modality_name(m);
    r.variant = run_label(m, v);
    r.seed = seed;
    r.config_fingerprint = config_fingerprint(fp);
    return r;
}

}  // namespace

TrainedModels train_models(const PreparedData& data, const PipelineConfig& cfg,
                           Modality modality, Variant variant, std::uint64_t seed) {
    const auto train_set = paired_dataset(data, variant, Split::Train, cfg);
    const auto dev_set = paired_dataset(data, variant, Split::Dev, cfg);
    const std::uint64_t sub_seed = Rng::derive(seed, run_salt(modality, variant));

    CnnConfig cnn = cfg.cnn;
    cnn.in_channels = cfg.dsp.n_mels;
    TrainedModels models;

    if (modality == Modality::Audio) {
        TrainOptions opts{cfg.audio_lr, cfg.batch_size, cfg.audio_epochs, sub_seed};
        auto [params, report] =
            train_audio(audio_view(train_set), audio_view(dev_set), cnn, opts);
        models.audio = std::move(params);
        models.report = finish_report(report, cfg, modality, variant, seed);
        return models;
    }
    if (modality == Modality::Text) {
        TrainOptions opts{cfg.text_lr, cfg.batch_size, cfg.text_epochs, sub_seed};
        auto [params, report] = train_text(text_view(train_set), text_view(dev_set),
                                           cfg.transformer, data.vocab.size(), opts);
        models.text = std::move(params);
        models.report = finish_report(report, cfg, modality, variant, seed);
        return models;
    }

    // fusion: train both upstream models, freeze them, fuse their features
    const std::uint64_t audio_seed = Rng::derive(seed, run_salt(Modality::Audio, variant));
    const std::uint64_t text_seed = Rng::derive(seed, run_salt(Modality::Text, variant));
    TrainOptions aopts{cfg.audio_lr, cfg.batch_size, cfg.audio_epochs, audio_seed};
    auto [audio_params, audio_report] =
        train_audio(audio_view(train_set), {}, cnn, aopts);
    TrainOptions topts{cfg.text_lr, cfg.batch_size, cfg.text_epochs, text_seed};
    auto [text_params, text_report] = train_text(
        text_view(train_set), {}, cfg.transformer, data.vocab.size(), topts);

    auto fuse = [&](const std::vector<PairedSample>& samples) {
        std::vector<FusedFeature> out;
        for (const auto& s : samples)
            out.push_back(extract_features(text_params, audio_params, s.tokens,
                                           s.logmel, s.label, s.source_id));
        return out;
    };
    const auto ftrain = fuse(train_set);
    const auto fdev = fuse(dev_set);

    FusionConfig fcfg = cfg.fusion;
    fcfg.in_dim = cfg.transformer.d_model + cfg.cnn.fc_units;
    fcfg.batch_size = cfg.batch_size;
    models.audio = std::move(audio_params);
    models.text = std::move(text_params);
    if (cfg.fusion_grid) {
        GridResult grid = grid_search(ftrain, fdev, full_grid(fcfg.in_dim, fcfg.p),
                                      sub_seed);
        FusionConfig best = grid.best;
        best.batch_size = cfg.batch_size;
        auto [fparams, freport] =
            train_fusion(ftrain, fdev, best, Rng::derive(sub_seed, grid.best_index));
        models.fusion = std::move(fparams);
        models.report =
            finish_report(grid.reports[grid.best_index], cfg, modality, variant, seed);
        return models;
    }
    auto [fparams, freport] = train_fusion(ftrain, fdev, fcfg, sub_seed);
    models.fusion = std::move(fparams);
    models.report = finish_report(freport, cfg, modality, variant, seed);
    return models;
}

EvalReport run_single(const PreparedData& data, const PipelineConfig& cfg,
                      Modality modality, Variant variant, std::uint64_t seed) {
    return train_models(data, cfg, modality, variant, seed).report;
}

void save_models(const std::string& path, const TrainedModels& models) {
    ParamMap flat;
    if (models.audio) {
        for (const auto& [k, v] : models.audio->weights) flat["audio.w." + k] = v;
        for (const auto& [k, v] : models.audio->running_stats)
            flat["audio.rs." + k] = v;
    }
    if (models.text)
        for (const auto& [k, v] : models.text->weights) flat["text.w." + k] = v;
    if (models.fusion)
        for (const auto& [k, v] : models.fusion->weights) flat["fusion.w." + k] = v;
    save_checkpoint(path, flat);
}

void load_models(const std::string& path, TrainedModels& models,
                 const PipelineConfig& cfg, std::size_t vocab_size) {
    const ParamMap flat = load_checkpoint(path);
    CnnConfig cnn = cfg.cnn;
    cnn.in_channels = cfg.dsp.n_mels;
    FusionConfig fcfg = cfg.fusion;
    fcfg.in_dim = cfg.transformer.d_model + cfg.cnn.fc_units;
    models.audio.reset();
    models.text.reset();
    models.fusion.reset();
    for (const auto& [k, v] : flat) {
        if (k.starts_with("audio.w.")) {
            if (!models.audio) {
                models.audio.emplace();
                models.audio->cfg = cnn;
            }
            models.audio->weights[k.substr(8)] = v;
        } else if (k.starts_with("audio.rs.")) {
            if (!models.audio) {
                models.audio.emplace();
                models.audio->cfg = cnn;
            }
            models.audio->running_stats[k.substr(9)] = v;
        } else if (k.starts_with("text.w.")) {
            if (!models.text) {
                models.text.emplace();
                models.text->cfg = cfg.transformer;
                models.text->vocab_size = vocab_size;
            }
            models.text->weights[k.substr(7)] = v;
        } else if (k.starts_with("fusion.w.")) {
            if (!models.fusion) {
                models.fusion.emplace();
                models.fusion->cfg = fcfg;
            }
            models.fusion->weights[k.substr(9)] = v;
        } else {
            throw std::runtime_error("load_models: unrecognized parameter " + k);
        }
    }
}

EvalReport evaluate_models(TrainedModels& models, const PreparedData& data,
                           const PipelineConfig& cfg, Modality modality,
                           Variant variant, std::uint64_t seed) {
    const auto dev_set = paired_dataset(data, variant, Split::Dev, cfg);
    EvalReport report;
    if (modality == Modality::Audio) {
        if (!models.audio) throw std::runtime_error("evaluate_models: no audio model");
        report = evaluate_audio(*models.audio, audio_view(dev_set));
    } else if (modality == Modality::Text) {
        if (!models.text) throw std::runtime_error("evaluate_models: no text model");
        report = evaluate_text(*models.text, text_view(dev_set));
    } else {
        if (!models.audio || !models.text || !models.fusion)
            throw std::runtime_error("evaluate_models: incomplete fusion model");
        std::vector<FusedFeature> fdev;
        for (const auto& s : dev_set)
            fdev.push_back(extract_features(*models.text, *models.audio, s.tokens,
                                            s.logmel, s.label, s.source_id));
        report = evaluate_fusion(*models.fusion, fdev);
    }
    return finish_report(report, cfg, modality, variant, seed);
}

ReportBundle run_experiment(const Corpus& corpus, const PipelineConfig& cfg,
                            const Manifest& manifest) {
    PreparedData data = prepare_data(corpus, cfg, manifest.seed);
    ReportBundle bundle;
    std::ostringstream json;
    for (const auto& run : manifest.runs) {
        const auto train_set =
            paired_dataset(data, run.variant, Split::Train, cfg);
        const auto dev_set = paired_dataset(data, run.variant, Split::Dev, cfg);
        std::set<int> train_ids, eval_ids;
        for (const auto& s : train_set) train_ids.insert(s.source_id);
        std::size_t augmented_in_eval = 0, overlap = 0;
        for (const auto& s : dev_set) {
            eval_ids.insert(s.source_id);
            if (s.augmented) ++augmented_in_eval;
            if (train_ids.count(s.source_id)) ++overlap;
        }
        std::ostringstream audit;
        audit << run_label(run.modality, run.variant) << ": train_ids="
              << train_ids.size() << " eval_ids=" << eval_ids.size()
              << " overlap=" << overlap << " augmented_in_eval="
              << augmented_in_eval
              << (overlap == 0 && augmented_in_eval == 0 ? " OK" : " LEAK");
        bundle.leakage_audit.push_back(audit.str());
        if (overlap != 0 || augmented_in_eval != 0)
            throw std::runtime_error("leakage audit failed: " + audit.str());

        EvalReport r =
            run_single(data, cfg, run.modality, run.variant, manifest.seed);
        json << report_json(r) << "\n";
        bundle.reports.push_back(std::move(r));
    }
    bundle.json = json.str();
    bundle.table = report_table(bundle.reports);
    return bundle;
}

}  // namespace moodpipe
