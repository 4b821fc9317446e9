#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "moodpipe/checkpoint.hpp"
#include "moodpipe/pipeline.hpp"

using namespace moodpipe;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw CliError("invalid integer for " + key + ": '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw CliError("invalid number for " + key + ": '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw CliError("invalid boolean for " + key + ": '" + value + "'");
}

void apply_kv(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    auto u = [&](long lo = 0) {
        const long v = to_long(key, value);
        if (v < lo) throw CliError(key + " must be >= " + std::to_string(lo));
        return static_cast<std::size_t>(v);
    };
    auto d = [&](double lo, double hi) {
        const double v = to_double(key, value);
        if (v < lo || v > hi)
            throw CliError(key + " out of range [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
        return v;
    };
    if (key == "dsp.n_fft") cfg.dsp.n_fft = u(2);
    else if (key == "dsp.hop") cfg.dsp.hop = u(1);
    else if (key == "dsp.n_mels") cfg.dsp.n_mels = u(1);
    else if (key == "dsp.f_min") cfg.dsp.f_min = d(0, 1e9);
    else if (key == "dsp.f_max") cfg.dsp.f_max = d(0, 1e9);
    else if (key == "dsp.standardize") cfg.standardize = to_bool(key, value);
    else if (key == "topics.window") cfg.topic_window = u(1);
    else if (key == "augment.m") cfg.augment_m = u(1);
    else if (key == "augment.auto") cfg.augment_auto = to_bool(key, value);
    else if (key == "augment.n_dep") cfg.augment_n_dep = static_cast<int>(u());
    else if (key == "augment.n_non") cfg.augment_n_non = static_cast<int>(u());
    else if (key == "text.max_words") cfg.max_words = u(1);
    else if (key == "cnn.layers") cfg.cnn.n_layers = u(1);
    else if (key == "cnn.filters") cfg.cnn.filters = u(1);
    else if (key == "cnn.kernel_width") cfg.cnn.kernel_width = u(1);
    else if (key == "cnn.fc_units") cfg.cnn.fc_units = u(1);
    else if (key == "cnn.dropout") cfg.cnn.dropout = d(0, 0.999);
    else if (key == "cnn.l2_lambda") cfg.cnn.l2_lambda = d(0, 1e6);
    else if (key == "trf.layers") cfg.transformer.n_layers = u(1);
    else if (key == "trf.heads") cfg.transformer.n_heads = u(1);
    else if (key == "trf.d_model") cfg.transformer.d_model = u(1);
    else if (key == "trf.max_seq_len") cfg.transformer.max_seq_len = u(2);
    else if (key == "trf.dropout") cfg.transformer.dropout = d(0, 0.999);
    else if (key == "train.audio_lr") cfg.audio_lr = d(0, 1e3);
    else if (key == "train.audio_epochs") cfg.audio_epochs = static_cast<int>(u());
    else if (key == "train.text_lr") cfg.text_lr = d(0, 1e3);
    else if (key == "train.text_epochs") cfg.text_epochs = static_cast<int>(u());
    else if (key == "train.batch") cfg.batch_size = static_cast<int>(u(1));
    else if (key == "fusion.grid") cfg.fusion_grid = to_bool(key, value);
    else if (key == "fusion.hidden_layers") cfg.fusion.n_hidden_layers = u();
    else if (key == "fusion.hidden_units") cfg.fusion.hidden_units = u(1);
    else if (key == "fusion.dropout") cfg.fusion.dropout = d(0, 0.999);
    else if (key == "fusion.activation") {
        if (value == "relu") cfg.fusion.activation = Activation::Relu;
        else if (value == "linear") cfg.fusion.activation = Activation::Linear;
        else throw CliError("fusion.activation must be relu or linear");
    } else if (key == "fusion.lr") cfg.fusion.learning_rate = d(0, 1e3);
    else if (key == "fusion.epochs") cfg.fusion.epochs = static_cast<int>(u());
    else if (key == "fusion.p") cfg.fusion.p = d(0, 1e6);
    else throw CliError("unknown configuration key '" + key + "'");
}

std::pair<std::string, std::string> split_kv(const std::string& entry) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
        throw CliError("expected key=value, got '" + entry + "'");
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    return {trim(entry.substr(0, eq)), trim(entry.substr(eq + 1))};
}

void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        try {
            auto [k, v] = split_kv(line);
            apply_kv(cfg, k, v);
        } catch (const CliError& e) {
            throw CliError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    int jobs = 1;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("MOODPIPE_SEED"))
        return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
    return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    opts.seed = default_seed();
    cmd->add_option("--config", opts.config_file,
                    "key = value configuration file (flags win)");
    cmd->add_option("--set", opts.sets, "override a configuration key (key=value)");
    cmd->add_option("--seed", opts.seed, "RNG seed (default: MOODPIPE_SEED or 0)");
    cmd->add_option("--jobs", opts.jobs, "worker cap (informational)");
}

PipelineConfig build_config(const CommonOpts& opts) {
    PipelineConfig cfg;
    if (!opts.config_file.empty()) load_config_file(cfg, opts.config_file);
    for (const auto& entry : opts.sets) {
        auto [k, v] = split_kv(entry);
        apply_kv(cfg, k, v);
    }
    return cfg;
}

void print_effective_config(const PipelineConfig& cfg, std::uint64_t seed) {
    std::cout << "# effective configuration\n";
    for (const auto& [k, v] : cfg.as_map()) std::cout << k << " = " << v << "\n";
    std::cout << "seed = " << seed << "\n";
}

void print_report(const EvalReport& r) {
    std::cout << report_table({r}) << report_json(r) << "\n";
}

void append_json(const std::string& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw CliError("cannot open " + path);
    out << line << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"moodpipe: multi-modal depression screening pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic interview corpus");
    CommonOpts synth_opts;
    add_common(synth, synth_opts);
    std::string synth_out;
    int train_dep = 8, train_non = 12, dev_dep = 5, dev_non = 8;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--train-dep", train_dep, "depressed training participants");
    synth->add_option("--train-non", train_non, "non-depressed training participants");
    synth->add_option("--dev-dep", dev_dep, "depressed dev participants");
    synth->add_option("--dev-non", dev_non, "non-depressed dev participants");

    // prep
    auto* prep = app.add_subcommand("prep", "extract log-mel spectrograms");
    CommonOpts prep_opts;
    add_common(prep, prep_opts);
    std::string prep_data, prep_out;
    prep->add_option("--data", prep_data, "corpus directory")->required();
    prep->add_option("--out", prep_out, "spectrogram output directory")->required();

    // topics
    auto* topics = app.add_subcommand("topics", "label topic segments");
    CommonOpts topics_opts;
    add_common(topics, topics_opts);
    std::string topics_data, topics_lexicon, topics_out;
    topics->add_option("--data", topics_data, "corpus directory")->required();
    topics->add_option("--lexicon", topics_lexicon, "trigger lexicon file");
    topics->add_option("--out", topics_out, "segment TSV output file");

    // augment
    auto* augment = app.add_subcommand("augment", "build augmented training samples");
    CommonOpts augment_opts;
    add_common(augment, augment_opts);
    std::string augment_data, augment_out = "augment_manifest.tsv";
    augment->add_option("--data", augment_data, "corpus directory")->required();
    augment->add_option("--out", augment_out, "manifest TSV output file");

    // train
    auto* train = app.add_subcommand("train", "train a model and report dev metrics");
    CommonOpts train_opts;
    add_common(train, train_opts);
    std::string train_data, train_modality, train_variant = "full";
    std::string model_out, json_out;
    bool train_grid = false;
    train->add_option("--data", train_data, "corpus directory")->required();
    train->add_option("--modality", train_modality, "audio, text, or fusion")
        ->required();
    train->add_option("--variant", train_variant, "full, topic, or augm");
    train->add_flag("--grid", train_grid, "fusion hyperparameter grid search");
    train->add_option("--model-out", model_out, "checkpoint output file");
    train->add_option("--json-out", json_out, "append the report as a JSON line");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a saved model on the dev split");
    CommonOpts eval_opts;
    add_common(eval, eval_opts);
    std::string eval_data, eval_modality, eval_variant = "full", eval_model;
    std::string eval_json_out;
    eval->add_option("--data", eval_data, "corpus directory")->required();
    eval->add_option("--modality", eval_modality, "audio, text, or fusion")
        ->required();
    eval->add_option("--variant", eval_variant, "full, topic, or augm");
    eval->add_option("--model", eval_model, "checkpoint file")->required();
    eval->add_option("--json-out", eval_json_out, "append the report as a JSON line");

    // report
    auto* report = app.add_subcommand("report", "aggregate JSON-line reports");
    std::vector<std::string> report_files;
    report->add_option("--json", report_files, "JSON-line report files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (synth->parsed()) {
        const PipelineConfig cfg = build_config(synth_opts);
        print_effective_config(cfg, synth_opts.seed);
        Corpus corpus =
            synth_corpus(synth_opts.seed, train_dep, train_non, dev_dep, dev_non);
        save_corpus(corpus, synth_out);
        std::cout << "wrote " << corpus.participants.size() << " participants to "
                  << synth_out << "\n";
        return 0;
    }
    if (prep->parsed()) {
        const PipelineConfig cfg = build_config(prep_opts);
        print_effective_config(cfg, prep_opts.seed);
        Corpus corpus = load_corpus(prep_data);
        int written = 0;
        for (const auto& p : corpus.participants) {
            const PcmSignal audio = participant_audio(p.audio, p.utterances);
            const LogMelSpectrogram spec = log_mel(audio, cfg.dsp);
            save_logmel(prep_out + "/" + std::to_string(p.id) + "_logmel.bin", spec);
            ++written;
        }
        std::cout << "wrote " << written << " spectrograms to " << prep_out << "\n";
        return 0;
    }
    if (topics->parsed()) {
        const PipelineConfig cfg = build_config(topics_opts);
        print_effective_config(cfg, topics_opts.seed);
        Corpus corpus = load_corpus(topics_data);
        const TopicLexicon lexicon = topics_lexicon.empty()
                                         ? default_lexicon()
                                         : load_lexicon(topics_lexicon);
        std::ostringstream tsv;
        tsv << "participant\ttopic\tutterances\ttext\n";
        for (const auto& p : corpus.participants) {
            const auto segments = label_utterances(p, lexicon, cfg.topic_window);
            const auto covered = topic_coverage(segments);
            std::cout << p.id << ": " << segments.size() << " segments, "
                      << covered.size() << "/" << kNumTopics << " topics\n";
            for (const auto& seg : segments)
                tsv << p.id << "\t" << topic_name(seg.topic) << "\t"
                    << seg.utterance_indices.size() << "\t" << seg.text << "\n";
        }
        if (!topics_out.empty()) {
            std::ofstream out(topics_out);
            if (!out) throw CliError("cannot open " + topics_out);
            out << tsv.str();
        }
        return 0;
    }
    if (augment->parsed()) {
        const PipelineConfig cfg = build_config(augment_opts);
        print_effective_config(cfg, augment_opts.seed);
        Corpus corpus = load_corpus(augment_data);
        PreparedData data = prepare_data(corpus, cfg, augment_opts.seed);
        int dep = 0, non = 0;
        for (const auto& a : data.augmented)
            (a.label == Label::Depressed ? dep : non) += 1;
        write_augment_manifest(augment_out, data.augmented);
        std::cout << "training samples: " << data.augmented.size() << " (" << dep
                  << " depressed, " << non << " not), manifest " << augment_out
                  << "\n";
        return 0;
    }
    if (train->parsed()) {
        const PipelineConfig base = build_config(train_opts);
        PipelineConfig cfg = base;
        if (train_grid) cfg.fusion_grid = true;
        const auto modality = modality_from_name(train_modality);
        const auto variant = variant_from_name(train_variant);
        if (!modality) throw CliError("--modality must be audio, text, or fusion");
        if (!variant) throw CliError("--variant must be full, topic, or augm");
        print_effective_config(cfg, train_opts.seed);
        Corpus corpus = load_corpus(train_data);
        PreparedData data = prepare_data(corpus, cfg, train_opts.seed);
        TrainedModels models =
            train_models(data, cfg, *modality, *variant, train_opts.seed);
        print_report(models.report);
        if (!model_out.empty()) {
            save_models(model_out, models);
            std::cout << "checkpoint written to " << model_out << "\n";
        }
        if (!json_out.empty()) append_json(json_out, report_json(models.report));
        return 0;
    }
    if (eval->parsed()) {
        const PipelineConfig cfg = build_config(eval_opts);
        const auto modality = modality_from_name(eval_modality);
        const auto variant = variant_from_name(eval_variant);
        if (!modality) throw CliError("--modality must be audio, text, or fusion");
        if (!variant) throw CliError("--variant must be full, topic, or augm");
        print_effective_config(cfg, eval_opts.seed);
        Corpus corpus = load_corpus(eval_data);
        PreparedData data = prepare_data(corpus, cfg, eval_opts.seed);
        TrainedModels models;
        load_models(eval_model, models, cfg, data.vocab.size());
        EvalReport r = evaluate_models(models, data, cfg, *modality, *variant,
                                       eval_opts.seed);
        print_report(r);
        if (!eval_json_out.empty()) append_json(eval_json_out, report_json(r));
        return 0;
    }
    if (report->parsed()) {
        std::vector<EvalReport> rows;
        for (const auto& path : report_files) {
            std::ifstream in(path);
            if (!in) throw CliError("cannot open " + path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = nlohmann::json::parse(line);
                EvalReport r;
                r.modality = j.at("modality").get<std::string>();
                r.variant = j.at("variant").get<std::string>();
                r.tp = j.at("tp").get<int>();
                r.fp = j.at("fp").get<int>();
                r.fn = j.at("fn").get<int>();
                r.tn = j.at("tn").get<int>();
                r.precision = j.at("precision").get<double>();
                r.recall = j.at("recall").get<double>();
                r.f1 = j.at("f1").get<double>();
                r.degenerate = j.at("degenerate").get<bool>();
                r.seed = j.at("seed").get<std::uint64_t>();
                r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
                rows.push_back(std::move(r));
            }
        }
        std::cout << report_table(rows);
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
