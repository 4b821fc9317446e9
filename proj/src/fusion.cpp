#include "moodpipe/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace moodpipe {

FusedFeature extract_features(TransformerParams& text_params, CnnParams& audio_params,
                              const std::vector<std::size_t>& tokens,
                              const Tensor& logmel, Label label, int source_id) {
    if (tokens.empty()) throw std::invalid_argument("extract_features: missing text");
    if (logmel.size() == 0) throw std::invalid_argument("extract_features: missing audio");
    TransformerOutput text = transformer_forward(tokens, text_params, Mode::Eval);
    CnnOutput audio = cnn_forward(logmel, audio_params, Mode::Eval);
    FusedFeature out;
    out.label = label;
    out.source_id = source_id;
    const std::size_t dt = text.feature.size(), da = audio.feature.size();
    out.features = Tensor::zeros({1, dt + da});
    for (std::size_t i = 0; i < dt; ++i) out.features.data[i] = text.feature.data[i];
    for (std::size_t i = 0; i < da; ++i) out.features.data[dt + i] = audio.feature.data[i];
    return out;
}

std::map<std::string, std::string> FusionConfig::as_map() const {
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    return {{"fusion.hidden_layers", std::to_string(n_hidden_layers)},
            {"fusion.hidden_units", std::to_string(hidden_units)},
            {"fusion.dropout", fmt(dropout)},
            {"fusion.activation", activation == Activation::Relu ? "relu" : "linear"},
            {"fusion.lr", fmt(learning_rate)},
            {"fusion.epochs", std::to_string(epochs)},
            {"fusion.p", fmt(p)},
            {"fusion.in_dim", std::to_string(in_dim)}};
}

namespace {

Tensor kaiming_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

std::string hkey(std::size_t i, const char* suffix) {
    return "h" + std::to_string(i) + "." + suffix;
}

bool is_weight_matrix(const std::string& name) { return name.ends_with(".w"); }

}  // namespace

FusionParams FusionParams::init(const FusionConfig& cfg, Rng& rng) {
    FusionParams p;
    p.cfg = cfg;
    std::size_t in = cfg.in_dim;
    for (std::size_t i = 0; i < cfg.n_hidden_layers; ++i) {
        p.weights[hkey(i, "w")] = kaiming_uniform({in, cfg.hidden_units}, in, rng);
        p.weights[hkey(i, "b")] = Tensor::zeros({cfg.hidden_units});
        in = cfg.hidden_units;
    }
    p.weights["out.w"] = kaiming_uniform({in, cfg.n_classes}, in, rng);
    p.weights["out.b"] = Tensor::zeros({cfg.n_classes});
    return p;
}

std::size_t FusionParams::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, w] : weights) n += w.size();
    return n;
}

Var fusion_forward_tape(Tape& tape, const Tensor& features, FusionParams& params,
                        Mode mode, Rng& rng,
                        std::map<std::string, Var>* param_vars) {
    const FusionConfig& cfg = params.cfg;
    if (features.rank() != 2 || features.rows() != 1 || features.cols() != cfg.in_dim)
        throw std::invalid_argument("fusion_forward: expected 1 x " +
                                    std::to_string(cfg.in_dim) + " feature, got " +
                                    shape_str(features.shape));
    const bool train = mode == Mode::Train;
    auto param = [&](const std::string& name) {
        Var v = tape.leaf(params.weights.at(name), param_vars != nullptr, name);
        if (param_vars) (*param_vars)[name] = v;
        return v;
    };
    Var x = tape.constant(features);
    for (std::size_t i = 0; i < cfg.n_hidden_layers; ++i) {
        x = tape.add_rowvec(tape.matmul(x, param(hkey(i, "w"))), param(hkey(i, "b")));
        if (cfg.activation == Activation::Relu) x = tape.relu(x);
        x = tape.dropout(x, cfg.dropout, train, rng);
    }
    return tape.add_rowvec(tape.matmul(x, param("out.w")), param("out.b"));
}

Tensor fusion_probs(const Tensor& features, FusionParams& params) {
    Tape tape;
    Rng rng(0);
    Var logits = fusion_forward_tape(tape, features, params, Mode::Eval, rng);
    return tape.value(tape.softmax_rows(logits));
}

double fusion_loss(FusionParams& params, const std::vector<FusedFeature>& batch,
                   double p) {
    double total = 0.0;
    Rng rng(0);
    for (const auto& sample : batch) {
        Tape tape;
        Var logits = fusion_forward_tape(tape, sample.features, params, Mode::Eval, rng);
        total += tape.value(tape.cross_entropy_logits(
                                logits, static_cast<std::size_t>(sample.label)))
                     .data[0];
    }
    if (p > 0.0) {
        double sumsq = 0.0;
        for (const auto& [name, w] : params.weights)
            if (is_weight_matrix(name))
                for (double v : w.data) sumsq += v * v;
        total += 0.5 * p * sumsq;
    }
    return total;
}

EvalReport evaluate_fusion(FusionParams& params,
                           const std::vector<FusedFeature>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("evaluate_fusion: empty eval set");
    std::vector<Label> truth, pred;
    for (const auto& s : eval_set) {
        truth.push_back(s.label);
        const Tensor probs = fusion_probs(s.features, params);
        pred.push_back(probs.data[static_cast<int>(Label::Depressed)] >
                               probs.data[static_cast<int>(Label::NotDepressed)]
                           ? Label::Depressed
                           : Label::NotDepressed);
    }
    return evaluate_predictions(truth, pred);
}

std::pair<FusionParams, EvalReport> train_fusion(
    const std::vector<FusedFeature>& features_train,
    const std::vector<FusedFeature>& features_dev, const FusionConfig& cfg,
    std::uint64_t seed) {
    if (features_train.empty())
        throw std::invalid_argument("train_fusion: empty training set");
    Rng init_rng(Rng::derive(seed, 0xf0510));
    FusionParams params = FusionParams::init(cfg, init_rng);
    Rng train_rng(Rng::derive(seed, 0xf0511));
    AdamState adam;
    adam.learning_rate = cfg.learning_rate;

    std::vector<std::size_t> order(features_train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int epochs = cfg.learning_rate == 0.0 ? 0 : cfg.epochs;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        train_rng.shuffle(order);
        for (std::size_t b = 0; b < order.size();
             b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t e =
                std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            ParamMap grads;
            for (std::size_t s = b; s < e; ++s) {
                Tape tape;
                std::map<std::string, Var> pv;
                const FusedFeature& sample = features_train[order[s]];
                Var logits = fusion_forward_tape(tape, sample.features, params,
                                                 Mode::Train, train_rng, &pv);
                // the objective sums cross-entropies over samples
                Var loss = tape.cross_entropy_logits(
                    logits, static_cast<std::size_t>(sample.label));
                if (s == b && cfg.p > 0.0)
                    for (const auto& [name, var] : pv)
                        if (is_weight_matrix(name))
                            loss = tape.add(loss,
                                            tape.scale(tape.sumsq(var), 0.5 * cfg.p));
                tape.backward(loss);
                for (auto& [name, g] : tape.trainable_grads()) {
                    auto [it, fresh] = grads.try_emplace(name, g);
                    if (!fresh)
                        for (std::size_t i = 0; i < g.size(); ++i)
                            it->second.data[i] += g.data[i];
                }
            }
            adam_step(params.weights, grads, adam);
        }
    }

    EvalReport report =
        features_dev.empty() ? EvalReport{} : evaluate_fusion(params, features_dev);
    report.modality = "fusion";
    report.seed = seed;
    report.config_fingerprint = config_fingerprint(cfg.as_map());
    return {std::move(params), std::move(report)};
}

std::vector<FusionConfig> full_grid(std::size_t in_dim, double p) {
    std::vector<FusionConfig> grid;
    for (std::size_t layers : {0, 1, 2, 3})
        for (double dropout : {0.0, 0.1, 0.5})
            for (std::size_t units : {32, 64, 128})
                for (Activation act : {Activation::Relu, Activation::Linear})
                    for (double lr : {6.25e-3, 6.25e-4, 6.25e-5, 6.25e-6})
                        for (int epochs : {1, 5, 10}) {
                            FusionConfig cfg;
                            cfg.n_hidden_layers = layers;
                            cfg.dropout = dropout;
                            cfg.hidden_units = units;
                            cfg.activation = act;
                            cfg.learning_rate = lr;
                            cfg.epochs = epochs;
                            cfg.p = p;
                            cfg.in_dim = in_dim;
                            grid.push_back(cfg);
                        }
    return grid;
}

GridResult grid_search(const std::vector<FusedFeature>& features_train,
                       const std::vector<FusedFeature>& features_dev,
                       const std::vector<FusionConfig>& grid, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    GridResult result;
    std::size_t best_params = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto [params, report] =
            train_fusion(features_train, features_dev, grid[i], Rng::derive(seed, i));
        const std::size_t n_params = params.param_count();
        const bool better =
            result.reports.empty() ||
            report.f1 > result.reports[result.best_index].f1 ||
            (report.f1 == result.reports[result.best_index].f1 &&
             (report.precision > result.reports[result.best_index].precision ||
              (report.precision == result.reports[result.best_index].precision &&
               n_params < best_params)));
        result.reports.push_back(report);
        if (better) {
            result.best_index = i;
            result.best = grid[i];
            best_params = n_params;
        }
    }
    return result;
}

std::string write_grid_tsv(const std::vector<FusionConfig>& grid,
                           const GridResult& result) {
    std::ostringstream os;
    os << "index\thidden_layers\thidden_units\tdropout\tactivation\tlr\tepochs\t"
          "f1\tprecision\trecall\tbest\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const FusionConfig& c = grid[i];
        const EvalReport& r = result.reports[i];
        os << i << "\t" << c.n_hidden_layers << "\t" << c.hidden_units << "\t"
           << c.dropout << "\t"
           << (c.activation == Activation::Relu ? "relu" : "linear") << "\t"
           << c.learning_rate << "\t" << c.epochs << "\t" << r.f1 << "\t"
           << r.precision << "\t" << r.recall << "\t"
           << (i == result.best_index ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace moodpipe
