#include "moodpipe/audio_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moodpipe {

namespace {

Tensor kaiming_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

std::string layer_key(std::size_t i, const char* suffix) {
    return "conv" + std::to_string(i) + "." + suffix;
}

std::string bn_key(std::size_t i, const char* suffix) {
    return "bn" + std::to_string(i) + "." + suffix;
}

}  // namespace

CnnParams CnnParams::init(const CnnConfig& cfg, Rng& rng) {
    CnnParams p;
    p.cfg = cfg;
    std::size_t in_ch = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        p.weights[layer_key(i, "kernel")] =
            kaiming_uniform({cfg.filters, in_ch, cfg.kernel_width},
                            in_ch * cfg.kernel_width, rng);
        p.weights[layer_key(i, "bias")] = Tensor::zeros({cfg.filters});
        p.weights[bn_key(i, "gamma")] = Tensor::full({cfg.filters}, 1.0);
        p.weights[bn_key(i, "beta")] = Tensor::zeros({cfg.filters});
        p.running_stats[bn_key(i, "mean")] = Tensor::zeros({cfg.filters});
        p.running_stats[bn_key(i, "var")] = Tensor::full({cfg.filters}, 1.0);
        in_ch = cfg.filters;
    }
    const std::size_t pooled = 3 * cfg.filters;
    p.weights["fc.w"] = kaiming_uniform({pooled, cfg.fc_units}, pooled, rng);
    p.weights["fc.b"] = Tensor::zeros({cfg.fc_units});
    p.weights["out.w"] = kaiming_uniform({cfg.fc_units, cfg.n_classes}, cfg.fc_units, rng);
    p.weights["out.b"] = Tensor::zeros({cfg.n_classes});
    return p;
}

CnnForward cnn_forward_tape(Tape& tape, const Tensor& logmel, CnnParams& params,
                            Mode mode, Rng& rng,
                            std::map<std::string, Var>* param_vars) {
    const CnnConfig& cfg = params.cfg;
    if (logmel.rank() != 2 || logmel.cols() != cfg.in_channels)
        throw std::invalid_argument("cnn_forward: expected T x " +
                                    std::to_string(cfg.in_channels) + " input, got " +
                                    shape_str(logmel.shape));
    if (logmel.rows() < cfg.min_frames())
        throw std::invalid_argument("cnn_forward: input too short");

    const bool train = mode == Mode::Train;
    auto param = [&](const std::string& name) {
        Var v = tape.leaf(params.weights.at(name), /*trainable=*/param_vars != nullptr, name);
        if (param_vars) (*param_vars)[name] = v;
        return v;
    };

    Var x = tape.constant(logmel);
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        x = tape.conv1d_same(x, param(layer_key(i, "kernel")), param(layer_key(i, "bias")));
        x = tape.batch_norm_time(x, param(bn_key(i, "gamma")), param(bn_key(i, "beta")),
                                 params.running_stats.at(bn_key(i, "mean")),
                                 params.running_stats.at(bn_key(i, "var")), train,
                                 cfg.bn_momentum, cfg.bn_eps);
        x = tape.relu(x);
        x = tape.dropout(x, cfg.dropout, train, rng);
        if (i + 1 < cfg.n_layers) x = tape.maxpool1d(x, cfg.pool_size);
    }
    Var pooled = tape.global_pool_stats(x);  // 1 x 3*filters
    Var feature = tape.relu(
        tape.add_rowvec(tape.matmul(pooled, param("fc.w")), param("fc.b")));
    Var logits = tape.add_rowvec(tape.matmul(feature, param("out.w")), param("out.b"));
    return {logits, feature};
}

CnnOutput cnn_forward(const Tensor& logmel, CnnParams& params, Mode mode) {
    Tape tape;
    Rng rng(0);  // unused in eval; train-mode callers should use the tape API
    auto fwd = cnn_forward_tape(tape, logmel, params, mode, rng);
    CnnOutput out;
    out.logits = tape.value(fwd.logits);
    out.feature = tape.value(fwd.feature);
    out.probs = tape.value(tape.softmax_rows(fwd.logits));
    return out;
}

namespace {

Label predict(const Tensor& probs) {
    return probs.data[static_cast<int>(Label::Depressed)] >
                   probs.data[static_cast<int>(Label::NotDepressed)]
               ? Label::Depressed
               : Label::NotDepressed;
}

bool is_regularized(const std::string& name) {
    // conv/fc/output weight matrices only, not biases or batch-norm params
    return name.ends_with(".kernel") || name == "fc.w" || name == "out.w";
}

}  // namespace

EvalReport evaluate_audio(CnnParams& params, const std::vector<AudioSample>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("evaluate_audio: empty eval set");
    std::vector<Label> truth, pred;
    for (const auto& s : eval_set) {
        truth.push_back(s.label);
        pred.push_back(predict(cnn_forward(s.logmel, params, Mode::Eval).probs));
    }
    return evaluate_predictions(truth, pred);
}

std::pair<CnnParams, EvalReport> train_audio(const std::vector<AudioSample>& train_set,
                                             const std::vector<AudioSample>& dev_set,
                                             const CnnConfig& cfg,
                                             const TrainOptions& opts) {
    if (train_set.empty()) throw std::invalid_argument("train_audio: empty training set");
    Rng init_rng(Rng::derive(opts.seed, 0xa0d10));
    CnnParams params = CnnParams::init(cfg, init_rng);
    Rng train_rng(Rng::derive(opts.seed, 0xa0d11));
    AdamState adam;
    adam.learning_rate = opts.learning_rate;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // lr == 0 means no learning: leave the model (including running
    // batch-norm statistics) exactly at its initialization
    const int epochs = opts.learning_rate == 0.0 ? 0 : opts.epochs;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        train_rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += opts.batch_size) {
            const std::size_t e = std::min(order.size(), b + opts.batch_size);
            const double inv_n = 1.0 / static_cast<double>(e - b);
            ParamMap grads;
            for (std::size_t s = b; s < e; ++s) {
                Tape tape;
                std::map<std::string, Var> pv;
                const AudioSample& sample = train_set[order[s]];
                auto fwd = cnn_forward_tape(tape, sample.logmel, params, Mode::Train,
                                            train_rng, &pv);
                Var loss = tape.scale(
                    tape.cross_entropy_logits(fwd.logits, static_cast<std::size_t>(sample.label)),
                    inv_n);
                if (s == b && cfg.l2_lambda > 0.0) {
                    // tape the L2 penalty once per batch
                    for (const auto& [name, var] : pv)
                        if (is_regularized(name))
                            loss = tape.add(loss, tape.scale(tape.sumsq(var), cfg.l2_lambda));
                }
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

    EvalReport report = dev_set.empty() ? EvalReport{} : evaluate_audio(params, dev_set);
    report.modality = "audio";
    report.seed = opts.seed;
    return {std::move(params), std::move(report)};
}

}  // namespace moodpipe
