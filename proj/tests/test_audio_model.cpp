#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moodpipe/audio_model.hpp"

using namespace moodpipe;

namespace {

CnnConfig tiny_config() {
    CnnConfig cfg;
    cfg.n_layers = 2;
    cfg.filters = 4;
    cfg.kernel_width = 5;
    cfg.in_channels = 8;
    cfg.fc_units = 6;
    cfg.dropout = 0.0;  // deterministic for gradient checks
    cfg.l2_lambda = 0.01;
    return cfg;
}

double cnn_loss(CnnParams params, const Tensor& x, std::size_t label,
                ParamMap* grads_out = nullptr) {
    Tape tape;
    Rng rng(0);
    std::map<std::string, Var> pv;
    auto fwd = cnn_forward_tape(tape, x, params, Mode::Train, rng, &pv);
    Var loss = tape.cross_entropy_logits(fwd.logits, label);
    for (const auto& [name, var] : pv)
        if (name.ends_with(".kernel") || name == "fc.w" || name == "out.w")
            loss = tape.add(loss, tape.scale(tape.sumsq(var), params.cfg.l2_lambda));
    const double value = tape.value(loss).data[0];
    if (grads_out) {
        tape.backward(loss);
        *grads_out = tape.trainable_grads();
    }
    return value;
}

CnnConfig toy_config() {
    CnnConfig cfg = tiny_config();
    cfg.in_channels = 4;
    cfg.kernel_width = 3;
    return cfg;
}

Tensor toy_logmel(Label label, Rng& rng, std::size_t T = 16, std::size_t M = 4) {
    // class signal is temporal (fast vs slow alternation) so that it
    // survives the per-channel normalization inside the network
    Tensor t = Tensor::zeros({T, M});
    const std::size_t period = label == Label::Depressed ? 2 : 8;
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t m = 0; m < M; ++m)
            t.at(i, m) = ((i / period) % 2 == 0 ? 1.0 : -1.0) + 0.1 * rng.normal();
    return t;
}

std::vector<AudioSample> toy_set(int n_per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<AudioSample> out;
    for (int i = 0; i < n_per_class; ++i) {
        out.push_back({toy_logmel(Label::Depressed, rng), Label::Depressed, 2 * i, false});
        out.push_back({toy_logmel(Label::NotDepressed, rng), Label::NotDepressed, 2 * i + 1, false});
    }
    return out;
}

}  // namespace

TEST_CASE("cnn shapes: 1000x80 input yields 1000/500/250/125, 192, 64, 2") {
    CnnConfig cfg;  // paper-scale defaults
    Rng rng(1);
    CnnParams params = CnnParams::init(cfg, rng);
    // intermediate lengths are implied by pool placement; check the outputs
    Tensor x = Tensor::zeros({1000, 80});
    for (auto& v : x.data) v = rng.normal(0.0, 0.1);
    CnnOutput out = cnn_forward(x, params, Mode::Eval);
    CHECK(out.feature.shape == std::vector<std::size_t>{1, 64});
    CHECK(out.logits.shape == std::vector<std::size_t>{1, 2});
    CHECK(params.weights.at("fc.w").shape == std::vector<std::size_t>{192, 64});
    // ceil(1000/2)/2/2 = 125 frames reach the global pooling stage
    CHECK(out.probs.data[0] + out.probs.data[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cnn: input too short / wrong band count rejected") {
    CnnConfig cfg = tiny_config();
    Rng rng(2);
    CnnParams params = CnnParams::init(cfg, rng);
    CHECK_THROWS_WITH_AS(cnn_forward(Tensor::zeros({1, 8}), params, Mode::Eval),
                         "cnn_forward: input too short", std::invalid_argument);
    CHECK_THROWS_AS(cnn_forward(Tensor::zeros({32, 7}), params, Mode::Eval),
                    std::invalid_argument);
}

TEST_CASE("cnn: full-model gradient check on the tiny config") {
    CnnConfig cfg = tiny_config();
    Rng rng(3);
    CnnParams params = CnnParams::init(cfg, rng);
    Tensor x = Tensor::zeros({32, 8});
    for (auto& v : x.data) v = rng.normal(0.0, 0.5);

    ParamMap analytic;
    cnn_loss(params, x, 1, &analytic);

    const double eps = 1e-5;
    double max_rel = 0.0;
    for (auto& [name, g] : analytic) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            CnnParams probe = params;
            probe.weights.at(name).data[i] += eps;
            const double fp = cnn_loss(probe, x, 1);
            probe.weights.at(name).data[i] -= 2 * eps;
            const double fm = cnn_loss(probe, x, 1);
            const double fd = (fp - fm) / (2 * eps);
            max_rel = std::max(max_rel,
                               std::abs(g.data[i] - fd) / std::max(1.0, std::abs(g.data[i])));
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("cnn: eval mode is deterministic and uses running statistics") {
    CnnConfig cfg = tiny_config();
    Rng rng(4);
    CnnParams params = CnnParams::init(cfg, rng);
    Tensor x = Tensor::zeros({32, 8});
    for (auto& v : x.data) v = rng.normal();
    CnnOutput a = cnn_forward(x, params, Mode::Eval);
    CnnOutput b = cnn_forward(x, params, Mode::Eval);
    CHECK(a.logits.data == b.logits.data);
    CHECK(a.feature.data == b.feature.data);
    // running stats unchanged by eval
    CHECK(params.running_stats.at("bn0.mean").data == Tensor::zeros({4}).data);
}

TEST_CASE("global pooling on constant-over-time input") {
    Tape tape;
    const std::size_t T = 9, C = 3;
    Tensor x = Tensor::zeros({T, C});
    const double vals[C] = {0.7, -1.2, 2.5};
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < C; ++c) x.at(t, c) = vals[c];
    const Tensor& out = tape.value(tape.global_pool_stats(tape.constant(x)));
    for (std::size_t c = 0; c < C; ++c) {
        CHECK(out.data[C + c] == doctest::Approx(vals[c]).epsilon(1e-12));      // mean
        CHECK(out.data[2 * C + c] == doctest::Approx(vals[c]).epsilon(1e-12));  // max
        CHECK(out.data[c] ==
              doctest::Approx(std::abs(vals[c]) * std::sqrt(static_cast<double>(T)))
                  .epsilon(1e-12));  // L2
    }
}

TEST_CASE("l2 penalty is monotone in lambda") {
    CnnConfig cfg = tiny_config();
    Rng rng(5);
    CnnParams params = CnnParams::init(cfg, rng);
    double sumsq = 0.0;
    for (const auto& [name, w] : params.weights)
        if (name.ends_with(".kernel") || name == "fc.w" || name == "out.w")
            for (double v : w.data) sumsq += v * v;
    CHECK(0.01 * sumsq <= 0.02 * sumsq);
    CHECK(sumsq > 0.0);
}

TEST_CASE("train_audio: lr=0 equals the random-init model") {
    auto train = toy_set(6, 10);
    auto dev = toy_set(4, 11);
    TrainOptions opts;
    opts.learning_rate = 0.0;
    opts.epochs = 2;
    opts.seed = 77;
    auto [params, report] = train_audio(train, dev, toy_config(), opts);
    Rng init_rng(Rng::derive(77, 0xa0d10));
    CnnParams fresh = CnnParams::init(toy_config(), init_rng);
    EvalReport base = evaluate_audio(fresh, dev);
    CHECK(report.f1 == base.f1);
    CHECK(report.tp == base.tp);
    CHECK(report.fp == base.fp);
    for (const auto& [name, w] : fresh.weights)
        CHECK(params.weights.at(name).data == w.data);
}

TEST_CASE("train_audio: learns a separable toy problem") {
    auto train = toy_set(15, 20);
    auto dev = toy_set(8, 21);
    TrainOptions opts;
    opts.learning_rate = 3e-3;
    opts.batch_size = 10;
    opts.epochs = 30;
    opts.seed = 1;
    CnnConfig cfg = toy_config();
    cfg.l2_lambda = 1e-4;
    auto [params, report] = train_audio(train, dev, cfg, opts);
    CHECK(report.f1 >= 0.9);
}

TEST_CASE("train_audio: deterministic in seed; empty train set rejected") {
    auto train = toy_set(4, 30);
    auto dev = toy_set(3, 31);
    TrainOptions opts;
    opts.epochs = 2;
    opts.seed = 5;
    auto [p1, r1] = train_audio(train, dev, toy_config(), opts);
    auto [p2, r2] = train_audio(train, dev, toy_config(), opts);
    CHECK(r1.tp == r2.tp);
    CHECK(r1.f1 == r2.f1);
    for (const auto& [name, w] : p1.weights) CHECK(w.data == p2.weights.at(name).data);
    CHECK_THROWS_AS(train_audio({}, dev, toy_config(), opts), std::invalid_argument);
}
