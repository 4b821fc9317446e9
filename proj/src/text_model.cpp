#include "moodpipe/text_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace moodpipe {

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void Vocab::push(const std::string& token) {
    ids_.emplace(token, tokens_.size());
    tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t max_words) {
    Vocab v;
    v.push("<pad>");
    v.push("<unk>");
    v.push("<start>");
    v.push("<extract>");
    for (std::size_t t = 0; t < kNumTopics; ++t)
        v.push("<topic_" + std::to_string(t) + ">");

    std::map<std::string, std::size_t> freq;
    for (const auto& text : texts)
        for (auto& w : word_tokens(text)) ++freq[w];

    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (std::size_t i = 0; i < ranked.size() && i < max_words; ++i)
        v.push(ranked[i].first);
    return v;
}

std::size_t Vocab::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(std::size_t id) const {
    if (id >= tokens_.size()) throw std::out_of_range("Vocab::token: bad id");
    return tokens_[id];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Vocab::save: cannot open " + path);
    for (const auto& t : tokens_) out << t << "\n";
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Vocab::load: cannot open " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) v.push(line);
    }
    if (v.size() < kNumSpecials || v.token(kStart) != "<start>")
        throw std::runtime_error("Vocab::load: malformed vocab file " + path);
    return v;
}

std::vector<std::size_t> tokenize(const std::vector<std::string>& utterances,
                                  const std::vector<TopicSegment>& segments,
                                  TextVariant variant, const Vocab& vocab,
                                  std::size_t max_seq_len) {
    if (max_seq_len < 2) throw std::invalid_argument("tokenize: max_seq_len < 2");
    std::vector<std::size_t> content;
    if (variant == TextVariant::Full) {
        for (const auto& u : utterances)
            for (const auto& w : word_tokens(u)) content.push_back(vocab.id(w));
    } else {
        for (const auto& seg : segments) {
            content.push_back(Vocab::topic_id(seg.topic));
            for (const auto& w : word_tokens(seg.text)) content.push_back(vocab.id(w));
        }
    }
    // drop the oldest content first if the sequence would not fit
    const std::size_t budget = max_seq_len - 2;
    if (content.size() > budget)
        content.erase(content.begin(),
                      content.begin() + static_cast<std::ptrdiff_t>(content.size() - budget));
    std::vector<std::size_t> out;
    out.reserve(content.size() + 2);
    out.push_back(Vocab::kStart);
    out.insert(out.end(), content.begin(), content.end());
    out.push_back(Vocab::kExtract);
    return out;
}

namespace {

Tensor normal_init(std::vector<std::size_t> shape, Rng& rng, double stddev = 0.02) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data) x = rng.normal(0.0, stddev);
    return t;
}

std::string lkey(std::size_t i, const char* suffix) {
    return "l" + std::to_string(i) + "." + suffix;
}

}  // namespace

TransformerParams TransformerParams::init(const TransformerConfig& cfg,
                                          std::size_t vocab_size, Rng& rng) {
    if (cfg.d_model % cfg.n_heads != 0)
        throw std::invalid_argument("TransformerParams: d_model not divisible by n_heads");
    TransformerParams p;
    p.cfg = cfg;
    p.vocab_size = vocab_size;
    const std::size_t d = cfg.d_model, f = cfg.d_ff();
    p.weights["embed"] = normal_init({vocab_size, d}, rng);
    p.weights["pos"] = normal_init({cfg.max_seq_len, d}, rng);
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        for (const char* m : {"wq", "wk", "wv", "wo"})
            p.weights[lkey(i, m)] = normal_init({d, d}, rng);
        for (const char* m : {"bq", "bk", "bv", "bo"})
            p.weights[lkey(i, m)] = Tensor::zeros({d});
        p.weights[lkey(i, "ln1.g")] = Tensor::full({d}, 1.0);
        p.weights[lkey(i, "ln1.b")] = Tensor::zeros({d});
        p.weights[lkey(i, "ln2.g")] = Tensor::full({d}, 1.0);
        p.weights[lkey(i, "ln2.b")] = Tensor::zeros({d});
        p.weights[lkey(i, "ff1.w")] = normal_init({d, f}, rng);
        p.weights[lkey(i, "ff1.b")] = Tensor::zeros({f});
        p.weights[lkey(i, "ff2.w")] = normal_init({f, d}, rng);
        p.weights[lkey(i, "ff2.b")] = Tensor::zeros({d});
    }
    p.weights["final_ln.g"] = Tensor::full({d}, 1.0);
    p.weights["final_ln.b"] = Tensor::zeros({d});
    p.weights["head.w"] = normal_init({d, cfg.n_classes}, rng);
    p.weights["head.b"] = Tensor::zeros({cfg.n_classes});
    return p;
}

TransformerForward transformer_forward_tape(
    Tape& tape, const std::vector<std::size_t>& tokens, TransformerParams& params,
    Mode mode, Rng& rng, std::map<std::string, Var>* param_vars,
    std::vector<Var>* attention_out) {
    const TransformerConfig& cfg = params.cfg;
    const std::size_t n = tokens.size();
    if (n < 2 || n > cfg.max_seq_len)
        throw std::invalid_argument("transformer_forward: sequence length " +
                                    std::to_string(n) + " outside [2, " +
                                    std::to_string(cfg.max_seq_len) + "]");
    for (std::size_t id : tokens)
        if (id >= params.vocab_size)
            throw std::invalid_argument("transformer_forward: token id out of range");

    const bool train = mode == Mode::Train;
    auto param = [&](const std::string& name) {
        Var v = tape.leaf(params.weights.at(name), param_vars != nullptr, name);
        if (param_vars) (*param_vars)[name] = v;
        return v;
    };
    auto ln = [&](Var x, const std::string& g, const std::string& b) {
        return tape.add_rowvec(tape.mul_rowvec(tape.layer_norm_rows(x), param(g)),
                               param(b));
    };

    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;
    Var h = tape.add(tape.gather_rows(param("embed"), tokens),
                     tape.gather_rows(param("pos"), positions));

    const std::size_t hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        Var a = ln(h, lkey(i, "ln1.g"), lkey(i, "ln1.b"));
        Var q = tape.add_rowvec(tape.matmul(a, param(lkey(i, "wq"))), param(lkey(i, "bq")));
        Var k = tape.add_rowvec(tape.matmul(a, param(lkey(i, "wk"))), param(lkey(i, "bk")));
        Var v = tape.add_rowvec(tape.matmul(a, param(lkey(i, "wv"))), param(lkey(i, "bv")));
        std::vector<Var> heads;
        for (std::size_t hidx = 0; hidx < cfg.n_heads; ++hidx) {
            const std::size_t c0 = hidx * hd, c1 = c0 + hd;
            Var qh = tape.slice_cols(q, c0, c1);
            Var kh = tape.slice_cols(k, c0, c1);
            Var vh = tape.slice_cols(v, c0, c1);
            Var attn = tape.softmax_rows(
                tape.scale(tape.matmul(qh, tape.transpose(kh)), scale));
            if (attention_out) attention_out->push_back(attn);
            heads.push_back(tape.matmul(attn, vh));
        }
        Var o = tape.add_rowvec(tape.matmul(tape.concat_cols(heads), param(lkey(i, "wo"))),
                                param(lkey(i, "bo")));
        h = tape.add(h, tape.dropout(o, cfg.dropout, train, rng));

        Var b = ln(h, lkey(i, "ln2.g"), lkey(i, "ln2.b"));
        Var ff = tape.add_rowvec(
            tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(b, param(lkey(i, "ff1.w"))),
                                                  param(lkey(i, "ff1.b")))),
                        param(lkey(i, "ff2.w"))),
            param(lkey(i, "ff2.b")));
        h = tape.add(h, tape.dropout(ff, cfg.dropout, train, rng));
    }

    Var final = ln(h, "final_ln.g", "final_ln.b");
    Var feature = tape.row(final, n - 1);  // the <extract> position
    Var logits = tape.add_rowvec(tape.matmul(feature, param("head.w")), param("head.b"));
    return {logits, feature};
}

TransformerOutput transformer_forward(const std::vector<std::size_t>& tokens,
                                      TransformerParams& params, Mode mode) {
    Tape tape;
    Rng rng(0);
    auto fwd = transformer_forward_tape(tape, tokens, params, mode, rng);
    TransformerOutput out;
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

}  // namespace

EvalReport evaluate_text(TransformerParams& params,
                         const std::vector<TextSample>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("evaluate_text: empty eval set");
    std::vector<Label> truth, pred;
    for (const auto& s : eval_set) {
        truth.push_back(s.label);
        pred.push_back(predict(transformer_forward(s.tokens, params, Mode::Eval).probs));
    }
    return evaluate_predictions(truth, pred);
}

std::pair<TransformerParams, EvalReport> train_text(
    const std::vector<TextSample>& train_set, const std::vector<TextSample>& dev_set,
    const TransformerConfig& cfg, std::size_t vocab_size, const TrainOptions& opts) {
    if (train_set.empty()) throw std::invalid_argument("train_text: empty training set");
    Rng init_rng(Rng::derive(opts.seed, 0x7e570));
    TransformerParams params = TransformerParams::init(cfg, vocab_size, init_rng);
    Rng train_rng(Rng::derive(opts.seed, 0x7e571));
    AdamState adam;
    adam.learning_rate = opts.learning_rate;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

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
                const TextSample& sample = train_set[order[s]];
                auto fwd = transformer_forward_tape(tape, sample.tokens, params,
                                                    Mode::Train, train_rng, &pv);
                Var loss = tape.scale(
                    tape.cross_entropy_logits(fwd.logits,
                                              static_cast<std::size_t>(sample.label)),
                    inv_n);
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

    EvalReport report = dev_set.empty() ? EvalReport{} : evaluate_text(params, dev_set);
    report.modality = "text";
    report.seed = opts.seed;
    return {std::move(params), std::move(report)};
}

}  // namespace moodpipe
