#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moodpipe/adam.hpp"
#include "moodpipe/audio_model.hpp"  // Mode, TrainOptions
#include "moodpipe/autograd.hpp"
#include "moodpipe/harness.hpp"
#include "moodpipe/rng.hpp"
#include "moodpipe/topics.hpp"

namespace moodpipe {

class Vocab {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kStart = 2;
    static constexpr std::size_t kExtract = 3;
    static constexpr std::size_t kFirstTopic = 4;  // <topic_0>..<topic_6> = 4..10
    static constexpr std::size_t kNumSpecials = kFirstTopic + kNumTopics;

    // word tokens from the training texts only, by descending frequency,
    // capped at max_words (ties broken alphabetically)
    static Vocab build(const std::vector<std::string>& texts,
                       std::size_t max_words = 10000);

    std::size_t id(const std::string& token) const;  // kUnk for unknown words
    const std::string& token(std::size_t id) const;
    std::size_t size() const { return tokens_.size(); }
    static std::size_t topic_id(TopicId t) {
        return kFirstTopic + static_cast<std::size_t>(t);
    }

    void save(const std::string& path) const;  // one token per line, line = id
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::size_t> ids_;
    void push(const std::string& token);
};

std::vector<std::string> word_tokens(const std::string& text);  // lowercased

enum class TextVariant { Full, Topic };

// Full: all participant utterances in order, no topic tokens.
// Topic: topic segments only, each prefixed by its <topic_k> token.
// Output = <start>, content, <extract>; overlong sequences are truncated from
// the front of the content, preserving <start> and <extract>.
std::vector<std::size_t> tokenize(const std::vector<std::string>& utterances,
                                  const std::vector<TopicSegment>& segments,
                                  TextVariant variant, const Vocab& vocab,
                                  std::size_t max_seq_len);

struct TransformerConfig {
    std::size_t n_layers = 6;
    std::size_t n_heads = 8;
    std::size_t d_model = 512;
    std::size_t max_seq_len = 512;
    double dropout = 0.1;
    std::size_t n_classes = 2;

    std::size_t d_ff() const { return 4 * d_model; }
    std::size_t head_dim() const { return d_model / n_heads; }
};

struct TransformerParams {
    TransformerConfig cfg;
    std::size_t vocab_size = 0;
    ParamMap weights;

    static TransformerParams init(const TransformerConfig& cfg,
                                  std::size_t vocab_size, Rng& rng);
};

struct TransformerForward {
    Var logits;   // 1 x n_classes
    Var feature;  // 1 x d_model, hidden state at the <extract> position
};

TransformerForward transformer_forward_tape(
    Tape& tape, const std::vector<std::size_t>& tokens, TransformerParams& params,
    Mode mode, Rng& rng, std::map<std::string, Var>* param_vars = nullptr,
    std::vector<Var>* attention_out = nullptr);

struct TransformerOutput {
    Tensor logits;
    Tensor probs;
    Tensor feature;
};

TransformerOutput transformer_forward(const std::vector<std::size_t>& tokens,
                                      TransformerParams& params, Mode mode);

struct TextSample {
    std::vector<std::size_t> tokens;
    Label label = Label::NotDepressed;
    int source_id = 0;
    bool augmented = false;
};

std::pair<TransformerParams, EvalReport> train_text(
    const std::vector<TextSample>& train_set, const std::vector<TextSample>& dev_set,
    const TransformerConfig& cfg, std::size_t vocab_size, const TrainOptions& opts);

EvalReport evaluate_text(TransformerParams& params,
                         const std::vector<TextSample>& eval_set);

}  // namespace moodpipe
