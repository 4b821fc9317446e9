#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "moodpipe/augment.hpp"

using namespace moodpipe;

namespace {

DspConfig small_dsp() {
    DspConfig cfg;
    cfg.n_fft = 512;
    cfg.hop = 512;
    cfg.n_mels = 8;
    return cfg;
}

std::set<TopicId> topic_set(std::initializer_list<int> ids) {
    std::set<TopicId> out;
    for (int i : ids) out.insert(static_cast<TopicId>(i));
    return out;
}

// brute-force oracle: all subsets with size in [m, k-1]
std::vector<std::set<TopicId>> enumerate_valid(const std::set<TopicId>& topics,
                                               std::size_t m) {
    std::vector<TopicId> v(topics.begin(), topics.end());
    std::vector<std::set<TopicId>> out;
    for (std::uint32_t mask = 1; mask < (1u << v.size()); ++mask) {
        std::set<TopicId> s;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (mask & (1u << i)) s.insert(v[i]);
        if (s.size() >= m && s.size() <= v.size() - 1) out.push_back(std::move(s));
    }
    return out;
}

ParticipantFeatures toy_features(int id, Label label, Split split,
                                 std::vector<std::pair<TopicId, std::size_t>> segs) {
    ParticipantFeatures p;
    p.id = id;
    p.label = label;
    p.split = split;
    std::size_t idx = 0;
    for (auto& [topic, frames] : segs) {
        TopicSegment s;
        s.topic = topic;
        s.text = "seg" + std::to_string(idx) + " of " + std::to_string(id);
        p.segments.push_back(std::move(s));
        Tensor mel = Tensor::zeros({frames, 4});
        for (auto& x : mel.data) x = static_cast<double>(idx) + 0.5;
        p.segment_logmels.push_back(std::move(mel));
        ++idx;
    }
    return p;
}

}  // namespace

TEST_CASE("eligible: strict inequality") {
    CHECK(eligible(3, 2));
    CHECK_FALSE(eligible(2, 2));  // k == m is not eligible
    CHECK_FALSE(eligible(0, 2));
}

TEST_CASE("sample_combinations: matches the enumeration oracle for k=3, m=2") {
    Rng rng(1);
    const auto topics = topic_set({0, 1, 2});
    const auto oracle = enumerate_valid(topics, 2);
    REQUIRE(oracle.size() == 3);  // only size-2 subsets qualify
    auto got = sample_combinations(topics, 2, 2, rng);
    REQUIRE(got.size() == 2);
    CHECK(got[0] != got[1]);
    for (const auto& s : got) {
        CHECK(s.size() == 2);
        CHECK(std::find(oracle.begin(), oracle.end(), s) != oracle.end());
    }
    // asking for more than exist returns all of them
    auto all = sample_combinations(topics, 2, 99, rng);
    CHECK(all.size() == 3);
}

TEST_CASE("sample_combinations: k=4, m=2 has C(4,2)+C(4,3)=10 valid subsets") {
    Rng rng(2);
    const auto topics = topic_set({0, 1, 3, 5});
    CHECK(enumerate_valid(topics, 2).size() == 10);
    CHECK(sample_combinations(topics, 2, 100, rng).size() == 10);
    CHECK(sample_combinations(topics, 2, 0, rng).empty());
}

TEST_CASE("sample_combinations: subsets are always distinct and in-range") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto topics = topic_set({0, 1, 2, 4, 6});
        auto got = sample_combinations(topics, 2, 7, rng);
        REQUIRE(got.size() == 7);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].size() >= 2);
            CHECK(got[i].size() <= 4);
            for (std::size_t j = i + 1; j < got.size(); ++j) CHECK(got[i] != got[j]);
        }
    }
}

TEST_CASE("sample_combinations: ineligible set rejected") {
    Rng rng(4);
    CHECK_THROWS_AS(sample_combinations(topic_set({0, 1}), 2, 1, rng),
                    std::invalid_argument);
}

TEST_CASE("build_sample: singleton subset is the segment itself") {
    auto p = toy_features(1, Label::Depressed, Split::Train,
                          {{TopicId::Sleep, 10}, {TopicId::Interests, 15}});
    Rng rng(5);
    auto s = build_sample(p, topic_set({1}), rng);  // Sleep only
    CHECK(s.text == p.segments[0].text);
    CHECK(s.logmel.rows() == 10);
    CHECK(s.logmel.data == p.segment_logmels[0].data);
    CHECK(s.label == Label::Depressed);
}

TEST_CASE("build_sample: concatenation is a block permutation") {
    auto p = toy_features(2, Label::NotDepressed, Split::Train,
                          {{TopicId::Sleep, 10}, {TopicId::Interests, 15}});
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(static_cast<std::uint64_t>(trial));
        auto s = build_sample(p, topic_set({0, 1}), rng);
        REQUIRE(s.logmel.rows() == 25);
        REQUIRE(s.parts.size() == 2);
        // text is a permutation of whole segment texts, never interleaved
        const bool order_a = s.text == p.segments[0].text + " " + p.segments[1].text;
        const bool order_b = s.text == p.segments[1].text + " " + p.segments[0].text;
        CHECK((order_a || order_b));
        // spectrogram blocks follow the same order as the text
        const double first_val = s.logmel.data[0];
        CHECK(first_val == (order_a ? 0.5 : 1.5));
    }
}

TEST_CASE("build_sample: missing topic in subset rejected") {
    auto p = toy_features(3, Label::Depressed, Split::Train, {{TopicId::Sleep, 5}});
    Rng rng(6);
    CHECK_THROWS_AS(build_sample(p, topic_set({0, 1}), rng), std::invalid_argument);
}

TEST_CASE("augment_corpus: counts, leakage, label copy, determinism") {
    std::vector<ParticipantFeatures> parts;
    // three eligible training participants (k=3 > m=2), one dev participant
    parts.push_back(toy_features(10, Label::Depressed, Split::Train,
                                 {{TopicId::Sleep, 4}, {TopicId::Interests, 5},
                                  {TopicId::Parenting, 6}}));
    parts.push_back(toy_features(11, Label::NotDepressed, Split::Train,
                                 {{TopicId::Sleep, 4}, {TopicId::FeelDepressed, 5},
                                  {TopicId::Personality, 6}}));
    parts.push_back(toy_features(12, Label::NotDepressed, Split::Train,
                                 {{TopicId::Sleep, 4}, {TopicId::Interests, 5}}));  // k=2, not eligible
    parts.push_back(toy_features(13, Label::Depressed, Split::Dev,
                                 {{TopicId::Sleep, 4}, {TopicId::Interests, 5},
                                  {TopicId::Parenting, 6}}));

    AugmentConfig cfg;
    cfg.m = 2;
    cfg.n_per_class = {{Label::Depressed, 2}, {Label::NotDepressed, 3}};
    cfg.seed = 42;
    cfg.include_originals = true;

    auto samples = augment_corpus(parts, cfg);
    // originals: 3 train participants; augmented: 2 (dep) + 3 (non-dep eligible only)
    CHECK(samples.size() == 3 + 2 + 3);
    for (const auto& s : samples) {
        CHECK(s.source_id != 13);  // never from dev
        if (!s.is_original) {
            CHECK(s.topic_subset.size() >= cfg.m);
            CHECK(s.topic_subset.size() <= 2);  // k-1 with k=3
        }
        // label always copied from source
        if (s.source_id == 10) CHECK(s.label == Label::Depressed);
        if (s.source_id == 11) CHECK(s.label == Label::NotDepressed);
        // text/audio alignment: parts order explains both text and frame count
        std::string joined;
        for (const auto& [topic, text] : s.parts) {
            if (!joined.empty()) joined += ' ';
            joined += text;
        }
        CHECK(joined == s.text);
    }

    auto again = augment_corpus(parts, cfg);
    REQUIRE(again.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(again[i].text == samples[i].text);
        CHECK(again[i].logmel.data == samples[i].logmel.data);
    }

    cfg.n_per_class = {{Label::Depressed, 0}, {Label::NotDepressed, 0}};
    cfg.include_originals = false;
    CHECK(augment_corpus(parts, cfg).empty());
}

TEST_CASE("augment_corpus: balanced output on a synthetic imbalanced split") {
    SynthConfig synth;
    synth.min_utterances = 10;
    synth.max_utterances = 14;
    synth.min_utt_s = 1.0;
    synth.max_utt_s = 1.5;
    Corpus c = synth_corpus(9, 6, 14, 2, 2, synth);
    const auto lex = default_lexicon();
    const auto dsp = small_dsp();
    std::vector<ParticipantFeatures> feats;
    for (const auto& p : c.participants) feats.push_back(compute_features(p, lex, 3, dsp));

    int elig_dep = 0, elig_non = 0;
    for (const auto& f : feats)
        if (f.split == Split::Train && eligible(f, 2))
            (*f.label == Label::Depressed ? elig_dep : elig_non)++;
    CHECK(elig_dep == 6);
    CHECK(elig_non == 14);

    AugmentConfig cfg;
    cfg.m = 2;
    cfg.seed = 1;
    cfg.n_per_class = auto_n_per_class(120, elig_dep, elig_non, 6, 14);
    auto samples = augment_corpus(feats, cfg);
    int dep = 0, non = 0;
    for (const auto& s : samples) (s.label == Label::Depressed ? dep : non)++;
    const double frac = static_cast<double>(dep) / static_cast<double>(dep + non);
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
}

TEST_CASE("auto_n_per_class") {
    // the 31/76 split with retained originals: 31*8+31=279 dep, 76*3+76=304 non
    auto n = auto_n_per_class(534, 31, 76, 31, 76);
    CHECK(n.at(Label::Depressed) == 8);
    CHECK(n.at(Label::NotDepressed) == 3);
    auto no_orig = auto_n_per_class(534, 31, 76);
    CHECK(no_orig.at(Label::Depressed) == 9);     // ceil(267/31)
    CHECK(no_orig.at(Label::NotDepressed) == 4);  // ceil(267/76)
    CHECK_THROWS_AS(auto_n_per_class(0, 1, 1), std::invalid_argument);
}
