#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "moodpipe/corpus.hpp"
#include "moodpipe/topics.hpp"

using namespace moodpipe;

namespace {

Participant make_participant(std::vector<std::pair<Speaker, std::string>> turns) {
    Participant p;
    double t = 0.0;
    for (auto& [speaker, text] : turns) {
        p.utterances.push_back({t, t + 1.0, speaker, std::move(text)});
        t += 1.5;
    }
    return p;
}

}  // namespace

TEST_CASE("label_utterances: Ellie sleep question opens a Sleep segment") {
    Participant p = make_participant({
        {Speaker::Ellie, "how easy is it for you to get a good night's sleep"},
        {Speaker::Participant, "very i'm a heavy sleeper"},
    });
    auto segs = label_utterances(p, default_lexicon());
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].topic == TopicId::Sleep);
    CHECK(segs[0].text == "very i'm a heavy sleeper");
    CHECK(segs[0].utterance_indices == std::vector<std::size_t>{0});
    REQUIRE(segs[0].audio_span.size() == 1);
    CHECK(segs[0].audio_span[0].first == 1.5);
}

TEST_CASE("label_utterances: no triggers gives no segments") {
    Participant p = make_participant({
        {Speaker::Ellie, "how are you doing today"},
        {Speaker::Participant, "just fine thanks"},
    });
    CHECK(label_utterances(p, default_lexicon()).empty());
}

TEST_CASE("label_utterances: two triggers give two disjoint segments") {
    // exhaustive check on a 6-utterance toy transcript
    Participant p = make_participant({
        {Speaker::Ellie, "what are some of your interests"},
        {Speaker::Participant, "reading and long walks"},
        {Speaker::Participant, "music mostly"},
        {Speaker::Ellie, "what do you think about being a parent"},
        {Speaker::Participant, "it changed my life"},
        {Speaker::Participant, "quite demanding honestly"},
    });
    auto segs = label_utterances(p, default_lexicon(), 3);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].topic == TopicId::Interests);
    CHECK(segs[0].utterance_indices == std::vector<std::size_t>{0, 1});
    CHECK(segs[1].topic == TopicId::Parenting);
    CHECK(segs[1].utterance_indices == std::vector<std::size_t>{2, 3});
    CHECK(segs[0].text == "reading and long walks music mostly");
    CHECK(segs[1].text == "it changed my life quite demanding honestly");
    // no index overlap
    std::set<std::size_t> seen;
    for (const auto& s : segs)
        for (auto i : s.utterance_indices) CHECK(seen.insert(i).second);
}

TEST_CASE("label_utterances: participant trigger tags its own utterance") {
    Participant p = make_participant({
        {Speaker::Ellie, "tell me more"},
        {Speaker::Participant, "i was diagnosed with depression last year"},
    });
    auto segs = label_utterances(p, default_lexicon());
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].topic == TopicId::DiagnosedPTSDDepression);
    CHECK(segs[0].text == "i was diagnosed with depression last year");
}

TEST_CASE("label_utterances: window caps segment length") {
    Participant p = make_participant({
        {Speaker::Ellie, "how has your sleeping been"},
        {Speaker::Participant, "rough"},
        {Speaker::Participant, "really rough"},
        {Speaker::Participant, "awful"},
        {Speaker::Participant, "outside the window now"},
    });
    auto segs = label_utterances(p, default_lexicon(), 3);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].utterance_indices.size() == 3);
}

TEST_CASE("label_utterances: matching is case-insensitive") {
    Participant p = make_participant({
        {Speaker::Ellie, "How easy is it for you to SLEEP at night"},
        {Speaker::Participant, "fine"},
    });
    auto segs = label_utterances(p, default_lexicon());
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].topic == TopicId::Sleep);
}

TEST_CASE("label_utterances: text never contains Ellie's words") {
    Corpus c = synth_corpus(5, 2, 2, 1, 1);
    const auto lex = default_lexicon();
    for (const auto& p : c.participants) {
        std::string participant_text;
        for (const auto& u : p.utterances)
            if (u.speaker == Speaker::Participant) participant_text += u.text + " ";
        for (const auto& seg : label_utterances(p, lex))
            for (const auto& idx : seg.utterance_indices) {
                (void)idx;
                CHECK(participant_text.find(seg.text.substr(0, 20)) != std::string::npos);
            }
    }
}

TEST_CASE("topic_coverage") {
    CHECK(topic_coverage({}).empty());
    std::vector<TopicSegment> segs(3);
    segs[0].topic = TopicId::Sleep;
    segs[1].topic = TopicId::Sleep;
    segs[2].topic = TopicId::Interests;
    auto cov = topic_coverage(segs);
    CHECK(cov.size() == 2);
    CHECK(cov.count(TopicId::Sleep) == 1);
    CHECK(cov.count(TopicId::Interests) == 1);
}

TEST_CASE("lexicon: file round trip and validation") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "moodpipe_lexicon_test.tsv";
    const TopicLexicon lex = default_lexicon();
    save_lexicon(path.string(), lex);
    const TopicLexicon back = load_lexicon(path.string());
    for (std::size_t t = 0; t < kNumTopics; ++t)
        CHECK(back.triggers[t] == lex.triggers[t]);
    fs::remove(path);

    TopicLexicon empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}
