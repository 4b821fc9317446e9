#include "moodpipe/topics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace moodpipe {

namespace {

const char* kTopicNames[kNumTopics] = {
    "Interests",     "Sleep",      "FeelDepressed",           "FeelFailure",
    "Personality",   "DiagnosedPTSDDepression",               "Parenting",
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// First topic in TopicId order whose trigger occurs in the text, if any.
std::optional<TopicId> match_topic(const std::string& text, const TopicLexicon& lex) {
    const std::string lo = lower(text);
    for (std::size_t t = 0; t < kNumTopics; ++t)
        for (const auto& trigger : lex.triggers[t])
            if (lo.find(trigger) != std::string::npos)
                return static_cast<TopicId>(t);
    return std::nullopt;
}

}  // namespace

const char* topic_name(TopicId id) {
    return kTopicNames[static_cast<std::size_t>(id)];
}

std::optional<TopicId> topic_from_name(const std::string& name) {
    for (std::size_t t = 0; t < kNumTopics; ++t)
        if (name == kTopicNames[t]) return static_cast<TopicId>(t);
    return std::nullopt;
}

void TopicLexicon::validate() const {
    for (std::size_t t = 0; t < kNumTopics; ++t) {
        if (triggers[t].empty())
            throw std::invalid_argument(std::string("lexicon: topic ") + kTopicNames[t] +
                                        " has no triggers");
        for (const auto& s : triggers[t])
            if (s.empty())
                throw std::invalid_argument(std::string("lexicon: empty trigger for ") +
                                            kTopicNames[t]);
    }
}

TopicLexicon default_lexicon() {
    TopicLexicon lex;
    auto set = [&](TopicId id, std::vector<std::string> v) {
        lex.triggers[static_cast<std::size_t>(id)] = std::move(v);
    };
    set(TopicId::Interests, {"interests", "enjoy doing", "hobbies", "for fun"});
    set(TopicId::Sleep, {"sleep", "sleeping"});
    set(TopicId::FeelDepressed, {"feel depressed", "feeling down", "felt down"});
    set(TopicId::FeelFailure, {"a failure", "feel like a failure"});
    set(TopicId::Personality, {"your personality", "describe yourself", "introvert"});
    set(TopicId::DiagnosedPTSDDepression,
        {"diagnosed with depression", "diagnosed with ptsd", "p t s d"});
    set(TopicId::Parenting, {"parent", "your kids", "raising children"});
    return lex;
}

TopicLexicon load_lexicon(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("lexicon: cannot open " + path);
    TopicLexicon lex;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("lexicon: " + path + ":" + std::to_string(lineno) +
                                     ": expected topic<TAB>trigger");
        const auto topic = topic_from_name(line.substr(0, tab));
        if (!topic)
            throw std::runtime_error("lexicon: " + path + ":" + std::to_string(lineno) +
                                     ": unknown topic " + line.substr(0, tab));
        lex.triggers[static_cast<std::size_t>(*topic)].push_back(lower(line.substr(tab + 1)));
    }
    lex.validate();
    return lex;
}

void save_lexicon(const std::string& path, const TopicLexicon& lexicon) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("lexicon: cannot open " + path + " for writing");
    for (std::size_t t = 0; t < kNumTopics; ++t)
        for (const auto& trigger : lexicon.triggers[t])
            os << kTopicNames[t] << '\t' << trigger << '\n';
}

std::vector<TopicSegment> label_utterances(const Participant& participant,
                                           const TopicLexicon& lexicon,
                                           std::size_t window) {
    lexicon.validate();
    if (window < 1) throw std::invalid_argument("label_utterances: window must be >= 1");

    std::vector<TopicSegment> segments;
    std::optional<TopicId> open_topic;
    std::size_t remaining = 0;
    TopicSegment current;

    auto close = [&] {
        if (open_topic && !current.utterance_indices.empty())
            segments.push_back(std::move(current));
        open_topic.reset();
        current = TopicSegment{};
        remaining = 0;
    };
    auto open = [&](TopicId t) {
        close();
        open_topic = t;
        current.topic = t;
        remaining = window;
    };

    std::size_t participant_idx = 0;
    for (const Utterance& u : participant.utterances) {
        if (u.speaker == Speaker::Ellie) {
            if (auto t = match_topic(u.text, lexicon)) open(*t);
            continue;
        }
        const auto self_topic = match_topic(u.text, lexicon);
        if (self_topic && (!open_topic || *self_topic != *open_topic)) open(*self_topic);
        if (open_topic && remaining > 0) {
            if (!current.text.empty()) current.text += ' ';
            current.text += u.text;
            current.utterance_indices.push_back(participant_idx);
            current.audio_span.emplace_back(u.start_s, u.stop_s);
            if (--remaining == 0) close();
        }
        ++participant_idx;
    }
    close();
    return segments;
}

std::set<TopicId> topic_coverage(const std::vector<TopicSegment>& segments) {
    std::set<TopicId> out;
    for (const auto& s : segments) out.insert(s.topic);
    return out;
}

}  // namespace moodpipe
