#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "moodpipe/corpus.hpp"

namespace moodpipe {

// The seven PHQ-related interview topics, fixed order.
enum class TopicId {
    Interests = 0,
    Sleep = 1,
    FeelDepressed = 2,
    FeelFailure = 3,
    Personality = 4,
    DiagnosedPTSDDepression = 5,
    Parenting = 6,
};

inline constexpr std::size_t kNumTopics = 7;

const char* topic_name(TopicId id);
std::optional<TopicId> topic_from_name(const std::string& name);

// Lowercase trigger phrases per topic; matching is case-insensitive substring.
struct TopicLexicon {
    std::array<std::vector<std::string>, kNumTopics> triggers;

    const std::vector<std::string>& for_topic(TopicId id) const {
        return triggers[static_cast<std::size_t>(id)];
    }
    void validate() const;  // every topic needs at least one non-empty trigger
};

TopicLexicon default_lexicon();

// File format: one `topic<TAB>trigger phrase` line per entry.
TopicLexicon load_lexicon(const std::string& path);
void save_lexicon(const std::string& path, const TopicLexicon& lexicon);

// A contiguous run of a participant's replies tagged with one topic.
// utterance_indices are positions within the ordered list of
// Participant-speaker utterances (not the full transcript).
struct TopicSegment {
    TopicId topic;
    std::vector<std::size_t> utterance_indices;
    std::string text;  // member texts joined with single spaces
    std::vector<std::pair<double, double>> audio_span;
};

// An Ellie utterance containing a trigger opens a segment covering the next
// `window` participant replies; a participant utterance containing a trigger
// tags itself. A later trigger closes the previous segment.
std::vector<TopicSegment> label_utterances(const Participant& participant,
                                           const TopicLexicon& lexicon,
                                           std::size_t window = 3);

std::set<TopicId> topic_coverage(const std::vector<TopicSegment>& segments);

}  // namespace moodpipe
