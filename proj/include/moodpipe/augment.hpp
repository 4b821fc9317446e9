#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "moodpipe/dsp.hpp"
#include "moodpipe/rng.hpp"
#include "moodpipe/tensor.hpp"
#include "moodpipe/topics.hpp"

namespace moodpipe {

// Per-participant inputs to augmentation: topic segments with their
// spectrograms, plus the whole-interview view used by the Full variants.
struct ParticipantFeatures {
    int id = 0;
    std::optional<Label> label;
    Split split = Split::Train;
    std::vector<TopicSegment> segments;
    std::vector<Tensor> segment_logmels;  // parallel to segments
    Tensor full_logmel;                   // participant-only audio, whole interview
    std::vector<Utterance> participant_utterances;
};

ParticipantFeatures compute_features(const Participant& participant,
                                     const TopicLexicon& lexicon, std::size_t window,
                                     const DspConfig& dsp);

struct AugmentConfig {
    std::size_t m = 2;  // eligibility: unique-topic count must exceed m
    std::map<Label, int> n_per_class = {{Label::Depressed, 0}, {Label::NotDepressed, 0}};
    std::uint64_t seed = 0;
    bool include_originals = true;
};

struct AugmentedSample {
    int source_id = 0;
    Label label = Label::NotDepressed;
    std::set<TopicId> topic_subset;
    // shuffled segment order; text and logmel are built from the same order
    std::vector<std::pair<TopicId, std::string>> parts;
    std::string text;  // part texts joined with single spaces
    Tensor logmel;     // part spectrograms concatenated along time
    bool is_original = false;
};

// true iff the participant's unique-topic count is strictly greater than m
bool eligible(std::size_t unique_topic_count, std::size_t m);
bool eligible(const ParticipantFeatures& participant, std::size_t m);

// Up to n distinct topic subsets of size in [m, k-1], uniform without
// replacement over all such subsets; all of them when n exceeds their count.
std::vector<std::set<TopicId>> sample_combinations(const std::set<TopicId>& topic_set,
                                                   std::size_t m, std::size_t n, Rng& rng);

AugmentedSample build_sample(const ParticipantFeatures& participant,
                             const std::set<TopicId>& subset, Rng& rng);

// Augments training-split participants only; per-participant RNG streams are
// derived from (seed, participant id), so the result is seed-deterministic.
std::vector<AugmentedSample> augment_corpus(
    const std::vector<ParticipantFeatures>& participants, const AugmentConfig& cfg);

// n_per_class = ceil((total/2 - retained originals) / eligible_count) per class
std::map<Label, int> auto_n_per_class(int total, int eligible_dep, int eligible_non,
                                      int originals_dep = 0, int originals_non = 0);

// Manifest TSV: `sample_id<TAB>source_id<TAB>label<TAB>topics<TAB>n_frames`.
void write_augment_manifest(const std::string& path,
                            const std::vector<AugmentedSample>& samples);

}  // namespace moodpipe
