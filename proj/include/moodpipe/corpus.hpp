#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moodpipe/wav.hpp"

namespace moodpipe {

enum class Speaker { Ellie, Participant };
enum class Label { NotDepressed = 0, Depressed = 1 };
enum class Split { Train, Dev, Test };

const char* split_name(Split s);

struct Utterance {
    double start_s = 0.0;
    double stop_s = 0.0;
    Speaker speaker = Speaker::Participant;
    std::string text;
};

struct Participant {
    int id = 0;
    std::vector<Utterance> utterances;  // ordered by start_s
    PcmSignal audio;
    std::optional<Label> label;  // absent for the unlabeled test split
    Split split = Split::Train;
};

struct Corpus {
    std::vector<Participant> participants;

    std::map<Split, int> split_counts() const;
    std::vector<const Participant*> in_split(Split s) const;
};

// Transcript TSV with header `start_time<TAB>stop_time<TAB>speaker<TAB>value`.
std::vector<Utterance> load_transcript(const std::string& path);
void write_transcript(const std::string& path, const std::vector<Utterance>& utterances);

// Concatenation of the samples under Participant-speaker spans, transcript order.
PcmSignal participant_audio(const PcmSignal& signal,
                            const std::vector<Utterance>& utterances);

struct SynthConfig {
    int sample_rate = 16000;
    int min_utterances = 10;   // participant replies per interview
    int max_utterances = 30;
    double min_utt_s = 1.0;
    double max_utt_s = 4.0;
    double snr_db = 10.0;
    double depressed_f0 = 110.0;
    double non_depressed_f0 = 220.0;
    double f0_jitter = 10.0;
};

// Deterministic synthetic interview corpus. Each participant covers at least
// five of the seven topics via trigger-phrase questions; depressed and
// non-depressed participants draw replies from disjoint phrase pools and
// class-specific audio fundamentals.
Corpus synth_corpus(std::uint64_t seed, int n_train_dep, int n_train_non,
                    int n_dev_dep, int n_dev_non, const SynthConfig& cfg = {});

// Directory layout: <id>_TRANSCRIPT.tsv, <id>_AUDIO.wav, labels.csv
// (`Participant_ID,PHQ8_Binary`), and <split>_ids.txt per split.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

}  // namespace moodpipe
