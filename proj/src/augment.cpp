#include "moodpipe/augment.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace moodpipe {

ParticipantFeatures compute_features(const Participant& participant,
                                     const TopicLexicon& lexicon, std::size_t window,
                                     const DspConfig& dsp) {
    ParticipantFeatures out;
    out.id = participant.id;
    out.label = participant.label;
    out.split = participant.split;
    out.segments = label_utterances(participant, lexicon, window);
    for (const auto& u : participant.utterances)
        if (u.speaker == Speaker::Participant) out.participant_utterances.push_back(u);

    const PcmSignal full = participant_audio(participant.audio, participant.utterances);
    if (full.samples.empty())
        throw std::runtime_error("compute_features: participant " +
                                 std::to_string(participant.id) + " has no audio");
    out.full_logmel = log_mel(full, dsp).frames;

    for (const auto& seg : out.segments) {
        PcmSignal seg_audio;
        seg_audio.sample_rate = participant.audio.sample_rate;
        for (const auto& [start_s, stop_s] : seg.audio_span) {
            const auto i0 = static_cast<std::size_t>(std::lrint(start_s * seg_audio.sample_rate));
            const auto i1 = static_cast<std::size_t>(std::lrint(stop_s * seg_audio.sample_rate));
            if (i1 > participant.audio.samples.size())
                throw std::runtime_error("compute_features: segment span beyond audio");
            seg_audio.samples.insert(seg_audio.samples.end(),
                                     participant.audio.samples.begin() + i0,
                                     participant.audio.samples.begin() + i1);
        }
        out.segment_logmels.push_back(log_mel(seg_audio, dsp).frames);
    }
    return out;
}

bool eligible(std::size_t unique_topic_count, std::size_t m) {
    return unique_topic_count > m;
}

bool eligible(const ParticipantFeatures& participant, std::size_t m) {
    return eligible(topic_coverage(participant.segments).size(), m);
}

std::vector<std::set<TopicId>> sample_combinations(const std::set<TopicId>& topic_set,
                                                   std::size_t m, std::size_t n, Rng& rng) {
    const std::size_t k = topic_set.size();
    if (!eligible(k, m))
        throw std::invalid_argument("sample_combinations: not eligible (k <= m)");
    const std::vector<TopicId> topics(topic_set.begin(), topic_set.end());

    // enumerate all subsets of size in [m, k-1]; k <= 7 so this is tiny
    std::vector<std::set<TopicId>> all;
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
        if (bits < m || bits > k - 1) continue;
        std::set<TopicId> subset;
        for (std::size_t i = 0; i < k; ++i)
            if (mask & (1u << i)) subset.insert(topics[i]);
        all.push_back(std::move(subset));
    }
    if (n >= all.size()) return all;

    // partial Fisher-Yates draw of n without replacement
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(all.size()) - 1));
        std::swap(all[i], all[j]);
    }
    all.resize(n);
    return all;
}

namespace {

Tensor concat_time(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) return Tensor{};
    const std::size_t M = parts[0]->cols();
    std::size_t T = 0;
    for (const Tensor* p : parts) {
        if (p->cols() != M)
            throw std::invalid_argument("concat_time: mel band count mismatch");
        T += p->rows();
    }
    Tensor out = Tensor::zeros({T, M});
    std::size_t row = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() +
                  static_cast<std::ptrdiff_t>(row * M));
        row += p->rows();
    }
    return out;
}

AugmentedSample assemble(const ParticipantFeatures& participant,
                         const std::vector<std::size_t>& segment_order,
                         std::set<TopicId> subset, bool is_original) {
    AugmentedSample s;
    s.source_id = participant.id;
    if (!participant.label)
        throw std::invalid_argument("augment: participant has no label");
    s.label = *participant.label;
    s.topic_subset = std::move(subset);
    s.is_original = is_original;
    std::vector<const Tensor*> mels;
    for (std::size_t idx : segment_order) {
        const auto& seg = participant.segments[idx];
        s.parts.emplace_back(seg.topic, seg.text);
        if (!s.text.empty()) s.text += ' ';
        s.text += seg.text;
        mels.push_back(&participant.segment_logmels[idx]);
    }
    s.logmel = concat_time(mels);
    return s;
}

}  // namespace

AugmentedSample build_sample(const ParticipantFeatures& participant,
                             const std::set<TopicId>& subset, Rng& rng) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < participant.segments.size(); ++i)
        if (subset.count(participant.segments[i].topic)) order.push_back(i);
    for (TopicId t : subset) {
        const bool found = std::any_of(order.begin(), order.end(), [&](std::size_t i) {
            return participant.segments[i].topic == t;
        });
        if (!found)
            throw std::invalid_argument("build_sample: topic with zero segments in subset");
    }
    rng.shuffle(order);
    return assemble(participant, order, subset, /*is_original=*/false);
}

std::vector<AugmentedSample> augment_corpus(
    const std::vector<ParticipantFeatures>& participants, const AugmentConfig& cfg) {
    std::vector<AugmentedSample> out;
    for (const auto& p : participants) {
        if (p.split != Split::Train) continue;  // augmentation is train-only
        if (!p.label) continue;
        const auto coverage = topic_coverage(p.segments);
        if (cfg.include_originals && !p.segments.empty()) {
            std::vector<std::size_t> order(p.segments.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            out.push_back(assemble(p, order, coverage, /*is_original=*/true));
        }
        if (!eligible(coverage.size(), cfg.m)) continue;
        const int n = cfg.n_per_class.count(*p.label) ? cfg.n_per_class.at(*p.label) : 0;
        if (n <= 0) continue;
        Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(p.id)));
        for (const auto& subset :
             sample_combinations(coverage, cfg.m, static_cast<std::size_t>(n), rng))
            out.push_back(build_sample(p, subset, rng));
    }
    return out;
}

std::map<Label, int> auto_n_per_class(int total, int eligible_dep, int eligible_non,
                                      int originals_dep, int originals_non) {
    if (total <= 0 || eligible_dep <= 0 || eligible_non <= 0)
        throw std::invalid_argument("auto_n_per_class: counts must be positive");
    const int half = total / 2;
    auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
    const int need_dep = std::max(0, half - originals_dep);
    const int need_non = std::max(0, half - originals_non);
    return {{Label::Depressed, ceil_div(need_dep, eligible_dep)},
            {Label::NotDepressed, ceil_div(need_non, eligible_non)}};
}

void write_augment_manifest(const std::string& path,
                            const std::vector<AugmentedSample>& samples) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("augment: cannot open " + path + " for writing");
    os << "sample_id\tsource_id\tlabel\ttopics\tn_frames\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        os << i << '\t' << s.source_id << '\t'
           << (s.label == Label::Depressed ? "depressed" : "not_depressed") << '\t';
        bool first = true;
        for (TopicId t : s.topic_subset) {
            if (!first) os << ',';
            os << topic_name(t);
            first = false;
        }
        os << '\t' << s.logmel.rows() << '\n';
    }
}

}  // namespace moodpipe
