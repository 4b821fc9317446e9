#include "moodpipe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "moodpipe/rng.hpp"
#include "moodpipe/topics.hpp"

namespace fs = std::filesystem;

namespace moodpipe {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "?";
}

std::map<Split, int> Corpus::split_counts() const {
    std::map<Split, int> out;
    for (const auto& p : participants) out[p.split]++;
    return out;
}

std::vector<const Participant*> Corpus::in_split(Split s) const {
    std::vector<const Participant*> out;
    for (const auto& p : participants)
        if (p.split == s) out.push_back(&p);
    return out;
}

// ----------------------------------------------------------------- transcript

namespace {

[[noreturn]] void line_error(const std::string& path, int lineno, const std::string& what) {
    throw std::runtime_error("transcript: " + path + ":" + std::to_string(lineno) + ": " + what);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto tab = line.find('\t', pos);
        if (tab == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
}

double parse_time(const std::string& s, const std::string& path, int lineno) {
    try {
        std::size_t consumed = 0;
        const double v = std::stod(s, &consumed);
        if (consumed != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        line_error(path, lineno, "unparsable time '" + s + "'");
    }
}

std::string fmt_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", t);
    return buf;
}

}  // namespace

std::vector<Utterance> load_transcript(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("transcript: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "start_time\tstop_time\tspeaker\tvalue")
        line_error(path, 1, "bad header");
    std::vector<Utterance> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 4) line_error(path, lineno, "expected 4 tab-separated columns");
        Utterance u;
        u.start_s = parse_time(f[0], path, lineno);
        u.stop_s = parse_time(f[1], path, lineno);
        if (u.start_s < 0.0 || u.stop_s < u.start_s)
            line_error(path, lineno, "stop_time before start_time");
        if (f[2] == "Ellie")
            u.speaker = Speaker::Ellie;
        else if (f[2] == "Participant")
            u.speaker = Speaker::Participant;
        else
            line_error(path, lineno, "unknown speaker '" + f[2] + "'");
        u.text = f[3];
        if (u.speaker == Speaker::Participant && u.text.empty())
            line_error(path, lineno, "empty text for Participant row");
        out.push_back(std::move(u));
    }
    return out;
}

void write_transcript(const std::string& path, const std::vector<Utterance>& utterances) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("transcript: cannot open " + path + " for writing");
    os << "start_time\tstop_time\tspeaker\tvalue\n";
    for (const auto& u : utterances)
        os << fmt_time(u.start_s) << '\t' << fmt_time(u.stop_s) << '\t'
           << (u.speaker == Speaker::Ellie ? "Ellie" : "Participant") << '\t' << u.text
           << '\n';
}

PcmSignal participant_audio(const PcmSignal& signal,
                            const std::vector<Utterance>& utterances) {
    PcmSignal out;
    out.sample_rate = signal.sample_rate;
    for (const auto& u : utterances) {
        if (u.speaker != Speaker::Participant) continue;
        const auto i0 = static_cast<std::size_t>(std::lrint(u.start_s * signal.sample_rate));
        const auto i1 = static_cast<std::size_t>(std::lrint(u.stop_s * signal.sample_rate));
        if (i1 > signal.samples.size())
            throw std::runtime_error("participant_audio: span beyond end of audio");
        out.samples.insert(out.samples.end(), signal.samples.begin() + i0,
                           signal.samples.begin() + i1);
    }
    return out;
}

// ------------------------------------------------------------------ synthesis

namespace {

const std::vector<std::string>& depressed_pool() {
    static const std::vector<std::string> pool = {
        "i feel hollow and exhausted most days",
        "everything seems heavy and pointless lately",
        "i barely manage to get out of bed",
        "nothing brings me any joy anymore",
        "i feel worthless and drained all the time",
        "my mind stays dark and tired",
        "i keep losing hope about everything",
        "sadness just sits on me constantly",
    };
    return pool;
}

const std::vector<std::string>& non_depressed_pool() {
    static const std::vector<std::string> pool = {
        "i feel cheerful and full of energy",
        "life has been really great recently",
        "i wake up excited about each morning",
        "my days are busy and satisfying",
        "i laugh a lot with my friends",
        "work keeps me motivated and happy",
        "i feel strong calm and content",
        "things are going wonderfully for me",
    };
    return pool;
}

const char* topic_question(TopicId t) {
    switch (t) {
        case TopicId::Interests: return "what are some of your interests";
        case TopicId::Sleep: return "how easy is it for you to get a good night's sleep";
        case TopicId::FeelDepressed: return "do you ever feel depressed";
        case TopicId::FeelFailure: return "do you ever feel like a failure";
        case TopicId::Personality: return "how would you describe yourself";
        case TopicId::DiagnosedPTSDDepression:
            return "have you ever been diagnosed with depression";
        case TopicId::Parenting: return "what do you think about being a parent";
    }
    return "";
}

// quantize to the int16 grid the WAV writer uses, so save -> load is exact
double quantize_pcm16(double x) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    return static_cast<double>(std::lrint(clamped * 32767.0)) / 32767.0;
}

Participant synth_participant(int id, Label label, Split split, std::uint64_t seed,
                              const SynthConfig& cfg) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(id)));
    Participant p;
    p.id = id;
    p.label = label;
    p.split = split;
    p.audio.sample_rate = cfg.sample_rate;

    const auto& pool = label == Label::Depressed ? depressed_pool() : non_depressed_pool();
    const double base_f0 =
        label == Label::Depressed ? cfg.depressed_f0 : cfg.non_depressed_f0;
    const double f0 = base_f0 + rng.uniform(-cfg.f0_jitter, cfg.f0_jitter);

    // interview plan: 5-7 topic blocks plus filler, 10-30 participant replies
    std::vector<TopicId> all_topics;
    for (std::size_t t = 0; t < kNumTopics; ++t) all_topics.push_back(static_cast<TopicId>(t));
    rng.shuffle(all_topics);
    const auto n_topics = static_cast<std::size_t>(rng.uniform_int(5, 7));
    all_topics.resize(n_topics);

    struct Block {
        std::string question;  // empty for none
        int n_replies;
    };
    std::vector<Block> blocks;
    int planned = 0;
    for (TopicId t : all_topics) {
        const int n = static_cast<int>(rng.uniform_int(1, 3));
        blocks.push_back({topic_question(t), n});
        planned += n;
    }
    const int lo = std::max(cfg.min_utterances, planned);
    const int target = static_cast<int>(rng.uniform_int(lo, std::max(lo, cfg.max_utterances)));
    while (planned < target) {
        blocks.push_back({"how are you doing today", 1});
        ++planned;
    }

    // lay out the timeline and synthesize audio for participant spans
    double t = 0.0;
    auto ms = [](double s) { return std::round(s * 1000.0) / 1000.0; };
    std::vector<double> samples;
    auto extend_to = [&](double stop_s) {
        const auto n = static_cast<std::size_t>(std::lrint(stop_s * cfg.sample_rate));
        if (samples.size() < n) samples.resize(n, 0.0);
    };
    for (const Block& b : blocks) {
        if (!b.question.empty()) {
            Utterance u;
            u.start_s = ms(t);
            u.stop_s = ms(t + rng.uniform(1.0, 2.0));
            u.speaker = Speaker::Ellie;
            u.text = b.question;
            t = u.stop_s + 0.1;
            extend_to(u.stop_s);
            p.utterances.push_back(std::move(u));
        }
        for (int r = 0; r < b.n_replies; ++r) {
            Utterance u;
            u.start_s = ms(t);
            u.stop_s = ms(t + rng.uniform(cfg.min_utt_s, cfg.max_utt_s));
            u.speaker = Speaker::Participant;
            u.text = pool[static_cast<std::size_t>(rng.uniform_int(
                0, static_cast<std::int64_t>(pool.size()) - 1))];
            extend_to(u.stop_s);
            const auto i0 = static_cast<std::size_t>(std::lrint(u.start_s * cfg.sample_rate));
            const auto i1 = static_cast<std::size_t>(std::lrint(u.stop_s * cfg.sample_rate));
            const double amp = 0.25;
            const double rms = amp * std::sqrt(0.5 * (1.0 + 0.25 + 0.0625));
            const double noise_std = rms / std::pow(10.0, cfg.snr_db / 20.0);
            for (std::size_t i = i0; i < i1; ++i) {
                const double ph = 2.0 * std::numbers::pi * f0 *
                                  static_cast<double>(i - i0) / cfg.sample_rate;
                double v = amp * (std::sin(ph) + 0.5 * std::sin(2.0 * ph) +
                                  0.25 * std::sin(3.0 * ph));
                v += rng.normal(0.0, noise_std);
                samples[i] = quantize_pcm16(v);
            }
            t = u.stop_s + 0.1;
            p.utterances.push_back(std::move(u));
        }
    }
    p.audio.samples = std::move(samples);
    return p;
}

}  // namespace

Corpus synth_corpus(std::uint64_t seed, int n_train_dep, int n_train_non,
                    int n_dev_dep, int n_dev_non, const SynthConfig& cfg) {
    if (n_train_dep < 1 || n_train_non < 1 || n_dev_dep < 1 || n_dev_non < 1)
        throw std::invalid_argument("synth_corpus: all counts must be >= 1");
    Corpus c;
    int id = 300;
    auto emit = [&](int n, Label label, Split split) {
        for (int i = 0; i < n; ++i)
            c.participants.push_back(synth_participant(id++, label, split, seed, cfg));
    };
    emit(n_train_dep, Label::Depressed, Split::Train);
    emit(n_train_non, Label::NotDepressed, Split::Train);
    emit(n_dev_dep, Label::Depressed, Split::Dev);
    emit(n_dev_non, Label::NotDepressed, Split::Dev);
    return c;
}

// ------------------------------------------------------------------ directory

void save_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream labels(fs::path(dir) / "labels.csv");
    labels << "Participant_ID,PHQ8_Binary\n";
    std::map<Split, std::ofstream> split_files;
    for (Split s : {Split::Train, Split::Dev, Split::Test})
        split_files.emplace(s, fs::path(dir) / (std::string(split_name(s)) + "_ids.txt"));
    for (const auto& p : corpus.participants) {
        const std::string stem = std::to_string(p.id);
        write_transcript((fs::path(dir) / (stem + "_TRANSCRIPT.tsv")).string(), p.utterances);
        write_wav((fs::path(dir) / (stem + "_AUDIO.wav")).string(), p.audio);
        if (p.label)
            labels << p.id << ',' << static_cast<int>(*p.label) << '\n';
        split_files.at(p.split) << p.id << '\n';
    }
}

Corpus load_corpus(const std::string& dir) {
    std::map<int, Label> labels;
    {
        std::ifstream is(fs::path(dir) / "labels.csv");
        if (!is) throw std::runtime_error("corpus: missing labels.csv in " + dir);
        std::string line;
        std::getline(is, line);
        if (line != "Participant_ID,PHQ8_Binary")
            throw std::runtime_error("corpus: bad labels.csv header in " + dir);
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error("corpus: bad labels.csv row '" + line + "'");
            labels[std::stoi(line.substr(0, comma))] =
                std::stoi(line.substr(comma + 1)) ? Label::Depressed : Label::NotDepressed;
        }
    }
    Corpus c;
    for (Split s : {Split::Train, Split::Dev, Split::Test}) {
        const auto ids_path = fs::path(dir) / (std::string(split_name(s)) + "_ids.txt");
        std::ifstream ids(ids_path);
        if (!ids) continue;
        std::string line;
        while (std::getline(ids, line)) {
            if (line.empty()) continue;
            Participant p;
            p.id = std::stoi(line);
            p.split = s;
            const std::string stem = std::to_string(p.id);
            p.utterances =
                load_transcript((fs::path(dir) / (stem + "_TRANSCRIPT.tsv")).string());
            p.audio = read_wav((fs::path(dir) / (stem + "_AUDIO.wav")).string());
            if (auto it = labels.find(p.id); it != labels.end()) p.label = it->second;
            if (s != Split::Test && !p.label)
                throw std::runtime_error("corpus: missing label for participant " + stem);
            c.participants.push_back(std::move(p));
        }
    }
    return c;
}

}  // namespace moodpipe
