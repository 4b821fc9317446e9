#include "moodpipe/harness.hpp"

#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace moodpipe {

double f1_score(double precision, double recall) {
    if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0)
        throw std::invalid_argument("f1_score: inputs must be in [0, 1]");
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

EvalReport report_from_counts(int tp, int fp, int fn, int tn) {
    EvalReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    if (tp + fp > 0)
        r.precision = static_cast<double>(tp) / (tp + fp);
    else
        r.degenerate = true;
    if (tp + fn > 0)
        r.recall = static_cast<double>(tp) / (tp + fn);
    else
        r.degenerate = true;
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

EvalReport evaluate_predictions(const std::vector<Label>& truth,
                                const std::vector<Label>& pred) {
    if (truth.empty() || truth.size() != pred.size())
        throw std::invalid_argument("evaluate_predictions: empty or mismatched inputs");
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos = pred[i] == Label::Depressed;
        const bool is = truth[i] == Label::Depressed;
        if (pos && is) ++tp;
        else if (pos && !is) ++fp;
        else if (!pos && is) ++fn;
        else ++tn;
    }
    return report_from_counts(tp, fp, fn, tn);
}

std::string config_fingerprint(const std::map<std::string, std::string>& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : config) {
        mix(k);
        mix("=");
        mix(v);
        mix(";");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string report_json(const EvalReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"modality\":\"" << r.modality << "\",\"variant\":\"" << r.variant
       << "\",\"tp\":" << r.tp << ",\"fp\":" << r.fp << ",\"fn\":" << r.fn
       << ",\"tn\":" << r.tn << ",\"precision\":" << r.precision
       << ",\"recall\":" << r.recall << ",\"f1\":" << r.f1
       << ",\"degenerate\":" << (r.degenerate ? "true" : "false")
       << ",\"seed\":" << r.seed << ",\"config_fingerprint\":\""
       << r.config_fingerprint << "\"}";
    return os.str();
}

std::string report_table(const std::vector<EvalReport>& rows) {
    std::ostringstream os;
    os << "Model                 Features Type   F1     Precision  Recall\n";
    for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-21s %-15s %-6.2f %-10.2f %-6.2f\n",
                      r.variant.c_str(), r.modality.c_str(), r.f1, r.precision, r.recall);
        os << line;
    }
    return os.str();
}

}  // namespace moodpipe
