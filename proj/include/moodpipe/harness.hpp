#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "moodpipe/corpus.hpp"

namespace moodpipe {

// Depressed is the positive class throughout.
struct EvalReport {
    int tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool degenerate = false;  // a metric had a zero denominator
    std::string modality;
    std::string variant;
    std::uint64_t seed = 0;
    std::string config_fingerprint;
};

double f1_score(double precision, double recall);

EvalReport report_from_counts(int tp, int fp, int fn, int tn);

// truth/pred must be equal-length and non-empty
EvalReport evaluate_predictions(const std::vector<Label>& truth,
                                const std::vector<Label>& pred);

// FNV-1a over the sorted key=value pairs, hex string
std::string config_fingerprint(const std::map<std::string, std::string>& config);

std::string report_json(const EvalReport& r);
std::string report_table(const std::vector<EvalReport>& rows);

}  // namespace moodpipe
