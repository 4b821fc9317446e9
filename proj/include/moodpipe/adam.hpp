#pragma once

#include <map>
#include <string>

#include "moodpipe/tensor.hpp"

namespace moodpipe {

using ParamMap = std::map<std::string, Tensor>;

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long t = 0;
    ParamMap m;  // first moment, lazily shaped to the parameters
    ParamMap v;  // second moment
};

// Standard Adam update with bias correction; t advances by exactly one.
// Parameters without a gradient entry are left untouched.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state);

}  // namespace moodpipe
