#include "moodpipe/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace moodpipe {

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state) {
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end())
            throw std::invalid_argument("adam_step: unknown parameter " + name);
        if (!it->second.same_shape(g))
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        auto [mi, fresh_m] = state.m.try_emplace(name, Tensor::zeros(p.shape));
        auto [vi, fresh_v] = state.v.try_emplace(name, Tensor::zeros(p.shape));
        if (!mi->second.same_shape(p) || !vi->second.same_shape(p))
            throw std::invalid_argument("adam_step: moment shape mismatch for " + name);
        Tensor& m = mi->second;
        Tensor& v = vi->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace moodpipe
