#pragma once

#include <cmath>
#include <functional>

#include "moodpipe/autograd.hpp"

namespace moodpipe {

// Scalar-valued tensor function built on a fresh tape per evaluation.
using TensorFn = std::function<Var(Tape&, Var)>;

// Compares analytic gradients against central finite differences and returns
// max over coordinates of |analytic - fd| / max(1, |analytic|).
inline double grad_check(const TensorFn& f, const Tensor& x, double eps = 1e-5) {
    Tensor analytic;
    {
        Tape tape;
        Var xv = tape.leaf(x, /*trainable=*/true, "x");
        Var y = f(tape, xv);
        if (!tape.value(y).is_scalar())
            throw std::invalid_argument("grad_check: f must be scalar-valued");
        tape.backward(y);
        analytic = tape.grad(xv);
    }
    auto eval = [&](const Tensor& pt) {
        Tape tape;
        Var xv = tape.leaf(pt);
        return tape.value(f(tape, xv)).data[0];
    };
    double max_rel = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x.data[i];
        probe.data[i] = x0 + eps;
        const double fp = eval(probe);
        probe.data[i] = x0 - eps;
        const double fm = eval(probe);
        probe.data[i] = x0;
        const double fd = (fp - fm) / (2.0 * eps);
        const double a = analytic.data[i];
        const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace moodpipe
