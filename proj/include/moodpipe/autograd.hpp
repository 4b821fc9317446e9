#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "moodpipe/rng.hpp"
#include "moodpipe/tensor.hpp"

namespace moodpipe {

class Tape;

// Handle to a tensor recorded on a tape.
struct Var {
    std::size_t idx = 0;
    const Tape* owner = nullptr;
};

// Reverse-mode autodiff over the primitive set used by all models.
// A tape is single-owner: record a forward pass, call backward() once,
// read gradients, discard.
class Tape {
  public:
    Var leaf(Tensor value, bool trainable = false, std::string name = {});
    Var constant(Tensor value) { return leaf(std::move(value)); }

    const Tensor& value(Var v) const { return check(v).value; }
    const Tensor& grad(Var v) const { return check(v).grad; }

    // elementwise and broadcast
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_rowvec(Var m, Var v);   // v broadcast over rows of m
    Var mul_rowvec(Var m, Var v);
    Var relu(Var a);

    // reductions
    Var sum(Var a);
    Var sumsq(Var a);

    // linear algebra
    Var matmul(Var a, Var b);
    Var transpose(Var a);

    // structural
    Var row(Var a, std::size_t r);                 // 1 x cols
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);
    Var concat_cols(const std::vector<Var>& parts);
    Var gather_rows(Var table, const std::vector<std::size_t>& ids);

    // nonlinear blocks
    Var softmax_rows(Var a);
    // normalize only, no affine; eps small enough that the output variance
    // stays within 1e-9 of 1 for non-degenerate rows
    Var layer_norm_rows(Var a, double eps = 1e-12);
    Var cross_entropy_logits(Var logits, std::size_t target);  // -> scalar

    // CNN primitives; x is time-major T x C
    Var conv1d_same(Var x, Var kernel /*F x C x W*/, Var bias /*F*/);
    Var maxpool1d(Var x, std::size_t pool);
    Var global_pool_stats(Var x);  // -> 1 x 3C, layout [l2 | mean | max]
    Var batch_norm_time(Var x, Var gamma, Var beta, Tensor& running_mean,
                        Tensor& running_var, bool train, double momentum = 0.9,
                        double eps = 1e-5);

    Var dropout(Var x, double rate, bool train, Rng& rng);

    // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse topological
    // order, visiting each recorded op exactly once.
    void backward(Var loss);

    // name -> gradient for every trainable leaf
    std::map<std::string, Tensor> trainable_grads() const;

    std::size_t num_nodes() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, std::size_t)> backprop;  // null for leaves
        bool trainable = false;
        std::string name;
    };

    std::vector<Node> nodes_;

    const Node& check(Var v) const;
    Node& node(std::size_t i) { return nodes_[i]; }
    Var push(Tensor value, std::function<void(Tape&, std::size_t)> backprop);
    std::size_t idx_of(Var v) const;
};

}  // namespace moodpipe
