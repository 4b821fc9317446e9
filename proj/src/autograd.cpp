#include "moodpipe/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace moodpipe {

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

namespace {
[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
}
}  // namespace

const Tape::Node& Tape::check(Var v) const {
    if (v.owner != this || v.idx >= nodes_.size())
        throw std::invalid_argument("Tape: tensor not on this tape");
    return nodes_[v.idx];
}

std::size_t Tape::idx_of(Var v) const {
    check(v);
    return v.idx;
}

Var Tape::leaf(Tensor value, bool trainable, std::string name) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.trainable = trainable;
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1, this};
}

Var Tape::push(Tensor value, std::function<void(Tape&, std::size_t)> backprop) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1, this};
}

void Tape::backward(Var loss) {
    const std::size_t li = idx_of(loss);
    if (!nodes_[li].value.is_scalar())
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    shape_str(nodes_[li].value.shape));
    nodes_[li].grad.data[0] = 1.0;
    for (std::size_t i = li + 1; i-- > 0;) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
    }
}

std::map<std::string, Tensor> Tape::trainable_grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& n : nodes_)
        if (n.trainable) out[n.name] = n.grad;
    return out;
}

// ---------------------------------------------------------------- elementwise

Var Tape::add(Var a, Var b) {
    const std::size_t ia = idx_of(a), ib = idx_of(b);
    const Tensor& ta = nodes_[ia].value;
    const Tensor& tb = nodes_[ib].value;
    if (!ta.same_shape(tb)) shape_error("add", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            t.node(ia).grad.data[i] += g.data[i];
            t.node(ib).grad.data[i] += g.data[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    const std::size_t ia = idx_of(a), ib = idx_of(b);
    const Tensor& ta = nodes_[ia].value;
    const Tensor& tb = nodes_[ib].value;
    if (!ta.same_shape(tb)) shape_error("sub", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            t.node(ia).grad.data[i] += g.data[i];
            t.node(ib).grad.data[i] -= g.data[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const std::size_t ia = idx_of(a), ib = idx_of(b);
    const Tensor& ta = nodes_[ia].value;
    const Tensor& tb = nodes_[ib].value;
    if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        for (std::size_t i = 0; i < g.size(); ++i) {
            t.node(ia).grad.data[i] += g.data[i] * vb.data[i];
            t.node(ib).grad.data[i] += g.data[i] * va.data[i];
        }
    });
}

Var Tape::scale(Var a, double c) {
    const std::size_t ia = idx_of(a);
    Tensor out = nodes_[ia].value;
    for (double& x : out.data) x *= c;
    return push(std::move(out), [ia, c](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            t.node(ia).grad.data[i] += c * g.data[i];
    });
}

Var Tape::add_rowvec(Var m, Var v) {
    const std::size_t im = idx_of(m), iv = idx_of(v);
    const Tensor& tm = nodes_[im].value;
    const Tensor& tv = nodes_[iv].value;
    if (tv.size() != tm.cols()) shape_error("add_rowvec", tm, tv);
    Tensor out = tm;
    const std::size_t R = tm.rows(), C = tm.cols();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] += tv.data[c];
    return push(std::move(out), [im, iv, R, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
                t.node(im).grad.data[r * C + c] += g.data[r * C + c];
                t.node(iv).grad.data[c] += g.data[r * C + c];
            }
    });
}

Var Tape::mul_rowvec(Var m, Var v) {
    const std::size_t im = idx_of(m), iv = idx_of(v);
    const Tensor& tm = nodes_[im].value;
    const Tensor& tv = nodes_[iv].value;
    if (tv.size() != tm.cols()) shape_error("mul_rowvec", tm, tv);
    Tensor out = tm;
    const std::size_t R = tm.rows(), C = tm.cols();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] *= tv.data[c];
    return push(std::move(out), [im, iv, R, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& vm = t.node(im).value;
        const Tensor& vv = t.node(iv).value;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
                t.node(im).grad.data[r * C + c] += g.data[r * C + c] * vv.data[c];
                t.node(iv).grad.data[c] += g.data[r * C + c] * vm.data[r * C + c];
            }
    });
}

Var Tape::relu(Var a) {
    const std::size_t ia = idx_of(a);
    Tensor out = nodes_[ia].value;
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& va = t.node(ia).value;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (va.data[i] > 0.0) t.node(ia).grad.data[i] += g.data[i];
    });
}

// ----------------------------------------------------------------- reductions

Var Tape::sum(Var a) {
    const std::size_t ia = idx_of(a);
    double s = 0.0;
    for (double x : nodes_[ia].value.data) s += x;
    return push(Tensor::scalar(s), [ia](Tape& t, std::size_t self) {
        const double g = t.node(self).grad.data[0];
        for (double& x : t.node(ia).grad.data) x += g;
    });
}

Var Tape::sumsq(Var a) {
    const std::size_t ia = idx_of(a);
    double s = 0.0;
    for (double x : nodes_[ia].value.data) s += x * x;
    return push(Tensor::scalar(s), [ia](Tape& t, std::size_t self) {
        const double g = t.node(self).grad.data[0];
        const Tensor& va = t.node(ia).value;
        for (std::size_t i = 0; i < va.size(); ++i)
            t.node(ia).grad.data[i] += 2.0 * va.data[i] * g;
    });
}

// ------------------------------------------------------------- linear algebra

Var Tape::matmul(Var a, Var b) {
    const std::size_t ia = idx_of(a), ib = idx_of(b);
    const Tensor& ta = nodes_[ia].value;
    const Tensor& tb = nodes_[ib].value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        shape_error("matmul", ta, tb);
    const std::size_t M = ta.rows(), K = ta.cols(), N = tb.cols();
    Tensor out = Tensor::zeros({M, N});
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) {
            const double av = ta.data[m * K + k];
            if (av == 0.0) continue;
            for (std::size_t n = 0; n < N; ++n)
                out.data[m * N + n] += av * tb.data[k * N + n];
        }
    return push(std::move(out), [ia, ib, M, K, N](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        Tensor& ga = t.node(ia).grad;
        Tensor& gb = t.node(ib).grad;
        // dA = dC * B^T
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n) {
                const double gv = g.data[m * N + n];
                if (gv == 0.0) continue;
                for (std::size_t k = 0; k < K; ++k)
                    ga.data[m * K + k] += gv * vb.data[k * N + n];
            }
        // dB = A^T * dC
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t k = 0; k < K; ++k) {
                const double av = va.data[m * K + k];
                if (av == 0.0) continue;
                for (std::size_t n = 0; n < N; ++n)
                    gb.data[k * N + n] += av * g.data[m * N + n];
            }
    });
}

Var Tape::transpose(Var a) {
    const std::size_t ia = idx_of(a);
    const Tensor& ta = nodes_[ia].value;
    if (ta.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
    const std::size_t R = ta.rows(), C = ta.cols();
    Tensor out = Tensor::zeros({C, R});
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out.data[c * R + r] = ta.data[r * C + c];
    return push(std::move(out), [ia, R, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                t.node(ia).grad.data[r * C + c] += g.data[c * R + r];
    });
}

// ------------------------------------------------------------------ structural

Var Tape::row(Var a, std::size_t r) {
    const std::size_t ia = idx_of(a);
    const Tensor& ta = nodes_[ia].value;
    if (r >= ta.rows()) throw std::invalid_argument("row: index out of range");
    const std::size_t C = ta.cols();
    Tensor out = Tensor::zeros({1, C});
    std::copy_n(ta.data.begin() + static_cast<std::ptrdiff_t>(r * C), C, out.data.begin());
    return push(std::move(out), [ia, r, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t c = 0; c < C; ++c)
            t.node(ia).grad.data[r * C + c] += g.data[c];
    });
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const std::size_t ia = idx_of(a);
    const Tensor& ta = nodes_[ia].value;
    if (c1 <= c0 || c1 > ta.cols())
        throw std::invalid_argument("slice_cols: bad range");
    const std::size_t R = ta.rows(), C = ta.cols(), W = c1 - c0;
    Tensor out = Tensor::zeros({R, W});
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < W; ++c)
            out.data[r * W + c] = ta.data[r * C + c0 + c];
    return push(std::move(out), [ia, c0, R, C, W](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < W; ++c)
                t.node(ia).grad.data[r * C + c0 + c] += g.data[r * W + c];
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    std::vector<std::size_t> idxs;
    std::size_t R = nodes_[idx_of(parts[0])].value.rows();
    std::size_t C = 0;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        const std::size_t ip = idx_of(p);
        const Tensor& tp = nodes_[ip].value;
        if (tp.rows() != R) throw std::invalid_argument("concat_cols: row mismatch");
        idxs.push_back(ip);
        widths.push_back(tp.cols());
        C += tp.cols();
    }
    Tensor out = Tensor::zeros({R, C});
    std::size_t off = 0;
    for (std::size_t p = 0; p < idxs.size(); ++p) {
        const Tensor& tp = nodes_[idxs[p]].value;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < widths[p]; ++c)
                out.data[r * C + off + c] = tp.data[r * widths[p] + c];
        off += widths[p];
    }
    return push(std::move(out), [idxs, widths, R, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        std::size_t off = 0;
        for (std::size_t p = 0; p < idxs.size(); ++p) {
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < widths[p]; ++c)
                    t.node(idxs[p]).grad.data[r * widths[p] + c] +=
                        g.data[r * C + off + c];
            off += widths[p];
        }
    });
}

Var Tape::gather_rows(Var table, const std::vector<std::size_t>& ids) {
    const std::size_t it = idx_of(table);
    const Tensor& tt = nodes_[it].value;
    const std::size_t C = tt.cols();
    for (auto id : ids)
        if (id >= tt.rows())
            throw std::invalid_argument("gather_rows: id out of range");
    Tensor out = Tensor::zeros({ids.size(), C});
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(tt.data.begin() + static_cast<std::ptrdiff_t>(ids[i] * C), C,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * C));
    return push(std::move(out), [it, ids, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t c = 0; c < C; ++c)
                t.node(it).grad.data[ids[i] * C + c] += g.data[i * C + c];
    });
}

// ------------------------------------------------------------------ nonlinear

Var Tape::softmax_rows(Var a) {
    const std::size_t ia = idx_of(a);
    const Tensor& ta = nodes_[ia].value;
    const std::size_t R = ta.rows(), C = ta.cols();
    Tensor out = ta;
    for (std::size_t r = 0; r < R; ++r) {
        double m = out.data[r * C];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, out.data[r * C + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            out.data[r * C + c] = std::exp(out.data[r * C + c] - m);
            z += out.data[r * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] /= z;
    }
    return push(std::move(out), [ia, R, C](Tape& t, std::size_t self) {
        const Tensor& y = t.node(self).value;
        const Tensor& g = t.node(self).grad;
        for (std::size_t r = 0; r < R; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c)
                dot += g.data[r * C + c] * y.data[r * C + c];
            for (std::size_t c = 0; c < C; ++c)
                t.node(ia).grad.data[r * C + c] +=
                    y.data[r * C + c] * (g.data[r * C + c] - dot);
        }
    });
}

Var Tape::layer_norm_rows(Var a, double eps) {
    const std::size_t ia = idx_of(a);
    const Tensor& ta = nodes_[ia].value;
    const std::size_t R = ta.rows(), C = ta.cols();
    Tensor out = Tensor::zeros({R, C});
    std::vector<double> inv_std(R);
    for (std::size_t r = 0; r < R; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < C; ++c) mean += ta.data[r * C + c];
        mean /= static_cast<double>(C);
        double var = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double d = ta.data[r * C + c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(C);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < C; ++c)
            out.data[r * C + c] = (ta.data[r * C + c] - mean) * inv_std[r];
    }
    return push(std::move(out), [ia, R, C, inv_std](Tape& t, std::size_t self) {
        const Tensor& y = t.node(self).value;  // normalized values
        const Tensor& g = t.node(self).grad;
        for (std::size_t r = 0; r < R; ++r) {
            double gmean = 0.0, gydot = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                gmean += g.data[r * C + c];
                gydot += g.data[r * C + c] * y.data[r * C + c];
            }
            gmean /= static_cast<double>(C);
            gydot /= static_cast<double>(C);
            for (std::size_t c = 0; c < C; ++c)
                t.node(ia).grad.data[r * C + c] +=
                    inv_std[r] *
                    (g.data[r * C + c] - gmean - y.data[r * C + c] * gydot);
        }
    });
}

Var Tape::cross_entropy_logits(Var logits, std::size_t target) {
    const std::size_t il = idx_of(logits);
    const Tensor& tl = nodes_[il].value;
    if (tl.rows() != 1 && tl.rank() > 1)
        throw std::invalid_argument("cross_entropy_logits: expects a single row");
    const std::size_t K = tl.size();
    if (target >= K) throw std::invalid_argument("cross_entropy_logits: bad target");
    double m = tl.data[0];
    for (std::size_t c = 1; c < K; ++c) m = std::max(m, tl.data[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < K; ++c) z += std::exp(tl.data[c] - m);
    const double loss = std::log(z) + m - tl.data[target];
    return push(Tensor::scalar(loss), [il, target, K, m, z](Tape& t, std::size_t self) {
        const double g = t.node(self).grad.data[0];
        const Tensor& vl = t.node(il).value;
        for (std::size_t c = 0; c < K; ++c) {
            const double p = std::exp(vl.data[c] - m) / z;
            t.node(il).grad.data[c] += g * (p - (c == target ? 1.0 : 0.0));
        }
    });
}

// -------------------------------------------------------------- CNN primitives

Var Tape::conv1d_same(Var x, Var kernel, Var bias) {
    const std::size_t ix = idx_of(x), ik = idx_of(kernel), ib = idx_of(bias);
    const Tensor& tx = nodes_[ix].value;
    const Tensor& tk = nodes_[ik].value;
    const Tensor& tb = nodes_[ib].value;
    if (tk.rank() != 3) throw std::invalid_argument("conv1d_same: kernel must be F x C x W");
    const std::size_t T = tx.rows(), C = tx.cols();
    const std::size_t F = tk.shape[0], KC = tk.shape[1], W = tk.shape[2];
    if (KC != C) shape_error("conv1d_same", tx, tk);
    if (tb.size() != F) shape_error("conv1d_same bias", tk, tb);
    const std::size_t P = (W - 1) / 2;
    Tensor out = Tensor::zeros({T, F});
    for (std::size_t t0 = 0; t0 < T; ++t0)
        for (std::size_t f = 0; f < F; ++f) {
            double acc = tb.data[f];
            for (std::size_t w = 0; w < W; ++w) {
                const std::ptrdiff_t ti =
                    static_cast<std::ptrdiff_t>(t0 + w) - static_cast<std::ptrdiff_t>(P);
                if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
                const double* xr = &tx.data[static_cast<std::size_t>(ti) * C];
                const double* kr = &tk.data[(f * KC + 0) * W + w];
                for (std::size_t c = 0; c < C; ++c) acc += xr[c] * kr[c * W];
            }
            out.data[t0 * F + f] = acc;
        }
    return push(std::move(out), [ix, ik, ib, T, C, F, W, P](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& vx = t.node(ix).value;
        const Tensor& vk = t.node(ik).value;
        Tensor& gx = t.node(ix).grad;
        Tensor& gk = t.node(ik).grad;
        Tensor& gb = t.node(ib).grad;
        for (std::size_t t0 = 0; t0 < T; ++t0)
            for (std::size_t f = 0; f < F; ++f) {
                const double gv = g.data[t0 * F + f];
                if (gv == 0.0) continue;
                gb.data[f] += gv;
                for (std::size_t w = 0; w < W; ++w) {
                    const std::ptrdiff_t ti =
                        static_cast<std::ptrdiff_t>(t0 + w) - static_cast<std::ptrdiff_t>(P);
                    if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
                    const std::size_t tu = static_cast<std::size_t>(ti);
                    for (std::size_t c = 0; c < C; ++c) {
                        gx.data[tu * C + c] += gv * vk.data[(f * C + c) * W + w];
                        gk.data[(f * C + c) * W + w] += gv * vx.data[tu * C + c];
                    }
                }
            }
    });
}

Var Tape::maxpool1d(Var x, std::size_t pool) {
    const std::size_t ix = idx_of(x);
    const Tensor& tx = nodes_[ix].value;
    if (pool < 1) throw std::invalid_argument("maxpool1d: pool must be >= 1");
    const std::size_t T = tx.rows(), C = tx.cols();
    const std::size_t TO = (T + pool - 1) / pool;
    Tensor out = Tensor::zeros({TO, C});
    std::vector<std::size_t> argmax(TO * C);
    for (std::size_t to = 0; to < TO; ++to)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t t0 = to * pool;
            const std::size_t t1 = std::min(t0 + pool, T);
            std::size_t best = t0;
            double bv = tx.data[t0 * C + c];
            for (std::size_t ti = t0 + 1; ti < t1; ++ti)
                if (tx.data[ti * C + c] > bv) {  // ties keep lowest index
                    bv = tx.data[ti * C + c];
                    best = ti;
                }
            out.data[to * C + c] = bv;
            argmax[to * C + c] = best;
        }
    return push(std::move(out), [ix, argmax, C](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            t.node(ix).grad.data[argmax[i] * C + (i % C)] += g.data[i];
    });
}

Var Tape::global_pool_stats(Var x) {
    const std::size_t ix = idx_of(x);
    const Tensor& tx = nodes_[ix].value;
    const std::size_t T = tx.rows(), C = tx.cols();
    Tensor out = Tensor::zeros({1, 3 * C});
    std::vector<std::size_t> argmax(C, 0);
    for (std::size_t c = 0; c < C; ++c) {
        double ss = 0.0, mean = 0.0;
        double mx = tx.data[c];
        for (std::size_t t0 = 0; t0 < T; ++t0) {
            const double v = tx.data[t0 * C + c];
            ss += v * v;
            mean += v;
            if (v > mx) {
                mx = v;
                argmax[c] = t0;
            }
        }
        out.data[c] = std::sqrt(ss);
        out.data[C + c] = mean / static_cast<double>(T);
        out.data[2 * C + c] = mx;
    }
    return push(std::move(out), [ix, T, C, argmax](Tape& t, std::size_t self) {
        const Tensor& y = t.node(self).value;
        const Tensor& g = t.node(self).grad;
        const Tensor& vx = t.node(ix).value;
        Tensor& gx = t.node(ix).grad;
        for (std::size_t c = 0; c < C; ++c) {
            const double l2 = y.data[c];
            const double gl2 = g.data[c];
            const double gmean = g.data[C + c] / static_cast<double>(T);
            for (std::size_t t0 = 0; t0 < T; ++t0) {
                double d = gmean;
                if (l2 > 1e-300) d += gl2 * vx.data[t0 * C + c] / l2;
                gx.data[t0 * C + c] += d;
            }
            gx.data[argmax[c] * C + c] += g.data[2 * C + c];
        }
    });
}

Var Tape::batch_norm_time(Var x, Var gamma, Var beta, Tensor& running_mean,
                          Tensor& running_var, bool train, double momentum,
                          double eps) {
    const std::size_t ix = idx_of(x), ig = idx_of(gamma), ib = idx_of(beta);
    const Tensor& tx = nodes_[ix].value;
    const std::size_t T = tx.rows(), C = tx.cols();
    if (nodes_[ig].value.size() != C || nodes_[ib].value.size() != C ||
        running_mean.size() != C || running_var.size() != C)
        throw std::invalid_argument("batch_norm_time: channel count mismatch");

    // Normalization always uses the running statistics held on entry, so the
    // train- and eval-mode transforms agree; train mode folds the current
    // sample's time statistics into the running estimates as a side effect.
    // With per-sample batches this avoids the instance-norm train/eval split.
    std::vector<double> mean(C), var(C);
    for (std::size_t c = 0; c < C; ++c) {
        mean[c] = running_mean.data[c];
        var[c] = running_var.data[c];
    }
    if (train) {
        for (std::size_t c = 0; c < C; ++c) {
            double m = 0.0;
            for (std::size_t t0 = 0; t0 < T; ++t0) m += tx.data[t0 * C + c];
            m /= static_cast<double>(T);
            double v = 0.0;
            for (std::size_t t0 = 0; t0 < T; ++t0) {
                const double d = tx.data[t0 * C + c] - m;
                v += d * d;
            }
            v /= static_cast<double>(T);
            running_mean.data[c] = momentum * running_mean.data[c] + (1.0 - momentum) * m;
            running_var.data[c] = momentum * running_var.data[c] + (1.0 - momentum) * v;
        }
    }

    Tensor out = Tensor::zeros({T, C});
    std::vector<double> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    const Tensor& tg = nodes_[ig].value;
    const Tensor& tbeta = nodes_[ib].value;
    for (std::size_t t0 = 0; t0 < T; ++t0)
        for (std::size_t c = 0; c < C; ++c)
            out.data[t0 * C + c] =
                (tx.data[t0 * C + c] - mean[c]) * inv_std[c] * tg.data[c] + tbeta.data[c];

    return push(std::move(out),
                [ix, ig, ib, T, C, mean, inv_std](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        const Tensor& vx = t.node(ix).value;
        const Tensor& vg = t.node(ig).value;
        Tensor& gx = t.node(ix).grad;
        Tensor& gg = t.node(ig).grad;
        Tensor& gb = t.node(ib).grad;
        for (std::size_t c = 0; c < C; ++c) {
            // the statistics are constants of the op, so this is an affine map
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t t0 = 0; t0 < T; ++t0) {
                const double xh = (vx.data[t0 * C + c] - mean[c]) * inv_std[c];
                const double gi = g.data[t0 * C + c];
                sum_g += gi;
                sum_gx += gi * xh;
            }
            gg.data[c] += sum_gx;
            gb.data[c] += sum_g;
            for (std::size_t t0 = 0; t0 < T; ++t0)
                gx.data[t0 * C + c] += g.data[t0 * C + c] * vg.data[c] * inv_std[c];
        }
    });
}

Var Tape::dropout(Var x, double rate, bool train, Rng& rng) {
    if (!train || rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const std::size_t ix = idx_of(x);
    const Tensor& tx = nodes_[ix].value;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(tx.size());
    Tensor out = tx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
        out.data[i] *= mask[i];
    }
    return push(std::move(out), [ix, mask](Tape& t, std::size_t self) {
        const Tensor& g = t.node(self).grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            t.node(ix).grad.data[i] += g.data[i] * mask[i];
    });
}

}  // namespace moodpipe
