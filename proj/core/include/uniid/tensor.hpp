#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "uniid/rng.hpp"

namespace uniid {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const std::string& why) {
    throw ShapeError(std::string(op) + ": " + why + " (got " + shape_str(a) + ")");
}

// Gradient recording is on by default; inference paths disable it so no graph
// is built and memory stays flat across sampling loops.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// Reverse-mode tape node. Tensors are immutable after forward recording except
// for grad accumulation; parents keep the recorded subgraph alive.
// ---------------------------------------------------------------------------

template <typename S>
struct NodeT {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad; // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT>> parents;
    // Pulls this node's grad and accumulates into parents. Captures saved
    // forward context by value; never captures an owning reference to self.
    std::function<void(NodeT&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

template <typename S>
class TensorT {
public:
    using Scalar = S;

    TensorT() = default;

    static TensorT zeros(Shape shape) { return filled(std::move(shape), S(0)); }

    static TensorT filled(Shape shape, S v) {
        TensorT t;
        t.node_ = std::make_shared<NodeT<S>>();
        t.node_->shape = std::move(shape);
        t.node_->value.assign(shape_numel(t.node_->shape), v);
        return t;
    }

    static TensorT from(Shape shape, std::vector<S> data) {
        if (shape_numel(shape) != (int64_t)data.size())
            shape_fail("tensor", shape, "data length " + std::to_string(data.size()) + " does not match shape");
        TensorT t;
        t.node_ = std::make_shared<NodeT<S>>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        return t;
    }

    static TensorT scalar(S v) { return from({1}, {v}); }

    static TensorT randn(Shape shape, Rng& rng, S stddev = S(1)) {
        TensorT t = zeros(std::move(shape));
        for (S& x : t.data()) x = S(rng.normal()) * stddev;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[i]; }
    int rank() const { return (int)node_->shape.size(); }
    int64_t numel() const { return (int64_t)node_->value.size(); }

    std::vector<S>& data() { return node_->value; }
    const std::vector<S>& data() const { return node_->value; }

    std::vector<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<S>& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }

    bool requires_grad() const { return node_->requires_grad; }
    TensorT& set_requires_grad(bool b) {
        node_->requires_grad = b;
        return *this;
    }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    S item() const {
        if (numel() != 1) shape_fail("item", shape(), "expected a scalar");
        return node_->value[0];
    }

    S at(int i) const { return node_->value[i]; }
    S at(int r, int c) const { return node_->value[(int64_t)r * node_->shape[1] + c]; }

    std::shared_ptr<NodeT<S>> node() const { return node_; }

    // Gradients of a scalar loss w.r.t. every reachable requires_grad tensor.
    // Accumulates additively across repeated calls.
    void backward() const {
        if (numel() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_str(shape()));
        std::vector<NodeT<S>*> order;
        topo_sort(node_.get(), order);
        // Interior grads are per-call scratch; only leaf grads accumulate
        // across repeated backward calls.
        for (NodeT<S>* n : order)
            if (n->backward_fn) n->grad.assign(n->value.size(), S(0));
        node_->ensure_grad();
        node_->grad[0] += S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            NodeT<S>* n = *it;
            if (n->requires_grad) n->ensure_grad();
            if (n->backward_fn) n->backward_fn(*n);
        }
    }

    // Detached copy of the values; no graph, no grad.
    TensorT detach() const { return from(shape(), data()); }

private:
    static void topo_sort(NodeT<S>* root, std::vector<NodeT<S>*>& order) {
        // Iterative DFS; graphs can chain many ops per training step.
        std::unordered_set<NodeT<S>*> visited;
        std::vector<std::pair<NodeT<S>*, size_t>> stack;
        stack.push_back({root, 0});
        visited.insert(root);
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            if (i < n->parents.size()) {
                NodeT<S>* p = n->parents[i++].get();
                if (p->requires_grad && !visited.count(p)) {
                    visited.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<NodeT<S>> node_;
};

using Tensor = TensorT<float>;

namespace detail {

// Builds the output node for an op: records parents and backward only when
// grad mode is on and some input needs gradients.
template <typename S>
TensorT<S> make_op(Shape out_shape, std::vector<S> out_value,
                   std::vector<TensorT<S>> inputs,
                   std::function<void(NodeT<S>&)> backward) {
    TensorT<S> out = TensorT<S>::from(std::move(out_shape), std::move(out_value));
    bool needs = false;
    if (grad_mode())
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
        out.node()->requires_grad = true;
        for (const auto& in : inputs) out.node()->parents.push_back(in.node());
        out.node()->backward_fn = std::move(backward);
    }
    return out;
}

template <typename S>
inline void accumulate(const std::shared_ptr<NodeT<S>>& p, const S* g, int64_t n) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    S* pg = p->grad.data();
    for (int64_t i = 0; i < n; ++i) pg[i] += g[i];
}

// c[m,n] += a[m,k] * b[k,n]; plain ikj loop, inner dimension contiguous so the
// compiler vectorizes it with FMA.
template <typename S>
void matmul_acc(const S* a, const S* b, S* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const S* ai = a + (int64_t)i * K;
        S* ci = c + (int64_t)i * N;
        for (int k = 0; k < K; ++k) {
            const S v = ai[k];
            const S* bk = b + (int64_t)k * N;
            for (int j = 0; j < N; ++j) ci[j] += v * bk[j];
        }
    }
}

// c[m,n] += a[k,m] * b[k,n]  (a transposed)
template <typename S>
void matmul_at_acc(const S* a, const S* b, S* c, int M, int K, int N) {
    for (int k = 0; k < K; ++k) {
        const S* ak = a + (int64_t)k * M;
        const S* bk = b + (int64_t)k * N;
        for (int i = 0; i < M; ++i) {
            const S v = ak[i];
            S* ci = c + (int64_t)i * N;
            for (int j = 0; j < N; ++j) ci[j] += v * bk[j];
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]  (b transposed)
template <typename S>
void matmul_bt_acc(const S* a, const S* b, S* c, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const S* ai = a + (int64_t)i * K;
        S* ci = c + (int64_t)i * N;
        for (int j = 0; j < N; ++j) {
            const S* bj = b + (int64_t)j * K;
            S acc = S(0);
            for (int k = 0; k < K; ++k) acc += ai[k] * bj[k];
            ci[j] += acc;
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
    std::vector<S> out(a.data());
    const auto& bd = b.data();
    for (int64_t i = 0; i < a.numel(); ++i) out[i] += bd[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](NodeT<S>& n) {
        detail::accumulate(pa, n.grad.data(), (int64_t)n.grad.size());
        detail::accumulate(pb, n.grad.data(), (int64_t)n.grad.size());
    });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
    std::vector<S> out(a.data());
    const auto& bd = b.data();
    for (int64_t i = 0; i < a.numel(); ++i) out[i] -= bd[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](NodeT<S>& n) {
        detail::accumulate(pa, n.grad.data(), (int64_t)n.grad.size());
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
    std::vector<S> out(a.data());
    const auto& bd = b.data();
    for (int64_t i = 0; i < a.numel(); ++i) out[i] *= bd[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [pa, pb](NodeT<S>& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
        }
    });
}

template <typename S>
TensorT<S> smul(const TensorT<S>& a, S c) {
    std::vector<S> out(a.data());
    for (S& x : out) x *= c;
    auto pa = a.node();
    return detail::make_op<S>(a.shape(), std::move(out), {a}, [pa, c](NodeT<S>& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * c;
        }
    });
}

// Adds a vector to the last axis of every row; the bias path of every linear
// and convolution layer.
template <typename S>
TensorT<S> add_bias(const TensorT<S>& x, const TensorT<S>& b) {
    if (b.rank() != 1 || x.rank() < 1 || x.shape().back() != b.dim(0))
        shape_fail("add_bias", x.shape(), b.shape());
    const int d = b.dim(0);
    const int64_t rows = x.numel() / d;
    std::vector<S> out(x.data());
    const auto& bd = b.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) out[r * d + j] += bd[j];
    auto px = x.node(), pb = b.node();
    return detail::make_op<S>(x.shape(), std::move(out), {x, b}, [px, pb, rows, d](NodeT<S>& n) {
        detail::accumulate(px, n.grad.data(), (int64_t)n.grad.size());
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) pb->grad[j] += n.grad[r * d + j];
        }
    });
}

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail("matmul", a.shape(), b.shape());
    const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
    std::vector<S> out((int64_t)M * N, S(0));
    detail::matmul_acc(a.data().data(), b.data().data(), out.data(), M, K, N);
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>({M, N}, std::move(out), {a, b}, [pa, pb, M, K, N](NodeT<S>& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            // dA = dC * B^T
            detail::matmul_bt_acc(n.grad.data(), pb->value.data(), pa->grad.data(), M, N, K);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            // dB = A^T * dC
            detail::matmul_at_acc(pa->value.data(), n.grad.data(), pb->grad.data(), K, M, N);
        }
    });
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
    if (a.rank() != 2) shape_fail("transpose", a.shape(), "expected a 2-d tensor");
    const int R = a.dim(0), C = a.dim(1);
    std::vector<S> out((int64_t)R * C);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out[(int64_t)j * R + i] = a.at(i, j);
    auto pa = a.node();
    return detail::make_op<S>({C, R}, std::move(out), {a}, [pa, R, C](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) pa->grad[(int64_t)i * C + j] += n.grad[(int64_t)j * R + i];
    });
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.numel()) shape_fail("reshape", a.shape(), new_shape);
    auto pa = a.node();
    return detail::make_op<S>(std::move(new_shape), std::vector<S>(a.data()), {a}, [pa](NodeT<S>& n) {
        detail::accumulate(pa, n.grad.data(), (int64_t)n.grad.size());
    });
}

template <typename S>
TensorT<S> concat(const TensorT<S>& a, const TensorT<S>& b, int axis) {
    if (a.rank() != b.rank() || axis < 0 || axis >= a.rank()) shape_fail("concat", a.shape(), b.shape());
    for (int i = 0; i < a.rank(); ++i)
        if (i != axis && a.dim(i) != b.dim(i)) shape_fail("concat", a.shape(), b.shape());
    Shape out_shape = a.shape();
    out_shape[axis] += b.dim(axis);

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const int64_t wa = a.dim(axis) * inner, wb = b.dim(axis) * inner;

    std::vector<S> out((int64_t)shape_numel(out_shape));
    for (int64_t o = 0; o < outer; ++o) {
        std::copy_n(a.data().data() + o * wa, wa, out.data() + o * (wa + wb));
        std::copy_n(b.data().data() + o * wb, wb, out.data() + o * (wa + wb) + wa);
    }
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>(std::move(out_shape), std::move(out), {a, b},
                              [pa, pb, outer, wa, wb](NodeT<S>& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < wa; ++i) pa->grad[o * wa + i] += n.grad[o * (wa + wb) + i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < wb; ++i) pb->grad[o * wb + i] += n.grad[o * (wa + wb) + wa + i];
        }
    });
}

template <typename S>
TensorT<S> slice(const TensorT<S>& a, int axis, int start, int len) {
    if (axis < 0 || axis >= a.rank() || start < 0 || len <= 0 || start + len > a.dim(axis))
        shape_fail("slice", a.shape(),
                   "axis " + std::to_string(axis) + " range [" + std::to_string(start) + ", " +
                       std::to_string(start + len) + ") out of bounds");
    Shape out_shape = a.shape();
    out_shape[axis] = len;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const int64_t wa = a.dim(axis) * inner, wo = (int64_t)len * inner, off = (int64_t)start * inner;

    std::vector<S> out(outer * wo);
    for (int64_t o = 0; o < outer; ++o) std::copy_n(a.data().data() + o * wa + off, wo, out.data() + o * wo);
    auto pa = a.node();
    return detail::make_op<S>(std::move(out_shape), std::move(out), {a},
                              [pa, outer, wa, wo, off](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < wo; ++i) pa->grad[o * wa + off + i] += n.grad[o * wo + i];
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum_all(const TensorT<S>& a) {
    S acc = S(0);
    for (S x : a.data()) acc += x;
    auto pa = a.node();
    return detail::make_op<S>({1}, {acc}, {a}, [pa](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (S& g : pa->grad) g += n.grad[0];
    });
}

template <typename S>
TensorT<S> mean_all(const TensorT<S>& a) {
    S acc = S(0);
    for (S x : a.data()) acc += x;
    const S inv = S(1) / S(a.numel());
    acc *= inv;
    auto pa = a.node();
    return detail::make_op<S>({1}, {acc}, {a}, [pa, inv](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (S& g : pa->grad) g += n.grad[0] * inv;
    });
}

// Euclidean norm over all elements.
template <typename S>
TensorT<S> l2_norm(const TensorT<S>& a) {
    S ss = S(0);
    for (S x : a.data()) ss += x * x;
    const S nrm = std::sqrt(ss);
    auto pa = a.node();
    return detail::make_op<S>({1}, {nrm}, {a}, [pa, nrm](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const S inv = nrm > S(0) ? S(1) / nrm : S(0);
        for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += n.grad[0] * pa->value[i] * inv;
    });
}

// Per-row Euclidean norm over the last axis; output shape [rows].
template <typename S>
TensorT<S> l2_norm_rows(const TensorT<S>& a) {
    if (a.rank() < 1) shape_fail("l2_norm_rows", a.shape(), "expected rank >= 1");
    const int d = a.shape().back();
    const int64_t rows = a.numel() / d;
    std::vector<S> out(rows);
    for (int64_t r = 0; r < rows; ++r) {
        S ss = S(0);
        for (int j = 0; j < d; ++j) {
            S x = a.data()[r * d + j];
            ss += x * x;
        }
        out[r] = std::sqrt(ss);
    }
    auto pa = a.node();
    return detail::make_op<S>({(int)rows}, std::move(out), {a}, [pa, rows, d](NodeT<S>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const S inv = n.value[r] > S(0) ? n.grad[r] / n.value[r] : S(0);
            for (int j = 0; j < d; ++j) pa->grad[r * d + j] += pa->value[r * d + j] * inv;
        }
    });
}

// Mean squared error over all elements.
template <typename S>
TensorT<S> squared_error(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) shape_fail("squared_error", a.shape(), b.shape());
    S acc = S(0);
    for (int64_t i = 0; i < a.numel(); ++i) {
        const S d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    const S inv = S(1) / S(a.numel());
    auto pa = a.node(), pb = b.node();
    return detail::make_op<S>({1}, {acc * inv}, {a, b}, [pa, pb, inv](NodeT<S>& n) {
        const S c = S(2) * inv * n.grad[0];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < pa->grad.size(); ++i)
                pa->grad[i] += c * (pa->value[i] - pb->value[i]);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < pb->grad.size(); ++i)
                pb->grad[i] -= c * (pa->value[i] - pb->value[i]);
        }
    });
}

template <typename S>
void backward(const TensorT<S>& loss) {
    loss.backward();
}

} // namespace uniid
