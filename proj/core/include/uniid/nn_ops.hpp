#pragma once

#include "uniid/tensor.hpp"

namespace uniid {

// Softmax over the last axis.
template <typename S>
TensorT<S> softmax(const TensorT<S>& x) {
    if (x.rank() < 1) shape_fail("softmax", x.shape(), "expected rank >= 1");
    const int d = x.shape().back();
    const int64_t rows = x.numel() / d;
    std::vector<S> out(x.numel());
    for (int64_t r = 0; r < rows; ++r) {
        const S* in = x.data().data() + r * d;
        S* o = out.data() + r * d;
        S mx = in[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, in[j]);
        S sum = S(0);
        for (int j = 0; j < d; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        const S inv = S(1) / sum;
        for (int j = 0; j < d; ++j) o[j] *= inv;
    }
    auto px = x.node();
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [px, rows, d](NodeT<S>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const S* y = n.value.data() + r * d;
            const S* g = n.grad.data() + r * d;
            S dot = S(0);
            for (int j = 0; j < d; ++j) dot += y[j] * g[j];
            for (int j = 0; j < d; ++j) px->grad[r * d + j] += y[j] * (g[j] - dot);
        }
    });
}

// log(softmax(x)) over the last axis, computed stably; the cross-entropy path.
template <typename S>
TensorT<S> log_softmax(const TensorT<S>& x) {
    if (x.rank() < 1) shape_fail("log_softmax", x.shape(), "expected rank >= 1");
    const int d = x.shape().back();
    const int64_t rows = x.numel() / d;
    std::vector<S> out(x.numel());
    for (int64_t r = 0; r < rows; ++r) {
        const S* in = x.data().data() + r * d;
        S* o = out.data() + r * d;
        S mx = in[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, in[j]);
        S sum = S(0);
        for (int j = 0; j < d; ++j) sum += std::exp(in[j] - mx);
        const S lse = mx + std::log(sum);
        for (int j = 0; j < d; ++j) o[j] = in[j] - lse;
    }
    auto px = x.node();
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [px, rows, d](NodeT<S>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const S* y = n.value.data() + r * d;
            const S* g = n.grad.data() + r * d;
            S gsum = S(0);
            for (int j = 0; j < d; ++j) gsum += g[j];
            for (int j = 0; j < d; ++j) px->grad[r * d + j] += g[j] - std::exp(y[j]) * gsum;
        }
    });
}

// Layer norm over the last axis with learnable per-channel gain and bias.
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                      S eps = S(1e-5)) {
    const int d = x.shape().back();
    if (gamma.rank() != 1 || gamma.dim(0) != d) shape_fail("layer_norm", x.shape(), gamma.shape());
    if (beta.rank() != 1 || beta.dim(0) != d) shape_fail("layer_norm", x.shape(), beta.shape());
    const int64_t rows = x.numel() / d;
    std::vector<S> out(x.numel());
    std::vector<S> xhat(x.numel());
    std::vector<S> inv_std(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const S* in = x.data().data() + r * d;
        S mu = S(0);
        for (int j = 0; j < d; ++j) mu += in[j];
        mu /= S(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= S(d);
        const S is = S(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int j = 0; j < d; ++j) {
            const S h = (in[j] - mu) * is;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gamma.data()[j] + beta.data()[j];
        }
    }
    auto px = x.node(), pg = gamma.node(), pb = beta.node();
    return detail::make_op<S>(x.shape(), std::move(out), {x, gamma, beta},
                              [px, pg, pb, rows, d, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](NodeT<S>& n) {
        if (pg->requires_grad) {
            pg->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) pg->grad[j] += n.grad[r * d + j] * xhat[r * d + j];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) pb->grad[j] += n.grad[r * d + j];
        }
        if (px->requires_grad) {
            px->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                // dxhat = dy * gamma; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                S m1 = S(0), m2 = S(0);
                for (int j = 0; j < d; ++j) {
                    const S dxh = n.grad[r * d + j] * pg->value[j];
                    m1 += dxh;
                    m2 += dxh * xhat[r * d + j];
                }
                m1 /= S(d);
                m2 /= S(d);
                for (int j = 0; j < d; ++j) {
                    const S dxh = n.grad[r * d + j] * pg->value[j];
                    px->grad[r * d + j] += (dxh - m1 - xhat[r * d + j] * m2) * inv_std[r];
                }
            }
        }
    });
}

template <typename S>
TensorT<S> silu(const TensorT<S>& x) {
    std::vector<S> out(x.numel());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const S v = x.data()[i];
        out[i] = v / (S(1) + std::exp(-v));
    }
    auto px = x.node();
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [px](NodeT<S>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const S v = px->value[i];
            const S sig = S(1) / (S(1) + std::exp(-v));
            px->grad[i] += n.grad[i] * (sig * (S(1) + v * (S(1) - sig)));
        }
    });
}

// Row lookup: out[i] = table[ids[i]]; gradient scatter-adds into the table.
template <typename S>
TensorT<S> embedding(const TensorT<S>& table, const std::vector<int>& ids) {
    if (table.rank() != 2) shape_fail("embedding", table.shape(), "expected a 2-d table");
    const int V = table.dim(0), D = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= V)
            shape_fail("embedding", table.shape(), "id " + std::to_string(id) + " out of range");
    std::vector<S> out((int64_t)ids.size() * D);
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table.data().data() + (int64_t)ids[i] * D, D, out.data() + i * D);
    auto pt = table.node();
    return detail::make_op<S>({(int)ids.size(), D}, std::move(out), {table}, [pt, ids, D](NodeT<S>& n) {
        if (!pt->requires_grad) return;
        pt->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < D; ++j) pt->grad[(int64_t)ids[i] * D + j] += n.grad[i * D + j];
    });
}

namespace detail {

// Index map for 3x3 same-padded convolution on row-major [H*W, C] activations:
// for each output pixel, the 9 input pixel indices (-1 where padding).
inline std::vector<int> conv3x3_taps(int H, int W, int stride) {
    const int Ho = H / stride, Wo = W / stride;
    std::vector<int> taps((int64_t)Ho * Wo * 9);
    int64_t p = 0;
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx) {
                    const int iy = oy * stride + ky, ix = ox * stride + kx;
                    taps[p++] = (iy < 0 || iy >= H || ix < 0 || ix >= W) ? -1 : iy * W + ix;
                }
    return taps;
}

} // namespace detail

// 3x3 convolution, padding 1, stride 1 or 2, on a [H*W, C_in] activation map.
// Weight layout [C_in*9, C_out] (tap-major, channel minor per tap), bias
// [C_out]. Implemented as im2col followed by one matmul so the hot loop is the
// shared matmul kernel.
template <typename S>
TensorT<S> conv3x3(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int H, int W,
                   int stride = 1) {
    if (x.rank() != 2 || x.dim(0) != H * W) shape_fail("conv3x3", x.shape(), "rows != H*W");
    const int Cin = x.dim(1);
    if (w.rank() != 2 || w.dim(0) != Cin * 9) shape_fail("conv3x3", w.shape(), x.shape());
    const int Cout = w.dim(1);
    if (b.rank() != 1 || b.dim(0) != Cout) shape_fail("conv3x3", b.shape(), w.shape());
    if (stride != 1 && stride != 2) shape_fail("conv3x3", x.shape(), "stride must be 1 or 2");

    const int Ho = H / stride, Wo = W / stride;
    const int64_t rows = (int64_t)Ho * Wo;
    const int K = Cin * 9;
    auto taps = detail::conv3x3_taps(H, W, stride);

    std::vector<S> col(rows * K, S(0));
    const S* xd = x.data().data();
    for (int64_t r = 0; r < rows; ++r)
        for (int t = 0; t < 9; ++t) {
            const int src = taps[r * 9 + t];
            if (src >= 0) std::copy_n(xd + (int64_t)src * Cin, Cin, col.data() + r * K + (int64_t)t * Cin);
        }

    std::vector<S> out(rows * Cout, S(0));
    detail::matmul_acc(col.data(), w.data().data(), out.data(), (int)rows, K, Cout);
    for (int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < Cout; ++c) out[r * Cout + c] += b.data()[c];

    auto px = x.node(), pw = w.node(), pb = b.node();
    return detail::make_op<S>({(int)rows, Cout}, std::move(out), {x, w, b},
                              [px, pw, pb, rows, K, Cin, Cout, taps = std::move(taps),
                               col = std::move(col)](NodeT<S>& n) {
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int c = 0; c < Cout; ++c) pb->grad[c] += n.grad[r * Cout + c];
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            // dW = col^T * dY
            detail::matmul_at_acc(col.data(), n.grad.data(), pw->grad.data(), K, (int)rows, Cout);
        }
        if (px->requires_grad) {
            px->ensure_grad();
            // dcol = dY * W^T (W transposed once so the hot loop stays the
            // contiguous kernel), then col2im scatter-add
            std::vector<S> wt((int64_t)Cout * K);
            for (int k = 0; k < K; ++k)
                for (int c = 0; c < Cout; ++c) wt[(int64_t)c * K + k] = pw->value[(int64_t)k * Cout + c];
            std::vector<S> dcol(rows * K, S(0));
            detail::matmul_acc(n.grad.data(), wt.data(), dcol.data(), (int)rows, Cout, K);
            for (int64_t r = 0; r < rows; ++r)
                for (int t = 0; t < 9; ++t) {
                    const int dst = taps[r * 9 + t];
                    if (dst < 0) continue;
                    S* g = px->grad.data() + (int64_t)dst * Cin;
                    const S* d = dcol.data() + r * K + (int64_t)t * Cin;
                    for (int c = 0; c < Cin; ++c) g[c] += d[c];
                }
        }
    });
}

// Nearest-neighbor 2x upsample of a [H*W, C] map to [(2H)*(2W), C].
template <typename S>
TensorT<S> upsample2x(const TensorT<S>& x, int H, int W) {
    if (x.rank() != 2 || x.dim(0) != H * W) shape_fail("upsample2x", x.shape(), "rows != H*W");
    const int C = x.dim(1);
    const int W2 = 2 * W;
    std::vector<S> out((int64_t)4 * H * W * C);
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            const S* src = x.data().data() + ((int64_t)y * W + xx) * C;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    std::copy_n(src, C, out.data() + ((int64_t)(2 * y + dy) * W2 + 2 * xx + dx) * C);
        }
    auto px = x.node();
    return detail::make_op<S>({4 * H * W, C}, std::move(out), {x}, [px, H, W, C, W2](NodeT<S>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                S* g = px->grad.data() + ((int64_t)y * W + xx) * C;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const S* d = n.grad.data() + ((int64_t)(2 * y + dy) * W2 + 2 * xx + dx) * C;
                        for (int c = 0; c < C; ++c) g[c] += d[c];
                    }
            }
    });
}

// softmax(Q K^T / sqrt(d)) V  -- single-head scaled dot-product attention.
template <typename S>
TensorT<S> scaled_dot_attention(const TensorT<S>& q, const TensorT<S>& k, const TensorT<S>& v) {
    const S inv_sqrt_d = S(1) / std::sqrt(S(q.dim(1)));
    auto scores = smul(matmul(q, transpose(k)), inv_sqrt_d);
    return matmul(softmax(scores), v);
}

// Mean negative log-likelihood of integer labels under row-wise logits.
template <typename S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || (int)labels.size() != logits.dim(0))
        shape_fail("cross_entropy", logits.shape(), "label count mismatch");
    const int n = logits.dim(0), d = logits.dim(1);
    auto lp = log_softmax(logits);
    std::vector<S> mask((int64_t)n * d, S(0));
    for (int i = 0; i < n; ++i) mask[(int64_t)i * d + labels[i]] = S(-1) / S(n);
    return sum_all(mul(lp, TensorT<S>::from({n, d}, std::move(mask))));
}

} // namespace uniid
