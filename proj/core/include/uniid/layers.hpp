#pragma once

#include <string>

#include "uniid/nn_ops.hpp"
#include "uniid/optim.hpp"
#include "uniid/rng.hpp"
#include "uniid/tensor.hpp"

namespace uniid {

// Small parameter-owning building blocks shared by the text encoder, the
// denoiser attention sites and the Q-Formers. Each registers its tensors in
// the caller's store under a prefix so checkpoints stay flat and named.

template <typename S>
struct LinearT {
    TensorT<S> w, b;

    LinearT() = default;
    LinearT(ParamStoreT<S>& store, const std::string& prefix, int in, int out, Rng& rng) {
        w = store.create(prefix + ".w", {in, out}, rng, S(1) / std::sqrt(S(in))).tensor;
        b = store.create_filled(prefix + ".b", {out}, S(0)).tensor;
    }

    TensorT<S> apply(const TensorT<S>& x) const { return add_bias(matmul(x, w), b); }
};

template <typename S>
struct LayerNormT {
    TensorT<S> gamma, beta;

    LayerNormT() = default;
    LayerNormT(ParamStoreT<S>& store, const std::string& prefix, int dim) {
        gamma = store.create_filled(prefix + ".g", {dim}, S(1)).tensor;
        beta = store.create_filled(prefix + ".b", {dim}, S(0)).tensor;
    }

    TensorT<S> apply(const TensorT<S>& x) const { return layer_norm(x, gamma, beta); }
};

// Multi-head attention with separate query and key/value inputs. Output is
// the concatenated head mix passed through the output projection.
template <typename S>
struct AttentionT {
    LinearT<S> wq, wk, wv, wo;
    int heads = 1;
    int d_model = 0;

    AttentionT() = default;
    AttentionT(ParamStoreT<S>& store, const std::string& prefix, int d_model_, int d_kv, int heads_,
               Rng& rng)
        : heads(heads_), d_model(d_model_) {
        wq = LinearT<S>(store, prefix + ".q", d_model_, d_model_, rng);
        wk = LinearT<S>(store, prefix + ".k", d_kv, d_model_, rng);
        wv = LinearT<S>(store, prefix + ".v", d_kv, d_model_, rng);
        wo = LinearT<S>(store, prefix + ".o", d_model_, d_model_, rng);
    }

    // Pre-projection attention mix; callers that need the raw head output
    // (the H / H' of the adapter merge) use this and apply wo themselves.
    TensorT<S> mix(const TensorT<S>& q_in, const TensorT<S>& kv_in) const {
        return mix_projected(wq.apply(q_in), kv_in);
    }

    TensorT<S> mix_projected(const TensorT<S>& q, const TensorT<S>& kv_in) const {
        const TensorT<S> k = wk.apply(kv_in);
        const TensorT<S> v = wv.apply(kv_in);
        const int dh = d_model / heads;
        TensorT<S> out;
        for (int h = 0; h < heads; ++h) {
            auto qh = slice(q, 1, h * dh, dh);
            auto kh = slice(k, 1, h * dh, dh);
            auto vh = slice(v, 1, h * dh, dh);
            auto oh = scaled_dot_attention(qh, kh, vh);
            out = h == 0 ? oh : concat(out, oh, 1);
        }
        return out;
    }

    TensorT<S> apply(const TensorT<S>& q_in, const TensorT<S>& kv_in) const {
        return wo.apply(mix(q_in, kv_in));
    }
};

template <typename S>
struct FeedForwardT {
    LinearT<S> w1, w2;

    FeedForwardT() = default;
    FeedForwardT(ParamStoreT<S>& store, const std::string& prefix, int d_model, int d_ffn, Rng& rng) {
        w1 = LinearT<S>(store, prefix + ".ff1", d_model, d_ffn, rng);
        w2 = LinearT<S>(store, prefix + ".ff2", d_ffn, d_model, rng);
    }

    TensorT<S> apply(const TensorT<S>& x) const { return w2.apply(silu(w1.apply(x))); }
};

} // namespace uniid
