#pragma once

#include <cstdio>
#include <vector>

#include "uniid/layers.hpp"
#include "uniid/model_config.hpp"
#include "uniid/nn_ops.hpp"
#include "uniid/tensor_convert.hpp"

namespace uniid {

// Raw penultimate activation of the frozen identity encoder. Consumers that
// want unit scale normalize themselves.
using IdentityFeature = std::vector<float>;

// Cosine similarity; zero-norm inputs score 0 with a warning instead of
// dividing by zero.
inline float identity_similarity(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += (double)a[i] * b[i];
        na += (double)a[i] * a[i];
        nb += (double)b[i] * b[i];
    }
    if (na <= 0 || nb <= 0) {
        std::fprintf(stderr, "identity_similarity: zero-norm embedding, returning 0\n");
        return 0.0f;
    }
    return (float)(dot / (std::sqrt(na) * std::sqrt(nb)));
}

// Identity classifier: three strided conv blocks and a linear head. The
// penultimate linear output is the identity feature; the head only exists for
// training and is dropped from conditioning use.
template <typename S>
class FaceEncoderT {
public:
    FaceEncoderT(int n_classes, const ModelConfig& cfg, Rng& rng) : cfg_(cfg), n_classes_(n_classes) {
        const int hw = cfg.image_size;
        conv1_w_ = params_.create("face.conv1.w", {3 * 9, cfg.enc_c1}, rng, init(3 * 9)).tensor;
        conv1_b_ = params_.create_filled("face.conv1.b", {cfg.enc_c1}, S(0)).tensor;
        conv2_w_ = params_.create("face.conv2.w", {cfg.enc_c1 * 9, cfg.enc_c2}, rng, init(cfg.enc_c1 * 9)).tensor;
        conv2_b_ = params_.create_filled("face.conv2.b", {cfg.enc_c2}, S(0)).tensor;
        conv3_w_ = params_.create("face.conv3.w", {cfg.enc_c2 * 9, cfg.enc_c3}, rng, init(cfg.enc_c2 * 9)).tensor;
        conv3_b_ = params_.create_filled("face.conv3.b", {cfg.enc_c3}, S(0)).tensor;
        const int flat = (hw / 8) * (hw / 8) * cfg.enc_c3;
        fc_ = LinearT<S>(params_, "face.fc", flat, cfg.d_id, rng);
        head_ = LinearT<S>(params_, "face.head", cfg.d_id, n_classes, rng);
    }

    // [H*W, 3] rows in [-1, 1] -> [1, d_id]
    TensorT<S> features(const TensorT<S>& rows) const {
        const int hw = cfg_.image_size;
        if (rows.rank() != 2 || rows.dim(0) != hw * hw || rows.dim(1) != 3)
            shape_fail("embed_face", rows.shape(), "expected [" + std::to_string(hw * hw) + "x3]");
        auto h = silu(conv3x3(rows, conv1_w_, conv1_b_, hw, hw, 2));
        h = silu(conv3x3(h, conv2_w_, conv2_b_, hw / 2, hw / 2, 2));
        h = silu(conv3x3(h, conv3_w_, conv3_b_, hw / 4, hw / 4, 2));
        h = reshape(h, {1, (hw / 8) * (hw / 8) * cfg_.enc_c3});
        return fc_.apply(h);
    }

    TensorT<S> logits(const TensorT<S>& rows) const { return head_.apply(silu(features(rows))); }

    IdentityFeature embed(const Image& im) const {
        NoGradGuard ng;
        auto f = features(image_to_rows<S>(im));
        IdentityFeature out(f.numel());
        for (int64_t i = 0; i < f.numel(); ++i) out[i] = (float)f.data()[i];
        return out;
    }

    ParamStoreT<S>& params() { return params_; }
    const ParamStoreT<S>& params() const { return params_; }
    int n_classes() const { return n_classes_; }
    const ModelConfig& config() const { return cfg_; }

private:
    static S init(int fan_in) { return S(1) / std::sqrt(S(fan_in)); }

    ModelConfig cfg_;
    int n_classes_;
    ParamStoreT<S> params_;
    TensorT<S> conv1_w_, conv1_b_, conv2_w_, conv2_b_, conv3_w_, conv3_b_;
    LinearT<S> fc_, head_;
};

using FaceEncoder = FaceEncoderT<float>;

// Composition grader used by the controllability metric: three classification
// heads over a shared trunk. Trained alongside the face encoder on clean
// renders, then frozen.
template <typename S>
class AttributeClassifierT {
public:
    AttributeClassifierT(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int hw = cfg.image_size;
        conv1_w_ = params_.create("attr.conv1.w", {3 * 9, cfg.attr_c1}, rng, init(27)).tensor;
        conv1_b_ = params_.create_filled("attr.conv1.b", {cfg.attr_c1}, S(0)).tensor;
        conv2_w_ = params_.create("attr.conv2.w", {cfg.attr_c1 * 9, cfg.attr_c2}, rng,
                                  init(cfg.attr_c1 * 9)).tensor;
        conv2_b_ = params_.create_filled("attr.conv2.b", {cfg.attr_c2}, S(0)).tensor;
        const int flat = (hw / 4) * (hw / 4) * cfg.attr_c2;
        fc_ = LinearT<S>(params_, "attr.fc", flat, cfg.attr_fc, rng);
        head_bg_ = LinearT<S>(params_, "attr.head_bg", cfg.attr_fc, 4, rng);
        head_style_ = LinearT<S>(params_, "attr.head_style", cfg.attr_fc, 2, rng);
        head_acc_ = LinearT<S>(params_, "attr.head_acc", cfg.attr_fc, 2, rng);
    }

    struct Logits {
        TensorT<S> background, style, accessory;
    };

    Logits logits(const TensorT<S>& rows) const {
        const int hw = cfg_.image_size;
        auto h = silu(conv3x3(rows, conv1_w_, conv1_b_, hw, hw, 2));
        h = silu(conv3x3(h, conv2_w_, conv2_b_, hw / 2, hw / 2, 2));
        h = silu(fc_.apply(reshape(h, {1, (hw / 4) * (hw / 4) * cfg_.attr_c2})));
        return {head_bg_.apply(h), head_style_.apply(h), head_acc_.apply(h)};
    }

    struct Prediction {
        int background = 0;
        int style = 0;
        int accessory = 0;
    };

    Prediction classify(const Image& im) const {
        NoGradGuard ng;
        const Logits lg = logits(image_to_rows<S>(im));
        return {argmax(lg.background), argmax(lg.style), argmax(lg.accessory)};
    }

    ParamStoreT<S>& params() { return params_; }
    const ParamStoreT<S>& params() const { return params_; }

private:
    static S init(int fan_in) { return S(1) / std::sqrt(S(fan_in)); }
    static int argmax(const TensorT<S>& t) {
        int best = 0;
        for (int64_t i = 1; i < t.numel(); ++i)
            if (t.data()[i] > t.data()[best]) best = (int)i;
        return best;
    }

    ModelConfig cfg_;
    ParamStoreT<S> params_;
    TensorT<S> conv1_w_, conv1_b_, conv2_w_, conv2_b_;
    LinearT<S> fc_, head_bg_, head_style_, head_acc_;
};

using AttributeClassifier = AttributeClassifierT<float>;

} // namespace uniid
