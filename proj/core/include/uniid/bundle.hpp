#pragma once

#include <memory>
#include <string>

#include "uniid/checkpoint.hpp"
#include "uniid/denoiser.hpp"
#include "uniid/dual_branch.hpp"
#include "uniid/face_encoder.hpp"
#include "uniid/model_config.hpp"
#include "uniid/schedule.hpp"
#include "uniid/text_encoder.hpp"

namespace uniid {

// Everything inference needs, assembled from the four training stages. The
// base (text encoder + denoiser) and the identity encoder are frozen once
// their stage finishes; only the branch stores ever train afterwards.
template <typename S>
struct BundleT {
    ModelConfig cfg;
    Vocabulary vocab;
    NoiseSchedule schedule;

    std::unique_ptr<TextEncoderT<S>> text_encoder;
    std::unique_ptr<DenoiserT<S>> denoiser;
    std::unique_ptr<FaceEncoderT<S>> face_encoder;
    std::unique_ptr<AttributeClassifierT<S>> attr_classifier;
    std::unique_ptr<QFormerT<S>> text_branch;
    std::unique_ptr<QFormerT<S>> adapter_branch;
    std::unique_ptr<AdapterProjectionsT<S>> adapter_proj;

    MeanNameEmbeddingT<S> mean_name; // derived from the frozen text encoder

    // Identity-metric calibration recorded at encoder training time.
    float separation_margin = 0.0f;
    float inter_identity_baseline = 0.0f;

    static BundleT create(const ModelConfig& cfg, int n_face_classes, uint64_t seed) {
        BundleT b;
        b.cfg = cfg;
        b.vocab = Vocabulary::standard(cfg.n_names);
        b.schedule = NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
        Rng rng(seed);
        b.text_encoder = std::make_unique<TextEncoderT<S>>(b.vocab.size(), cfg, rng);
        b.denoiser = std::make_unique<DenoiserT<S>>(cfg, rng);
        b.face_encoder = std::make_unique<FaceEncoderT<S>>(n_face_classes, cfg, rng);
        b.attr_classifier = std::make_unique<AttributeClassifierT<S>>(cfg, rng);
        b.text_branch = std::make_unique<QFormerT<S>>(QFormerSpec::text_branch(cfg), "tb", rng);
        b.adapter_branch =
            std::make_unique<QFormerT<S>>(QFormerSpec::adapter_branch(cfg), "ab", rng);
        b.adapter_proj =
            std::make_unique<AdapterProjectionsT<S>>(b.denoiser->site_widths(), cfg.d_adp, rng);
        return b;
    }

    void refresh_mean_name() { mean_name = mean_name_embedding(vocab, *text_encoder); }

    void freeze_base() {
        text_encoder->params().set_frozen(true);
        denoiser->params().set_frozen(true);
    }
    void freeze_face() {
        face_encoder->params().set_frozen(true);
        attr_classifier->params().set_frozen(true);
    }
};

using Bundle = BundleT<float>;

// Stage checkpoints. Each carries the model config and enough metadata to
// reconstruct and freeze the stage on load.
void save_base_checkpoint(const Bundle& b, const std::string& path);
void load_base_checkpoint(Bundle& b, const std::string& path); // freezes base

void save_face_checkpoint(const Bundle& b, const std::string& path);
void load_face_checkpoint(Bundle& b, const std::string& path); // freezes encoder

void save_branch_checkpoint(const Bundle& b, bool text_branch, const std::string& path);
void load_branch_checkpoint(Bundle& b, bool text_branch, const std::string& path);

// Convenience: create a bundle sized for the checkpoints in a directory and
// load all four stages (base.ckpt, face.ckpt, text_branch.ckpt,
// adapter_branch.ckpt).
Bundle load_bundle(const std::string& dir);
void save_bundle(const Bundle& b, const std::string& dir);

} // namespace uniid
