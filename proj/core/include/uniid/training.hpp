#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uniid/bundle.hpp"
#include "uniid/sampler.hpp"
#include "uniid/synth_faces.hpp"
#include "uniid/tensor_convert.hpp"

namespace uniid {

// Eq.-1 style objective over a batch: for each element draw t uniform and eps
// standard normal, noise the input, and average the per-element mean squared
// error between true and predicted noise. ModelFn maps (x_t, t) -> eps_hat.
template <typename S, typename ModelFn>
TensorT<S> diffusion_loss(const std::vector<TensorT<S>>& batch_x0, ModelFn&& model,
                          const NoiseSchedule& sched, Rng& rng) {
    if (batch_x0.empty()) throw std::invalid_argument("diffusion_loss: empty batch");
    TensorT<S> total;
    for (size_t i = 0; i < batch_x0.size(); ++i) {
        const int t = (int)rng.uniform_int(0, sched.timesteps - 1);
        TensorT<S> eps = TensorT<S>::randn(batch_x0[i].shape(), rng);
        TensorT<S> x_t = q_sample(batch_x0[i], t, eps, sched);
        TensorT<S> term = squared_error(model(x_t, t), eps);
        total = i == 0 ? term : add(total, term);
    }
    return smul(total, S(1) / S(batch_x0.size()));
}

struct TrainStats {
    std::vector<float> epoch_losses;
    float first_epoch_loss = 0.0f;
    float final_epoch_loss = 0.0f;

    void push(float loss) {
        epoch_losses.push_back(loss);
        if (epoch_losses.size() == 1) first_epoch_loss = loss;
        final_epoch_loss = loss;
    }
    void save_csv(const std::string& path) const;
};

// ---------------------------------------------------------------------------
// Stage 1: base pretraining (denoiser + text encoder jointly, compositional
// split, full captions, caption dropout for classifier-free guidance).
// ---------------------------------------------------------------------------

struct PretrainConfig {
    int epochs = 14;
    double learning_rate = 1.5e-3;
    int batch_size = 16;
    double caption_dropout = 0.1;
    uint64_t seed = 1;
};

TrainStats pretrain_base(Bundle& b, const Dataset& ds, const PretrainConfig& cfg);

// ---------------------------------------------------------------------------
// Stage 2: identity encoder + attribute classifier (compositional split),
// frozen afterwards. Records the identity-metric calibration into the bundle.
// ---------------------------------------------------------------------------

struct EncoderTrainConfig {
    int epochs = 16;
    double learning_rate = 1e-3;
    int batch_size = 16;
    uint64_t seed = 2;
};

struct EncoderTrainStats {
    TrainStats face;
    TrainStats attributes;
    float held_out_accuracy = 0.0f;      // unseen images, train identities
    float attr_held_out_accuracy = 0.0f; // per-attribute mean on fresh renders
    float intra_similarity = 0.0f;
    float inter_similarity = 0.0f;
    float margin = 0.0f; // intra - inter
};

EncoderTrainStats train_face_encoder(Bundle& b, const Dataset& ds, const EncoderTrainConfig& cfg);

// ---------------------------------------------------------------------------
// Stage 3: branch training (portrait split, minimal prompts, frozen base).
// ---------------------------------------------------------------------------

struct BranchTrainingConfig {
    enum class Branch { kText, kAdapter };
    Branch branch = Branch::kText;
    int epochs = 12;
    double learning_rate = 1e-4; // adapter default is 1e-5
    int batch_size = 8;
    uint64_t seed = 3;

    static BranchTrainingConfig text_defaults() {
        BranchTrainingConfig c;
        c.branch = Branch::kText;
        c.learning_rate = 1e-4;
        return c;
    }
    static BranchTrainingConfig adapter_defaults() {
        BranchTrainingConfig c;
        c.branch = Branch::kAdapter;
        c.learning_rate = 1e-5;
        return c;
    }
};

TrainStats train_text_branch(Bundle& b, const Dataset& ds, const BranchTrainingConfig& cfg);
TrainStats train_adapter_branch(Bundle& b, const Dataset& ds, const BranchTrainingConfig& cfg);

} // namespace uniid
