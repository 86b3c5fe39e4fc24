#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uniid/bundle.hpp"
#include "uniid/tensor_convert.hpp"

namespace uniid {

struct SamplerConfig {
    enum class Kind { kDeterministic, kAncestral };

    int steps = 30;
    Kind kind = Kind::kDeterministic;
    double guidance_scale = 1.0; // 1.0 = off
    RescaleConfig rescale;
    uint64_t seed = 0;

    void validate(int timesteps) const {
        if (steps < 1 || steps > timesteps)
            throw std::invalid_argument("sampler: steps must be in [1, T]");
        if (guidance_scale < 0) throw std::invalid_argument("sampler: guidance_scale must be >= 0");
        rescale.validate();
    }
};

// Subsampled timestep grid, ascending, always covering 0 and T-1.
inline std::vector<int> sample_time_grid(int timesteps, int steps) {
    std::vector<int> grid;
    if (steps == 1) return {timesteps - 1};
    grid.reserve(steps);
    for (int k = 0; k < steps; ++k) {
        int t = (int)std::lround((double)(timesteps - 1) * (double)k / (double)(steps - 1));
        if (!grid.empty() && t <= grid.back()) t = grid.back() + 1;
        grid.push_back(std::min(t, timesteps - 1));
    }
    return grid;
}

// One reverse-process update from t_cur to t_prev. t_prev < 0 returns the
// clean-image estimate (sqrt(ab)^-1 (x_t - sqrt(1-ab) eps_hat)). The
// deterministic path is the eta=0 update on the subsampled grid; the
// ancestral path adds the posterior noise. rng == nullptr injects zero noise.
template <typename S>
TensorT<S> sample_step(const TensorT<S>& x_t, int t_cur, int t_prev, const TensorT<S>& eps_hat,
                       const NoiseSchedule& sched, SamplerConfig::Kind kind, Rng* rng) {
    if (x_t.shape() != eps_hat.shape()) shape_fail("sample_step", x_t.shape(), eps_hat.shape());
    const double ab_cur = sched.alpha_bar(t_cur);
    // x0_hat = (x_t - sqrt(1 - ab) eps) / sqrt(ab)
    TensorT<S> x0_hat = smul(sub(x_t, smul(eps_hat, (S)std::sqrt(1.0 - ab_cur))),
                             (S)(1.0 / std::sqrt(ab_cur)));
    if (t_prev < 0) return x0_hat;

    const double ab_prev = sched.alpha_bar(t_prev);
    if (kind == SamplerConfig::Kind::kDeterministic) {
        return add(smul(x0_hat, (S)std::sqrt(ab_prev)), smul(eps_hat, (S)std::sqrt(1.0 - ab_prev)));
    }
    // ancestral: posterior variance between grid points
    const double ratio = ab_cur / ab_prev;
    const double sigma2 = (1.0 - ab_prev) / (1.0 - ab_cur) * (1.0 - ratio);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma2));
    TensorT<S> out = add(smul(x0_hat, (S)std::sqrt(ab_prev)), smul(eps_hat, (S)dir));
    if (rng && sigma2 > 0) {
        TensorT<S> z = TensorT<S>::randn(x_t.shape(), *rng);
        out = add(out, smul(z, (S)std::sqrt(sigma2)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full generation pipelines
// ---------------------------------------------------------------------------

// Merged dual-branch personalized sampling: identity feature -> both branch
// Q-Formers -> name rescaling + splice, adapter tokens at every attention
// site, then the reverse loop from pure noise. Deterministic given cfg.seed.
Image personalize(const Bundle& b, const Image& reference, const std::string& prompt,
                  const SamplerConfig& cfg);

// Base model sampling (both branches off). personalize() with branches
// disabled produces bit-identical pixels for the same seed.
Image sample_base(const Bundle& b, const std::string& prompt, const SamplerConfig& cfg);

// Shared worker: optional precomputed identity feature; reference may be null
// when both branches are disabled.
Image generate_image(const Bundle& b, const Image* reference, const std::string& prompt,
                     const SamplerConfig& cfg, NormProfile* probe = nullptr);

} // namespace uniid
