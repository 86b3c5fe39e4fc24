#include "uniid/sampler.hpp"

namespace uniid {

namespace {

// Conditioning is constant across the reverse loop, so it is built once.
struct PreparedContext {
    DenoiserContext cond;
    std::optional<DenoiserContext> uncond;
};

PreparedContext build_context(const Bundle& b, const Image* reference, const std::string& prompt,
                              const SamplerConfig& cfg, NormProfile* probe) {
    const RescaleConfig& rc = cfg.rescale;
    const TokenizedPrompt toks = tokenize(b.vocab, prompt, b.cfg.seq_len);
    if (rc.text_enabled && !toks.name_slots)
        throw std::invalid_argument(
            "personalize: prompt must contain <id> when the text branch is enabled");

    std::optional<Tensor> feature;
    if (rc.text_enabled || rc.adapter_enabled) {
        if (!reference)
            throw std::invalid_argument("personalize: reference image required with a branch enabled");
        feature = b.face_encoder->features(image_to_rows<float>(*reference));
    }

    PreparedContext out;
    TokenEmbeddingSequence seq = b.text_encoder->encode(toks);
    if (rc.text_enabled) {
        Tensor e_prime = b.text_branch->map(*feature);
        if (probe)
            for (int k = 0; k < 3; ++k) {
                double ss = 0;
                for (int j = 0; j < e_prime.dim(1); ++j)
                    ss += (double)e_prime.at(k, j) * e_prime.at(k, j);
                probe->add_text_sample(std::sqrt(ss), b.mean_name.norm);
            }
        const Tensor e_star =
            rc.text_rescale_enabled
                ? rescale_name_triple(e_prime, b.mean_name, rc.beta, rc.per_token_text_rescale)
                : e_prime;
        seq = splice_name_embeddings(seq, e_star);
    }
    out.cond.text = seq.embeddings;
    if (rc.adapter_enabled) {
        out.cond.adapter_tokens = b.adapter_branch->map(*feature);
        out.cond.adapter_proj = b.adapter_proj.get();
    }
    out.cond.rescale = rc;
    out.cond.probe = probe;

    if (cfg.guidance_scale != 1.0) {
        DenoiserContext un;
        un.text = b.text_encoder->encode(tokenize(b.vocab, "", b.cfg.seq_len)).embeddings;
        un.rescale = rc;
        un.rescale.adapter_enabled = false;
        un.rescale.text_enabled = false;
        out.uncond = std::move(un);
    }
    return out;
}

} // namespace

Image generate_image(const Bundle& b, const Image* reference, const std::string& prompt,
                     const SamplerConfig& cfg, NormProfile* probe) {
    cfg.validate(b.schedule.timesteps);
    NoGradGuard ng;

    const PreparedContext ctx = build_context(b, reference, prompt, cfg, probe);
    const int hw = b.cfg.image_size;
    Rng rng(cfg.seed);
    Tensor x = Tensor::randn({hw * hw, 3}, rng);

    const std::vector<int> grid = sample_time_grid(b.schedule.timesteps, cfg.steps);
    for (int k = (int)grid.size() - 1; k >= 0; --k) {
        const int t = grid[k];
        const int t_prev = k > 0 ? grid[k - 1] : -1;
        Tensor eps = b.denoiser->forward(x, t, ctx.cond);
        if (ctx.uncond) {
            const Tensor eps_u = b.denoiser->forward(x, t, *ctx.uncond);
            // eps_u + g (eps - eps_u)
            eps = add(eps_u, smul(sub(eps, eps_u), (float)cfg.guidance_scale));
        }
        x = sample_step(x, t, t_prev, eps, b.schedule, cfg.kind, &rng);
    }
    return rows_to_image(x, hw, hw);
}

Image personalize(const Bundle& b, const Image& reference, const std::string& prompt,
                  const SamplerConfig& cfg) {
    return generate_image(b, &reference, prompt, cfg);
}

Image sample_base(const Bundle& b, const std::string& prompt, const SamplerConfig& cfg) {
    SamplerConfig base_cfg = cfg;
    base_cfg.rescale.adapter_enabled = false;
    base_cfg.rescale.text_enabled = false;
    return generate_image(b, nullptr, prompt, base_cfg);
}

} // namespace uniid
