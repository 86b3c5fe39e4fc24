#pragma once

#include <optional>
#include <vector>

#include "uniid/dual_branch.hpp"
#include "uniid/layers.hpp"
#include "uniid/model_config.hpp"
#include "uniid/nn_ops.hpp"
#include "uniid/schedule.hpp"
#include "uniid/text_encoder.hpp"

namespace uniid {

// Conditioning for one denoiser pass. Adapter tokens come with the projections
// that turn them into per-site keys/values; both live in the adapter branch,
// the base denoiser owns no adapter parameters.
template <typename S>
struct DenoiserContextT {
    TensorT<S> text; // [L, d_txt] output embeddings (possibly spliced)
    std::optional<TensorT<S>> adapter_tokens; // [M, d_adp]
    const AdapterProjectionsT<S>* adapter_proj = nullptr;
    RescaleConfig rescale;
    NormProfile* probe = nullptr; // set to record per-site |H|, |H'|
};

// Epsilon-prediction network over [H*W, 3] rows: conv stem at full resolution,
// strided descent to half resolution and back, sinusoidal timestep embedding
// added per block, text cross-attention at four sites (two per resolution).
//
//   site 0: full res, encoder side      site 1/2: half res, middle
//   site 3: full res, decoder side
template <typename S>
class DenoiserT {
public:
    static constexpr int kNumSites = 4;

    DenoiserT(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int c1 = cfg.den_c1, c2 = cfg.den_c2, dt = cfg.den_t;
        time1_ = LinearT<S>(params_, "den.time1", dt, dt, rng);
        time2_ = LinearT<S>(params_, "den.time2", dt, dt, rng);

        conv_in_w_ = conv_w("den.conv_in", 3, c1, rng);
        conv_in_b_ = conv_b("den.conv_in", c1);

        enc_res_ = ResBlock(params_, "den.enc", c1, dt, rng);
        sites_[0] = Site(params_, "den.site0", c1, cfg, rng);

        down_w_ = conv_w("den.down", c1, c2, rng);
        down_b_ = conv_b("den.down", c2);

        sites_[1] = Site(params_, "den.site1", c2, cfg, rng);
        mid_res_ = ResBlock(params_, "den.mid", c2, dt, rng);
        sites_[2] = Site(params_, "den.site2", c2, cfg, rng);

        up_w_ = conv_w("den.up", c2, c1, rng);
        up_b_ = conv_b("den.up", c1);

        skip_w_ = params_.create("den.skip.w", {2 * c1, c1}, rng, S(1) / std::sqrt(S(2 * c1))).tensor;
        skip_b_ = params_.create_filled("den.skip.b", {c1}, S(0)).tensor;
        dec_res_ = ResBlock(params_, "den.dec", c1, dt, rng);
        sites_[3] = Site(params_, "den.site3", c1, cfg, rng);

        conv_out_w_ = conv_w("den.conv_out", c1, 3, rng);
        conv_out_b_ = conv_b("den.conv_out", 3);
    }

    // x_t: [H*W, 3] -> predicted noise, same shape.
    TensorT<S> forward(const TensorT<S>& x_t, int t, const DenoiserContextT<S>& ctx) const {
        const int hw = cfg_.image_size;
        if (x_t.rank() != 2 || x_t.dim(0) != hw * hw || x_t.dim(1) != 3)
            shape_fail("denoiser_forward", x_t.shape(),
                       "expected [" + std::to_string(hw * hw) + "x3]");
        ctx.rescale.validate();
        if (ctx.adapter_tokens && !ctx.adapter_proj)
            throw std::invalid_argument("denoiser_forward: adapter tokens without projections");

        const TensorT<S> temb = time2_.apply(silu(time1_.apply(sinusoidal_embedding(t))));

        auto h1 = conv3x3(x_t, conv_in_w_, conv_in_b_, hw, hw, 1);
        h1 = enc_res_.apply(h1, temb, hw, hw);
        h1 = attend(0, h1, ctx);
        const TensorT<S> skip = h1;

        auto h2 = conv3x3(h1, down_w_, down_b_, hw, hw, 2);
        h2 = attend(1, h2, ctx);
        h2 = mid_res_.apply(h2, temb, hw / 2, hw / 2);
        h2 = attend(2, h2, ctx);

        auto h3 = conv3x3(upsample2x(h2, hw / 2, hw / 2), up_w_, up_b_, hw, hw, 1);
        h3 = add_bias(matmul(concat(h3, skip, 1), skip_w_), skip_b_);
        h3 = dec_res_.apply(h3, temb, hw, hw);
        h3 = attend(3, h3, ctx);

        return conv3x3(h3, conv_out_w_, conv_out_b_, hw, hw, 1);
    }

    // Widths of the four attention sites in forward order; what the adapter
    // projections have to match.
    std::vector<int> site_widths() const {
        return {cfg_.den_c1, cfg_.den_c2, cfg_.den_c2, cfg_.den_c1};
    }

    ParamStoreT<S>& params() { return params_; }
    const ParamStoreT<S>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

private:
    struct ResBlock {
        TensorT<S> w1, b1, w2, b2;
        LinearT<S> time_proj;
        LayerNormT<S> ln1, ln2;
        int channels = 0;

        ResBlock() = default;
        ResBlock(ParamStoreT<S>& store, const std::string& p, int c, int dt, Rng& rng)
            : channels(c) {
            w1 = store.create(p + ".conv1.w", {c * 9, c}, rng, S(1) / std::sqrt(S(c * 9))).tensor;
            b1 = store.create_filled(p + ".conv1.b", {c}, S(0)).tensor;
            w2 = store.create(p + ".conv2.w", {c * 9, c}, rng, S(0.5) / std::sqrt(S(c * 9))).tensor;
            b2 = store.create_filled(p + ".conv2.b", {c}, S(0)).tensor;
            time_proj = LinearT<S>(store, p + ".time", dt, c, rng);
            ln1 = LayerNormT<S>(store, p + ".ln1", c);
            ln2 = LayerNormT<S>(store, p + ".ln2", c);
        }

        TensorT<S> apply(const TensorT<S>& x, const TensorT<S>& temb, int h, int w) const {
            auto y = conv3x3(x, w1, b1, h, w, 1);
            y = add_bias(y, reshape(time_proj.apply(temb), {channels}));
            y = silu(ln1.apply(y));
            y = conv3x3(y, w2, b2, h, w, 1);
            return add(x, silu(ln2.apply(y)));
        }
    };

    // One cross-attention site: pre-norm, shared queries and output projection
    // between the text path H and the adapter path H'.
    struct Site {
        LayerNormT<S> ln;
        AttentionT<S> attn; // q/k/v/o for the text path
        int width = 0;

        Site() = default;
        Site(ParamStoreT<S>& store, const std::string& p, int c, const ModelConfig& cfg, Rng& rng)
            : width(c) {
            ln = LayerNormT<S>(store, p + ".ln", c);
            attn = AttentionT<S>(store, p + ".attn", c, cfg.d_txt, cfg.den_heads, rng);
        }
    };

    // Adapter attention: same queries, adapter keys/values, head split
    // mirroring the text path.
    static TensorT<S> adapter_mix(const Site& site, const TensorT<S>& q,
                                  const TensorT<S>& adapter_tokens, const TensorT<S>& k_w,
                                  const TensorT<S>& v_w) {
        const TensorT<S> k = matmul(adapter_tokens, k_w);
        const TensorT<S> v = matmul(adapter_tokens, v_w);
        const int dh = site.width / site.attn.heads;
        TensorT<S> out;
        for (int h = 0; h < site.attn.heads; ++h) {
            auto qh = slice(q, 1, h * dh, dh);
            auto kh = slice(k, 1, h * dh, dh);
            auto vh = slice(v, 1, h * dh, dh);
            auto oh = scaled_dot_attention(qh, kh, vh);
            out = h == 0 ? oh : concat(out, oh, 1);
        }
        return out;
    }

    TensorT<S> attend(int index, const TensorT<S>& x, const DenoiserContextT<S>& ctx) const {
        const Site& site = sites_[index];
        const TensorT<S> xn = site.ln.apply(x);
        const TensorT<S> q = site.attn.wq.apply(xn);
        TensorT<S> h = site.attn.mix_projected(q, ctx.text);

        const bool adapter_active = ctx.rescale.adapter_enabled && ctx.adapter_tokens.has_value();
        if (!adapter_active) {
            if (ctx.probe) ctx.probe->add_site_sample(index, detail::frob_norm(h), 0.0);
            return add(x, site.attn.wo.apply(h));
        }

        const TensorT<S> hp = adapter_mix(site, q, *ctx.adapter_tokens,
                                          ctx.adapter_proj->k_w[index],
                                          ctx.adapter_proj->v_w[index]);
        if (ctx.probe)
            ctx.probe->add_site_sample(index, detail::frob_norm(h), detail::frob_norm(hp));

        TensorT<S> merged;
        if (ctx.rescale.merge_mode == MergeMode::kNormalized)
            merged = merge_normalized(h, hp, ctx.rescale.alpha,
                                      "site " + std::to_string(index));
        else
            merged = merge_uniform(h, hp, ctx.rescale.lambda);
        return add(x, site.attn.wo.apply(merged));
    }

    TensorT<S> sinusoidal_embedding(int t) const {
        const int d = cfg_.den_t;
        const int half = d / 2;
        std::vector<S> emb(d);
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * (double)i / (double)half);
            emb[i] = (S)std::cos((double)t * freq);
            emb[i + half] = (S)std::sin((double)t * freq);
        }
        return TensorT<S>::from({1, d}, std::move(emb));
    }

    TensorT<S> conv_w(const std::string& p, int cin, int cout, Rng& rng) {
        return params_.create(p + ".w", {cin * 9, cout}, rng, S(1) / std::sqrt(S(cin * 9))).tensor;
    }
    TensorT<S> conv_b(const std::string& p, int cout) {
        return params_.create_filled(p + ".b", {cout}, S(0)).tensor;
    }

    ModelConfig cfg_;
    ParamStoreT<S> params_;
    LinearT<S> time1_, time2_;
    TensorT<S> conv_in_w_, conv_in_b_;
    ResBlock enc_res_, mid_res_, dec_res_;
    Site sites_[kNumSites];
    TensorT<S> down_w_, down_b_, up_w_, up_b_;
    TensorT<S> skip_w_, skip_b_;
    TensorT<S> conv_out_w_, conv_out_b_;
};

using Denoiser = DenoiserT<float>;
using DenoiserContext = DenoiserContextT<float>;

} // namespace uniid
