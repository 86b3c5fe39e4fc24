#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uniid/layers.hpp"
#include "uniid/model_config.hpp"
#include "uniid/text_encoder.hpp"

namespace uniid {

enum class MergeMode {
    kNormalized,   // layer-wise normalized rescaling
    kUniformLambda // constant-lambda adapter merge, kept for comparisons
};

// Inference-time rescaling knobs for both branches. text_rescale_enabled=false
// splices the raw predicted embeddings (ablation Var C); merge_mode=uniform
// with lambda=1 is the raw adapter merge (ablation Var D).
struct RescaleConfig {
    double alpha = 1.2; // adapter branch weight
    double beta = 1.8;  // text branch weight
    bool adapter_enabled = true;
    bool text_enabled = true;
    bool text_rescale_enabled = true;
    MergeMode merge_mode = MergeMode::kNormalized;
    double lambda = 1.0; // used only in uniform mode
    bool per_token_text_rescale = true;

    void validate() const {
        if (!(alpha >= 0) || !std::isfinite(alpha))
            throw std::invalid_argument("rescale: alpha must be finite and >= 0");
        if (!(beta >= 0) || !std::isfinite(beta))
            throw std::invalid_argument("rescale: beta must be finite and >= 0");
        if (!(lambda >= 0) || !std::isfinite(lambda))
            throw std::invalid_argument("rescale: lambda must be finite and >= 0");
    }
};

namespace detail {

template <typename S>
double frob_norm(const TensorT<S>& t) {
    double ss = 0;
    for (S v : t.data()) ss += (double)v * (double)v;
    return std::sqrt(ss);
}

} // namespace detail

// Z = H + alpha * (H' / |H'|) * |H|, Frobenius norms over the whole
// per-sample site output. alpha = 0 returns H itself, bit-exact. Applied at
// inference only, so the scaling factor is treated as a constant.
template <typename S>
TensorT<S> merge_normalized(const TensorT<S>& h, const TensorT<S>& h_prime, double alpha,
                            const std::string& site_label = "adapter site") {
    if (alpha == 0.0) return h;
    if (h.shape() != h_prime.shape()) shape_fail("merge_normalized", h.shape(), h_prime.shape());
    const double hp_norm = detail::frob_norm(h_prime);
    if (hp_norm < 1e-12)
        throw std::runtime_error("merge_normalized: dead adapter output at " + site_label +
                                 " (|H'| < 1e-12)");
    const double h_norm = detail::frob_norm(h);
    return add(h, smul(h_prime, (S)(alpha * h_norm / hp_norm)));
}

// Z = H + lambda * H', the constant-weight merge. lambda = 0 returns H
// bit-exact; lambda = 1 is the raw training-time addition.
template <typename S>
TensorT<S> merge_uniform(const TensorT<S>& h, const TensorT<S>& h_prime, double lambda) {
    if (lambda == 0.0) return h;
    if (h.shape() != h_prime.shape()) shape_fail("merge_uniform", h.shape(), h_prime.shape());
    if (lambda == 1.0) return add(h, h_prime);
    return add(h, smul(h_prime, (S)lambda));
}

// e* = beta * (e' / |e'|) * |e-bar| for a single [d] embedding.
template <typename S>
TensorT<S> rescale_name(const TensorT<S>& e_prime, const MeanNameEmbeddingT<S>& e_bar,
                        double beta) {
    const double n = detail::frob_norm(e_prime);
    if (n < 1e-12)
        throw std::runtime_error("rescale_name: dead text branch (|e'| < 1e-12)");
    return smul(e_prime, (S)(beta * (double)e_bar.norm / n));
}

// The name triple [3, d]. Per-token mode rescales each row independently;
// joint mode rescales the whole triple to beta * sqrt(3) * |e-bar| so each
// row carries the same expected magnitude.
template <typename S>
TensorT<S> rescale_name_triple(const TensorT<S>& triple, const MeanNameEmbeddingT<S>& e_bar,
                               double beta, bool per_token = true) {
    if (triple.rank() != 2 || triple.dim(0) != 3)
        shape_fail("rescale_name_triple", triple.shape(), "expected [3 x d]");
    if (per_token) {
        TensorT<S> out;
        for (int k = 0; k < 3; ++k) {
            auto row = rescale_name(slice(triple, 0, k, 1), e_bar, beta);
            out = k == 0 ? row : concat(out, row, 0);
        }
        return out;
    }
    const double n = detail::frob_norm(triple);
    if (n < 1e-12)
        throw std::runtime_error("rescale_name: dead text branch (|e'| < 1e-12)");
    return smul(triple, (S)(beta * std::sqrt(3.0) * (double)e_bar.norm / n));
}

// ---------------------------------------------------------------------------
// Q-Former: learnable queries refined by alternating self-attention,
// cross-attention over the projected identity feature, and feed-forward
// blocks.
// ---------------------------------------------------------------------------

struct QFormerSpec {
    int n_queries = 4;
    int layers = 2;
    int d_model = 48;
    int heads = 2;
    int ffn = 96;
    int d_in = 32;       // identity feature width
    int in_tokens = 4;   // feature tokens after the input projection
    int d_out = 64;

    static QFormerSpec text_branch(const ModelConfig& cfg) {
        return {cfg.n_text_tokens, cfg.text_q_layers, cfg.d_q, cfg.q_heads,
                cfg.q_ffn,         cfg.d_id,          cfg.feature_tokens, cfg.d_txt};
    }
    static QFormerSpec adapter_branch(const ModelConfig& cfg) {
        return {cfg.n_adapter_tokens, cfg.adapter_q_layers, cfg.d_q, cfg.q_heads,
                cfg.q_ffn,            cfg.d_id,             cfg.feature_tokens, cfg.d_adp};
    }
};

template <typename S>
class QFormerT {
public:
    QFormerT(const QFormerSpec& spec, const std::string& prefix, Rng& rng) : spec_(spec) {
        queries_ = params_.create(prefix + ".queries", {spec.n_queries, spec.d_model}, rng, S(0.3))
                       .tensor;
        in_proj_ = LinearT<S>(params_, prefix + ".in_proj", spec.d_in,
                              spec.in_tokens * spec.d_model, rng);
        blocks_.resize(spec.layers);
        for (int l = 0; l < spec.layers; ++l) {
            const std::string p = prefix + ".layer" + std::to_string(l);
            auto& blk = blocks_[l];
            blk.ln_self = LayerNormT<S>(params_, p + ".ln_self", spec.d_model);
            blk.self_attn = AttentionT<S>(params_, p + ".self", spec.d_model, spec.d_model,
                                          spec.heads, rng);
            blk.ln_cross = LayerNormT<S>(params_, p + ".ln_cross", spec.d_model);
            blk.cross_attn = AttentionT<S>(params_, p + ".cross", spec.d_model, spec.d_model,
                                           spec.heads, rng);
            blk.ln_ffn = LayerNormT<S>(params_, p + ".ln_ffn", spec.d_model);
            blk.ffn = FeedForwardT<S>(params_, p + ".ffn", spec.d_model, spec.ffn, rng);
        }
        ln_out_ = LayerNormT<S>(params_, prefix + ".ln_out", spec.d_model);
        out_proj_ = LinearT<S>(params_, prefix + ".out_proj", spec.d_model, spec.d_out, rng);
    }

    // feature: [1, d_in] -> [n_queries, d_out]
    TensorT<S> map(const TensorT<S>& feature) const {
        if (feature.rank() != 2 || feature.dim(0) != 1 || feature.dim(1) != spec_.d_in)
            shape_fail("qformer_map", feature.shape(),
                       "expected [1x" + std::to_string(spec_.d_in) + "]");
        TensorT<S> kv = reshape(in_proj_.apply(feature), {spec_.in_tokens, spec_.d_model});
        TensorT<S> x = queries_;
        for (const Block& blk : blocks_) {
            auto h = blk.ln_self.apply(x);
            x = add(x, blk.self_attn.apply(h, h));
            x = add(x, blk.cross_attn.apply(blk.ln_cross.apply(x), kv));
            x = add(x, blk.ffn.apply(blk.ln_ffn.apply(x)));
        }
        return out_proj_.apply(ln_out_.apply(x));
    }

    ParamStoreT<S>& params() { return params_; }
    const ParamStoreT<S>& params() const { return params_; }
    const QFormerSpec& spec() const { return spec_; }

private:
    struct Block {
        LayerNormT<S> ln_self;
        AttentionT<S> self_attn;
        LayerNormT<S> ln_cross;
        AttentionT<S> cross_attn;
        LayerNormT<S> ln_ffn;
        FeedForwardT<S> ffn;
    };

    QFormerSpec spec_;
    ParamStoreT<S> params_;
    TensorT<S> queries_;
    LinearT<S> in_proj_;
    std::vector<Block> blocks_;
    LayerNormT<S> ln_out_;
    LinearT<S> out_proj_;
};

// Per-site key/value projections of the adapter tokens; the only parameters
// the adapter branch adds inside the denoiser.
template <typename S>
struct AdapterProjectionsT {
    std::vector<TensorT<S>> k_w, v_w; // per site: [d_adp, site_width]

    AdapterProjectionsT() = default;
    AdapterProjectionsT(const std::vector<int>& site_widths, int d_adp, Rng& rng) {
        for (size_t i = 0; i < site_widths.size(); ++i) {
            const std::string p = "adapter.site" + std::to_string(i);
            k_w.push_back(params.create(p + ".k_w", {d_adp, site_widths[i]}, rng,
                                        S(1) / std::sqrt(S(d_adp)))
                              .tensor);
            v_w.push_back(params.create(p + ".v_w", {d_adp, site_widths[i]}, rng,
                                        S(0.05) / std::sqrt(S(d_adp)))
                              .tensor);
        }
    }

    ParamStoreT<S> params;
};

// ---------------------------------------------------------------------------
// Norm-inflation bookkeeping: per-site |H'| / |H| ratio samples plus the
// text-branch |e'| / |e-bar| ratio.
// ---------------------------------------------------------------------------

class NormProfile {
public:
    struct Stat {
        double mean = 0;
        double stddev = 0;
        int n = 0;
        bool dead = false; // every observed H' had zero norm
    };

    explicit NormProfile(int n_sites = 0) : site_samples_(n_sites) {}

    void add_site_sample(int site, double h_norm, double hp_norm) {
        if (site >= (int)site_samples_.size()) site_samples_.resize(site + 1);
        site_samples_[site].push_back(h_norm > 0 ? hp_norm / h_norm : 0.0);
    }
    void add_text_sample(double e_norm, double ebar_norm) {
        text_samples_.push_back(ebar_norm > 0 ? e_norm / ebar_norm : 0.0);
    }

    int site_count() const { return (int)site_samples_.size(); }
    Stat site_ratio(int site) const { return stat(site_samples_.at(site)); }
    Stat text_ratio() const { return stat(text_samples_); }

    // columns: site_index, mean_ratio, std_ratio; the text branch is the
    // final row with site_index "text"
    std::string to_csv() const;

private:
    static Stat stat(const std::vector<double>& xs) {
        Stat s;
        s.n = (int)xs.size();
        if (xs.empty()) return s;
        double sum = 0;
        for (double x : xs) sum += x;
        s.mean = sum / (double)xs.size();
        double ss = 0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / (double)xs.size());
        s.dead = true;
        for (double x : xs)
            if (x != 0.0) s.dead = false;
        return s;
    }

    std::vector<std::vector<double>> site_samples_;
    std::vector<double> text_samples_;
};

inline std::string NormProfile::to_csv() const {
    std::string out = "site_index,mean_ratio,std_ratio\n";
    char buf[96];
    for (int i = 0; i < site_count(); ++i) {
        const Stat s = site_ratio(i);
        std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f\n", i, s.mean, s.stddev);
        out += buf;
    }
    const Stat t = text_ratio();
    std::snprintf(buf, sizeof(buf), "text,%.8f,%.8f\n", t.mean, t.stddev);
    out += buf;
    return out;
}

using QFormer = QFormerT<float>;
using AdapterProjections = AdapterProjectionsT<float>;

} // namespace uniid
