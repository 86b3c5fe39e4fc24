#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "uniid/layers.hpp"
#include "uniid/model_config.hpp"
#include "uniid/nn_ops.hpp"
#include "uniid/optim.hpp"
#include "uniid/rng.hpp"
#include "uniid/tensor.hpp"

namespace uniid {

// Fixed project vocabulary: specials, grammar words, and a contiguous block
// of synthetic name tokens. "<id>" is the placeholder the tokenizer expands
// into the three reserved name-slot tokens.
class Vocabulary {
public:
    static Vocabulary standard(int n_names = 128);

    int size() const { return (int)tokens_.size(); }
    const std::string& token(int id) const { return tokens_.at(id); }
    bool has(const std::string& tok) const;
    int id(const std::string& tok) const; // throws on unknown token

    int pad_id() const { return 0; }
    int start_id() const { return 1; }
    const std::array<int, 3>& name_slot_ids() const { return slot_ids_; }
    int placeholder_id() const { return placeholder_id_; }
    int name_begin() const { return name_begin_; }
    int name_count() const { return name_count_; }

    std::string serialize() const; // newline-joined token list
    static Vocabulary deserialize(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::array<int, 3> slot_ids_ = {2, 3, 4};
    int placeholder_id_ = 5;
    int name_begin_ = 0;
    int name_count_ = 0;
};

struct TokenizedPrompt {
    std::vector<int> ids; // fixed length, start-prefixed, pad-suffixed
    int true_length = 0;  // tokens before padding (start included)
    std::optional<std::array<int, 3>> name_slots; // positions of the slot triple
};

// Whitespace tokenization against the vocabulary; "<id>" expands to the three
// slot tokens. Unknown words are rejected by name. Output is padded or
// truncated to max_len.
TokenizedPrompt tokenize(const Vocabulary& vocab, const std::string& prompt, int max_len = 16);

// Inverse of tokenize: strips start/pad and contracts the slot triple back to
// "<id>".
std::string detokenize(const Vocabulary& vocab, const std::vector<int>& ids);

// Contextual embeddings plus the slot positions they came with.
template <typename S>
struct TokenEmbeddingSequenceT {
    TensorT<S> embeddings; // [L, d_txt]
    std::optional<std::array<int, 3>> name_slots;
};

template <typename S>
struct MeanNameEmbeddingT {
    std::vector<S> vector; // e-bar
    S norm = S(0);
};

// Pre-norm self-attention encoder over token + position embeddings.
template <typename S>
class TextEncoderT {
public:
    TextEncoderT(int vocab_size, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int D = cfg.d_txt;
        tok_embed_ = params_.create("text.tok_embed", {vocab_size, D}, rng, S(0.08)).tensor;
        pos_embed_ = params_.create("text.pos_embed", {cfg.seq_len, D}, rng, S(0.08)).tensor;
        blocks_.resize(cfg.text_layers);
        for (int l = 0; l < cfg.text_layers; ++l) {
            const std::string p = "text.layer" + std::to_string(l);
            blocks_[l].ln1 = LayerNormT<S>(params_, p + ".ln1", D);
            blocks_[l].attn = AttentionT<S>(params_, p + ".attn", D, D, cfg.text_heads, rng);
            blocks_[l].ln2 = LayerNormT<S>(params_, p + ".ln2", D);
            blocks_[l].ffn = FeedForwardT<S>(params_, p + ".ffn", D, cfg.text_ffn, rng);
        }
        ln_f_ = LayerNormT<S>(params_, "text.ln_f", D);
    }

    TokenEmbeddingSequenceT<S> encode(const TokenizedPrompt& prompt) const {
        if ((int)prompt.ids.size() != cfg_.seq_len)
            shape_fail("encode", {(int)prompt.ids.size()}, "prompt length != seq_len");
        TensorT<S> x = add(embedding(tok_embed_, prompt.ids), pos_embed_);
        for (const Block& blk : blocks_) {
            auto h = blk.ln1.apply(x);
            x = add(x, blk.attn.apply(h, h));
            x = add(x, blk.ffn.apply(blk.ln2.apply(x)));
        }
        TokenEmbeddingSequenceT<S> out;
        out.embeddings = ln_f_.apply(x);
        out.name_slots = prompt.name_slots;
        return out;
    }

    ParamStoreT<S>& params() { return params_; }
    const ParamStoreT<S>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

private:
    struct Block {
        LayerNormT<S> ln1;
        AttentionT<S> attn;
        LayerNormT<S> ln2;
        FeedForwardT<S> ffn;
    };

    ModelConfig cfg_;
    ParamStoreT<S> params_;
    TensorT<S> tok_embed_, pos_embed_;
    std::vector<Block> blocks_;
    LayerNormT<S> ln_f_;
};

// e-bar: every name token encoded inside the fixed template "a photo of
// {name}", output embedding taken at the name position, averaged elementwise.
template <typename S>
MeanNameEmbeddingT<S> mean_name_embedding(const Vocabulary& vocab,
                                          const TextEncoderT<S>& encoder) {
    NoGradGuard ng;
    const int D = encoder.config().d_txt;
    MeanNameEmbeddingT<S> out;
    out.vector.assign(D, S(0));
    for (int n = 0; n < vocab.name_count(); ++n) {
        const std::string prompt = "a photo of " + vocab.token(vocab.name_begin() + n);
        const TokenizedPrompt toks = tokenize(vocab, prompt, encoder.config().seq_len);
        const auto seq = encoder.encode(toks);
        const int name_pos = 4; // [start, a, photo, of, name]
        for (int j = 0; j < D; ++j) out.vector[j] += seq.embeddings.at(name_pos, j);
    }
    S ss = S(0);
    for (S& v : out.vector) {
        v /= S(vocab.name_count());
        ss += v * v;
    }
    out.norm = std::sqrt(ss);
    return out;
}

// Replaces exactly the three slot rows with the given [3, d_txt] matrix; all
// other rows are byte-identical to the input. Gradients flow into the
// replacement rows, which is how the text branch trains through a frozen
// encoder.
template <typename S>
TokenEmbeddingSequenceT<S> splice_name_embeddings(const TokenEmbeddingSequenceT<S>& seq,
                                                  const TensorT<S>& rescaled_triple) {
    if (!seq.name_slots)
        throw std::invalid_argument("splice_name_embeddings: sequence has no name-slot positions");
    const auto& slots = *seq.name_slots;
    const int L = seq.embeddings.dim(0);
    if (rescaled_triple.rank() != 2 || rescaled_triple.dim(0) != 3 ||
        rescaled_triple.dim(1) != seq.embeddings.dim(1))
        shape_fail("splice_name_embeddings", rescaled_triple.shape(), seq.embeddings.shape());

    TensorT<S> out = rescaled_triple;
    if (slots[0] > 0) out = concat(slice(seq.embeddings, 0, 0, slots[0]), out, 0);
    if (slots[2] + 1 < L)
        out = concat(out, slice(seq.embeddings, 0, slots[2] + 1, L - slots[2] - 1), 0);

    TokenEmbeddingSequenceT<S> result;
    result.embeddings = out;
    result.name_slots = seq.name_slots;
    return result;
}

using TextEncoder = TextEncoderT<float>;
using TokenEmbeddingSequence = TokenEmbeddingSequenceT<float>;
using MeanNameEmbedding = MeanNameEmbeddingT<float>;

} // namespace uniid
