#pragma once

#include <string>

#include "uniid/config.hpp"

namespace uniid {

// Widths and depths for every network in the bundle. Defaults are the shipped
// desk-scale model; tests shrink them to micro sizes where gradient checks
// need to touch every element.
struct ModelConfig {
    int image_size = 32;

    // text encoder
    int seq_len = 16;
    int d_txt = 64;
    int text_layers = 2;
    int text_heads = 2;
    int text_ffn = 128;
    int n_names = 128;

    // identity encoder
    int d_id = 32;
    int enc_c1 = 12;
    int enc_c2 = 24;
    int enc_c3 = 32;

    // attribute classifier
    int attr_c1 = 10;
    int attr_c2 = 20;
    int attr_fc = 48;

    // denoiser
    int den_c1 = 12;
    int den_c2 = 24;
    int den_t = 32;
    int den_heads = 2;

    // schedule
    int timesteps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.08;

    // q-formers
    int d_q = 48;
    int q_heads = 2;
    int q_ffn = 96;
    int text_q_layers = 2;    // text branch depth
    int adapter_q_layers = 3; // adapter branch depth
    int n_text_tokens = 3;    // the name triple
    int n_adapter_tokens = 4; // M
    int d_adp = 32;
    int feature_tokens = 4; // identity feature projected to this many kv tokens

    static ModelConfig defaults() { return {}; }

    // Small enough that finite differences over every element stay cheap.
    static ModelConfig micro() {
        ModelConfig c;
        c.image_size = 8;
        c.seq_len = 8;
        c.d_txt = 10;
        c.text_layers = 1;
        c.text_heads = 2;
        c.text_ffn = 12;
        c.n_names = 8;
        c.d_id = 6;
        c.enc_c1 = 4;
        c.enc_c2 = 6;
        c.enc_c3 = 6;
        c.den_c1 = 6;
        c.den_c2 = 8;
        c.den_t = 8;
        c.den_heads = 2;
        c.timesteps = 20;
        c.d_q = 8;
        c.q_heads = 2;
        c.q_ffn = 10;
        c.text_q_layers = 1;
        c.adapter_q_layers = 1;
        c.n_adapter_tokens = 2;
        c.d_adp = 6;
        c.feature_tokens = 2;
        return c;
    }

    KvConfig to_kv() const;
    static ModelConfig from_kv(const KvConfig& kv);
};

#define UNIID_MODEL_FIELDS(X)                                                                   \
    X(image_size) X(seq_len) X(d_txt) X(text_layers) X(text_heads) X(text_ffn) X(n_names)      \
    X(d_id) X(enc_c1) X(enc_c2) X(enc_c3) X(attr_c1) X(attr_c2) X(attr_fc) X(den_c1) X(den_c2) \
    X(den_t) X(den_heads) X(timesteps) X(d_q) X(q_heads) X(q_ffn) X(text_q_layers)             \
    X(adapter_q_layers) X(n_text_tokens) X(n_adapter_tokens) X(d_adp) X(feature_tokens)

inline KvConfig ModelConfig::to_kv() const {
    KvConfig kv;
#define UNIID_PUT(f) kv.set(#f, std::to_string(f));
    UNIID_MODEL_FIELDS(UNIID_PUT)
#undef UNIID_PUT
    kv.set("beta_start", std::to_string(beta_start));
    kv.set("beta_end", std::to_string(beta_end));
    return kv;
}

inline ModelConfig ModelConfig::from_kv(const KvConfig& kv) {
    ModelConfig c;
#define UNIID_GET(f) c.f = (int)kv.get_int(#f, c.f);
    UNIID_MODEL_FIELDS(UNIID_GET)
#undef UNIID_GET
    c.beta_start = kv.get_double("beta_start", c.beta_start);
    c.beta_end = kv.get_double("beta_end", c.beta_end);
    return c;
}

#undef UNIID_MODEL_FIELDS

} // namespace uniid
