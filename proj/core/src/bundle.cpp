#include "uniid/bundle.hpp"

namespace uniid {

namespace {

void put_common_meta(Checkpoint& ck, const Bundle& b, const char* kind) {
    ck.put_text("__meta/kind", kind);
    ck.put_text("__meta/config", b.cfg.to_kv().echo());
    ck.put_text("__meta/frozen", "all");
}

void check_kind(const Checkpoint& ck, const char* kind, const std::string& path) {
    if (ck.get_text("__meta/kind") != kind)
        throw std::runtime_error("checkpoint " + path + " is not a " + kind + " checkpoint");
}

} // namespace

void save_base_checkpoint(const Bundle& b, const std::string& path) {
    Checkpoint ck;
    put_common_meta(ck, b, "base");
    ck.put_text("__meta/vocab", b.vocab.serialize());
    ck.put_store("", b.text_encoder->params());
    ck.put_store("", b.denoiser->params());
    ck.save(path);
}

void load_base_checkpoint(Bundle& b, const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    check_kind(ck, "base", path);
    ck.load_store("", b.text_encoder->params());
    ck.load_store("", b.denoiser->params());
    b.freeze_base();
    b.refresh_mean_name();
}

void save_face_checkpoint(const Bundle& b, const std::string& path) {
    Checkpoint ck;
    put_common_meta(ck, b, "face");
    ck.put_f32("__meta/n_classes", {1}, {(float)b.face_encoder->n_classes()});
    ck.put_f32("__meta/separation_margin", {1}, {b.separation_margin});
    ck.put_f32("__meta/inter_identity_baseline", {1}, {b.inter_identity_baseline});
    ck.put_store("", b.face_encoder->params());
    ck.put_store("", b.attr_classifier->params());
    ck.save(path);
}

void load_face_checkpoint(Bundle& b, const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    check_kind(ck, "face", path);
    ck.load_store("", b.face_encoder->params());
    ck.load_store("", b.attr_classifier->params());
    b.separation_margin = ck.at("__meta/separation_margin").f32[0];
    b.inter_identity_baseline = ck.at("__meta/inter_identity_baseline").f32[0];
    b.freeze_face();
}

void save_branch_checkpoint(const Bundle& b, bool text_branch, const std::string& path) {
    Checkpoint ck;
    put_common_meta(ck, b, text_branch ? "text_branch" : "adapter_branch");
    if (text_branch) {
        ck.put_store("", b.text_branch->params());
    } else {
        ck.put_store("", b.adapter_branch->params());
        ck.put_store("", b.adapter_proj->params);
    }
    ck.save(path);
}

void load_branch_checkpoint(Bundle& b, bool text_branch, const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    check_kind(ck, text_branch ? "text_branch" : "adapter_branch", path);
    if (text_branch) {
        ck.load_store("", b.text_branch->params());
    } else {
        ck.load_store("", b.adapter_branch->params());
        ck.load_store("", b.adapter_proj->params);
    }
}

void save_bundle(const Bundle& b, const std::string& dir) {
    save_base_checkpoint(b, dir + "/base.ckpt");
    save_face_checkpoint(b, dir + "/face.ckpt");
    save_branch_checkpoint(b, true, dir + "/text_branch.ckpt");
    save_branch_checkpoint(b, false, dir + "/adapter_branch.ckpt");
}

Bundle load_bundle(const std::string& dir) {
    Checkpoint base = Checkpoint::load(dir + "/base.ckpt");
    check_kind(base, "base", dir + "/base.ckpt");
    Checkpoint face = Checkpoint::load(dir + "/face.ckpt");
    const ModelConfig cfg = ModelConfig::from_kv(KvConfig::parse(base.get_text("__meta/config")));
    const int n_classes = (int)face.at("__meta/n_classes").f32[0];

    Bundle b = Bundle::create(cfg, n_classes, /*seed=*/0);
    load_base_checkpoint(b, dir + "/base.ckpt");
    load_face_checkpoint(b, dir + "/face.ckpt");
    load_branch_checkpoint(b, true, dir + "/text_branch.ckpt");
    load_branch_checkpoint(b, false, dir + "/adapter_branch.ckpt");
    return b;
}

} // namespace uniid
