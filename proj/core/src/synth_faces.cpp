#include "uniid/synth_faces.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace uniid {

namespace {

void require(bool ok, const char* field, const std::string& detail) {
    if (!ok) throw std::invalid_argument(std::string("synth-faces: ") + field + " " + detail);
}

struct Rgb {
    float r, g, b;
};

Rgb background_color(Background bg) {
    switch (bg) {
        case Background::kRed: return {0.78f, 0.16f, 0.16f};
        case Background::kGreen: return {0.18f, 0.68f, 0.22f};
        case Background::kBlue: return {0.20f, 0.32f, 0.80f};
        case Background::kGray: return {0.55f, 0.55f, 0.55f};
    }
    return {0, 0, 0};
}

constexpr Rgb kHairColor = {0.13f, 0.10f, 0.08f};
constexpr Rgb kEyeColor = {0.07f, 0.07f, 0.10f};
constexpr Rgb kMouthColor = {0.58f, 0.16f, 0.16f};
constexpr Rgb kHatColor = {0.42f, 0.27f, 0.12f};
constexpr Rgb kTorsoColor = {0.24f, 0.27f, 0.36f};

void set_px(Image& im, int y, int x, Rgb c) {
    if (y < 0 || y >= im.height || x < 0 || x >= im.width) return;
    im.at(y, x, 0) = c.r;
    im.at(y, x, 1) = c.g;
    im.at(y, x, 2) = c.b;
}

void blend_px(Image& im, int y, int x, Rgb c, float a) {
    if (y < 0 || y >= im.height || x < 0 || x >= im.width || a <= 0.0f) return;
    a = std::min(a, 1.0f);
    im.at(y, x, 0) = im.at(y, x, 0) * (1 - a) + c.r * a;
    im.at(y, x, 1) = im.at(y, x, 1) * (1 - a) + c.g * a;
    im.at(y, x, 2) = im.at(y, x, 2) * (1 - a) + c.b * a;
}

// Smooth disk: per-pixel coverage falls off linearly over one pixel at the rim
// so sub-pixel radii and positions still move the rendered values.
void draw_disk(Image& im, float cy, float cx, float radius, Rgb color, const FaceBox& clip) {
    const int y0 = std::max(clip.y0, (int)std::floor(cy - radius - 1));
    const int y1 = std::min(clip.y0 + clip.h - 1, (int)std::ceil(cy + radius + 1));
    const int x0 = std::max(clip.x0, (int)std::floor(cx - radius - 1));
    const int x1 = std::min(clip.x0 + clip.w - 1, (int)std::ceil(cx + radius + 1));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const float d = std::sqrt(((float)y - cy) * ((float)y - cy) +
                                      ((float)x - cx) * ((float)x - cx));
            blend_px(im, y, x, color, radius + 0.5f - d);
        }
}

float luminance(const Image& im, int y, int x) {
    return 0.299f * im.at(y, x, 0) + 0.587f * im.at(y, x, 1) + 0.114f * im.at(y, x, 2);
}

// Edge-emphasis transform of the photo rendering. Gradients are sampled
// without crossing the face-box boundary, so face pixels stay independent of
// the background and vice versa.
Image sketchify(const Image& photo, const FaceBox& box) {
    Image out = photo;
    auto same_region = [&](int y, int x, bool inside) { return box.contains(y, x) == inside; };
    for (int y = 0; y < photo.height; ++y)
        for (int x = 0; x < photo.width; ++x) {
            const bool inside = box.contains(y, x);
            auto lum_at = [&](int yy, int xx) {
                yy = std::clamp(yy, 0, photo.height - 1);
                xx = std::clamp(xx, 0, photo.width - 1);
                if (!same_region(yy, xx, inside)) return luminance(photo, y, x);
                return luminance(photo, yy, xx);
            };
            const float gx = lum_at(y, x + 1) - lum_at(y, x - 1);
            const float gy = lum_at(y + 1, x) - lum_at(y - 1, x);
            const float mag = std::sqrt(gx * gx + gy * gy);
            const float line = 1.0f - std::min(4.0f * mag, 1.0f) * 0.85f;
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = line * (0.45f + 0.55f * photo.at(y, x, c));
        }
    return out;
}

} // namespace

const char* to_string(Background b) {
    switch (b) {
        case Background::kRed: return "red";
        case Background::kGreen: return "green";
        case Background::kBlue: return "blue";
        case Background::kGray: return "gray";
    }
    return "?";
}
const char* to_string(Accessory a) { return a == Accessory::kNone ? "none" : "hat"; }
const char* to_string(Style s) { return s == Style::kPhoto ? "photo" : "sketch"; }
const char* to_string(Framing f) { return f == Framing::kPortrait ? "portrait" : "scene"; }

void IdentityParams::validate() const {
    require(face_aspect >= 0.7f && face_aspect <= 1.3f, "face_aspect", "outside [0.7, 1.3]");
    require(eye_spacing >= 0.25f && eye_spacing <= 0.45f, "eye_spacing", "outside [0.25, 0.45]");
    require(eye_size >= 0.04f && eye_size <= 0.10f, "eye_size", "outside [0.04, 0.10]");
    require(mouth_curve >= -1.0f && mouth_curve <= 1.0f, "mouth_curve", "outside [-1, 1]");
    for (float c : skin_tone) require(c >= 0.0f && c <= 1.0f, "skin_tone", "outside [0, 1]");
}

void CompositionParams::validate() const {
    require(pose_shift >= -4 && pose_shift <= 4, "pose_shift", "outside [-4, 4]");
}

FaceBox face_box(const IdentityParams& id, const CompositionParams& comp) {
    const float t = (id.face_aspect - 0.7f) / 0.6f; // [0, 1]
    FaceBox box;
    if (comp.framing == Framing::kPortrait) {
        box.w = 24 + (int)std::lround(6.0f * t); // 24..30 -> area >= 624/1024
        box.h = 26;
        box.y0 = 5;
    } else {
        box.w = 10 + (int)std::lround(4.0f * t); // 10..14 -> area <= 168/1024
        box.h = 12;
        box.y0 = 4;
    }
    box.x0 = std::clamp(kImageSize / 2 - box.w / 2 + comp.pose_shift, 0, kImageSize - box.w);
    return box;
}

Image render_face(const IdentityParams& id, const CompositionParams& comp) {
    id.validate();
    comp.validate();
    const FaceBox box = face_box(id, comp);
    const Rgb bg = background_color(comp.background);

    Image im = Image::filled(kImageSize, kImageSize, bg.r, bg.g, bg.b);

    if (comp.framing == Framing::kScene) {
        // textured backdrop plus a torso block so "full body" reads as a scene
        for (int y = 0; y < kImageSize; ++y)
            for (int x = 0; x < kImageSize; ++x) {
                const float shade = ((x / 4 + y / 4) % 2 == 0) ? 1.0f : 0.82f;
                set_px(im, y, x, {bg.r * shade, bg.g * shade, bg.b * shade});
            }
        const int tw = box.w + 6;
        const int tx0 = std::clamp(box.x0 + box.w / 2 - tw / 2, 0, kImageSize - tw);
        for (int y = box.y0 + box.h; y < 29; ++y)
            for (int x = tx0; x < tx0 + tw; ++x) set_px(im, y, x, kTorsoColor);
    }

    // face card
    const Rgb skin = {id.skin_tone[0], id.skin_tone[1], id.skin_tone[2]};
    for (int y = box.y0; y < box.y0 + box.h; ++y)
        for (int x = box.x0; x < box.x0 + box.w; ++x) set_px(im, y, x, skin);

    // hair, inside the top of the face card
    const int hx0 = box.x0, hx1 = box.x0 + box.w - 1;
    const int band = std::max(2, box.h / 9);
    switch (id.hair_style) {
        case HairStyle::kBald: break;
        case HairStyle::kFlat:
            for (int y = box.y0; y < box.y0 + band; ++y)
                for (int x = hx0; x <= hx1; ++x) set_px(im, y, x, kHairColor);
            break;
        case HairStyle::kSide:
            for (int y = box.y0; y < box.y0 + band; ++y)
                for (int x = hx0; x <= hx1; ++x) set_px(im, y, x, kHairColor);
            for (int y = box.y0; y < box.y0 + box.h * 2 / 5; ++y)
                for (int x = hx0; x < hx0 + std::max(2, box.w / 6); ++x) set_px(im, y, x, kHairColor);
            break;
        case HairStyle::kFull:
            for (int y = box.y0; y < box.y0 + band + 1; ++y)
                for (int x = hx0; x <= hx1; ++x) set_px(im, y, x, kHairColor);
            for (int y = box.y0; y < box.y0 + box.h / 2; ++y) {
                for (int x = hx0; x < hx0 + std::max(2, box.w / 7); ++x) set_px(im, y, x, kHairColor);
                for (int x = hx1 - std::max(2, box.w / 7) + 1; x <= hx1; ++x)
                    set_px(im, y, x, kHairColor);
            }
            break;
    }

    // eyes
    const float fx = (float)box.x0 + (float)box.w / 2.0f;
    const float eye_y = (float)box.y0 + 0.38f * (float)box.h;
    const float eye_dx = 0.5f * id.eye_spacing * (float)box.w;
    const float eye_r = id.eye_size * (float)box.w;
    draw_disk(im, eye_y, fx - eye_dx, eye_r, kEyeColor, box);
    draw_disk(im, eye_y, fx + eye_dx, eye_r, kEyeColor, box);

    // mouth: short parabola, curvature from the identity
    const float mouth_y = (float)box.y0 + 0.74f * (float)box.h;
    const float mw = 0.26f * (float)box.w;
    const int steps = std::max(6, (int)(mw * 4));
    for (int i = 0; i <= steps; ++i) {
        const float u = -1.0f + 2.0f * (float)i / (float)steps; // [-1, 1]
        const float px = fx + u * mw;
        const float py = mouth_y + id.mouth_curve * 0.10f * (float)box.h * (u * u - 0.5f);
        draw_disk(im, py, px, 0.55f, kMouthColor, box);
    }

    // hat sits strictly above the face card
    if (comp.accessory == Accessory::kHat) {
        const int brim_y = box.y0 - 1;
        const int bx0 = std::max(0, box.x0 - 2), bx1 = std::min(kImageSize - 1, box.x0 + box.w + 1);
        for (int x = bx0; x <= bx1; ++x) set_px(im, brim_y, x, kHatColor);
        const int cx0 = box.x0 + box.w / 4, cx1 = box.x0 + box.w - 1 - box.w / 4;
        for (int y = std::max(0, box.y0 - 4); y < brim_y; ++y)
            for (int x = cx0; x <= cx1; ++x) set_px(im, y, x, kHatColor);
    }

    if (comp.style == Style::kSketch) im = sketchify(im, box);

    for (float& p : im.pixels) p = std::clamp(p, 0.0f, 1.0f);
    return im;
}

// ---------------------------------------------------------------------------
// Captions
// ---------------------------------------------------------------------------

std::string caption_string(const CompositionParams& comp, bool minimal) {
    if (minimal) return "a photo of a person";
    std::string s = "a ";
    s += to_string(comp.style);
    s += " of a person";
    if (comp.accessory == Accessory::kHat) s += " with a hat";
    s += " on a ";
    s += to_string(comp.background);
    s += " background";
    if (comp.framing == Framing::kScene) s += " full body";
    return s;
}

std::string prompt_string(const CompositionParams& comp, bool personalized) {
    std::string s = caption_string(comp, false);
    if (personalized) {
        const std::string subject = "a person";
        const auto pos = s.find(subject);
        s.replace(pos, subject.size(), "<id>");
    }
    return s;
}

CompositionParams parse_caption(const std::string& caption) {
    std::istringstream is(caption);
    std::vector<std::string> w;
    std::string tok;
    while (is >> tok) w.push_back(tok);

    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("caption not in grammar (" + why + "): " + caption);
    };
    size_t i = 0;
    auto expect = [&](const std::string& word) {
        if (i >= w.size() || w[i] != word) fail("expected '" + word + "'");
        ++i;
    };

    CompositionParams comp;
    expect("a");
    if (i >= w.size()) fail("missing style");
    if (w[i] == "photo")
        comp.style = Style::kPhoto;
    else if (w[i] == "sketch")
        comp.style = Style::kSketch;
    else
        fail("unknown style '" + w[i] + "'");
    ++i;
    expect("of");
    expect("a");
    expect("person");
    comp.accessory = Accessory::kNone;
    if (i < w.size() && w[i] == "with") {
        ++i;
        expect("a");
        expect("hat");
        comp.accessory = Accessory::kHat;
    }
    expect("on");
    expect("a");
    if (i >= w.size()) fail("missing background");
    if (w[i] == "red")
        comp.background = Background::kRed;
    else if (w[i] == "green")
        comp.background = Background::kGreen;
    else if (w[i] == "blue")
        comp.background = Background::kBlue;
    else if (w[i] == "gray")
        comp.background = Background::kGray;
    else
        fail("unknown background '" + w[i] + "'");
    ++i;
    expect("background");
    comp.framing = Framing::kPortrait;
    if (i < w.size()) {
        expect("full");
        expect("body");
        comp.framing = Framing::kScene;
    }
    if (i != w.size()) fail("trailing words");
    return comp;
}

std::vector<CompositionParams> all_compositions() {
    std::vector<CompositionParams> out;
    for (int f = 0; f < 2; ++f)
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 4; ++b) {
                    CompositionParams c;
                    c.framing = (Framing)f;
                    c.style = (Style)s;
                    c.accessory = (Accessory)a;
                    c.background = (Background)b;
                    c.pose_shift = 0;
                    out.push_back(c);
                }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

IdentityParams sample_identity(Rng& rng, int identity_id) {
    IdentityParams id;
    id.face_aspect = (float)rng.uniform(0.7, 1.3);
    id.eye_spacing = (float)rng.uniform(0.25, 0.45);
    id.eye_size = (float)rng.uniform(0.04, 0.10);
    id.mouth_curve = (float)rng.uniform(-1.0, 1.0);
    id.skin_tone = {(float)rng.uniform(0.35, 0.95), (float)rng.uniform(0.30, 0.85),
                    (float)rng.uniform(0.25, 0.80)};
    id.hair_style = (HairStyle)rng.uniform_int(0, 3);
    id.identity_id = identity_id;
    return id;
}

Dataset sample_dataset(int n_identities, int images_per_identity, const SplitSpec& spec,
                       uint64_t seed) {
    if (n_identities < 2) throw std::invalid_argument("sample_dataset: need at least 2 identities");
    if (images_per_identity < 1)
        throw std::invalid_argument("sample_dataset: need at least 1 image per identity");

    Dataset ds;
    ds.seed = seed;
    Rng rng(seed);

    for (int i = 0; i < n_identities; ++i) ds.identities.push_back(sample_identity(rng, i));

    const int n_held = std::max(1, (int)std::lround(spec.held_out_identity_fraction * n_identities));
    const int n_train = n_identities - n_held;
    for (int i = 0; i < n_train; ++i) ds.train_identities.push_back(i);
    for (int i = n_train; i < n_identities; ++i) ds.held_out_identities.push_back(i);

    const int n_portrait = (int)std::lround(spec.portrait_fraction * images_per_identity);
    for (int i = 0; i < n_identities; ++i) {
        for (int k = 0; k < images_per_identity; ++k) {
            DatasetImage img;
            img.identity_index = i;
            img.portrait_split = k < n_portrait;
            if (img.portrait_split) {
                img.composition.framing = Framing::kPortrait;
                img.composition.style = Style::kPhoto;
                img.composition.accessory = Accessory::kNone;
                img.composition.background = (Background)rng.uniform_int(0, 3);
                img.composition.pose_shift = (int)rng.uniform_int(-4, 4);
            } else {
                img.composition.framing = (Framing)rng.uniform_int(0, 1);
                img.composition.style = (Style)rng.uniform_int(0, 1);
                img.composition.accessory = (Accessory)rng.uniform_int(0, 1);
                img.composition.background = (Background)rng.uniform_int(0, 3);
                img.composition.pose_shift = (int)rng.uniform_int(-4, 4);
            }
            ds.images.push_back(img);
        }
    }
    return ds;
}

Image Dataset::render(size_t image_index) const {
    const DatasetImage& img = images.at(image_index);
    return render_face(identities[img.identity_index], img.composition);
}

std::string Dataset::caption(size_t image_index, bool minimal) const {
    return caption_string(images.at(image_index).composition, minimal);
}

std::vector<size_t> Dataset::compositional_indices(bool train_only) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < images.size(); ++i)
        if (!images[i].portrait_split &&
            (!train_only || is_train_identity(images[i].identity_index)))
            out.push_back(i);
    return out;
}

std::vector<size_t> Dataset::portrait_indices(bool train_only) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < images.size(); ++i)
        if (images[i].portrait_split &&
            (!train_only || is_train_identity(images[i].identity_index)))
            out.push_back(i);
    return out;
}

bool Dataset::is_train_identity(int identity_index) const {
    return identity_index < (int)train_identities.size();
}

CompositionParams Dataset::reference_composition() {
    CompositionParams c;
    c.background = Background::kGray;
    c.accessory = Accessory::kNone;
    c.style = Style::kPhoto;
    c.pose_shift = 0;
    c.framing = Framing::kPortrait;
    return c;
}

Image Dataset::reference_image(int identity_index) const {
    return render_face(identities.at(identity_index), reference_composition());
}

void export_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
    if (!manifest) throw std::runtime_error("export_dataset: cannot write manifest in " + dir);
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const DatasetImage& img = ds.images[i];
        char name[32];
        std::snprintf(name, sizeof(name), "img_%06zu.ppm", i);
        write_ppm(dir + "/" + name, ds.render(i));
        const IdentityParams& id = ds.identities[img.identity_index];
        manifest << "identity_id=" << id.identity_id
                 << " background=" << to_string(img.composition.background)
                 << " accessory=" << to_string(img.composition.accessory)
                 << " style=" << to_string(img.composition.style)
                 << " pose_shift=" << img.composition.pose_shift
                 << " framing=" << to_string(img.composition.framing)
                 << " split=" << (img.portrait_split ? "portrait" : "compositional")
                 << " caption=\"" << ds.caption(i) << "\""
                 << " path=" << name << "\n";
    }
}

} // namespace uniid
