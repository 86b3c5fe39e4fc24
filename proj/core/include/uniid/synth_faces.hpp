#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uniid/image_io.hpp"
#include "uniid/rng.hpp"

namespace uniid {

constexpr int kImageSize = 32;

enum class Background { kRed = 0, kGreen, kBlue, kGray };
enum class Accessory { kNone = 0, kHat };
enum class Style { kPhoto = 0, kSketch };
enum class Framing { kPortrait = 0, kScene };
enum class HairStyle { kBald = 0, kFlat, kSide, kFull };

const char* to_string(Background b);
const char* to_string(Accessory a);
const char* to_string(Style s);
const char* to_string(Framing f);

// Identity factors: everything drawn inside the face box and nothing else.
struct IdentityParams {
    float face_aspect = 1.0f;  // [0.7, 1.3], monotone in face-box width
    float eye_spacing = 0.35f; // [0.25, 0.45], fraction of face width
    float eye_size = 0.07f;    // [0.04, 0.10], fraction of face width
    float mouth_curve = 0.0f;  // [-1, 1]
    std::array<float, 3> skin_tone = {0.8f, 0.65f, 0.55f};
    HairStyle hair_style = HairStyle::kFlat;
    int identity_id = 0;

    void validate() const; // throws std::invalid_argument naming the field
};

// Composition factors: background, accessory, style, framing and the nuisance
// pose shift. pose_shift never appears in captions.
struct CompositionParams {
    Background background = Background::kGray;
    Accessory accessory = Accessory::kNone;
    Style style = Style::kPhoto;
    int pose_shift = 0; // [-4, 4] horizontal offset
    Framing framing = Framing::kPortrait;

    void validate() const;
};

struct FaceBox {
    int x0 = 0, y0 = 0, w = 0, h = 0;
    bool contains(int y, int x) const { return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h; }
    double area_fraction() const { return (double)w * h / ((double)kImageSize * kImageSize); }
};

// Face-card rectangle for the given identity/composition; always fully inside
// the image. Portrait boxes cover >= 60% of the image, scene boxes <= 30%.
FaceBox face_box(const IdentityParams& id, const CompositionParams& comp);

// Deterministic renderer: same inputs give bit-identical pixels. Pixels inside
// the face box depend only on (identity, style, pose_shift) for a fixed
// framing; pixels outside depend only on the composition.
Image render_face(const IdentityParams& id, const CompositionParams& comp);

// ---------------------------------------------------------------------------
// Caption grammar
//   "a {photo|sketch} of a person [with a hat] on a {color} background
//    [full body]"
// Framing maps to the optional "full body" suffix; pose_shift is deliberately
// not expressible. minimal=true gives the fixed caption "a photo of a person"
// regardless of composition.
// ---------------------------------------------------------------------------

std::string caption_string(const CompositionParams& comp, bool minimal = false);

// Same sentence with the subject replaced by the identity placeholder "<id>";
// what personalized prompts look like.
std::string prompt_string(const CompositionParams& comp, bool personalized);

// Inverse of caption_string(comp, false); pose_shift comes back as 0.
// Throws std::invalid_argument on sentences outside the grammar.
CompositionParams parse_caption(const std::string& caption);

// The 32 caption-expressible compositions (pose_shift = 0), enumeration order
// fixed: framing-major, then style, accessory, background.
std::vector<CompositionParams> all_compositions();

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct SplitSpec {
    double held_out_identity_fraction = 1.0 / 3.0;
    // Fraction of each identity's images rendered as identity-focused
    // portraits (photo, no accessory); the rest are fully compositional.
    double portrait_fraction = 0.5;
};

struct DatasetImage {
    int identity_index = 0;
    CompositionParams composition;
    bool portrait_split = false;
};

struct Dataset {
    uint64_t seed = 0;
    std::vector<IdentityParams> identities;
    std::vector<int> train_identities;    // indices into identities
    std::vector<int> held_out_identities; // disjoint from train
    std::vector<DatasetImage> images;

    Image render(size_t image_index) const;
    std::string caption(size_t image_index, bool minimal = false) const;

    std::vector<size_t> compositional_indices(bool train_only = true) const;
    std::vector<size_t> portrait_indices(bool train_only = true) const;
    bool is_train_identity(int identity_index) const;

    // Canonical reference portrait used for conditioning and identity scoring.
    static CompositionParams reference_composition();
    Image reference_image(int identity_index) const;
};

Dataset sample_dataset(int n_identities, int images_per_identity, const SplitSpec& spec,
                       uint64_t seed);

// Writes images as PPM plus a line-oriented manifest: one record per image
// with identity_id, composition fields, caption and image path.
void export_dataset(const Dataset& ds, const std::string& dir);

IdentityParams sample_identity(Rng& rng, int identity_id);

} // namespace uniid
