#pragma once

#include "uniid/image_io.hpp"
#include "uniid/tensor.hpp"

namespace uniid {

// Diffusion and the encoders operate on [H*W, 3] rows scaled to [-1, 1];
// images store [0, 1].

template <typename S>
TensorT<S> image_to_rows(const Image& im) {
    std::vector<S> data(im.pixels.size());
    for (size_t i = 0; i < im.pixels.size(); ++i) data[i] = S(2) * S(im.pixels[i]) - S(1);
    return TensorT<S>::from({im.width * im.height, 3}, std::move(data));
}

template <typename S>
Image rows_to_image(const TensorT<S>& rows, int width, int height) {
    Image im;
    im.width = width;
    im.height = height;
    im.pixels.resize((size_t)width * height * 3);
    for (size_t i = 0; i < im.pixels.size(); ++i) {
        const float v = 0.5f * ((float)rows.data()[i] + 1.0f);
        im.pixels[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return im;
}

} // namespace uniid
