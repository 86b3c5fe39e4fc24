#pragma once

#include <string>
#include <vector>

namespace uniid {

// Row-major interleaved RGB, values in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    float& at(int y, int x, int c) { return pixels[((int64_t)y * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return pixels[((int64_t)y * width + x) * 3 + c]; }

    static Image filled(int w, int h, float r, float g, float b) {
        Image im;
        im.width = w;
        im.height = h;
        im.pixels.resize((int64_t)w * h * 3);
        for (int64_t i = 0; i < (int64_t)w * h; ++i) {
            im.pixels[i * 3 + 0] = r;
            im.pixels[i * 3 + 1] = g;
            im.pixels[i * 3 + 2] = b;
        }
        return im;
    }
};

// Binary PPM (P6), max value 255. Values are clamped and rounded on write.
void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);

} // namespace uniid
