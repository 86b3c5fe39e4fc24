#include "uniid/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace uniid {

void write_ppm(const std::string& path, const Image& image) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("ppm: cannot open for write: " + path);
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<uint8_t> row((size_t)image.width * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                row[(size_t)x * 3 + c] = (uint8_t)std::lround(v * 255.0f);
            }
        os.write(reinterpret_cast<const char*>(row.data()), (std::streamsize)row.size());
    }
    if (!os) throw std::runtime_error("ppm: write failed: " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ppm: cannot open: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("ppm: expected P6 in " + path);
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("ppm: unsupported header in " + path);
    is.get(); // single whitespace after header

    Image im;
    im.width = w;
    im.height = h;
    im.pixels.resize((int64_t)w * h * 3);
    std::vector<uint8_t> raw((size_t)w * h * 3);
    is.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)raw.size());
    if (!is) throw std::runtime_error("ppm: truncated file " + path);
    for (size_t i = 0; i < raw.size(); ++i) im.pixels[i] = (float)raw[i] / 255.0f;
    return im;
}

} // namespace uniid
