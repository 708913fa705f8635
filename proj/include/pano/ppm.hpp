// Minimal binary PPM (P6, maxval 255) reader and writer.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pano/tensorfile.hpp"

namespace pano {

struct RgbImage {
    int height = 0, width = 0;
    std::vector<uint8_t> data;  // interleaved rgb, row-major

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("RgbImage: empty dimensions");
    }

    uint8_t& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    uint8_t at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

inline void write_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (!f) throw io_error("write failed: " + path);
}

inline RgbImage read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);

    // header fields are whitespace-separated, with '#' comments allowed
    const auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = f.get()) != EOF) {
            if (ch == '#') {
                while ((ch = f.get()) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        return tok;
    };

    if (next_token() != "P6") throw format_error("not a P6 ppm: " + path);
    const std::string ws = next_token(), hs = next_token(), maxs = next_token();
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        maxval = std::stoi(maxs);
    } catch (const std::exception&) {
        throw format_error("bad ppm header: " + path);
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw format_error("bad ppm header: " + path);

    RgbImage img(h, w);
    f.read(reinterpret_cast<char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw truncated_file_error("ppm pixel data ends early: " + path);
    return img;
}

}  // namespace pano
