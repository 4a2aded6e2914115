#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fashedit/common.hpp"

namespace fashedit {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// Interleaved 8-bit RGB, row-major.
struct Image {
    int h = 0, w = 0;
    std::vector<uint8_t> px;  // h*w*3

    Image() = default;
    Image(int h_, int w_, Rgb fill = {0, 0, 0}) : h(h_), w(w_), px((size_t)h_ * w_ * 3) {
        for (size_t i = 0; i < px.size(); i += 3) {
            px[i] = fill.r;
            px[i + 1] = fill.g;
            px[i + 2] = fill.b;
        }
    }

    uint8_t* at(int y, int x) { return px.data() + ((size_t)y * w + x) * 3; }
    const uint8_t* at(int y, int x) const { return px.data() + ((size_t)y * w + x) * 3; }
    Rgb get(int y, int x) const {
        const uint8_t* p = at(y, x);
        return {p[0], p[1], p[2]};
    }
    void set(int y, int x, Rgb c) {
        uint8_t* p = at(y, x);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    bool operator==(const Image&) const = default;
};

// One label byte per pixel.
struct LabelMap {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    LabelMap() = default;
    LabelMap(int h_, int w_, uint8_t fill = 0) : h(h_), w(w_), v((size_t)h_ * w_, fill) {}
    uint8_t& at(int y, int x) { return v[(size_t)y * w + x]; }
    uint8_t at(int y, int x) const { return v[(size_t)y * w + x]; }
    bool operator==(const LabelMap&) const = default;
};

// Boolean mask, one byte per pixel (0 or 1).
struct BoolMap {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    BoolMap() = default;
    BoolMap(int h_, int w_, bool fill = false) : h(h_), w(w_), v((size_t)h_ * w_, fill ? 1 : 0) {}
    uint8_t& at(int y, int x) { return v[(size_t)y * w + x]; }
    uint8_t at(int y, int x) const { return v[(size_t)y * w + x]; }
    int64_t count() const {
        int64_t n = 0;
        for (uint8_t b : v) n += b;
        return n;
    }
    bool operator==(const BoolMap&) const = default;
};

// Minimal PNG support: 8-bit RGB, 8-bit palette-indexed, and 1-bit grayscale,
// which is everything the corpus layout needs. Deterministic encodes.
void write_png_rgb(const std::string& path, const Image& img);
void write_png_indexed(const std::string& path, const LabelMap& labels, const std::vector<Rgb>& palette);
void write_png_gray1(const std::string& path, const BoolMap& mask);

Image read_png_rgb(const std::string& path);          // expands indexed/gray to RGB
LabelMap read_png_indexed(const std::string& path);   // color type 3 only
BoolMap read_png_gray1(const std::string& path);      // bit depth 1 grayscale only

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace fashedit
