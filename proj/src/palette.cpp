#include "fashedit/palette.hpp"

#include <cmath>

namespace fashedit {

const std::array<std::string, kNumCategories>& category_ids() {
    static const std::array<std::string, kNumCategories> v = {
        "tops", "pants", "dress", "skirt", "shoes", "scarf", "bag", "headwear", "socks"};
    return v;
}

const std::array<std::string, kNumCategories>& category_nouns() {
    static const std::array<std::string, kNumCategories> v = {
        "top", "pants", "dress", "skirt", "shoes", "scarf", "bag", "headwear", "socks"};
    return v;
}

const std::array<std::string, kNumColors>& color_names() {
    static const std::array<std::string, kNumColors> v = {
        "red", "green", "blue", "yellow", "orange", "purple",
        "pink", "brown", "black", "gray", "cyan", "olive"};
    return v;
}

const std::array<Rgb, kNumColors>& color_values() {
    // No pure white (prompt backgrounds) and no (128,128,128) (agnostic fill).
    static const std::array<Rgb, kNumColors> v = {{
        {220, 40, 40},    // red
        {40, 170, 70},    // green
        {50, 90, 220},    // blue
        {240, 220, 60},   // yellow
        {245, 150, 40},   // orange
        {150, 60, 200},   // purple
        {245, 130, 185},  // pink
        {140, 90, 50},    // brown
        {25, 25, 25},     // black
        {170, 170, 170},  // gray
        {60, 200, 220},   // cyan
        {120, 130, 50},   // olive
    }};
    return v;
}

const std::array<std::string, kNumPatterns>& pattern_ids() {
    static const std::array<std::string, kNumPatterns> v = {"solid", "stripes", "dots", "checks"};
    return v;
}

const std::array<std::string, kNumPatterns>& pattern_words() {
    static const std::array<std::string, kNumPatterns> v = {"solid", "striped", "dotted", "checked"};
    return v;
}

const std::array<Rgb, kNumParseLabels>& parse_palette() {
    static const std::array<Rgb, kNumParseLabels> v = {{
        {0, 0, 0},        // background
        {255, 160, 120},  // skin
        {120, 70, 30},    // hair
        {255, 0, 0},      // tops
        {0, 0, 255},      // pants
        {255, 0, 255},    // dress
        {255, 255, 0},    // skirt
        {0, 255, 0},      // shoes
        {0, 255, 255},    // scarf
        {255, 128, 0},    // bag
        {128, 0, 255},    // headwear
        {0, 128, 128},    // socks
    }};
    return v;
}

const std::array<Rgb, kNumPartLabels>& part_palette() {
    static const std::array<Rgb, kNumPartLabels> v = {{
        {0, 0, 0},        // none
        {255, 0, 0},      // head
        {255, 128, 0},    // neck
        {255, 255, 0},    // torso
        {0, 255, 0},      // upperArm
        {0, 255, 255},    // lowerArm
        {0, 0, 255},      // hand
        {255, 0, 255},    // upperLeg
        {128, 128, 255},  // lowerLeg
        {255, 255, 255},  // foot
    }};
    return v;
}

int nearest_color_index(Rgb c) {
    const auto& pal = color_values();
    int best = 0;
    int64_t bestD = -1;
    for (int i = 0; i < kNumColors; i++) {
        int64_t dr = (int64_t)c.r - pal[i].r;
        int64_t dg = (int64_t)c.g - pal[i].g;
        int64_t db = (int64_t)c.b - pal[i].b;
        int64_t d = dr * dr + dg * dg + db * db;
        if (bestD < 0 || d < bestD) {
            bestD = d;
            best = i;
        }
    }
    return best;
}

int category_index_from_id(const std::string& id) {
    const auto& ids = category_ids();
    for (int i = 0; i < kNumCategories; i++)
        if (ids[i] == id) return i;
    fail(ErrorKind::Vocab, "unknown apparel category: " + id);
}

Apparel category_from_id(const std::string& id) { return (Apparel)category_index_from_id(id); }

double luma601(Rgb c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

bool pattern_cell_on(Pattern p, int x, int y) {
    switch (p) {
        case Pattern::solid: return false;
        case Pattern::stripes: return (x / 4) % 2 == 1;
        case Pattern::dots: {
            int dx = x % 8 - 4;
            int dy = y % 8 - 4;
            return dx * dx + dy * dy <= 4;
        }
        case Pattern::checks: return ((x / 4) + (y / 4)) % 2 == 1;
    }
    return false;
}

Rgb pattern_secondary(Rgb base) {
    // Lighten dark bases, darken light ones, by a fixed 45 per channel. The
    // shift keeps the cell mean inside the base color's palette bucket while
    // staying well above the luminance threshold of the pattern detector.
    auto shift = [](int v, int d) { return (uint8_t)std::min(255, std::max(0, v + d)); };
    int d = luma601(base) < 128.0 ? 45 : -45;
    return {shift(base.r, d), shift(base.g, d), shift(base.b, d)};
}

}  // namespace fashedit
