#pragma once

#include <array>
#include <string>

#include "fashedit/image.hpp"

namespace fashedit {

constexpr int kNumCategories = 9;
constexpr int kNumColors = 12;
constexpr int kNumPatterns = 4;
constexpr int kNullLabel = kNumCategories;  // L_null index in the 10-entry apparel vocab

enum class Apparel : uint8_t { tops = 0, pants, dress, skirt, shoes, scarf, bag, headwear, socks };
enum class Pattern : uint8_t { solid = 0, stripes, dots, checks };

// Parse labels: 0..2 are body, 3.. map the apparel categories.
enum ParseLabel : uint8_t {
    kParseBackground = 0,
    kParseSkin = 1,
    kParseHair = 2,
    kParseApparelBase = 3,  // + (int)Apparel
};

enum PartLabel : uint8_t {
    kPartNone = 0,
    kPartHead,
    kPartNeck,
    kPartTorso,
    kPartUpperArm,
    kPartLowerArm,
    kPartHand,
    kPartUpperLeg,
    kPartLowerLeg,
    kPartFoot,
};
constexpr int kNumParseLabels = 12;
constexpr int kNumPartLabels = 10;

inline uint8_t parse_label(Apparel a) { return kParseApparelBase + (uint8_t)a; }

const std::array<std::string, kNumCategories>& category_ids();       // "tops", "pants", ...
const std::array<std::string, kNumCategories>& category_nouns();     // caption nouns: "top", "pants", ...
const std::array<std::string, kNumColors>& color_names();            // "red", ...
const std::array<Rgb, kNumColors>& color_values();
const std::array<std::string, kNumPatterns>& pattern_ids();          // "solid", "stripes", ...
const std::array<std::string, kNumPatterns>& pattern_words();        // caption adjectives: "solid", "striped", ...

const std::array<Rgb, kNumParseLabels>& parse_palette();   // render colors for parse maps
const std::array<Rgb, kNumPartLabels>& part_palette();     // render colors for part maps

int nearest_color_index(Rgb c);
Apparel category_from_id(const std::string& id);            // throws Vocab on unknown
int category_index_from_id(const std::string& id);

double luma601(Rgb c);  // ITU-R 601: 0.299 R + 0.587 G + 0.114 B

// Pattern texture shared by the corpus renderer and the prompt swatch
// renderer: fixed period-8 cells in absolute pixel coordinates. Cells where
// pattern_cell_on() holds use a lightened/darkened secondary of the base.
bool pattern_cell_on(Pattern p, int x, int y);
Rgb pattern_secondary(Rgb base);
inline Rgb pattern_pixel(Pattern p, Rgb base, int x, int y) {
    return pattern_cell_on(p, x, y) ? pattern_secondary(base) : base;
}

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kAgnosticFill{128, 128, 128};  // out-of-palette mid gray
constexpr Rgb kSkinColor{224, 186, 152};
constexpr Rgb kHairColor{74, 48, 32};

}  // namespace fashedit
