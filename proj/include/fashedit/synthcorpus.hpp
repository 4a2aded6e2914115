#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fashedit/palette.hpp"

namespace fashedit {

struct ApparelSpec {
    Apparel category = Apparel::tops;
    Rgb color;
    Pattern pattern = Pattern::solid;
    int variantId = 0;
    bool operator==(const ApparelSpec&) const = default;
};

struct Keypoint {
    double x = 0, y = 0, c = 0;  // pixel coords, confidence
};

// OpenPose BODY_25 joint order is the file convention for keypoints.json.
extern const std::array<const char*, 25> kBody25Names;

struct Sample {
    Image image;
    LabelMap parse;    // ParseLabel values
    LabelMap partMap;  // PartLabel values
    std::array<Keypoint, 25> keypoints{};
    std::vector<ApparelSpec> apparel;
    std::vector<std::string> captions;  // parallel to apparel
    int64_t sampleId = 0;

    const ApparelSpec* find(Apparel cat) const {
        for (const auto& a : apparel)
            if (a.category == cat) return &a;
        return nullptr;
    }
    std::optional<std::string> caption_for(Apparel cat) const {
        for (size_t i = 0; i < apparel.size(); i++)
            if (apparel[i].category == cat) return captions[i];
        return std::nullopt;
    }
};

struct CorpusManifest {
    std::vector<int64_t> trainIds, testIds;
    int canvasH = 64, canvasW = 64;
    uint64_t seed = 0;
};

// Marginal presence probability per category used by the outfit sampler.
// Every entry is >= 0.1 by construction.
std::array<double, kNumCategories> category_marginals();

// Deterministic render: the same (seed, sampleId, H, W) always yields a
// byte-identical Sample. H, W >= 64 and divisible by 8.
Sample generate_sample(uint64_t seed, int64_t sampleId, int H, int W);

// "a {color} {pattern} {category-noun}", color bucketed to the 12-name palette.
std::string make_caption(const ApparelSpec& spec);

CorpusManifest split_corpus(int64_t n, double testFraction, uint64_t seed);

}  // namespace fashedit
