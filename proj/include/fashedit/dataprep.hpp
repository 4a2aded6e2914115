#pragma once

#include "fashedit/synthcorpus.hpp"

namespace fashedit {

enum class Strategy { strong, weak };

struct AgnosticResult {
    Image agnosticImage;  // source with the removal region filled
    BoolMap region;       // true = removed
    Strategy strategy = Strategy::strong;
    Apparel category = Apparel::tops;
};

struct MaskedParse {
    LabelMap parse;
};

struct GuidancePrompt {
    Image image;  // S x S, pure white background, content centered
    Apparel sourceCategory = Apparel::tops;
};

bool is_strong_category(Apparel cat);

// Clears hands and worn accessories (weak-category parse labels) out of a
// removal region.
BoolMap restore_protected(const BoolMap& region, const Sample& sample);

// Wider-area masking for tops/pants/dress/skirt/shoes: category-specific
// part-map union (bounding box for the lower garments), dilated by 2, then
// protected pixels restored.
AgnosticResult strong_removal(const Sample& sample, Apparel cat);

// Exact-region masking for scarf/bag/headwear/socks.
AgnosticResult weak_removal(const Sample& sample, Apparel cat);

AgnosticResult remove_apparel(const Sample& sample, Apparel cat);  // dispatch per category

MaskedParse masked_parse(const LabelMap& mRaw, const BoolMap& region);

GuidancePrompt extract_guidance_prompt(const Sample& sample, Apparel cat, int size);

// Label maps rendered as RGB via the fixed palettes; these renders are what
// the latent codec consumes for the parse- and part-conditioned channels.
Image render_parse(const LabelMap& parse);
Image render_partmap(const LabelMap& part);

BoolMap dilate(const BoolMap& m, int radius);  // square structuring element

constexpr int kStrongDilation = 2;

}  // namespace fashedit
