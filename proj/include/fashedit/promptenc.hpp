#pragma once

#include <string>
#include <vector>

#include "fashedit/dataprep.hpp"

namespace fashedit {

struct AttributeTriple {
    Apparel category = Apparel::tops;
    int colorBucket = 0;  // index into the 12-name palette
    Pattern pattern = Pattern::solid;
    bool operator==(const AttributeTriple&) const = default;
};

enum class Modality { text, image, null_cond };

struct PromptEmbedding {
    std::vector<double> v;  // unit norm
    Modality modality = Modality::text;
};

// Attribute-aligned joint text/image encoder. Both modalities reduce a
// prompt to an AttributeTriple and share one code table, so matching
// attributes embed identically regardless of modality.
class PromptEncoder {
public:
    PromptEncoder(int dim, uint64_t seed);

    AttributeTriple parse_text(const std::string& caption) const;
    AttributeTriple analyze_image(const GuidancePrompt& prompt) const;

    PromptEmbedding embed(const AttributeTriple& t, Modality m) const;
    PromptEmbedding null_embedding() const;

    static double alignment_score(const PromptEmbedding& a, const PromptEmbedding& b);

    // Standalone apparel swatch on white: the canonical image-prompt source
    // when no photo is given, drawn at exact pattern periods (no rescale).
    Image render_swatch(const AttributeTriple& t, int size) const;

    int dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

    AttributeTriple triple_of(const ApparelSpec& spec) const {
        return {spec.category, nearest_color_index(spec.color), spec.pattern};
    }

private:
    int dim_;
    uint64_t seed_;
    std::vector<std::vector<double>> catCodes_, colorCodes_, patternCodes_;
    std::vector<double> nullVec_;
};

}  // namespace fashedit
