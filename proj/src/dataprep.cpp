#include "fashedit/dataprep.hpp"

#include <algorithm>
#include <cmath>

namespace fashedit {

namespace {

bool has_category(const Sample& s, Apparel cat) {
    if (!s.find(cat)) return false;
    uint8_t lbl = parse_label(cat);
    for (uint8_t v : s.parse.v)
        if (v == lbl) return true;
    return false;
}

void require_category(const Sample& s, Apparel cat) {
    if (!has_category(s, cat))
        fail(ErrorKind::MissingApparel, "sample " + std::to_string(s.sampleId) +
                                            " has no " + category_ids()[(int)cat] + " pixels");
}

Image fill_region(const Image& src, const BoolMap& region) {
    Image out = src;
    for (int y = 0; y < src.h; y++)
        for (int x = 0; x < src.w; x++)
            if (region.at(y, x)) out.set(y, x, kAgnosticFill);
    return out;
}

bool part_in(uint8_t p, std::initializer_list<uint8_t> parts) {
    for (uint8_t q : parts)
        if (p == q) return true;
    return false;
}

}  // namespace

bool is_strong_category(Apparel cat) {
    switch (cat) {
        case Apparel::tops:
        case Apparel::pants:
        case Apparel::dress:
        case Apparel::skirt:
        case Apparel::shoes: return true;
        default: return false;
    }
}

BoolMap dilate(const BoolMap& m, int radius) {
    if (radius <= 0) return m;
    BoolMap out(m.h, m.w);
    for (int y = 0; y < m.h; y++)
        for (int x = 0; x < m.w; x++) {
            bool on = false;
            for (int dy = -radius; dy <= radius && !on; dy++)
                for (int dx = -radius; dx <= radius && !on; dx++) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < m.h && xx >= 0 && xx < m.w && m.at(yy, xx)) on = true;
                }
            out.at(y, x) = on;
        }
    return out;
}

BoolMap restore_protected(const BoolMap& region, const Sample& sample) {
    if (region.h != sample.parse.h || region.w != sample.parse.w)
        fail(ErrorKind::Shape, "restore_protected: region/sample shape mismatch");
    BoolMap out = region;
    for (int y = 0; y < region.h; y++)
        for (int x = 0; x < region.w; x++) {
            if (!out.at(y, x)) continue;
            if (sample.partMap.at(y, x) == kPartHand) {
                out.at(y, x) = 0;
                continue;
            }
            uint8_t p = sample.parse.at(y, x);
            if (p == parse_label(Apparel::scarf) || p == parse_label(Apparel::bag) ||
                p == parse_label(Apparel::headwear) || p == parse_label(Apparel::socks))
                out.at(y, x) = 0;
        }
    return out;
}

AgnosticResult strong_removal(const Sample& sample, Apparel cat) {
    if (!is_strong_category(cat))
        fail(ErrorKind::RejectedConfig, "strong_removal: " + category_ids()[(int)cat] + " is a weak category");
    require_category(sample, cat);

    const LabelMap& parse = sample.parse;
    const LabelMap& part = sample.partMap;
    BoolMap region(parse.h, parse.w);

    if (cat == Apparel::dress || cat == Apparel::skirt) {
        // axis-aligned minimum bounding box of the lower-garment parse area
        int x0 = parse.w, y0 = parse.h, x1 = -1, y1 = -1;
        for (int y = 0; y < parse.h; y++)
            for (int x = 0; x < parse.w; x++) {
                uint8_t p = parse.at(y, x);
                if (p == parse_label(Apparel::dress) || p == parse_label(Apparel::skirt)) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
            }
        for (int y = y0; y <= y1; y++)
            for (int x = x0; x <= x1; x++) region.at(y, x) = 1;
    } else {
        uint8_t lbl = parse_label(cat);
        for (int y = 0; y < parse.h; y++)
            for (int x = 0; x < parse.w; x++) {
                bool on = parse.at(y, x) == lbl;
                uint8_t pm = part.at(y, x);
                if (!on) {
                    if (cat == Apparel::tops)
                        on = part_in(pm, {kPartTorso, kPartUpperArm, kPartLowerArm, kPartNeck});
                    else if (cat == Apparel::pants)
                        on = part_in(pm, {kPartUpperLeg, kPartLowerLeg});
                    else if (cat == Apparel::shoes)
                        on = pm == kPartFoot;
                }
                if (on) region.at(y, x) = 1;
            }
    }

    region = dilate(region, kStrongDilation);
    region = restore_protected(region, sample);

    AgnosticResult res;
    res.region = std::move(region);
    res.agnosticImage = fill_region(sample.image, res.region);
    res.strategy = Strategy::strong;
    res.category = cat;
    return res;
}

AgnosticResult weak_removal(const Sample& sample, Apparel cat) {
    if (is_strong_category(cat))
        fail(ErrorKind::RejectedConfig, "weak_removal: " + category_ids()[(int)cat] + " is a strong category");
    require_category(sample, cat);

    uint8_t lbl = parse_label(cat);
    BoolMap region(sample.parse.h, sample.parse.w);
    for (int y = 0; y < sample.parse.h; y++)
        for (int x = 0; x < sample.parse.w; x++)
            if (sample.parse.at(y, x) == lbl) region.at(y, x) = 1;

    AgnosticResult res;
    res.region = std::move(region);
    res.agnosticImage = fill_region(sample.image, res.region);
    res.strategy = Strategy::weak;
    res.category = cat;
    return res;
}

AgnosticResult remove_apparel(const Sample& sample, Apparel cat) {
    return is_strong_category(cat) ? strong_removal(sample, cat) : weak_removal(sample, cat);
}

MaskedParse masked_parse(const LabelMap& mRaw, const BoolMap& region) {
    if (mRaw.h != region.h || mRaw.w != region.w)
        fail(ErrorKind::Shape, "masked_parse: shape mismatch");
    MaskedParse mp;
    mp.parse = mRaw;
    for (size_t i = 0; i < mp.parse.v.size(); i++)
        if (region.v[i]) mp.parse.v[i] = kParseBackground;
    return mp;
}

GuidancePrompt extract_guidance_prompt(const Sample& sample, Apparel cat, int size) {
    if (size < 16) fail(ErrorKind::RejectedConfig, "guidance prompt size must be >= 16");
    require_category(sample, cat);

    // tops/pants/dress/shoes/bag keep their touching body regions (visible
    // skin of the related parts); everything else keeps apparel pixels only.
    std::vector<uint8_t> relatedParts;
    switch (cat) {
        case Apparel::tops: relatedParts = {kPartTorso, kPartUpperArm, kPartLowerArm}; break;
        case Apparel::pants: relatedParts = {kPartUpperLeg, kPartLowerLeg}; break;
        case Apparel::dress: relatedParts = {kPartTorso, kPartUpperArm, kPartUpperLeg}; break;
        case Apparel::shoes: relatedParts = {kPartFoot}; break;
        case Apparel::bag: relatedParts = {kPartTorso, kPartLowerArm}; break;
        default: break;
    }

    uint8_t lbl = parse_label(cat);
    BoolMap retained(sample.parse.h, sample.parse.w);
    int x0 = sample.parse.w, y0 = sample.parse.h, x1 = -1, y1 = -1;
    for (int y = 0; y < sample.parse.h; y++)
        for (int x = 0; x < sample.parse.w; x++) {
            bool keep = sample.parse.at(y, x) == lbl;
            if (!keep && sample.parse.at(y, x) == kParseSkin) {
                uint8_t pm = sample.partMap.at(y, x);
                for (uint8_t rp : relatedParts)
                    if (pm == rp) {
                        keep = true;
                        break;
                    }
            }
            if (keep) {
                retained.at(y, x) = 1;
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }

    int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
    int inner = size - 4;  // keep a >= 2 px white ring on all sides
    double scale = std::min((double)inner / bw, (double)inner / bh);
    int sw = std::max(1, (int)std::lround(bw * scale));
    int sh = std::max(1, (int)std::lround(bh * scale));
    sw = std::min(sw, inner);
    sh = std::min(sh, inner);

    // Scale into a scratch buffer first; nearest-neighbor sampling can trim a
    // thin edge off the content, so the paste is centered on the measured
    // bounding box rather than the nominal one.
    Image scaled(sh, sw, kWhite);
    for (int y = 0; y < sh; y++)
        for (int x = 0; x < sw; x++) {
            int srcX = x0 + std::min(bw - 1, (int)((x + 0.5) / scale));
            int srcY = y0 + std::min(bh - 1, (int)((y + 0.5) / scale));
            if (retained.at(srcY, srcX)) scaled.set(y, x, sample.image.get(srcY, srcX));
        }
    int cx0 = sw, cy0 = sh, cx1 = -1, cy1 = -1;
    for (int y = 0; y < sh; y++)
        for (int x = 0; x < sw; x++)
            if (!(scaled.get(y, x) == kWhite)) {
                cx0 = std::min(cx0, x);
                cy0 = std::min(cy0, y);
                cx1 = std::max(cx1, x);
                cy1 = std::max(cy1, y);
            }
    if (cx1 < 0) fail(ErrorKind::EmptyPrompt, "guidance prompt content vanished during scaling");

    GuidancePrompt gp;
    gp.sourceCategory = cat;
    gp.image = Image(size, size, kWhite);
    int cw = cx1 - cx0 + 1, ch = cy1 - cy0 + 1;
    int ox = (size - cw) / 2, oy = (size - ch) / 2;
    for (int y = 0; y < ch; y++)
        for (int x = 0; x < cw; x++) gp.image.set(oy + y, ox + x, scaled.get(cy0 + y, cx0 + x));
    return gp;
}

Image render_parse(const LabelMap& parse) {
    Image out(parse.h, parse.w);
    for (int y = 0; y < parse.h; y++)
        for (int x = 0; x < parse.w; x++) out.set(y, x, parse_palette()[parse.at(y, x)]);
    return out;
}

Image render_partmap(const LabelMap& part) {
    Image out(part.h, part.w);
    for (int y = 0; y < part.h; y++)
        for (int x = 0; x < part.w; x++) out.set(y, x, part_palette()[part.at(y, x)]);
    return out;
}

}  // namespace fashedit
