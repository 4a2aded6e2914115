#include "fashedit/promptenc.hpp"

#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace fashedit {

namespace {

std::vector<double> seeded_unit_vector(uint64_t key, int dim) {
    Rng rng(key);
    std::vector<double> v(dim);
    double norm2 = 0;
    for (int i = 0; i < dim; i++) {
        v[i] = rng.normal();
        norm2 += v[i] * v[i];
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

// Size-weighted mean of per-component bounding-box fill over 4-connected
// components of `mask` within the given window.
double component_fill_ratio(const BoolMap& mask, int y0, int y1, int x0, int x1) {
    std::vector<int> comp((size_t)mask.h * mask.w, -1);
    double fillWeighted = 0, weight = 0;
    int compId = 0;
    for (int sy = y0; sy <= y1; sy++)
        for (int sx = x0; sx <= x1; sx++) {
            if (!mask.at(sy, sx) || comp[(size_t)sy * mask.w + sx] >= 0) continue;
            std::vector<std::pair<int, int>> stack = {{sy, sx}};
            comp[(size_t)sy * mask.w + sx] = compId;
            int bx0 = sx, bx1 = sx, by0 = sy, by1 = sy;
            int64_t size = 0;
            while (!stack.empty()) {
                auto [py, px] = stack.back();
                stack.pop_back();
                size++;
                bx0 = std::min(bx0, px);
                bx1 = std::max(bx1, px);
                by0 = std::min(by0, py);
                by1 = std::max(by1, py);
                const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; d++) {
                    int ny = py + dy[d], nx = px + dx[d];
                    if (ny < y0 || ny > y1 || nx < x0 || nx > x1) continue;
                    if (!mask.at(ny, nx) || comp[(size_t)ny * mask.w + nx] >= 0) continue;
                    comp[(size_t)ny * mask.w + nx] = compId;
                    stack.push_back({ny, nx});
                }
            }
            double fill = (double)size / ((bx1 - bx0 + 1) * (by1 - by0 + 1));
            fillWeighted += fill * size;
            weight += size;
            compId++;
        }
    return weight > 0 ? fillWeighted / weight : 1.0;
}

}  // namespace

PromptEncoder::PromptEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 8) fail(ErrorKind::RejectedConfig, "prompt embedding dim must be >= 8");
    for (int i = 0; i < kNumCategories; i++) catCodes_.push_back(seeded_unit_vector(mix64(seed, 1, i), dim));
    for (int i = 0; i < kNumColors; i++) colorCodes_.push_back(seeded_unit_vector(mix64(seed, 2, i), dim));
    for (int i = 0; i < kNumPatterns; i++) patternCodes_.push_back(seeded_unit_vector(mix64(seed, 3, i), dim));
    nullVec_ = seeded_unit_vector(mix64(seed, 4, 0), dim);
}

AttributeTriple PromptEncoder::parse_text(const std::string& caption) const {
    std::vector<std::string> tok = split_ws(caption);
    if (tok.size() != 4 || tok[0] != "a")
        fail(ErrorKind::Parse, "caption does not match 'a <color> <pattern> <category>': " + caption);

    AttributeTriple t;
    bool found = false;
    for (int i = 0; i < kNumColors; i++)
        if (color_names()[i] == tok[1]) {
            t.colorBucket = i;
            found = true;
            break;
        }
    if (!found) fail(ErrorKind::Parse, "unknown color token: " + tok[1]);

    found = false;
    for (int i = 0; i < kNumPatterns; i++)
        if (pattern_words()[i] == tok[2]) {
            t.pattern = (Pattern)i;
            found = true;
            break;
        }
    if (!found) fail(ErrorKind::Parse, "unknown pattern token: " + tok[2]);

    found = false;
    for (int i = 0; i < kNumCategories; i++)
        if (category_nouns()[i] == tok[3]) {
            t.category = (Apparel)i;
            found = true;
            break;
        }
    if (!found) fail(ErrorKind::Parse, "unknown category token: " + tok[3]);
    return t;
}

AttributeTriple PromptEncoder::analyze_image(const GuidancePrompt& prompt) const {
    const Image& img = prompt.image;
    // Content = non-white pixels; prompts carry a pure-white background.
    int x0 = img.w, y0 = img.h, x1 = -1, y1 = -1;
    double sr = 0, sg = 0, sb = 0;
    int64_t n = 0;
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++) {
            Rgb c = img.get(y, x);
            if (c == kWhite) continue;
            sr += c.r;
            sg += c.g;
            sb += c.b;
            n++;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    if (n == 0) fail(ErrorKind::EmptyPrompt, "analyze_image: all-white prompt");

    AttributeTriple t;
    t.colorBucket = nearest_color_index(
        {(uint8_t)std::lround(sr / n), (uint8_t)std::lround(sg / n), (uint8_t)std::lround(sb / n)});

    // Pattern from periodicity signatures of the luminance channel, measured
    // strictly inside the content (1-px erosion keeps garment/background
    // boundaries out of the counts).
    BoolMap content(img.h, img.w);
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++) content.at(y, x) = !(img.get(y, x) == kWhite);
    BoolMap interior(img.h, img.w);
    int64_t nInterior = 0;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++) {
            if (!content.at(y, x)) continue;
            bool in = y > 0 && y < img.h - 1 && x > 0 && x < img.w - 1 && content.at(y - 1, x) &&
                      content.at(y + 1, x) && content.at(y, x - 1) && content.at(y, x + 1);
            interior.at(y, x) = in;
            nInterior += in;
        }
    t.category = prompt.sourceCategory;
    if (nInterior < 4) {
        t.pattern = Pattern::solid;
        return t;
    }

    auto lum = [&](int y, int x) { return luma601(img.get(y, x)); };
    const double tau = 12.0;

    // Rendered prompts are flat fills, so the garment separates exactly from
    // retained body-part pixels: the modal RGB value is the garment base and
    // base +- the fixed pattern shift is its secondary. When a crop is not
    // flat-colored (generated imagery), fall back to luminance bands.
    std::map<uint32_t, int64_t> colorCount;
    int64_t contentTotal = 0;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++) {
            Rgb c = img.get(y, x);
            if (c == kWhite) continue;
            colorCount[(uint32_t)c.r << 16 | (uint32_t)c.g << 8 | c.b]++;
            contentTotal++;
        }
    uint32_t modeKey = 0;
    int64_t modeCount = 0;
    for (const auto& [key, cnt] : colorCount)
        if (cnt > modeCount) {
            modeCount = cnt;
            modeKey = key;
        }
    Rgb modeColor{(uint8_t)(modeKey >> 16), (uint8_t)(modeKey >> 8), (uint8_t)modeKey};
    Rgb secondColor = pattern_secondary(modeColor);

    BoolMap garment(img.h, img.w);
    int64_t nGarment = 0, nSecond = 0;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++) {
            Rgb c = img.get(y, x);
            bool isBase = c == modeColor, isSecond = c == secondColor;
            if (isBase || isSecond) {
                garment.at(y, x) = 1;
                nGarment++;
                nSecond += isSecond;
            }
        }

    if (nGarment >= std::max<int64_t>(8, (int64_t)(0.35 * contentTotal))) {
        double q = (double)nSecond / nGarment;
        if (q < 0.05) {
            t.pattern = Pattern::solid;
            return t;
        }
        int64_t cx = 0, cy = 0;
        for (int y = y0; y <= y1; y++)
            for (int x = x0; x <= x1; x++) {
                if (!garment.at(y, x)) continue;
                bool isSecondHere = img.get(y, x) == secondColor;
                if (x + 1 <= x1 && garment.at(y, x + 1) && (img.get(y, x + 1) == secondColor) != isSecondHere)
                    cx++;
                if (y + 1 <= y1 && garment.at(y + 1, x) && (img.get(y + 1, x) == secondColor) != isSecondHere)
                    cy++;
            }
        if (cy == 0) {
            // column-constant two-tone fill: vertical stripes survive any
            // uniform nearest-neighbor rescale with zero row transitions
            t.pattern = cx > 0 ? Pattern::stripes : Pattern::solid;
            return t;
        }
        // dots vs checks: check cells stay axis-aligned rectangles under
        // rescale (bbox fill ~1), dot blobs stay disc-like (~0.55)
        BoolMap secondaryMask(img.h, img.w);
        for (int y = y0; y <= y1; y++)
            for (int x = x0; x <= x1; x++)
                if (garment.at(y, x) && img.get(y, x) == secondColor) secondaryMask.at(y, x) = 1;
        t.pattern = component_fill_ratio(secondaryMask, y0, y1, x0, x1) >= 0.75 ? Pattern::checks
                                                                                : Pattern::dots;
        return t;
    }

    // fallback for non-flat content: luminance-band analysis
    std::array<int64_t, 64> hist{};
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++)
            if (interior.at(y, x)) hist[std::min(63, (int)(lum(y, x) / 4.0))]++;
    int modeBin = 0;
    for (int i = 1; i < 64; i++)
        if (hist[i] > hist[modeBin]) modeBin = i;
    double modeLum = modeBin * 4.0 + 2.0;

    // secondary mask: interior pixels off the dominant luminance
    BoolMap secondary(img.h, img.w);
    int64_t off = 0;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++)
            if (interior.at(y, x) && std::abs(lum(y, x) - modeLum) > tau) {
                secondary.at(y, x) = 1;
                off++;
            }
    double q = (double)off / nInterior;

    int64_t cx = 0, cy = 0;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++) {
            if (x + 1 <= x1 && interior.at(y, x) && interior.at(y, x + 1) &&
                std::abs(lum(y, x) - lum(y, x + 1)) > tau)
                cx++;
            if (y + 1 <= y1 && interior.at(y, x) && interior.at(y + 1, x) &&
                std::abs(lum(y, x) - lum(y + 1, x)) > tau)
                cy++;
        }

    if (q < 0.05) {
        t.pattern = Pattern::solid;
        return t;
    }
    if (cy == 0) {
        t.pattern = cx > 0 ? Pattern::stripes : Pattern::solid;
        return t;
    }
    t.pattern = component_fill_ratio(secondary, y0, y1, x0, x1) >= 0.75 ? Pattern::checks
                                                                        : Pattern::dots;
    return t;
}

PromptEmbedding PromptEncoder::embed(const AttributeTriple& t, Modality m) const {
    if ((int)t.category >= kNumCategories || t.colorBucket < 0 || t.colorBucket >= kNumColors ||
        (int)t.pattern >= kNumPatterns)
        fail(ErrorKind::Vocab, "embed: attribute out of vocabulary");
    PromptEmbedding e;
    e.modality = m;
    e.v.assign(dim_, 0.0);
    const auto& c1 = catCodes_[(int)t.category];
    const auto& c2 = colorCodes_[t.colorBucket];
    const auto& c3 = patternCodes_[(int)t.pattern];
    double norm2 = 0;
    for (int i = 0; i < dim_; i++) {
        e.v[i] = c1[i] + c2[i] + c3[i];
        norm2 += e.v[i] * e.v[i];
    }
    if (norm2 < 1e-18) fail(ErrorKind::Numeric, "embed: degenerate code sum");
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : e.v) x *= inv;
    return e;
}

PromptEmbedding PromptEncoder::null_embedding() const {
    PromptEmbedding e;
    e.modality = Modality::null_cond;
    e.v = nullVec_;
    return e;
}

double PromptEncoder::alignment_score(const PromptEmbedding& a, const PromptEmbedding& b) {
    if (a.v.size() != b.v.size()) fail(ErrorKind::Shape, "alignment_score: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.v.size(); i++) {
        dot += a.v[i] * b.v[i];
        na += a.v[i] * a.v[i];
        nb += b.v[i] * b.v[i];
    }
    if (na <= 0 || nb <= 0) fail(ErrorKind::Numeric, "alignment_score: zero vector");
    return 100.0 * std::max(0.0, dot / std::sqrt(na * nb));
}

Image PromptEncoder::render_swatch(const AttributeTriple& t, int size) const {
    if (size < 16) fail(ErrorKind::RejectedConfig, "swatch size must be >= 16");
    Image img(size, size, kWhite);
    Rgb base = color_values()[t.colorBucket];

    // Silhouettes in a 32x32 archetype frame, scaled to (size - 4) and
    // centered; pattern cells stay period 8 in final pixel coordinates.
    auto put = [&](double ax0, double ay0, double ax1, double ay1) {
        double s = (size - 4) / 32.0;
        int X0 = 2 + (int)std::lround(ax0 * s), X1 = 2 + (int)std::lround(ax1 * s);
        int Y0 = 2 + (int)std::lround(ay0 * s), Y1 = 2 + (int)std::lround(ay1 * s);
        for (int y = Y0; y < Y1 && y < size - 2; y++)
            for (int x = X0; x < X1 && x < size - 2; x++)
                img.set(y, x, pattern_pixel(t.pattern, base, x, y));
    };

    switch (t.category) {
        case Apparel::tops:
            put(8, 4, 24, 28);   // body
            put(2, 4, 8, 14);    // left sleeve
            put(24, 4, 30, 14);  // right sleeve
            break;
        case Apparel::pants:
            put(8, 2, 24, 8);    // waist
            put(8, 8, 15, 30);   // left leg
            put(17, 8, 24, 30);  // right leg
            break;
        case Apparel::dress:
            put(10, 2, 22, 12);  // bodice
            for (int i = 0; i < 9; i++) put(10 - i, 12 + i * 2, 22 + i, 14 + i * 2);  // flare
            break;
        case Apparel::skirt:
            for (int i = 0; i < 10; i++) put(10 - i * 0.8, 6 + i * 2, 22 + i * 0.8, 8 + i * 2);
            break;
        case Apparel::shoes:
            put(2, 18, 14, 28);
            put(18, 18, 30, 28);
            break;
        case Apparel::scarf:
            put(12, 2, 20, 26);   // hanging band
            put(8, 2, 24, 8);     // wrap
            break;
        case Apparel::bag:
            put(6, 12, 26, 28);   // body
            put(10, 4, 12, 12);   // handle sides
            put(20, 4, 22, 12);
            put(10, 4, 22, 6);    // handle top
            break;
        case Apparel::headwear:
            put(6, 10, 26, 18);   // crown
            put(2, 18, 30, 22);   // brim
            break;
        case Apparel::socks:
            put(6, 4, 13, 26);
            put(19, 4, 26, 26);
            break;
    }
    return img;
}

}  // namespace fashedit
