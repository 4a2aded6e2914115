#include "fashedit/synthcorpus.hpp"

#include <algorithm>
#include <cmath>

namespace fashedit {

const std::array<const char*, 25> kBody25Names = {
    "Nose",      "Neck",      "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist",    "MidHip",    "RHip",      "RKnee",  "RAnkle", "LHip",      "LKnee",
    "LAnkle",    "REye",      "LEye",      "REar",   "LEar",   "LBigToe",   "LSmallToe",
    "LHeel",     "RBigToe",   "RSmallToe", "RHeel"};

namespace {

// All doll geometry is expressed in a 64x64 unit frame and evaluated at
// pixel centers, so any canvas size renders the same figure.
struct Canvas {
    Image img;
    LabelMap parse;
    LabelMap part;
    int H, W;

    Canvas(int H_, int W_) : img(H_, W_), parse(H_, W_, kParseBackground), part(H_, W_, kPartNone), H(H_), W(W_) {}

    double ux(int x) const { return (x + 0.5) * 64.0 / W; }
    double uy(int y) const { return (y + 0.5) * 64.0 / H; }

    template <typename Pred>
    void paint_body(Pred inside, Rgb color, uint8_t parseLabel, uint8_t partLabel) {
        for (int y = 0; y < H; y++)
            for (int x = 0; x < W; x++)
                if (inside(ux(x), uy(y))) {
                    img.set(y, x, color);
                    parse.at(y, x) = parseLabel;
                    part.at(y, x) = partLabel;
                }
    }

    // Apparel recolors pixels and takes over the parse label but leaves the
    // body-part map untouched. Hands are never painted over.
    template <typename Pred>
    void paint_apparel(Pred inside, const ApparelSpec& spec) {
        for (int y = 0; y < H; y++)
            for (int x = 0; x < W; x++) {
                if (part.at(y, x) == kPartHand) continue;
                if (!inside(ux(x), uy(y), part.at(y, x))) continue;
                img.set(y, x, pattern_pixel(spec.pattern, spec.color, x, y));
                parse.at(y, x) = parse_label(spec.category);
            }
    }
};

struct Ellipse {
    double cx, cy, rx, ry;
    bool contains(double x, double y) const {
        double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

struct RectU {
    double x0, y0, x1, y1;
    bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

// Thick line segment (round caps).
struct Limb {
    double x0, y0, x1, y1, halfw;
    bool contains(double x, double y) const {
        double vx = x1 - x0, vy = y1 - y0;
        double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        double dx = x - (x0 + t * vx), dy = y - (y0 + t * vy);
        return dx * dx + dy * dy <= halfw * halfw;
    }
};

// Trapezoid symmetric around cx, half-width interpolated in y.
struct Flare {
    double cx, y0, y1, hw0, hw1;
    bool contains(double x, double y) const {
        if (y < y0 || y >= y1) return false;
        double t = (y - y0) / (y1 - y0);
        double hw = hw0 + t * (hw1 - hw0);
        return std::abs(x - cx) <= hw;
    }
};

struct DollGeometry {
    double cx;
    double armJit;
    Ellipse hair, head;
    RectU neck, torso;
    Limb upperArmR, lowerArmR, upperArmL, lowerArmL;
    Ellipse handR, handL;
    RectU upperLegR, upperLegL, lowerLegR, lowerLegL, footR, footL;
};

DollGeometry make_geometry(Rng& rng) {
    DollGeometry g;
    g.cx = 32.0 + (rng.uniform() * 4.0 - 2.0);
    g.armJit = rng.uniform() * 1.5;
    double cx = g.cx, aj = g.armJit;
    g.hair = {cx, 7.6, 5.4, 4.6};
    g.head = {cx, 9.5, 4.4, 5.0};
    g.neck = {cx - 1.6, 13.5, cx + 1.6, 16.5};
    g.torso = {cx - 7.0, 16.0, cx + 7.0, 33.0};
    g.upperArmR = {cx - 8.0, 17.5, cx - 9.5 - aj, 24.0, 1.4};
    g.lowerArmR = {cx - 9.5 - aj, 24.0, cx - 10.0 - aj, 30.5, 1.2};
    g.upperArmL = {cx + 8.0, 17.5, cx + 9.5 + aj, 24.0, 1.4};
    g.lowerArmL = {cx + 9.5 + aj, 24.0, cx + 10.0 + aj, 30.5, 1.2};
    g.handR = {cx - 10.0 - aj, 32.3, 1.7, 1.7};
    g.handL = {cx + 10.0 + aj, 32.3, 1.7, 1.7};
    g.upperLegR = {cx - 5.8, 33.0, cx - 1.0, 43.5};
    g.upperLegL = {cx + 1.0, 33.0, cx + 5.8, 43.5};
    g.lowerLegR = {cx - 5.2, 43.5, cx - 1.6, 53.0};
    g.lowerLegL = {cx + 1.6, 43.5, cx + 5.2, 53.0};
    g.footR = {cx - 7.2, 53.0, cx - 1.2, 57.0};
    g.footL = {cx + 1.2, 53.0, cx + 7.2, 57.0};
    return g;
}

void render_background(Canvas& c, Rng& rng) {
    auto mutedColor = [&rng]() -> Rgb {
        auto ch = [&rng]() { return (uint8_t)(40 + rng.uniform_int(176)); };
        return {ch(), ch(), ch()};
    };
    int mode = (int)rng.uniform_int(3);
    Rgb a = mutedColor(), b = mutedColor();
    for (int y = 0; y < c.H; y++)
        for (int x = 0; x < c.W; x++) {
            Rgb col = a;
            if (mode == 1) {
                double t = (double)y / std::max(1, c.H - 1);
                col = {(uint8_t)std::lround(a.r + t * (b.r - a.r)),
                       (uint8_t)std::lround(a.g + t * (b.g - a.g)),
                       (uint8_t)std::lround(a.b + t * (b.b - a.b))};
            } else if (mode == 2) {
                col = ((int)(c.ux(x) / 16) + (int)(c.uy(y) / 16)) % 2 ? a : b;
            }
            c.img.set(y, x, col);
        }
}

void render_body(Canvas& c, const DollGeometry& g) {
    auto E = [](const Ellipse& e) { return [e](double x, double y) { return e.contains(x, y); }; };
    auto R = [](const RectU& r) { return [r](double x, double y) { return r.contains(x, y); }; };
    auto L = [](const Limb& l) { return [l](double x, double y) { return l.contains(x, y); }; };

    c.paint_body(E(g.hair), kHairColor, kParseHair, kPartHead);
    c.paint_body(E(g.head), kSkinColor, kParseSkin, kPartHead);
    c.paint_body(R(g.neck), kSkinColor, kParseSkin, kPartNeck);
    c.paint_body(R(g.torso), kSkinColor, kParseSkin, kPartTorso);
    c.paint_body(L(g.upperArmR), kSkinColor, kParseSkin, kPartUpperArm);
    c.paint_body(L(g.upperArmL), kSkinColor, kParseSkin, kPartUpperArm);
    c.paint_body(L(g.lowerArmR), kSkinColor, kParseSkin, kPartLowerArm);
    c.paint_body(L(g.lowerArmL), kSkinColor, kParseSkin, kPartLowerArm);
    c.paint_body(R(g.upperLegR), kSkinColor, kParseSkin, kPartUpperLeg);
    c.paint_body(R(g.upperLegL), kSkinColor, kParseSkin, kPartUpperLeg);
    c.paint_body(R(g.lowerLegR), kSkinColor, kParseSkin, kPartLowerLeg);
    c.paint_body(R(g.lowerLegL), kSkinColor, kParseSkin, kPartLowerLeg);
    c.paint_body(R(g.footR), kSkinColor, kParseSkin, kPartFoot);
    c.paint_body(R(g.footL), kSkinColor, kParseSkin, kPartFoot);
    c.paint_body(E(g.handR), kSkinColor, kParseSkin, kPartHand);
    c.paint_body(E(g.handL), kSkinColor, kParseSkin, kPartHand);
}

void render_apparel(Canvas& c, const DollGeometry& g, const ApparelSpec& spec) {
    double cx = g.cx;
    switch (spec.category) {
        case Apparel::socks:
            c.paint_apparel([](double, double y, uint8_t p) { return p == kPartLowerLeg && y >= 46.5; }, spec);
            break;
        case Apparel::shoes:
            c.paint_apparel(
                [v = spec.variantId](double, double y, uint8_t p) {
                    return p == kPartFoot || (v == 1 && p == kPartLowerLeg && y >= 51.5);
                },
                spec);
            break;
        case Apparel::pants:
            // full-length pants stop above the ankle so socks stay visible
            c.paint_apparel(
                [v = spec.variantId](double, double y, uint8_t p) {
                    return p == kPartUpperLeg || (v == 1 && p == kPartLowerLeg && y <= 49.5);
                },
                spec);
            break;
        case Apparel::skirt: {
            Flare f{cx, 32.0, spec.variantId == 1 ? 46.0 : 41.0, 6.8, 9.0};
            c.paint_apparel([f](double x, double y, uint8_t) { return f.contains(x, y); }, spec);
            break;
        }
        case Apparel::dress: {
            Flare f{cx, 31.0, spec.variantId == 1 ? 49.0 : 44.0, 7.0, 10.5};
            c.paint_apparel(
                [f, v = spec.variantId](double x, double y, uint8_t p) {
                    return p == kPartTorso || (v >= 1 && p == kPartUpperArm) || f.contains(x, y);
                },
                spec);
            break;
        }
        case Apparel::tops:
            c.paint_apparel(
                [v = spec.variantId](double, double, uint8_t p) {
                    return p == kPartTorso || (v >= 1 && p == kPartUpperArm) || (v >= 2 && p == kPartLowerArm);
                },
                spec);
            break;
        case Apparel::scarf:
            c.paint_apparel(
                [](double, double y, uint8_t p) { return p == kPartNeck || (p == kPartTorso && y <= 18.5); }, spec);
            break;
        case Apparel::headwear: {
            RectU brim{cx - 6.2, 7.0, cx + 6.2, 8.2};
            c.paint_apparel(
                [brim](double x, double y, uint8_t p) {
                    return (p == kPartHead && y <= 7.0) || brim.contains(x, y);
                },
                spec);
            break;
        }
        case Apparel::bag: {
            RectU body{cx + 8.2, 25.5, cx + 13.2, 31.5};
            Limb strap{cx + 6.5, 17.5, cx + 9.8, 26.0, 0.7};
            c.paint_apparel(
                [body, strap](double x, double y, uint8_t) {
                    return body.contains(x, y) || strap.contains(x, y);
                },
                spec);
            break;
        }
    }
}

std::vector<ApparelSpec> sample_outfit(Rng& rng) {
    bool wearTops = false, wearPants = false, wearDress = false, wearSkirt = false;
    double u = rng.uniform();
    if (u < 0.30) {
        wearDress = true;
    } else if (u < 0.55) {
        wearSkirt = true;
        wearTops = true;
        if (rng.uniform() < 0.40) wearPants = true;  // skirt over leggings
    } else {
        wearTops = true;
        wearPants = true;
    }
    bool wearShoes = rng.uniform() < 0.70;
    bool wearScarf = rng.uniform() < 0.30;
    bool wearBag = rng.uniform() < 0.30;
    bool wearHeadwear = rng.uniform() < 0.30;
    bool wearSocks = rng.uniform() < 0.30;

    auto makeSpec = [&rng](Apparel cat, int maxVariant) {
        ApparelSpec s;
        s.category = cat;
        s.color = color_values()[rng.uniform_int(kNumColors)];
        double p = rng.uniform();
        s.pattern = p < 0.4 ? Pattern::solid : p < 0.6 ? Pattern::stripes : p < 0.8 ? Pattern::dots : Pattern::checks;
        s.variantId = (int)rng.uniform_int((uint64_t)maxVariant + 1);
        return s;
    };

    std::vector<ApparelSpec> out;
    if (wearTops) out.push_back(makeSpec(Apparel::tops, 2));
    if (wearPants) out.push_back(makeSpec(Apparel::pants, 1));
    if (wearDress) out.push_back(makeSpec(Apparel::dress, 1));
    if (wearSkirt) out.push_back(makeSpec(Apparel::skirt, 1));
    if (wearShoes) out.push_back(makeSpec(Apparel::shoes, 1));
    if (wearScarf) out.push_back(makeSpec(Apparel::scarf, 0));
    if (wearBag) out.push_back(makeSpec(Apparel::bag, 0));
    if (wearHeadwear) out.push_back(makeSpec(Apparel::headwear, 0));
    if (wearSocks) out.push_back(makeSpec(Apparel::socks, 0));

    // A long skirt would bury short pants entirely; keep both visible.
    if (wearSkirt && wearPants)
        for (auto& s : out) {
            if (s.category == Apparel::skirt) s.variantId = 0;
            if (s.category == Apparel::pants) s.variantId = 1;
        }
    return out;
}

void place_keypoints(Sample& s, const DollGeometry& g, int H, int W) {
    double sx = W / 64.0, sy = H / 64.0;
    double cx = g.cx, aj = g.armJit;
    auto set = [&](int i, double x, double y) { s.keypoints[i] = {x * sx, y * sy, 1.0}; };
    set(0, cx, 9.5);               // Nose
    set(1, cx, 15.0);              // Neck
    set(2, cx - 6.0, 17.5);        // RShoulder
    set(3, cx - 9.5 - aj, 24.0);   // RElbow
    set(4, cx - 10.0 - aj, 30.0);  // RWrist
    set(5, cx + 6.0, 17.5);        // LShoulder
    set(6, cx + 9.5 + aj, 24.0);   // LElbow
    set(7, cx + 10.0 + aj, 30.0);  // LWrist
    set(8, cx, 31.5);              // MidHip
    set(9, cx - 3.4, 34.0);        // RHip
    set(10, cx - 3.4, 43.0);       // RKnee
    set(11, cx - 3.4, 52.0);       // RAnkle
    set(12, cx + 3.4, 34.0);       // LHip
    set(13, cx + 3.4, 43.0);       // LKnee
    set(14, cx + 3.4, 52.0);       // LAnkle
    // Eyes, ears, toes, heels are not represented by the doll.
    for (int i = 15; i < 25; i++) s.keypoints[i] = {0, 0, 0};
}

}  // namespace

std::array<double, kNumCategories> category_marginals() {
    // tops, pants, dress, skirt, shoes, scarf, bag, headwear, socks
    return {0.70, 0.55, 0.30, 0.25, 0.70, 0.30, 0.30, 0.30, 0.30};
}

Sample generate_sample(uint64_t seed, int64_t sampleId, int H, int W) {
    if (H < 64 || W < 64 || H % 8 != 0 || W % 8 != 0)
        fail(ErrorKind::RejectedConfig, "canvas must be >= 64 and divisible by 8");

    Rng rng(mix64(seed, (uint64_t)sampleId, 0x5a6d706cULL));
    Canvas canvas(H, W);
    DollGeometry geom = make_geometry(rng);
    render_background(canvas, rng);
    render_body(canvas, geom);

    Sample s;
    s.sampleId = sampleId;
    s.apparel = sample_outfit(rng);

    // z-order: later entries end up on top
    const Apparel order[] = {Apparel::socks, Apparel::shoes, Apparel::pants, Apparel::skirt,
                             Apparel::dress, Apparel::tops,  Apparel::scarf, Apparel::headwear,
                             Apparel::bag};
    for (Apparel cat : order)
        for (const auto& spec : s.apparel)
            if (spec.category == cat) render_apparel(canvas, geom, spec);

    s.image = std::move(canvas.img);
    s.parse = std::move(canvas.parse);
    s.partMap = std::move(canvas.part);
    place_keypoints(s, geom, H, W);

    for (const auto& spec : s.apparel) {
        s.captions.push_back(make_caption(spec));
        bool found = false;
        for (uint8_t v : s.parse.v)
            if (v == parse_label(spec.category)) {
                found = true;
                break;
            }
        if (!found)
            throw std::logic_error("generate_sample: apparel item rendered with no parse pixels: " +
                                   category_ids()[(int)spec.category]);
    }
    return s;
}

std::string make_caption(const ApparelSpec& spec) {
    return "a " + color_names()[nearest_color_index(spec.color)] + " " +
           pattern_words()[(int)spec.pattern] + " " + category_nouns()[(int)spec.category];
}

CorpusManifest split_corpus(int64_t n, double testFraction, uint64_t seed) {
    if (n < 10) fail(ErrorKind::RejectedConfig, "corpus size must be >= 10");
    if (!(testFraction > 0.0 && testFraction < 1.0))
        fail(ErrorKind::RejectedConfig, "testFraction must be in (0, 1)");

    int64_t k = (int64_t)std::llround((double)n * testFraction);
    k = std::clamp<int64_t>(k, 1, n - 1);

    std::vector<int64_t> ids(n);
    for (int64_t i = 0; i < n; i++) ids[i] = i;
    Rng rng(mix64(seed, 0x73706c69ULL));
    for (int64_t i = n - 1; i > 0; i--) std::swap(ids[i], ids[rng.uniform_int((uint64_t)i + 1)]);

    CorpusManifest m;
    m.seed = seed;
    m.testIds.assign(ids.begin(), ids.begin() + k);
    m.trainIds.assign(ids.begin() + k, ids.end());
    std::sort(m.testIds.begin(), m.testIds.end());
    std::sort(m.trainIds.begin(), m.trainIds.end());
    return m;
}

}  // namespace fashedit
