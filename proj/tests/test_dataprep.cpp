#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "fashedit/dataprep.hpp"

using namespace fashedit;

namespace {

Sample sample_with(Apparel cat, uint64_t seed = 7, int maxScan = 4000) {
    for (int id = 0; id < maxScan; id++) {
        Sample s = generate_sample(seed, id, 64, 64);
        if (s.find(cat)) return s;
    }
    throw std::runtime_error("no sample wears the category in scan range");
}

Sample sample_without(Apparel cat, uint64_t seed = 7) {
    for (int id = 0; id < 4000; id++) {
        Sample s = generate_sample(seed, id, 64, 64);
        if (!s.find(cat)) return s;
    }
    throw std::runtime_error("unreachable");
}

int64_t parse_count(const Sample& s, Apparel cat) {
    int64_t n = 0;
    for (uint8_t v : s.parse.v) n += v == parse_label(cat);
    return n;
}

bool is_protected_pixel(const Sample& s, int y, int x) {
    if (s.partMap.at(y, x) == kPartHand) return true;
    uint8_t p = s.parse.at(y, x);
    return p == parse_label(Apparel::scarf) || p == parse_label(Apparel::bag) ||
           p == parse_label(Apparel::headwear) || p == parse_label(Apparel::socks);
}

}  // namespace

TEST_CASE("strong removal of tops is strictly wider than the tops parse region") {
    Sample s = sample_with(Apparel::tops);
    AgnosticResult res = strong_removal(s, Apparel::tops);
    CHECK(res.strategy == Strategy::strong);
    CHECK(res.region.count() > parse_count(s, Apparel::tops));
    // strong-superset: parse(tops) minus protected pixels is inside the region
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            if (s.parse.at(y, x) == parse_label(Apparel::tops) && !is_protected_pixel(s, y, x))
                CHECK(res.region.at(y, x));
}

TEST_CASE("skirt region equals the dilated lower-garment bounding box minus protected pixels") {
    Sample s = sample_with(Apparel::skirt);
    AgnosticResult res = strong_removal(s, Apparel::skirt);

    // brute-force bbox oracle over dress+skirt parse pixels, expanded by the
    // documented 2-px dilation (a dilated rectangle is a rectangle)
    int x0 = 64, y0 = 64, x1 = -1, y1 = -1;
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++) {
            uint8_t p = s.parse.at(y, x);
            if (p == parse_label(Apparel::skirt) || p == parse_label(Apparel::dress)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    x0 = std::max(0, x0 - kStrongDilation);
    y0 = std::max(0, y0 - kStrongDilation);
    x1 = std::min(63, x1 + kStrongDilation);
    y1 = std::min(63, y1 + kStrongDilation);
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++) {
            bool expect = x >= x0 && x <= x1 && y >= y0 && y <= y1 && !is_protected_pixel(s, y, x);
            CHECK(res.region.at(y, x) == expect);
        }
}

TEST_CASE("pixels outside the region are byte-identical to the source") {
    for (int id = 0; id < 30; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        for (const auto& a : s.apparel) {
            AgnosticResult res = remove_apparel(s, a.category);
            for (int y = 0; y < 64; y++)
                for (int x = 0; x < 64; x++) {
                    if (res.region.at(y, x)) {
                        CHECK(res.agnosticImage.get(y, x) == kAgnosticFill);
                    } else {
                        CHECK(res.agnosticImage.get(y, x) == s.image.get(y, x));
                    }
                }
        }
    }
}

TEST_CASE("weak removal region equals the parse region exactly") {
    Sample s = sample_with(Apparel::scarf);
    AgnosticResult res = weak_removal(s, Apparel::scarf);
    CHECK(res.strategy == Strategy::weak);
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            CHECK((bool)res.region.at(y, x) == (s.parse.at(y, x) == parse_label(Apparel::scarf)));
}

TEST_CASE("weak removal of a bag never touches skin or hair") {
    Sample s = sample_with(Apparel::bag);
    AgnosticResult res = weak_removal(s, Apparel::bag);
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            if (res.region.at(y, x)) {
                CHECK(s.parse.at(y, x) != kParseSkin);
                CHECK(s.parse.at(y, x) != kParseHair);
            }
}

TEST_CASE("absent category raises a missing-apparel error") {
    Sample s = sample_without(Apparel::headwear);
    try {
        weak_removal(s, Apparel::headwear);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingApparel);
    }
    Sample s2 = sample_without(Apparel::dress);
    CHECK_THROWS_AS(strong_removal(s2, Apparel::dress), Error);
    CHECK_THROWS_AS(extract_guidance_prompt(s2, Apparel::dress, 32), Error);
}

TEST_CASE("restore_protected clears hands and keeps worn accessories") {
    // region covering a hand is cleared
    Sample s = sample_with(Apparel::tops);
    BoolMap all(64, 64, true);
    BoolMap restored = restore_protected(all, s);
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            if (s.partMap.at(y, x) == kPartHand) CHECK(!restored.at(y, x));

    // a worn bag inside the tops strong-removal area is preserved
    for (int id = 0; id < 4000; id++) {
        Sample sb = generate_sample(7, id, 64, 64);
        if (!sb.find(Apparel::tops) || !sb.find(Apparel::bag)) continue;
        AgnosticResult res = strong_removal(sb, Apparel::tops);
        bool bagTouchesArea = false;
        for (int y = 0; y < 64 && !bagTouchesArea; y++)
            for (int x = 0; x < 64 && !bagTouchesArea; x++)
                if (sb.parse.at(y, x) == parse_label(Apparel::bag) &&
                    (sb.partMap.at(y, x) == kPartTorso || sb.partMap.at(y, x) == kPartUpperArm ||
                     sb.partMap.at(y, x) == kPartLowerArm))
                    bagTouchesArea = true;
        if (!bagTouchesArea) continue;
        for (int y = 0; y < 64; y++)
            for (int x = 0; x < 64; x++)
                if (sb.parse.at(y, x) == parse_label(Apparel::bag)) CHECK(!res.region.at(y, x));
        return;  // found and verified the overlap case
    }
    FAIL("no tops+bag overlap case found in scan range");
}

TEST_CASE("restore_protected leaves disjoint regions unchanged") {
    Sample s = generate_sample(7, 0, 64, 64);
    BoolMap region(64, 64);
    region.at(0, 0) = region.at(1, 1) = 1;  // background corner
    BoolMap restored = restore_protected(region, s);
    CHECK(restored == region);
}

TEST_CASE("masked parse agrees with the elementwise oracle") {
    Sample s = generate_sample(7, 3, 64, 64);

    BoolMap none(64, 64, false);
    CHECK(masked_parse(s.parse, none).parse == s.parse);

    BoolMap all(64, 64, true);
    MaskedParse mpAll = masked_parse(s.parse, all);
    for (uint8_t v : mpAll.parse.v) CHECK(v == kParseBackground);

    Rng rng(5);
    BoolMap random(64, 64);
    for (auto& v : random.v) v = rng.uniform() < 0.4;
    MaskedParse mp = masked_parse(s.parse, random);
    for (size_t i = 0; i < mp.parse.v.size(); i++)
        CHECK(mp.parse.v[i] == (random.v[i] ? kParseBackground : s.parse.v[i]));

    BoolMap small(32, 32);
    CHECK_THROWS_AS(masked_parse(s.parse, small), Error);
}

TEST_CASE("removal is idempotent on an already-agnostic image") {
    Sample s = sample_with(Apparel::pants);
    AgnosticResult first = strong_removal(s, Apparel::pants);
    Sample again = s;
    again.image = first.agnosticImage;
    AgnosticResult second = strong_removal(again, Apparel::pants);
    CHECK(second.region == first.region);
    CHECK(second.agnosticImage == first.agnosticImage);
}

TEST_CASE("guidance prompts keep only the apparel and its related body parts") {
    Sample s = sample_with(Apparel::scarf);
    GuidancePrompt gp = extract_guidance_prompt(s, Apparel::scarf, 32);

    // colors present in the scarf parse region are the only legal content
    std::set<uint32_t> allowed;
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            if (s.parse.at(y, x) == parse_label(Apparel::scarf)) {
                Rgb c = s.image.get(y, x);
                allowed.insert((uint32_t)c.r << 16 | c.g << 8 | c.b);
            }
    for (int y = 0; y < 32; y++)
        for (int x = 0; x < 32; x++) {
            Rgb c = gp.image.get(y, x);
            if (c == kWhite) continue;
            CHECK(allowed.count((uint32_t)c.r << 16 | c.g << 8 | c.b) == 1);
        }
}

TEST_CASE("tops prompt content comes from the garment and touching torso/arm skin") {
    Sample s = sample_with(Apparel::tops);
    GuidancePrompt gp = extract_guidance_prompt(s, Apparel::tops, 32);
    std::set<uint32_t> allowed;
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++) {
            bool ok = s.parse.at(y, x) == parse_label(Apparel::tops);
            if (!ok && s.parse.at(y, x) == kParseSkin) {
                uint8_t pm = s.partMap.at(y, x);
                ok = pm == kPartTorso || pm == kPartUpperArm || pm == kPartLowerArm;
            }
            if (ok) {
                Rgb c = s.image.get(y, x);
                allowed.insert((uint32_t)c.r << 16 | c.g << 8 | c.b);
            }
        }
    for (int y = 0; y < 32; y++)
        for (int x = 0; x < 32; x++) {
            Rgb c = gp.image.get(y, x);
            if (c == kWhite) continue;
            CHECK(allowed.count((uint32_t)c.r << 16 | c.g << 8 | c.b) == 1);
        }
}

TEST_CASE("guidance prompts have a white border ring and centered content") {
    for (int id = 0; id < 40; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        for (const auto& a : s.apparel) {
            GuidancePrompt gp = extract_guidance_prompt(s, a.category, 32);
            const int S = 32;
            for (int k = 0; k < S; k++) {
                CHECK(gp.image.get(0, k) == kWhite);
                CHECK(gp.image.get(S - 1, k) == kWhite);
                CHECK(gp.image.get(k, 0) == kWhite);
                CHECK(gp.image.get(k, S - 1) == kWhite);
            }
            int x0 = S, y0 = S, x1 = -1, y1 = -1;
            for (int y = 0; y < S; y++)
                for (int x = 0; x < S; x++)
                    if (!(gp.image.get(y, x) == kWhite)) {
                        x0 = std::min(x0, x);
                        y0 = std::min(y0, y);
                        x1 = std::max(x1, x);
                        y1 = std::max(y1, y);
                    }
            REQUIRE(x1 >= 0);
            // bbox center within +-1 px of the image center (doubled math)
            CHECK(std::abs((x0 + x1 + 1) - S) <= 2);
            CHECK(std::abs((y0 + y1 + 1) - S) <= 2);
        }
    }
    CHECK_THROWS_AS(extract_guidance_prompt(generate_sample(7, 0, 64, 64),
                                            generate_sample(7, 0, 64, 64).apparel[0].category, 8),
                    Error);
}

TEST_CASE("palette renders cover every label") {
    Sample s = generate_sample(7, 2, 64, 64);
    Image pr = render_parse(s.parse);
    Image dr = render_partmap(s.partMap);
    CHECK(pr.h == 64);
    CHECK(dr.h == 64);
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++) {
            CHECK(pr.get(y, x) == parse_palette()[s.parse.at(y, x)]);
            CHECK(dr.get(y, x) == part_palette()[s.partMap.at(y, x)]);
        }
}
