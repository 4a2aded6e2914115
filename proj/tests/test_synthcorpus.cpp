#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "fashedit/promptenc.hpp"

using namespace fashedit;

TEST_CASE("generate_sample is byte-identical for identical inputs") {
    Sample a = generate_sample(7, 0, 64, 64);
    Sample b = generate_sample(7, 0, 64, 64);
    CHECK(a.image == b.image);
    CHECK(a.parse == b.parse);
    CHECK(a.partMap == b.partMap);
    CHECK(a.apparel == b.apparel);
    for (int i = 0; i < 25; i++) {
        CHECK(a.keypoints[i].x == b.keypoints[i].x);
        CHECK(a.keypoints[i].c == b.keypoints[i].c);
    }
}

TEST_CASE("canvas constraints are enforced") {
    CHECK_THROWS_AS(generate_sample(7, 0, 60, 64), Error);
    CHECK_THROWS_AS(generate_sample(7, 0, 64, 63), Error);
    try {
        generate_sample(7, 0, 32, 32);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RejectedConfig);
    }
    // larger canvases divisible by 8 work and stay annotated
    Sample s = generate_sample(7, 1, 96, 80);
    CHECK(s.image.h == 96);
    CHECK(s.image.w == 80);
    for (const auto& a : s.apparel) {
        bool any = false;
        for (uint8_t v : s.parse.v) any |= v == parse_label(a.category);
        CHECK(any);
    }
}

TEST_CASE("every category appears in at least 50 of 1000 samples") {
    std::array<int, kNumCategories> count{};
    for (int id = 0; id < 1000; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        for (const auto& a : s.apparel) count[(int)a.category]++;
    }
    for (int c = 0; c < kNumCategories; c++) {
        INFO("category ", category_ids()[c], " count ", count[c]);
        CHECK(count[c] >= 50);
    }

    // frequency within +-50% of the configured marginals
    auto marg = category_marginals();
    for (int c = 0; c < kNumCategories; c++) {
        double freq = count[c] / 1000.0;
        CHECK(freq >= 0.5 * marg[c]);
        CHECK(freq <= 1.5 * marg[c]);
    }
}

TEST_CASE("hand pixels never carry an apparel parse label") {
    for (int id = 0; id < 100; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        for (int y = 0; y < 64; y++)
            for (int x = 0; x < 64; x++)
                if (s.partMap.at(y, x) == kPartHand) CHECK(s.parse.at(y, x) == kParseSkin);
    }
}

TEST_CASE("confident keypoints lie inside the image and on figure pixels") {
    for (int id = 0; id < 60; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        for (const auto& k : s.keypoints) {
            if (k.c <= 0) continue;
            REQUIRE(k.x >= 0);
            REQUIRE(k.x < 64);
            REQUIRE(k.y >= 0);
            REQUIRE(k.y < 64);
            CHECK(s.parse.at((int)k.y, (int)k.x) != kParseBackground);
        }
    }
}

TEST_CASE("dress excludes tops/pants/skirt on the same person") {
    for (int id = 0; id < 300; id++) {
        Sample s = generate_sample(7, id, 64, 64);
        if (s.find(Apparel::dress)) {
            CHECK(!s.find(Apparel::skirt));
            CHECK(!s.find(Apparel::tops));
            CHECK(!s.find(Apparel::pants));
        }
    }
}

TEST_CASE("make_caption matches the template grammar") {
    CHECK(make_caption({Apparel::tops, {220, 30, 30}, Pattern::stripes, 0}) == "a red striped top");
    CHECK(make_caption({Apparel::bag, {10, 10, 10}, Pattern::solid, 0}) == "a black solid bag");
    CHECK(make_caption({Apparel::pants, {50, 90, 220}, Pattern::dots, 0}) == "a blue dotted pants");
}

TEST_CASE("caption round-trips through parse_text for all 432 combinations") {
    PromptEncoder enc(64, 11);
    for (int c = 0; c < kNumCategories; c++)
        for (int col = 0; col < kNumColors; col++)
            for (int p = 0; p < kNumPatterns; p++) {
                ApparelSpec spec{(Apparel)c, color_values()[col], (Pattern)p, 0};
                AttributeTriple t = enc.parse_text(make_caption(spec));
                CHECK(t.category == (Apparel)c);
                CHECK(t.colorBucket == col);
                CHECK(t.pattern == (Pattern)p);
            }
}

TEST_CASE("split_corpus sizes, disjointness and determinism") {
    CorpusManifest m = split_corpus(100, 0.1, 5);
    CHECK(m.testIds.size() == 10);
    CHECK(m.trainIds.size() == 90);
    for (int64_t t : m.testIds)
        for (int64_t tr : m.trainIds) CHECK(t != tr);

    CorpusManifest m2 = split_corpus(100, 0.1, 5);
    CHECK(m.trainIds == m2.trainIds);
    CHECK(m.testIds == m2.testIds);

    CHECK_THROWS_AS(split_corpus(5, 0.1, 1), Error);
    CHECK_THROWS_AS(split_corpus(100, 0.0, 1), Error);
    CHECK_THROWS_AS(split_corpus(100, 1.0, 1), Error);
}

TEST_CASE("split at the reference corpus scale lands within rounding of the reported sizes") {
    // 126,730 ids at a 0.0998 test fraction: round(n*f) = 12,648, within the
    // half-ulp of the 4-digit fraction (ceil(n * 5e-5) = 7) of 12,653.
    CorpusManifest m = split_corpus(126730, 0.0998, 9);
    CHECK((int64_t)m.testIds.size() == 12648);
    CHECK(std::abs((int64_t)m.testIds.size() - 12653) <= 7);
    CHECK(m.trainIds.size() + m.testIds.size() == 126730);
}

TEST_CASE("same id wears the same outfit on a larger canvas") {
    Sample a = generate_sample(3, 17, 64, 64);
    Sample b = generate_sample(3, 17, 128, 128);
    REQUIRE(a.apparel.size() == b.apparel.size());
    for (size_t i = 0; i < a.apparel.size(); i++) CHECK(a.apparel[i] == b.apparel[i]);
}
