#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>

#include "fashedit/image.hpp"

using namespace fashedit;

TEST_CASE("rng is a pure function of (key, counter)") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; i++) CHECK(a.next_u64() == b.next_u64());

    Rng c(42, 50);
    Rng d(42);
    for (int i = 0; i < 50; i++) d.next_u64();
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("rng uniform_int is in range and covers values") {
    Rng r(7);
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; i++) {
        uint64_t v = r.uniform_int(10);
        CHECK(v < 10);
        seen.insert(v);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("rng normal has roughly standard moments") {
    Rng r(11);
    double sum = 0, sumsq = 0;
    const int n = 20000;
    for (int i = 0; i < n; i++) {
        double v = r.normal();
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n, var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("parallel_for writes every slot exactly once regardless of threads") {
    for (int threads : {1, 2, 4}) {
        std::vector<std::atomic<int>> hits(257);
        parallel_for(257, threads, [&](int64_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h == 1);
    }
}

TEST_CASE("png round-trips rgb, indexed and 1-bit images") {
    auto tmp = std::filesystem::temp_directory_path() / "fashedit_png_test";
    std::filesystem::create_directories(tmp);

    Rng rng(3);
    Image img(24, 17);
    for (auto& b : img.px) b = (uint8_t)rng.uniform_int(256);
    write_png_rgb((tmp / "a.png").string(), img);
    CHECK(read_png_rgb((tmp / "a.png").string()) == img);

    LabelMap lm(9, 13);
    for (auto& v : lm.v) v = (uint8_t)rng.uniform_int(12);
    std::vector<Rgb> pal;
    for (int i = 0; i < 12; i++) pal.push_back({(uint8_t)(i * 20), (uint8_t)(255 - i * 10), 7});
    write_png_indexed((tmp / "b.png").string(), lm, pal);
    CHECK(read_png_indexed((tmp / "b.png").string()) == lm);

    BoolMap bm(21, 10);
    for (auto& v : bm.v) v = rng.uniform() < 0.3;
    write_png_gray1((tmp / "c.png").string(), bm);
    CHECK(read_png_gray1((tmp / "c.png").string()) == bm);

    std::filesystem::remove_all(tmp);
}

TEST_CASE("png encoding is deterministic") {
    auto tmp = std::filesystem::temp_directory_path() / "fashedit_png_det";
    std::filesystem::create_directories(tmp);
    Image img(16, 16, {10, 200, 40});
    write_png_rgb((tmp / "x1.png").string(), img);
    write_png_rgb((tmp / "x2.png").string(), img);
    CHECK(read_file_bytes((tmp / "x1.png").string()) == read_file_bytes((tmp / "x2.png").string()));
    std::filesystem::remove_all(tmp);
}

TEST_CASE("fnv hash and hex formatting are stable") {
    CHECK(hex_u64(fnv1a64("fashedit")).size() == 16);
    CHECK(fnv1a64("a") != fnv1a64("b"));
    CHECK(hex_u64(0) == "0000000000000000");
}
