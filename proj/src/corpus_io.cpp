#include "fashedit/corpus_io.hpp"

#include <filesystem>
#include <fstream>

namespace fashedit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    if (!fs::exists(path)) fail(ErrorKind::Dependency, "missing file: " + path);
    std::ifstream f(path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::Io, "bad json in " + path + ": " + e.what());
    }
    return j;
}

std::vector<Rgb> parse_plte() {
    return std::vector<Rgb>(parse_palette().begin(), parse_palette().end());
}
std::vector<Rgb> part_plte() {
    return std::vector<Rgb>(part_palette().begin(), part_palette().end());
}

}  // namespace

void write_sample_dir(const std::string& dir, const Sample& s, const std::string& configHash) {
    fs::create_directories(dir);
    write_png_rgb(dir + "/image.png", s.image);
    write_png_indexed(dir + "/parse.png", s.parse, parse_plte());
    write_png_indexed(dir + "/partmap.png", s.partMap, part_plte());

    json kp = json::array();
    for (const auto& k : s.keypoints) kp.push_back({k.x, k.y, k.c});
    write_file_atomic(dir + "/keypoints.json", kp.dump());

    json meta;
    meta["sampleId"] = s.sampleId;
    meta["configHash"] = configHash;
    json items = json::array();
    for (size_t i = 0; i < s.apparel.size(); i++) {
        const auto& a = s.apparel[i];
        items.push_back({{"category", category_ids()[(int)a.category]},
                         {"color", {a.color.r, a.color.g, a.color.b}},
                         {"pattern", pattern_ids()[(int)a.pattern]},
                         {"variantId", a.variantId},
                         {"caption", s.captions[i]}});
    }
    meta["apparel"] = items;
    write_file_atomic(dir + "/meta.json", meta.dump(2));
}

Sample read_sample_dir(const std::string& dir) {
    Sample s;
    s.image = read_png_rgb(dir + "/image.png");
    s.parse = read_png_indexed(dir + "/parse.png");
    s.partMap = read_png_indexed(dir + "/partmap.png");

    json kp = read_json_file(dir + "/keypoints.json");
    if (kp.size() != 25) fail(ErrorKind::Io, "keypoints.json must have 25 entries: " + dir);
    for (size_t i = 0; i < 25; i++)
        s.keypoints[i] = {kp[i][0].get<double>(), kp[i][1].get<double>(), kp[i][2].get<double>()};

    json meta = read_json_file(dir + "/meta.json");
    s.sampleId = meta.at("sampleId").get<int64_t>();
    for (const auto& item : meta.at("apparel")) {
        ApparelSpec a;
        a.category = category_from_id(item.at("category").get<std::string>());
        auto col = item.at("color");
        a.color = {col[0].get<uint8_t>(), col[1].get<uint8_t>(), col[2].get<uint8_t>()};
        std::string pat = item.at("pattern").get<std::string>();
        bool found = false;
        for (int i = 0; i < kNumPatterns; i++)
            if (pattern_ids()[i] == pat) {
                a.pattern = (Pattern)i;
                found = true;
            }
        if (!found) fail(ErrorKind::Io, "unknown pattern in meta.json: " + pat);
        a.variantId = item.at("variantId").get<int>();
        s.apparel.push_back(a);
        s.captions.push_back(item.at("caption").get<std::string>());
    }
    return s;
}

void write_manifest(const std::string& path, const CorpusManifest& m, const std::string& configHash) {
    json j;
    j["canvas"] = {m.canvasH, m.canvasW};
    j["seed"] = m.seed;
    j["configHash"] = configHash;
    j["trainIds"] = m.trainIds;
    j["testIds"] = m.testIds;
    write_file_atomic(path, j.dump());
}

CorpusManifest read_manifest(const std::string& path) {
    json j = read_json_file(path);
    CorpusManifest m;
    m.canvasH = j.at("canvas")[0].get<int>();
    m.canvasW = j.at("canvas")[1].get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.trainIds = j.at("trainIds").get<std::vector<int64_t>>();
    m.testIds = j.at("testIds").get<std::vector<int64_t>>();
    return m;
}

std::string sample_dir(const std::string& corpusRoot, bool train, int64_t id) {
    return corpusRoot + (train ? "/train/" : "/test/") + std::to_string(id);
}

Corpus load_corpus(const std::string& corpusRoot, int threads) {
    std::string manifestPath = corpusRoot + "/manifest.json";
    if (!fs::exists(manifestPath))
        fail(ErrorKind::Dependency, "corpus manifest not found (run the corpus stage first): " + manifestPath);
    Corpus c;
    c.manifest = read_manifest(manifestPath);
    c.train.resize(c.manifest.trainIds.size());
    c.test.resize(c.manifest.testIds.size());
    parallel_for((int64_t)c.train.size(), threads, [&](int64_t i) {
        c.train[i] = read_sample_dir(sample_dir(corpusRoot, true, c.manifest.trainIds[i]));
    });
    parallel_for((int64_t)c.test.size(), threads, [&](int64_t i) {
        c.test[i] = read_sample_dir(sample_dir(corpusRoot, false, c.manifest.testIds[i]));
    });
    return c;
}

}  // namespace fashedit
