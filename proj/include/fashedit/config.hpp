#pragma once

#include <json.hpp>

#include "fashedit/common.hpp"

namespace fashedit {

// Full experiment schema. Parsing is strict: unknown keys are rejected with
// their path, and cross-field constraints are validated up front. The
// canonical JSON dump (sorted keys) feeds the config hash recorded in every
// artifact.
struct ExperimentConfig {
    struct Corpus {
        int canvasH = 64, canvasW = 64;
        int64_t n = 1250;
        uint64_t seed = 7;
        double testFraction = 0.2;
    } corpus;

    struct Codec {
        std::string mode = "spaceToDepth";
        int f = 2;
    } codec;

    struct Schedule {
        int T = 1000;
        double betaMin = 1e-4, betaMax = 0.02;
    } schedule;

    struct Model {
        int depth = 4, dim = 128, heads = 4, patch = 2;
        int promptDim = 64, condTokens = 2;
        std::string fgaMode = "imageQuery";
        bool useApparelLabel = true;  // false = prompt-only conditioning (no-FGA-label ablation)
    } model;

    struct Train {
        double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        int64_t steps = 3000;
        int batch = 8;
        double dropProb = 0.1;
        uint64_t seed = 123;
        int threads = 0;  // 0 = hardware concurrency
    } train;

    struct Guidance {
        double s = 4.5;
        std::string sampler = "ddim";
        int steps = 50;
    } guidance;

    struct Prompt {
        uint64_t seed = 11;
        int size = 32;  // guidance-prompt crop size S
    } prompt;

    struct Pseudo {
        int64_t count = 512;
        double textImageRatio = 0.5;
        uint64_t seed = 77;
    } pseudo;

    struct Paths {
        std::string root = "artifacts";
    } paths;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
    std::string hash() const;  // 16-hex-digit content hash of the canonical dump
    void validate() const;

    // "section.key=value" override, applied before validation.
    void apply_override(const std::string& kv);

    std::string artifact_root() const;  // paths.root, FASHEDIT_ROOT env wins
};

struct RunOptions {
    bool deterministic = false;
    bool dryRun = false;
};

}  // namespace fashedit
