#pragma once

#include <json.hpp>

#include "fashedit/synthcorpus.hpp"

namespace fashedit {

void write_sample_dir(const std::string& dir, const Sample& s, const std::string& configHash);
Sample read_sample_dir(const std::string& dir);

void write_manifest(const std::string& path, const CorpusManifest& m, const std::string& configHash);
CorpusManifest read_manifest(const std::string& path);

std::string sample_dir(const std::string& corpusRoot, bool train, int64_t id);

// Whole corpus in RAM; samples aligned with the manifest id lists.
struct Corpus {
    CorpusManifest manifest;
    std::vector<Sample> train, test;

    const Sample& train_by_index(size_t i) const { return train[i]; }
};

Corpus load_corpus(const std::string& corpusRoot, int threads = 0);

}  // namespace fashedit
