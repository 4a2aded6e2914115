#include "fashedit/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace fashedit {

using nlohmann::json;

namespace {

// Strict object reader: every key must be consumed exactly once.
class ObjReader {
public:
    ObjReader(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorKind::RejectedConfig, "config: " + path_ + " must be an object");
    }

    template <typename T>
    void opt(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const std::exception&) {
            fail(ErrorKind::RejectedConfig, "config: bad value type at " + path_ + "." + key);
        }
    }

    void opt_canvas(const char* key, int& h, int& w) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 2)
            fail(ErrorKind::RejectedConfig, "config: " + path_ + "." + key + " must be [H, W]");
        h = v[0].get<int>();
        w = v[1].get<int>();
    }

    json sub(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? j_.at(key) : json::object();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                fail(ErrorKind::RejectedConfig, "config: unknown key " + path_ + "." + it.key());
    }

private:
    json j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    ObjReader top(j, "config");

    {
        ObjReader r(top.sub("corpus"), "corpus");
        r.opt_canvas("canvas", c.corpus.canvasH, c.corpus.canvasW);
        r.opt("n", c.corpus.n);
        r.opt("seed", c.corpus.seed);
        r.opt("testFraction", c.corpus.testFraction);
        r.finish();
    }
    {
        ObjReader r(top.sub("codec"), "codec");
        r.opt("mode", c.codec.mode);
        r.opt("f", c.codec.f);
        r.finish();
    }
    {
        ObjReader r(top.sub("schedule"), "schedule");
        r.opt("T", c.schedule.T);
        r.opt("betaMin", c.schedule.betaMin);
        r.opt("betaMax", c.schedule.betaMax);
        r.finish();
    }
    {
        ObjReader r(top.sub("model"), "model");
        r.opt("depth", c.model.depth);
        r.opt("dim", c.model.dim);
        r.opt("heads", c.model.heads);
        r.opt("patch", c.model.patch);
        r.opt("promptDim", c.model.promptDim);
        r.opt("condTokens", c.model.condTokens);
        r.opt("fgaMode", c.model.fgaMode);
        r.opt("useApparelLabel", c.model.useApparelLabel);
        r.finish();
    }
    {
        ObjReader r(top.sub("train"), "train");
        r.opt("lr", c.train.lr);
        r.opt("beta1", c.train.beta1);
        r.opt("beta2", c.train.beta2);
        r.opt("eps", c.train.eps);
        r.opt("steps", c.train.steps);
        r.opt("batch", c.train.batch);
        r.opt("dropProb", c.train.dropProb);
        r.opt("seed", c.train.seed);
        r.opt("threads", c.train.threads);
        r.finish();
    }
    {
        ObjReader r(top.sub("guidance"), "guidance");
        r.opt("s", c.guidance.s);
        r.opt("sampler", c.guidance.sampler);
        r.opt("steps", c.guidance.steps);
        r.finish();
    }
    {
        ObjReader r(top.sub("prompt"), "prompt");
        r.opt("seed", c.prompt.seed);
        r.opt("size", c.prompt.size);
        r.finish();
    }
    {
        ObjReader r(top.sub("pseudo"), "pseudo");
        r.opt("count", c.pseudo.count);
        r.opt("textImageRatio", c.pseudo.textImageRatio);
        r.opt("seed", c.pseudo.seed);
        r.finish();
    }
    {
        ObjReader r(top.sub("paths"), "paths");
        r.opt("root", c.paths.root);
        r.finish();
    }
    top.finish();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::RejectedConfig, "cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::RejectedConfig, std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    j["corpus"] = {{"canvas", {corpus.canvasH, corpus.canvasW}},
                   {"n", corpus.n},
                   {"seed", corpus.seed},
                   {"testFraction", corpus.testFraction}};
    j["codec"] = {{"mode", codec.mode}, {"f", codec.f}};
    j["schedule"] = {{"T", schedule.T}, {"betaMin", schedule.betaMin}, {"betaMax", schedule.betaMax}};
    j["model"] = {{"depth", model.depth},       {"dim", model.dim},
                  {"heads", model.heads},       {"patch", model.patch},
                  {"promptDim", model.promptDim}, {"condTokens", model.condTokens},
                  {"fgaMode", model.fgaMode},   {"useApparelLabel", model.useApparelLabel}};
    j["train"] = {{"lr", train.lr},     {"beta1", train.beta1}, {"beta2", train.beta2},
                  {"eps", train.eps},   {"steps", train.steps}, {"batch", train.batch},
                  {"dropProb", train.dropProb}, {"seed", train.seed}, {"threads", train.threads}};
    j["guidance"] = {{"s", guidance.s}, {"sampler", guidance.sampler}, {"steps", guidance.steps}};
    j["prompt"] = {{"seed", prompt.seed}, {"size", prompt.size}};
    j["pseudo"] = {{"count", pseudo.count},
                   {"textImageRatio", pseudo.textImageRatio},
                   {"seed", pseudo.seed}};
    j["paths"] = {{"root", paths.root}};
    return j;
}

std::string ExperimentConfig::hash() const { return hex_u64(fnv1a64(to_json().dump())); }

void ExperimentConfig::validate() const {
    if (corpus.canvasH < 64 || corpus.canvasW < 64 || corpus.canvasH % 8 || corpus.canvasW % 8)
        fail(ErrorKind::RejectedConfig, "corpus.canvas must be >= 64 and divisible by 8");
    if (corpus.n < 10) fail(ErrorKind::RejectedConfig, "corpus.n must be >= 10");
    if (!(corpus.testFraction > 0 && corpus.testFraction < 1))
        fail(ErrorKind::RejectedConfig, "corpus.testFraction must be in (0,1)");
    if (codec.f < 1) fail(ErrorKind::RejectedConfig, "codec.f must be >= 1");
    if (codec.mode != "identity" && codec.mode != "spaceToDepth")
        fail(ErrorKind::RejectedConfig, "codec.mode must be identity or spaceToDepth");
    if (corpus.canvasH % codec.f || corpus.canvasW % codec.f)
        fail(ErrorKind::RejectedConfig, "corpus.canvas must be divisible by codec.f");
    if (schedule.T < 2) fail(ErrorKind::RejectedConfig, "schedule.T must be >= 2");
    if (!(schedule.betaMin > 0 && schedule.betaMin < schedule.betaMax && schedule.betaMax < 1))
        fail(ErrorKind::RejectedConfig, "schedule: need 0 < betaMin < betaMax < 1");
    if (model.depth < 1) fail(ErrorKind::RejectedConfig, "model.depth must be >= 1");
    if (model.dim < 8 || model.dim % model.heads)
        fail(ErrorKind::RejectedConfig, "model.dim must be >= 8 and divisible by model.heads");
    if (model.dim % 4) fail(ErrorKind::RejectedConfig, "model.dim must be divisible by 4");
    if (model.patch < 1) fail(ErrorKind::RejectedConfig, "model.patch must be >= 1");
    int latentH = corpus.canvasH / (codec.mode == "identity" ? 1 : codec.f);
    int latentW = corpus.canvasW / (codec.mode == "identity" ? 1 : codec.f);
    if (latentH % model.patch || latentW % model.patch)
        fail(ErrorKind::RejectedConfig, "latent dims must be divisible by model.patch");
    if (model.condTokens != 1 && model.condTokens != 2)
        fail(ErrorKind::RejectedConfig, "model.condTokens must be 1 or 2");
    if (model.fgaMode != "imageQuery" && model.fgaMode != "literalCondQuery")
        fail(ErrorKind::RejectedConfig, "model.fgaMode must be imageQuery or literalCondQuery");
    if (model.promptDim < 8) fail(ErrorKind::RejectedConfig, "model.promptDim must be >= 8");
    if (train.lr <= 0 || train.batch < 1 || train.steps < 1)
        fail(ErrorKind::RejectedConfig, "train: lr > 0, batch >= 1, steps >= 1 required");
    if (!(train.dropProb >= 0 && train.dropProb < 1))
        fail(ErrorKind::RejectedConfig, "train.dropProb must be in [0,1)");
    if (guidance.s < 0) fail(ErrorKind::RejectedConfig, "guidance.s must be >= 0");
    if (guidance.sampler != "ddim" && guidance.sampler != "ddpmAncestral")
        fail(ErrorKind::RejectedConfig, "guidance.sampler must be ddim or ddpmAncestral");
    if (guidance.steps < 1 || guidance.steps > schedule.T)
        fail(ErrorKind::RejectedConfig, "guidance.steps must be in [1, schedule.T]");
    if (prompt.size < 16) fail(ErrorKind::RejectedConfig, "prompt.size must be >= 16");
    if (pseudo.count < 1) fail(ErrorKind::RejectedConfig, "pseudo.count must be >= 1");
    if (!(pseudo.textImageRatio >= 0 && pseudo.textImageRatio <= 1))
        fail(ErrorKind::RejectedConfig, "pseudo.textImageRatio must be in [0,1]");
    if (paths.root.empty()) fail(ErrorKind::RejectedConfig, "paths.root must not be empty");
}

void ExperimentConfig::apply_override(const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::RejectedConfig, "override must be key.path=value: " + kv);
    std::string path = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);

    json j = to_json();
    json* cur = &j;
    size_t pos = 0;
    while (true) {
        size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!cur->contains(key)) fail(ErrorKind::RejectedConfig, "config: unknown override key " + path);
        if (dot == std::string::npos) {
            json& leafv = (*cur)[key];
            json parsed = json::parse(value, nullptr, false);
            if (parsed.is_discarded()) parsed = value;  // bare strings
            if (leafv.is_string() && !parsed.is_string())
                parsed = value;
            else if (!leafv.is_string() && parsed.is_string())
                fail(ErrorKind::RejectedConfig, "config: override value for " + path + " must be " +
                                                    std::string(leafv.type_name()));
            leafv = parsed;
            break;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
    *this = from_json(j);
}

std::string ExperimentConfig::artifact_root() const {
    const char* env = std::getenv("FASHEDIT_ROOT");
    return env && *env ? std::string(env) : paths.root;
}

}  // namespace fashedit
