#include "fashedit/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fashedit/gradcheck.hpp"

namespace fashedit {

namespace fs = std::filesystem;
using nlohmann::json;

Runtime::Runtime(const ExperimentConfig& cfg) : encoder(cfg.model.promptDim, cfg.prompt.seed) {
    codec.mode = LatentCodec::mode_from_id(cfg.codec.mode);
    codec.f = cfg.codec.f;
    schedule = make_schedule(cfg.schedule.T, cfg.schedule.betaMin, cfg.schedule.betaMax);
}

void fit_codec(Runtime& rt, const Corpus& corpus) {
    std::vector<const Image*> imgs;
    for (const auto& s : corpus.train) imgs.push_back(&s.image);
    if (imgs.empty()) fail(ErrorKind::Dependency, "codec fit: empty training corpus");
    rt.codec.fit(imgs);
}

json codec_stats_json(const LatentCodec& codec) {
    return json{{"mode", codec.mode_id()}, {"f", codec.f}, {"mean", codec.chMean}, {"scale", codec.chScale}};
}

void codec_stats_load(LatentCodec& codec, const json& j) {
    codec.mode = LatentCodec::mode_from_id(j.at("mode").get<std::string>());
    codec.f = j.at("f").get<int>();
    codec.chMean = j.at("mean").get<std::vector<double>>();
    codec.chScale = j.at("scale").get<std::vector<double>>();
    if ((int)codec.chMean.size() != codec.channels() || (int)codec.chScale.size() != codec.channels())
        fail(ErrorKind::Io, "codec stats: channel count mismatch");
}

DiTConfig stage_dit_config(const ExperimentConfig& cfg, int stage) {
    LatentCodec shell;
    shell.mode = LatentCodec::mode_from_id(cfg.codec.mode);
    shell.f = cfg.codec.f;
    int C = shell.channels();
    DiTConfig d;
    d.depth = cfg.model.depth;
    d.dim = cfg.model.dim;
    d.heads = cfg.model.heads;
    d.patch = cfg.model.patch;
    d.promptDim = cfg.model.promptDim;
    d.condTokens = cfg.model.condTokens;
    d.maxTimestep = cfg.schedule.T;
    d.fgaMode = cfg.model.fgaMode == "imageQuery" ? FgaMode::imageQuery : FgaMode::literalCondQuery;
    d.inChannels = stage == 1 ? 4 * C : 2 * C;  // [z_t, P_m, D, M] vs [z_t, P]
    d.outChannels = C;
    d.validate();
    return d;
}

Apparel pick_category(const Sample& s, Rng& rng) {
    if (s.apparel.empty()) fail(ErrorKind::MissingApparel, "sample wears nothing");
    return s.apparel[rng.uniform_int(s.apparel.size())].category;
}

namespace {

std::vector<double> prompt_embedding_for(const Sample& s, Apparel cat, Modality modality,
                                         const Runtime& rt, const ExperimentConfig& cfg) {
    if (modality == Modality::image) {
        GuidancePrompt gp = extract_guidance_prompt(s, cat, cfg.prompt.size);
        return rt.encoder.embed(rt.encoder.analyze_image(gp), Modality::image).v;
    }
    auto caption = s.caption_for(cat);
    if (!caption) fail(ErrorKind::MissingApparel, "no caption for category");
    return rt.encoder.embed(rt.encoder.parse_text(*caption), Modality::text).v;
}

int effective_label(Apparel cat, const ExperimentConfig& cfg) {
    return cfg.model.useApparelLabel ? (int)cat : kNullLabel;
}

}  // namespace

StageExample make_stage1_example(const Sample& s, Apparel cat, Modality modality, const Runtime& rt,
                                 const ExperimentConfig& cfg) {
    AgnosticResult agn = remove_apparel(s, cat);
    MaskedParse mp = masked_parse(s.parse, agn.region);

    StageExample ex;
    ex.z0 = rt.codec.encode(s.image);
    ex.aux.push_back(rt.codec.encode(agn.agnosticImage));
    ex.aux.push_back(rt.codec.encode(render_partmap(s.partMap)));
    ex.aux.push_back(rt.codec.encode(render_parse(mp.parse)));
    ex.iclip = prompt_embedding_for(s, cat, modality, rt, cfg);
    ex.label = effective_label(cat, cfg);
    return ex;
}

StageExample make_stage2_example(const Sample& origin, const PseudoSample& ps, Modality modality,
                                 const Runtime& rt, const ExperimentConfig& cfg) {
    StageExample ex;
    ex.z0 = rt.codec.encode(origin.image);
    ex.aux.push_back(rt.codec.encode(ps.image));
    // Paired prompt: the origin's own apparel description for the edited
    // category (the target image wears it).
    ex.iclip = prompt_embedding_for(origin, ps.category, modality, rt, cfg);
    ex.label = effective_label(ps.category, cfg);
    return ex;
}

TrainResult train_loop(int stage, FashionDiT<float>& model, const Corpus& corpus,
                       const std::vector<PseudoSample>* pseudo, const Runtime& rt,
                       const ExperimentConfig& cfg, const RunOptions& opts, bool quiet) {
    if (stage == 2 && (!pseudo || pseudo->empty()))
        fail(ErrorKind::Dependency, "stage 2 training needs a pseudo corpus (run pseudo first)");
    if (corpus.train.empty()) fail(ErrorKind::Dependency, "training corpus is empty");
    if (cfg.train.dropProb == 0.0 && !quiet)
        std::fprintf(stderr, "[train] warning: dropProb = 0, the unconditional branch will never train\n");

    std::map<int64_t, size_t> idToIndex;
    for (size_t i = 0; i < corpus.manifest.trainIds.size(); i++)
        idToIndex[corpus.manifest.trainIds[i]] = i;

    int threads = opts.deterministic ? 1 : effective_threads(cfg.train.threads);
    int batch = cfg.train.batch;
    int H = corpus.manifest.canvasH, W = corpus.manifest.canvasW;
    uint64_t stageTag = stage == 1 ? 0x5331ULL : 0x5332ULL;
    std::vector<double> nullEmb = rt.encoder.null_embedding().v;

    TrainResult result;
    result.losses.reserve(cfg.train.steps);
    std::vector<std::map<std::string, Tensor<float>>> slotGrads(batch);
    std::vector<double> slotLoss(batch);

    auto t0 = std::chrono::steady_clock::now();
    for (int64_t step = 0; step < cfg.train.steps; step++) {
        parallel_for(batch, threads, [&](int64_t slot) {
            Rng rng(mix64(cfg.train.seed, stageTag, (uint64_t)step, (uint64_t)slot));
            StageExample ex;
            if (stage == 1) {
                const Sample& s = corpus.train[rng.uniform_int(corpus.train.size())];
                Apparel cat = pick_category(s, rng);
                Modality m = rng.uniform() < cfg.pseudo.textImageRatio ? Modality::text : Modality::image;
                ex = make_stage1_example(s, cat, m, rt, cfg);
            } else {
                const PseudoSample& ps = (*pseudo)[rng.uniform_int(pseudo->size())];
                auto it = idToIndex.find(ps.originId);
                if (it == idToIndex.end())
                    fail(ErrorKind::Manifest, "pseudo sample origin not in training split: " +
                                                  std::to_string(ps.originId));
                Modality m = rng.uniform() < cfg.pseudo.textImageRatio ? Modality::text : Modality::image;
                ex = make_stage2_example(corpus.train[it->second], ps, m, rt, cfg);
            }
            if (rng.uniform() < cfg.train.dropProb) {
                ex.iclip = nullEmb;
                ex.label = kNullLabel;
            }
            slotGrads[slot].clear();
            slotLoss[slot] = training_loss<float>(model, ex.z0, ex.aux, ex.iclip, ex.label, H, W,
                                                  rt.schedule, rng, &slotGrads[slot]);
        });

        model.params().zero_grads();
        double lossSum = 0;
        for (int slot = 0; slot < batch; slot++) {
            lossSum += slotLoss[slot];
            for (auto& [name, g] : slotGrads[slot]) {
                auto& p = model.params().at(name);
                for (int64_t i = 0; i < p.grad.numel(); i++) p.grad[i] += (float)(g[i] / batch);
            }
        }
        model.params().adam_step(cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.eps);
        result.losses.push_back(lossSum / batch);

        if (!quiet && (step % 100 == 0 || step + 1 == cfg.train.steps)) {
            double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::fprintf(stderr, "[train stage %d] step %ld/%ld loss %.4f (%.1fs)\n", stage,
                         (long)step, (long)cfg.train.steps, result.losses.back(), dt);
        }
    }
    return result;
}

Image composite_over_region(const Image& origin, const Image& generated, const BoolMap& region) {
    if (origin.h != generated.h || origin.w != generated.w || region.h != origin.h || region.w != origin.w)
        fail(ErrorKind::Shape, "composite: shape mismatch");
    Image out = origin;
    for (int y = 0; y < out.h; y++)
        for (int x = 0; x < out.w; x++)
            if (region.at(y, x)) out.set(y, x, generated.get(y, x));
    return out;
}

PseudoSample generate_pseudo(const FashionDiT<float>& stage1, const Sample& origin, Apparel cat,
                             const AttributeTriple& unpaired, Modality modality, const Runtime& rt,
                             const ExperimentConfig& cfg, Rng& rng) {
    if (unpaired.category != cat)
        fail(ErrorKind::UnpairedViolation, "unpaired prompt category does not match the edit target");
    const ApparelSpec* spec = origin.find(cat);
    if (!spec) fail(ErrorKind::MissingApparel, "origin does not wear the target category");
    AttributeTriple originTriple = rt.encoder.triple_of(*spec);
    if (originTriple == unpaired)
        fail(ErrorKind::UnpairedViolation, "paired triple supplied for pseudo-sample generation");

    AgnosticResult agn = remove_apparel(origin, cat);
    MaskedParse mp = masked_parse(origin.parse, agn.region);
    std::vector<Tensor<float>> aux;
    aux.push_back(rt.codec.encode(agn.agnosticImage));
    aux.push_back(rt.codec.encode(render_partmap(origin.partMap)));
    aux.push_back(rt.codec.encode(render_parse(mp.parse)));

    std::vector<double> emb = rt.encoder.embed(unpaired, modality).v;
    std::vector<double> nullEmb = rt.encoder.null_embedding().v;

    Tensor<float> z = randn_tensor<float>(aux[0].shape, rng);
    z = sample_loop(stage1, std::move(z), aux, emb, effective_label(cat, cfg), nullEmb, cfg.guidance.s,
                    sampler_from_id(cfg.guidance.sampler), cfg.guidance.steps, origin.image.h,
                    origin.image.w, rt.schedule, rng);
    Image generated = rt.codec.decode(z);

    PseudoSample ps;
    ps.image = composite_over_region(origin.image, generated, agn.region);
    ps.promptTriple = unpaired;
    ps.modality = modality;
    ps.region = agn.region;
    ps.originId = origin.sampleId;
    ps.category = cat;
    return ps;
}

std::vector<PseudoSample> generate_pseudo_corpus(const FashionDiT<float>& stage1, const Corpus& corpus,
                                                 const Runtime& rt, const ExperimentConfig& cfg,
                                                 const RunOptions& opts) {
    int64_t count = std::min<int64_t>(cfg.pseudo.count, (int64_t)corpus.train.size() * 4);
    int threads = opts.deterministic ? 1 : effective_threads(cfg.train.threads);
    std::vector<PseudoSample> out(count);
    std::atomic<int64_t> done{0};
    parallel_for(count, threads, [&](int64_t k) {
        Rng rng(mix64(cfg.pseudo.seed, (uint64_t)k));
        const Sample& origin = corpus.train[(size_t)(k % corpus.train.size())];
        Apparel cat = pick_category(origin, rng);
        AttributeTriple originTriple = rt.encoder.triple_of(*origin.find(cat));
        AttributeTriple unpaired = originTriple;
        while (unpaired == originTriple) {
            unpaired.colorBucket = (int)rng.uniform_int(kNumColors);
            unpaired.pattern = (Pattern)rng.uniform_int(kNumPatterns);
        }
        Modality m = rng.uniform() < cfg.pseudo.textImageRatio ? Modality::text : Modality::image;
        out[k] = generate_pseudo(stage1, origin, cat, unpaired, m, rt, cfg, rng);
        int64_t d = ++done;
        if (d % 64 == 0) std::fprintf(stderr, "[pseudo] %ld/%ld\n", (long)d, (long)count);
    });
    return out;
}

std::vector<std::string> transfer_params(const ParamStore<float>& src, FashionDiT<float>& dst) {
    std::vector<std::string> log;
    std::vector<std::string> missing;
    for (auto& [name, p] : dst.params()) {
        if (!src.has(name)) {
            missing.push_back(name);
            continue;
        }
        const auto& q = src.at(name);
        if (q.value.shape == p.value.shape) {
            p.value = q.value;
        } else if (name == "patch.w" && q.value.cols() == p.value.cols() &&
                   q.value.rows() > p.value.rows()) {
            // stage II input channels are a leading subset of stage I's
            // ([z_t, E(P)] onto [z_t, E(P_m)]); patchify is channel-major, so
            // the overlap is the leading rows.
            for (int64_t i = 0; i < p.value.numel(); i++) p.value[i] = q.value[i];
        } else {
            fail(ErrorKind::Transfer, "transfer: shape mismatch for " + name);
        }
        log.push_back(name + " src=" + hex_u64(src.value_checksum(name)) +
                      " dst=" + hex_u64(dst.params().value_checksum(name)));
    }
    if (!missing.empty()) {
        std::string msg = "transfer: source checkpoint lacks:";
        for (const auto& n : missing) msg += " " + n;
        fail(ErrorKind::Transfer, msg);
    }
    return log;
}

Image edit_image(const FashionDiT<float>& stage2, const Image& person, const std::vector<double>& iclip,
                 int label, const Runtime& rt, double s, SamplerKind sampler, int steps, Rng& rng) {
    std::vector<Tensor<float>> aux = {rt.codec.encode(person)};
    std::vector<double> nullEmb = rt.encoder.null_embedding().v;
    Tensor<float> z = randn_tensor<float>(aux[0].shape, rng);
    z = sample_loop(stage2, std::move(z), aux, iclip, label, nullEmb, s, sampler, steps, person.h,
                    person.w, rt.schedule, rng);
    return rt.codec.decode(z);
}

json checkpoint_header(const ExperimentConfig& cfg, int stage, const Runtime& rt, int64_t steps) {
    json h;
    h["version"] = 1;
    h["stage"] = stage;
    h["configHash"] = cfg.hash();
    h["codec"] = codec_stats_json(rt.codec);
    h["rng"] = {{"key", cfg.train.seed}, {"counter", steps}};
    h["steps"] = steps;
    return h;
}

void save_stage_checkpoint(const std::string& path, const FashionDiT<float>& model, const json& header) {
    save_checkpoint(path, model.params(), header);
}

FashionDiT<float> load_stage_model(const std::string& path, const ExperimentConfig& cfg, int stage,
                                   Runtime& rt, const char* neededBy) {
    if (!fs::exists(path))
        fail(ErrorKind::Dependency,
             std::string("missing checkpoint ") + path + " (run " + neededBy + " first)");
    LoadedCheckpoint ck = load_checkpoint(path);
    codec_stats_load(rt.codec, ck.header.at("codec"));
    FashionDiT<float> model(stage_dit_config(cfg, stage));
    for (auto& [name, p] : model.params()) {
        if (!ck.store.has(name)) fail(ErrorKind::Io, "checkpoint missing parameter " + name);
        const auto& q = ck.store.at(name);
        if (q.value.shape != p.value.shape) fail(ErrorKind::Io, "checkpoint shape mismatch for " + name);
        p.value = q.value;
    }
    return model;
}

// ---------------------------------------------------------------- commands

namespace {

std::string corpus_dir(const ExperimentConfig& cfg) { return cfg.artifact_root() + "/corpus"; }
std::string stage_ckpt(const ExperimentConfig& cfg, int stage) {
    return cfg.artifact_root() + "/runs/stage" + std::to_string(stage) + "/checkpoint.fckpt";
}

void write_config_copy(const ExperimentConfig& cfg) {
    json j = cfg.to_json();
    j["configHash"] = cfg.hash();
    write_file_atomic(cfg.artifact_root() + "/config.json", j.dump(2));
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::string out = "step,loss\n";
    char buf[64];
    for (size_t i = 0; i < losses.size(); i++) {
        std::snprintf(buf, sizeof buf, "%zu,%.8f\n", i, losses[i]);
        out += buf;
    }
    write_file_atomic(path, out);
}

}  // namespace

void cmd_corpus(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    std::string root = corpus_dir(cfg);
    CorpusManifest m = split_corpus(cfg.corpus.n, cfg.corpus.testFraction, cfg.corpus.seed);
    m.canvasH = cfg.corpus.canvasH;
    m.canvasW = cfg.corpus.canvasW;
    int threads = opts.deterministic ? 1 : effective_threads(cfg.train.threads);
    std::string hash = cfg.hash();
    auto emit = [&](const std::vector<int64_t>& ids, bool train) {
        parallel_for((int64_t)ids.size(), threads, [&](int64_t i) {
            Sample s = generate_sample(cfg.corpus.seed, ids[i], cfg.corpus.canvasH, cfg.corpus.canvasW);
            write_sample_dir(sample_dir(root, train, ids[i]), s, hash);
        });
    };
    emit(m.trainIds, true);
    emit(m.testIds, false);
    write_manifest(root + "/manifest.json", m, hash);
    write_config_copy(cfg);
    std::fprintf(stderr, "[corpus] wrote %zu train / %zu test samples to %s\n", m.trainIds.size(),
                 m.testIds.size(), root.c_str());
}

void cmd_prep(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    Corpus corpus = load_corpus(corpus_dir(cfg), cfg.train.threads);
    std::string prepRoot = cfg.artifact_root() + "/prep";
    int threads = opts.deterministic ? 1 : effective_threads(cfg.train.threads);

    auto emit = [&](const std::vector<Sample>& split, const std::vector<int64_t>& ids, bool train) {
        parallel_for((int64_t)split.size(), threads, [&](int64_t i) {
            const Sample& s = split[i];
            std::string dir = sample_dir(prepRoot, train, ids[i]);
            fs::create_directories(dir);
            for (const auto& spec : s.apparel) {
                std::string cat = category_ids()[(int)spec.category];
                AgnosticResult agn = remove_apparel(s, spec.category);
                MaskedParse mp = masked_parse(s.parse, agn.region);
                GuidancePrompt gp = extract_guidance_prompt(s, spec.category, cfg.prompt.size);
                write_png_rgb(dir + "/agnostic_" + cat + ".png", agn.agnosticImage);
                write_png_gray1(dir + "/region_" + cat + ".png", agn.region);
                write_png_indexed(dir + "/maskedparse_" + cat + ".png", mp.parse,
                                  {parse_palette().begin(), parse_palette().end()});
                write_png_rgb(dir + "/prompt_" + cat + ".png", gp.image);
            }
        });
    };
    emit(corpus.train, corpus.manifest.trainIds, true);
    emit(corpus.test, corpus.manifest.testIds, false);
    std::fprintf(stderr, "[prep] wrote agnostic/region/maskedparse/prompt files to %s\n",
                 prepRoot.c_str());
}

void cmd_train_stage1(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    Corpus corpus = load_corpus(corpus_dir(cfg), cfg.train.threads);
    Runtime rt(cfg);
    fit_codec(rt, corpus);
    FashionDiT<float> model(stage_dit_config(cfg, 1));
    model.init_weights(mix64(cfg.train.seed, 1));
    TrainResult res = train_loop(1, model, corpus, nullptr, rt, cfg, opts);
    std::string dir = cfg.artifact_root() + "/runs/stage1";
    fs::create_directories(dir);
    write_loss_csv(dir + "/loss.csv", res.losses);
    save_stage_checkpoint(stage_ckpt(cfg, 1), model, checkpoint_header(cfg, 1, rt, cfg.train.steps));
    write_config_copy(cfg);
    std::fprintf(stderr, "[train-stage1] checkpoint at %s\n", stage_ckpt(cfg, 1).c_str());
}

void cmd_pseudo(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    Corpus corpus = load_corpus(corpus_dir(cfg), cfg.train.threads);
    Runtime rt(cfg);
    FashionDiT<float> stage1 = load_stage_model(stage_ckpt(cfg, 1), cfg, 1, rt, "train-stage1");
    std::vector<PseudoSample> pseudo = generate_pseudo_corpus(stage1, corpus, rt, cfg, opts);
    write_pseudo_corpus(cfg.artifact_root() + "/pseudo", pseudo, cfg.hash());
    std::fprintf(stderr, "[pseudo] wrote %zu pseudo-samples\n", pseudo.size());
}

void cmd_train_stage2(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    Corpus corpus = load_corpus(corpus_dir(cfg), cfg.train.threads);
    Runtime rt(cfg);
    FashionDiT<float> stage1 = load_stage_model(stage_ckpt(cfg, 1), cfg, 1, rt, "train-stage1");
    std::string pseudoDir = cfg.artifact_root() + "/pseudo";
    if (!fs::exists(pseudoDir + "/index.json"))
        fail(ErrorKind::Dependency, "missing pseudo corpus (run pseudo first): " + pseudoDir);
    std::vector<PseudoSample> pseudo = read_pseudo_corpus(pseudoDir);

    FashionDiT<float> model(stage_dit_config(cfg, 2));
    model.init_weights(mix64(cfg.train.seed, 2));
    std::vector<std::string> log = transfer_params(stage1.params(), model);
    std::string dir = cfg.artifact_root() + "/runs/stage2";
    fs::create_directories(dir);
    {
        std::string txt;
        for (const auto& l : log) txt += l + "\n";
        write_file_atomic(dir + "/transfer_log.txt", txt);
    }
    TrainResult res = train_loop(2, model, corpus, &pseudo, rt, cfg, opts);
    write_loss_csv(dir + "/loss.csv", res.losses);
    save_stage_checkpoint(stage_ckpt(cfg, 2), model, checkpoint_header(cfg, 2, rt, cfg.train.steps));
    std::fprintf(stderr, "[train-stage2] checkpoint at %s\n", stage_ckpt(cfg, 2).c_str());
}

void cmd_edit(const ExperimentConfig& cfg, const RunOptions& opts, const EditArgs& args) {
    if (opts.dryRun) return;
    Runtime rt(cfg);
    FashionDiT<float> model = load_stage_model(stage_ckpt(cfg, 2), cfg, 2, rt, "train-stage2");

    Image person;
    if (!args.input.empty()) {
        person = read_png_rgb(args.input);
    } else {
        Corpus corpus = load_corpus(corpus_dir(cfg), cfg.train.threads);
        if (corpus.test.empty()) fail(ErrorKind::Dependency, "no test samples to edit");
        person = corpus.test[0].image;
    }

    std::vector<double> emb;
    int label;
    if (args.label == "null") {
        emb = rt.encoder.null_embedding().v;
        label = kNullLabel;
    } else {
        Apparel cat = category_from_id(args.label);
        AttributeTriple triple;
        if (!args.promptText.empty()) {
            triple = rt.encoder.parse_text(args.promptText);
            if (triple.category != cat)
                fail(ErrorKind::ConditionMismatch, "prompt category does not match --label");
            emb = rt.encoder.embed(triple, Modality::text).v;
        } else if (!args.promptImage.empty()) {
            GuidancePrompt gp{read_png_rgb(args.promptImage), cat};
            triple = rt.encoder.analyze_image(gp);
            emb = rt.encoder.embed(triple, Modality::image).v;
        } else {
            fail(ErrorKind::RejectedConfig, "edit needs --prompt or --prompt-image (or --label null)");
        }
        label = effective_label(cat, cfg);
    }

    double s = args.s >= 0 ? args.s : cfg.guidance.s;
    SamplerKind sampler = sampler_from_id(args.sampler.empty() ? cfg.guidance.sampler : args.sampler);
    int steps = args.steps > 0 ? args.steps : cfg.guidance.steps;
    Rng rng(mix64(args.seed ? args.seed : cfg.train.seed, 0xed17ULL));
    Image out = edit_image(model, person, emb, label, rt, s, sampler, steps, rng);
    write_png_rgb(args.out, out);
    std::fprintf(stderr, "[edit] wrote %s\n", args.out.c_str());
}

void cmd_eval(const ExperimentConfig& cfg, const RunOptions& opts, const std::string& editedDir,
              const std::string& referenceDir, const std::string& manifestPath) {
    if (opts.dryRun) return;
    Runtime rt(cfg);
    std::string outDir = cfg.artifact_root() + "/eval";
    EvalReport rep = evaluate_run(editedDir, referenceDir, manifestPath, outDir, rt.encoder,
                                  opts.deterministic ? 1 : cfg.train.threads);
    std::fprintf(stderr, "[eval] n=%d clipScore=%.2f ssim=%.4f -> %s/report.json\n", rep.n,
                 rep.clipScore, rep.ssimPaired, outDir.c_str());
}

void cmd_gradcheck(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (opts.dryRun) return;
    // tiny double-precision stage-I model over a 16x16 latent
    DiTConfig d = stage_dit_config(cfg, 1);
    d.depth = 2;
    d.dim = 16;
    d.heads = 2;
    d.maxTimestep = cfg.schedule.T;
    FashionDiT<double> model(d);
    model.init_weights(42);

    Rng rng(7);
    int C = d.inChannels / 4;
    Tensor<double> z0 = randn_tensor<double>({C, 16, 16}, rng);
    std::vector<Tensor<double>> aux;
    for (int i = 0; i < 3; i++) aux.push_back(randn_tensor<double>({C, 16, 16}, rng));
    PromptEncoder enc(d.promptDim, cfg.prompt.seed);
    std::vector<double> iclip = enc.embed({Apparel::tops, 2, Pattern::solid}, Modality::text).v;

    DiffusionSchedule sched = make_schedule(cfg.schedule.T, cfg.schedule.betaMin, cfg.schedule.betaMax);
    TrainingDraw<double> draw;
    draw.t = sched.T / 2;
    draw.eps = randn_tensor<double>(z0.shape, rng);

    auto f = [&](ParamStore<double>& P, bool wantGrad) {
        std::map<std::string, Tensor<double>> grads;
        Rng r2(1);
        double loss = training_loss<double>(model, z0, aux, iclip, 0, 64, 64, sched, r2,
                                            wantGrad ? &grads : nullptr, &draw);
        if (wantGrad)
            for (auto& [n, g] : grads) P.at(n).grad = g;
        return loss;
    };
    GradCheckReport rep = grad_check(f, model.params(), 1e-3, 256, 99);
    std::fprintf(stderr, "[gradcheck] %d coordinates, max rel err %.3e\n", rep.coordsChecked,
                 rep.maxRelErr);
    if (rep.maxRelErr >= 1e-4) fail(ErrorKind::VerifyFailed, "gradient check exceeded 1e-4");
}

void write_pseudo_corpus(const std::string& dir, const std::vector<PseudoSample>& pseudo,
                         const std::string& configHash) {
    fs::create_directories(dir);
    json index;
    index["configHash"] = configHash;
    json entries = json::array();
    for (const auto& ps : pseudo) {
        std::string cat = category_ids()[(int)ps.category];
        std::string sub = std::to_string(ps.originId) + "_" + cat;
        fs::create_directories(dir + "/" + sub);
        write_png_rgb(dir + "/" + sub + "/image.png", ps.image);
        write_png_gray1(dir + "/" + sub + "/region.png", ps.region);
        json meta = {{"originId", ps.originId},
                     {"category", cat},
                     {"prompt",
                      {{"category", category_ids()[(int)ps.promptTriple.category]},
                       {"color", color_names()[ps.promptTriple.colorBucket]},
                       {"pattern", pattern_ids()[(int)ps.promptTriple.pattern]}}},
                     {"modality", ps.modality == Modality::text ? "text" : "image"}};
        write_file_atomic(dir + "/" + sub + "/meta.json", meta.dump(2));
        entries.push_back(sub);
    }
    index["entries"] = entries;
    write_file_atomic(dir + "/index.json", index.dump(2));
}

std::vector<PseudoSample> read_pseudo_corpus(const std::string& dir) {
    std::ifstream f(dir + "/index.json");
    if (!f) fail(ErrorKind::Dependency, "missing pseudo index: " + dir + "/index.json");
    json index;
    f >> index;
    std::vector<PseudoSample> out;
    for (const auto& e : index.at("entries")) {
        std::string sub = dir + "/" + e.get<std::string>();
        PseudoSample ps;
        ps.image = read_png_rgb(sub + "/image.png");
        ps.region = read_png_gray1(sub + "/region.png");
        std::ifstream mf(sub + "/meta.json");
        json meta;
        mf >> meta;
        ps.originId = meta.at("originId").get<int64_t>();
        ps.category = category_from_id(meta.at("category").get<std::string>());
        const auto& pr = meta.at("prompt");
        ps.promptTriple.category = category_from_id(pr.at("category").get<std::string>());
        std::string color = pr.at("color").get<std::string>();
        for (int i = 0; i < kNumColors; i++)
            if (color_names()[i] == color) ps.promptTriple.colorBucket = i;
        std::string pat = pr.at("pattern").get<std::string>();
        for (int i = 0; i < kNumPatterns; i++)
            if (pattern_ids()[i] == pat) ps.promptTriple.pattern = (Pattern)i;
        ps.modality = meta.at("modality").get<std::string>() == "text" ? Modality::text : Modality::image;
        out.push_back(std::move(ps));
    }
    return out;
}

}  // namespace fashedit
