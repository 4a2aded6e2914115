// fashedit: synthetic-corpus generation, apparel-agnostic prep, two-stage
// diffusion training and mask-free editing, driven by one JSON config.

#include <CLI11.hpp>
#include <cstdio>

#include "fashedit/pipeline.hpp"

using namespace fashedit;

namespace {

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::RejectedConfig: return 2;
        case ErrorKind::Dependency: return 3;
        case ErrorKind::VerifyFailed: return 4;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mask-free fashion editing on a synthetic corpus"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string configPath;
    std::vector<std::string> overrides;
    RunOptions opts;
    app.add_option("--config", configPath, "experiment config JSON");
    app.add_option("--set", overrides, "override config keys, e.g. --set train.steps=200");
    app.add_flag("--deterministic", opts.deterministic,
                 "single-threaded execution with fixed reduction order");
    app.add_flag("--dry-run", opts.dryRun, "validate config and exit without running");

    auto* cCorpus = app.add_subcommand("corpus", "generate the synthetic corpus");
    auto* cPrep = app.add_subcommand("prep", "write agnostic/region/maskedparse/prompt files");
    auto* cS1 = app.add_subcommand("train-stage1", "train the mask-based model");
    auto* cPseudo = app.add_subcommand("pseudo", "generate the pseudo-sample corpus");
    auto* cS2 = app.add_subcommand("train-stage2", "train the mask-free model");
    auto* cEdit = app.add_subcommand("edit", "mask-free edit of a person image");
    auto* cEval = app.add_subcommand("eval", "evaluate an edited set against references");
    auto* cVerify = app.add_subcommand("verify", "run the invariant suite");
    auto* cGrad = app.add_subcommand("gradcheck", "finite-difference gradient check");

    EditArgs editArgs;
    cEdit->add_option("--input", editArgs.input, "person image PNG (default: first test sample)");
    cEdit->add_option("--prompt", editArgs.promptText, "text prompt, e.g. 'a blue solid top'");
    cEdit->add_option("--prompt-image", editArgs.promptImage, "image prompt PNG (white background)");
    cEdit->add_option("--label", editArgs.label, "apparel type label (or 'null')")->required();
    cEdit->add_option("--out", editArgs.out, "output PNG path");
    cEdit->add_option("--s", editArgs.s, "guidance scale override");
    cEdit->add_option("--sampler", editArgs.sampler, "ddim | ddpmAncestral");
    cEdit->add_option("--steps", editArgs.steps, "sampler steps override");
    cEdit->add_option("--seed", editArgs.seed, "sampling seed");

    std::string editedDir, referenceDir, manifestPath;
    cEval->add_option("--edited", editedDir, "directory of edited {id}.png files")->required();
    cEval->add_option("--reference", referenceDir, "corpus split dir with {id}/ sample folders")
        ->required();
    cEval->add_option("--manifest", manifestPath, "prompt manifest JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg =
            configPath.empty() ? ExperimentConfig() : ExperimentConfig::from_file(configPath);
        for (const auto& kv : overrides) cfg.apply_override(kv);
        cfg.validate();

        if (opts.dryRun) {
            std::fprintf(stderr, "[dry-run] config ok, hash %s\n", cfg.hash().c_str());
            return 0;
        }

        if (cCorpus->parsed()) cmd_corpus(cfg, opts);
        if (cPrep->parsed()) cmd_prep(cfg, opts);
        if (cS1->parsed()) cmd_train_stage1(cfg, opts);
        if (cPseudo->parsed()) cmd_pseudo(cfg, opts);
        if (cS2->parsed()) cmd_train_stage2(cfg, opts);
        if (cEdit->parsed()) cmd_edit(cfg, opts, editArgs);
        if (cEval->parsed()) cmd_eval(cfg, opts, editedDir, referenceDir, manifestPath);
        if (cGrad->parsed()) cmd_gradcheck(cfg, opts);
        if (cVerify->parsed()) {
            int failures = run_verify(cfg, opts);
            if (failures > 0) return 4;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
