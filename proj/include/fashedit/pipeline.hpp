#pragma once

#include "fashedit/checkpoint.hpp"
#include "fashedit/config.hpp"
#include "fashedit/corpus_io.hpp"
#include "fashedit/diffusion.hpp"
#include "fashedit/evalmetrics.hpp"

namespace fashedit {

// Everything the stages share: codec (stats fitted or loaded), schedule and
// prompt encoder, all derived from one config.
struct Runtime {
    LatentCodec codec;
    DiffusionSchedule schedule;
    PromptEncoder encoder;

    explicit Runtime(const ExperimentConfig& cfg);
};

void fit_codec(Runtime& rt, const Corpus& corpus);
nlohmann::json codec_stats_json(const LatentCodec& codec);
void codec_stats_load(LatentCodec& codec, const nlohmann::json& j);

// Stage I consumes [z_t, E(P_m), E(D), E(M)], stage II [z_t, E(P)].
DiTConfig stage_dit_config(const ExperimentConfig& cfg, int stage);

struct StageExample {
    Tensor<float> z0;                // target latent E(P~)
    std::vector<Tensor<float>> aux;  // conditioning latents in fixed concat order
    std::vector<double> iclip;
    int label = kNullLabel;
};

StageExample make_stage1_example(const Sample& s, Apparel cat, Modality modality, const Runtime& rt,
                                 const ExperimentConfig& cfg);

struct PseudoSample {
    Image image;
    AttributeTriple promptTriple;  // the unpaired prompt that produced it
    Modality modality = Modality::text;
    BoolMap region;
    int64_t originId = 0;
    Apparel category = Apparel::tops;
};

StageExample make_stage2_example(const Sample& origin, const PseudoSample& ps, Modality modality,
                                 const Runtime& rt, const ExperimentConfig& cfg);

Apparel pick_category(const Sample& s, Rng& rng);

struct TrainResult {
    std::vector<double> losses;
};

// Shared training loop. stage 1 trains against the corpus directly; stage 2
// against the pseudo corpus (with the origin images as targets). Conditions
// are jointly dropped to (I_null, L_null) with train.dropProb. Per-slot
// gradients are reduced in slot order, so results do not depend on the
// thread count.
TrainResult train_loop(int stage, FashionDiT<float>& model, const Corpus& corpus,
                       const std::vector<PseudoSample>* pseudo, const Runtime& rt,
                       const ExperimentConfig& cfg, const RunOptions& opts, bool quiet = false);

// Pixel-space compositing: region pixels from `generated`, everything else
// byte-for-byte from `origin`.
Image composite_over_region(const Image& origin, const Image& generated, const BoolMap& region);

// Stage-I inference + pixel compositing: pixels outside the removal region
// come from the origin image byte-for-byte.
PseudoSample generate_pseudo(const FashionDiT<float>& stage1, const Sample& origin, Apparel cat,
                             const AttributeTriple& unpaired, Modality modality, const Runtime& rt,
                             const ExperimentConfig& cfg, Rng& rng);

std::vector<PseudoSample> generate_pseudo_corpus(const FashionDiT<float>& stage1, const Corpus& corpus,
                                                 const Runtime& rt, const ExperimentConfig& cfg,
                                                 const RunOptions& opts);

// Name-wise weight copy from a stage-I store into a stage-II model. The
// patch embedder copies the overlapping leading input channels; every other
// name must match exactly. Returns the checksum log.
std::vector<std::string> transfer_params(const ParamStore<float>& src, FashionDiT<float>& dst);

// Mask-free editing: the only inputs are the person image, a prompt
// embedding and the apparel label.
Image edit_image(const FashionDiT<float>& stage2, const Image& person, const std::vector<double>& iclip,
                 int label, const Runtime& rt, double s, SamplerKind sampler, int steps, Rng& rng);

// --- checkpoint helpers ---
nlohmann::json checkpoint_header(const ExperimentConfig& cfg, int stage, const Runtime& rt,
                                 int64_t steps);
void save_stage_checkpoint(const std::string& path, const FashionDiT<float>& model,
                           const nlohmann::json& header);
FashionDiT<float> load_stage_model(const std::string& path, const ExperimentConfig& cfg, int stage,
                                   Runtime& rt, const char* neededBy);

// --- pseudo corpus on disk ---
void write_pseudo_corpus(const std::string& dir, const std::vector<PseudoSample>& pseudo,
                         const std::string& configHash);
std::vector<PseudoSample> read_pseudo_corpus(const std::string& dir);

// --- CLI commands ---
void cmd_corpus(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_prep(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_train_stage1(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_pseudo(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_train_stage2(const ExperimentConfig& cfg, const RunOptions& opts);

struct EditArgs {
    std::string input;        // person image (defaults to a held-out corpus sample)
    std::string promptText;   // either this
    std::string promptImage;  // or this
    std::string label;        // category id or "null"
    std::string out = "edited.png";
    double s = -1;            // < 0 -> config value
    std::string sampler;      // empty -> config value
    int steps = -1;
    uint64_t seed = 0;
};
void cmd_edit(const ExperimentConfig& cfg, const RunOptions& opts, const EditArgs& args);

void cmd_eval(const ExperimentConfig& cfg, const RunOptions& opts, const std::string& editedDir,
              const std::string& referenceDir, const std::string& manifestPath);
void cmd_gradcheck(const ExperimentConfig& cfg, const RunOptions& opts);

// Full invariant suite; returns the number of failed checks and writes a
// deterministic verify_report.json under the artifact root.
int run_verify(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace fashedit
