#pragma once

#include <map>
#include <optional>
#include <string>

#include "fashedit/autograd.hpp"
#include "fashedit/palette.hpp"
#include "fashedit/params.hpp"

namespace fashedit {

enum class FgaMode {
    imageQuery,       // Q from image tokens, K/V from the fused condition
    literalCondQuery  // Q from the fused condition, pooled back onto the stream
};

struct DiTConfig {
    int depth = 4;
    int dim = 128;
    int heads = 4;
    int patch = 2;
    int inChannels = 12;
    int outChannels = 12;
    int promptDim = 64;
    int condTokens = 2;  // apparel-label token + prompt token
    int apparelVocab = kNumCategories + 1;
    int maxTimestep = 1000;
    int freqDim = 64;  // sinusoid features per component (t, H, W)
    FgaMode fgaMode = FgaMode::imageQuery;

    void validate() const {
        if (depth < 1) fail(ErrorKind::RejectedConfig, "model.depth must be >= 1");
        if (dim < 8 || dim % heads != 0)
            fail(ErrorKind::RejectedConfig, "model.dim must be >= 8 and divisible by heads");
        if (patch < 1) fail(ErrorKind::RejectedConfig, "model.patch must be >= 1");
        if (condTokens != 1 && condTokens != 2)
            fail(ErrorKind::RejectedConfig, "model.condTokens must be 1 or 2");
        if (apparelVocab != kNumCategories + 1)
            fail(ErrorKind::RejectedConfig, "model.apparelVocab must be 10 (9 categories + null)");
        if (promptDim < 8) fail(ErrorKind::RejectedConfig, "model.promptDim must be >= 8");
        if (freqDim % 2 != 0) fail(ErrorKind::RejectedConfig, "model.freqDim must be even");
        if (dim % 4 != 0) fail(ErrorKind::RejectedConfig, "model.dim must be divisible by 4");
    }
};

// [C, h, w] -> [h*w/p^2, C*p^2]; token t covers patch (gy, gx) in row-major
// grid order, and its vector is channel-major within the patch:
// index = c*p*p + dy*p + dx.
template <typename S>
Tensor<S> patchify(const Tensor<S>& z, int p);
template <typename S>
Tensor<S> unpatchify(const Tensor<S>& tokens, int C, int h, int w, int p);

std::vector<double> sinusoid_features(double v, int n);

template <typename S>
Tensor<S> pos_embed_2d(int gh, int gw, int dim);

template <typename S>
class FashionDiT {
public:
    using Scalar = S;

    explicit FashionDiT(DiTConfig cfg);
    void init_weights(uint64_t seed);

    const DiTConfig& config() const { return cfg_; }
    ParamStore<S>& params() { return store_; }
    const ParamStore<S>& params() const { return store_; }

    std::map<std::string, Node<S>*> bind_params(Graph<S>& g, bool requiresGrad) const;

    // Token-level forward: zIn [C_in, h, w] -> output tokens [T, C_out*p^2].
    // fgaAttn, when given, receives per-block, per-head attention nodes.
    Node<S>* build_forward(Graph<S>& g, std::map<std::string, Node<S>*>& P, const Tensor<S>& zIn,
                           int t, int shapeH, int shapeW, const std::vector<double>& iclip,
                           int label, std::vector<std::vector<Node<S>*>>* fgaAttn = nullptr) const;

    // eps-hat [C_out, h, w]; deterministic given weights and inputs.
    Tensor<S> predict(const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                      const std::vector<double>& iclip, int label) const;

    // Conditioning vector for (t, H, W); the adaLN input of every block.
    Tensor<S> embed_time_shape(int t, int shapeH, int shapeW) const;

    // One FGA sub-layer applied to raw image tokens (residual included);
    // exercises block weights outside a full forward.
    Tensor<S> fga_forward(int blockIndex, const Tensor<S>& imageTokens,
                          const std::vector<double>& iclip, int label) const;

    // Per-image-token attention weight on the I_L-derived key at one block,
    // averaged over heads, on the patch grid [h/p, w/p].
    Tensor<S> extract_fga_map(const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                              const std::vector<double>& iclip, int label, int blockIndex) const;

    // All blocks at once (shares one forward pass).
    std::vector<Tensor<S>> extract_fga_maps(const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                                            const std::vector<double>& iclip, int label) const;

private:
    DiTConfig cfg_;
    ParamStore<S> store_;

    Node<S>* mha(Graph<S>& g, Node<S>* Q, Node<S>* K, Node<S>* V, int heads,
                 std::vector<Node<S>*>* attnOut) const;
    // Returns the FGA sub-layer output before gating: [T, dim] in imageQuery
    // mode, [1, dim] (to be row-broadcast) in literalCondQuery mode.
    Node<S>* fga_sublayer(Graph<S>& g, std::map<std::string, Node<S>*>& P, int block, Node<S>* h2,
                          const std::vector<double>& iclip, int label,
                          std::vector<Node<S>*>* attnOut) const;
    Tensor<S> map_from_attn(const std::vector<Tensor<S>>& heads, int gh, int gw) const;
};

}  // namespace fashedit
