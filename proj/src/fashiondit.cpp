#include "fashedit/fashiondit.hpp"

#include <cmath>

namespace fashedit {

template <typename S>
Tensor<S> patchify(const Tensor<S>& z, int p) {
    if (z.shape.size() != 3) fail(ErrorKind::Shape, "patchify: latent must be [C,h,w]");
    int64_t C = z.shape[0], h = z.shape[1], w = z.shape[2];
    if (h % p != 0 || w % p != 0) fail(ErrorKind::Shape, "patchify: dims not divisible by patch");
    int64_t gh = h / p, gw = w / p;
    Tensor<S> out({gh * gw, C * p * p});
    for (int64_t gy = 0; gy < gh; gy++)
        for (int64_t gx = 0; gx < gw; gx++) {
            int64_t tok = gy * gw + gx;
            for (int64_t c = 0; c < C; c++)
                for (int dy = 0; dy < p; dy++)
                    for (int dx = 0; dx < p; dx++)
                        out[tok * C * p * p + c * p * p + dy * p + dx] =
                            z[(c * h + gy * p + dy) * w + gx * p + dx];
        }
    return out;
}

template <typename S>
Tensor<S> unpatchify(const Tensor<S>& tokens, int C, int h, int w, int p) {
    if (h % p != 0 || w % p != 0) fail(ErrorKind::Shape, "unpatchify: dims not divisible by patch");
    int64_t gh = h / p, gw = w / p;
    if (tokens.rows() != gh * gw || tokens.cols() != (int64_t)C * p * p)
        fail(ErrorKind::Shape, "unpatchify: token shape mismatch");
    Tensor<S> out({(int64_t)C, (int64_t)h, (int64_t)w});
    for (int64_t gy = 0; gy < gh; gy++)
        for (int64_t gx = 0; gx < gw; gx++) {
            int64_t tok = gy * gw + gx;
            for (int64_t c = 0; c < C; c++)
                for (int dy = 0; dy < p; dy++)
                    for (int dx = 0; dx < p; dx++)
                        out[(c * h + gy * p + dy) * w + gx * p + dx] =
                            tokens[tok * C * p * p + c * p * p + dy * p + dx];
        }
    return out;
}

std::vector<double> sinusoid_features(double v, int n) {
    std::vector<double> out(n);
    int half = n / 2;
    for (int i = 0; i < half; i++) {
        double omega = std::exp(-std::log(10000.0) * i / half);
        out[2 * i] = std::sin(v * omega);
        out[2 * i + 1] = std::cos(v * omega);
    }
    return out;
}

template <typename S>
Tensor<S> pos_embed_2d(int gh, int gw, int dim) {
    Tensor<S> out({(int64_t)gh * gw, (int64_t)dim});
    int half = dim / 2;
    for (int gy = 0; gy < gh; gy++) {
        std::vector<double> fy = sinusoid_features(gy, half);
        for (int gx = 0; gx < gw; gx++) {
            std::vector<double> fx = sinusoid_features(gx, half);
            int64_t tok = (int64_t)gy * gw + gx;
            for (int i = 0; i < half; i++) {
                out[tok * dim + i] = (S)fy[i];
                out[tok * dim + half + i] = (S)fx[i];
            }
        }
    }
    return out;
}

namespace {

std::string blk(int b, const char* suffix) { return "block." + std::to_string(b) + "." + suffix; }

}  // namespace

template <typename S>
FashionDiT<S>::FashionDiT(DiTConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    int d = cfg_.dim, pd = cfg_.promptDim, p = cfg_.patch;
    store_.declare("patch.w", {(int64_t)cfg_.inChannels * p * p, d});
    store_.declare("patch.b", {1, d});
    store_.declare("temb.w1", {(int64_t)3 * cfg_.freqDim, d});
    store_.declare("temb.b1", {1, d});
    store_.declare("temb.w2", {d, d});
    store_.declare("temb.b2", {1, d});
    for (int b = 0; b < cfg_.depth; b++) {
        store_.declare(blk(b, "adaln.w"), {d, (int64_t)9 * d});
        store_.declare(blk(b, "adaln.b"), {1, (int64_t)9 * d});
        store_.declare(blk(b, "attn.wqkv"), {d, (int64_t)3 * d});
        store_.declare(blk(b, "attn.bqkv"), {1, (int64_t)3 * d});
        store_.declare(blk(b, "attn.proj.w"), {d, d});
        store_.declare(blk(b, "attn.proj.b"), {1, d});
        store_.declare(blk(b, "fga.label_table"), {cfg_.apparelVocab, d});
        store_.declare(blk(b, "fga.prompt.w1"), {pd, d});
        store_.declare(blk(b, "fga.prompt.b1"), {1, d});
        store_.declare(blk(b, "fga.prompt.w2"), {d, d});
        store_.declare(blk(b, "fga.prompt.b2"), {1, d});
        store_.declare(blk(b, "fga.fuse.w1"), {d, d});
        store_.declare(blk(b, "fga.fuse.b1"), {1, d});
        store_.declare(blk(b, "fga.fuse.w2"), {d, d});
        store_.declare(blk(b, "fga.fuse.b2"), {1, d});
        store_.declare(blk(b, "fga.wq"), {d, d});
        store_.declare(blk(b, "fga.bq"), {1, d});
        store_.declare(blk(b, "fga.wk"), {d, d});
        store_.declare(blk(b, "fga.bk"), {1, d});
        store_.declare(blk(b, "fga.wv"), {d, d});
        store_.declare(blk(b, "fga.bv"), {1, d});
        store_.declare(blk(b, "fga.proj.w"), {d, d});
        store_.declare(blk(b, "fga.proj.b"), {1, d});
        store_.declare(blk(b, "ff.w1"), {d, (int64_t)4 * d});
        store_.declare(blk(b, "ff.b1"), {1, (int64_t)4 * d});
        store_.declare(blk(b, "ff.w2"), {(int64_t)4 * d, d});
        store_.declare(blk(b, "ff.b2"), {1, d});
    }
    store_.declare("final.adaln.w", {d, (int64_t)2 * d});
    store_.declare("final.adaln.b", {1, (int64_t)2 * d});
    store_.declare("final.w", {d, (int64_t)cfg_.outChannels * p * p});
    store_.declare("final.b", {1, (int64_t)cfg_.outChannels * p * p});
}

template <typename S>
void FashionDiT<S>::init_weights(uint64_t seed) {
    // Sub-layer output projections start at zero so every residual branch
    // contributes nothing until trained; their gradients flow through the
    // (randomly initialized) adaLN gates.
    for (auto& [name, p] : store_) {
        bool zero = name.ends_with(".b") || name.find(".b1") != std::string::npos ||
                    name.find(".b2") != std::string::npos || name.ends_with(".bqkv") ||
                    name.ends_with(".bq") || name.ends_with(".bk") || name.ends_with(".bv") ||
                    name.ends_with("attn.proj.w") || name.ends_with("fga.proj.w") ||
                    name.ends_with("ff.w2");
        if (zero) {
            std::fill(p.value.data.begin(), p.value.data.end(), S(0));
        } else {
            Rng rng(mix64(seed, fnv1a64(name)));
            init_trunc_normal(p.value, rng, 0.02);
        }
    }
}

template <typename S>
std::map<std::string, Node<S>*> FashionDiT<S>::bind_params(Graph<S>& g, bool requiresGrad) const {
    std::map<std::string, Node<S>*> out;
    for (const auto& [name, p] : store_) out[name] = g.leaf(p.value, requiresGrad);
    return out;
}

template <typename S>
Node<S>* FashionDiT<S>::mha(Graph<S>& g, Node<S>* Q, Node<S>* K, Node<S>* V, int heads,
                            std::vector<Node<S>*>* attnOut) const {
    int64_t dim = Q->value.cols();
    int64_t dh = dim / heads;
    double sc = 1.0 / std::sqrt((double)dh);
    std::vector<Node<S>*> outs;
    for (int h = 0; h < heads; h++) {
        auto* qh = g.slice_cols(Q, h * dh, dh);
        auto* kh = g.slice_cols(K, h * dh, dh);
        auto* vh = g.slice_cols(V, h * dh, dh);
        auto* att = g.softmax_rows(g.scale(g.matmul(qh, g.transpose(kh)), sc));
        if (attnOut) attnOut->push_back(att);
        outs.push_back(g.matmul(att, vh));
    }
    return g.concat_cols(outs);
}

template <typename S>
Node<S>* FashionDiT<S>::fga_sublayer(Graph<S>& g, std::map<std::string, Node<S>*>& P, int b,
                                     Node<S>* h2, const std::vector<double>& iclip, int label,
                                     std::vector<Node<S>*>* attnOut) const {
    if (label < 0 || label >= cfg_.apparelVocab)
        fail(ErrorKind::Vocab, "fga: apparel label out of vocabulary: " + std::to_string(label));
    if ((int)iclip.size() != cfg_.promptDim)
        fail(ErrorKind::Shape, "fga: prompt embedding dim mismatch");

    auto* labelTok = g.embedding_row(P[blk(b, "fga.label_table")], label);

    Tensor<S> pv({1, (int64_t)cfg_.promptDim});
    for (int i = 0; i < cfg_.promptDim; i++) pv[i] = (S)iclip[i];
    auto* prompt = g.leaf(std::move(pv), false);
    auto* p1 = g.gelu(g.add_rowvec(g.matmul(prompt, P[blk(b, "fga.prompt.w1")]), P[blk(b, "fga.prompt.b1")]));
    auto* promptTok = g.add_rowvec(g.matmul(p1, P[blk(b, "fga.prompt.w2")]), P[blk(b, "fga.prompt.b2")]);

    Node<S>* if0 = cfg_.condTokens == 2 ? g.concat_rows({labelTok, promptTok})
                                        : g.add(labelTok, promptTok);
    auto* fu = g.gelu(g.add_rowvec(g.matmul(if0, P[blk(b, "fga.fuse.w1")]), P[blk(b, "fga.fuse.b1")]));
    auto* fused = g.add_rowvec(g.matmul(fu, P[blk(b, "fga.fuse.w2")]), P[blk(b, "fga.fuse.b2")]);
    auto* fusedLn = g.layer_norm_rows(fused);

    if (cfg_.fgaMode == FgaMode::imageQuery) {
        auto* Q = g.add_rowvec(g.matmul(h2, P[blk(b, "fga.wq")]), P[blk(b, "fga.bq")]);
        auto* K = g.add_rowvec(g.matmul(fusedLn, P[blk(b, "fga.wk")]), P[blk(b, "fga.bk")]);
        auto* V = g.add_rowvec(g.matmul(fusedLn, P[blk(b, "fga.wv")]), P[blk(b, "fga.bv")]);
        auto* o = mha(g, Q, K, V, cfg_.heads, attnOut);
        return g.add_rowvec(g.matmul(o, P[blk(b, "fga.proj.w")]), P[blk(b, "fga.proj.b")]);
    }
    // Literal reading of the block formula: the condition is the query. The
    // attended condition rows are mean-pooled and broadcast back onto the
    // residual stream to keep the token count invariant.
    auto* Q = g.add_rowvec(g.matmul(fusedLn, P[blk(b, "fga.wq")]), P[blk(b, "fga.bq")]);
    auto* K = g.add_rowvec(g.matmul(h2, P[blk(b, "fga.wk")]), P[blk(b, "fga.bk")]);
    auto* V = g.add_rowvec(g.matmul(h2, P[blk(b, "fga.wv")]), P[blk(b, "fga.bv")]);
    auto* o = mha(g, Q, K, V, cfg_.heads, attnOut);
    auto* pooled = g.row_mean(o);
    return g.add_rowvec(g.matmul(pooled, P[blk(b, "fga.proj.w")]), P[blk(b, "fga.proj.b")]);
}

template <typename S>
Node<S>* FashionDiT<S>::build_forward(Graph<S>& g, std::map<std::string, Node<S>*>& P,
                                      const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                                      const std::vector<double>& iclip, int label,
                                      std::vector<std::vector<Node<S>*>>* fgaAttn) const {
    if (zIn.shape.size() != 3 || zIn.shape[0] != cfg_.inChannels)
        fail(ErrorKind::Shape, "dit_forward: latent shape/channel mismatch");
    if (t < 0 || t >= cfg_.maxTimestep) fail(ErrorKind::Range, "dit_forward: timestep out of range");
    int64_t h = zIn.shape[1], w = zIn.shape[2];
    int p = cfg_.patch, d = cfg_.dim;
    if (h % p != 0 || w % p != 0) fail(ErrorKind::Shape, "dit_forward: dims not divisible by patch");

    auto* tokens = g.leaf(patchify(zIn, p), false);
    auto* X = g.add_rowvec(g.matmul(tokens, P["patch.w"]), P["patch.b"]);
    X = g.add(X, g.leaf(pos_embed_2d<S>((int)(h / p), (int)(w / p), d), false));

    // timestep + shape conditioning
    std::vector<double> sf = sinusoid_features((double)t, cfg_.freqDim);
    std::vector<double> sh = sinusoid_features((double)shapeH, cfg_.freqDim);
    std::vector<double> sw = sinusoid_features((double)shapeW, cfg_.freqDim);
    Tensor<S> sfeat({1, (int64_t)3 * cfg_.freqDim});
    for (int i = 0; i < cfg_.freqDim; i++) {
        sfeat[i] = (S)sf[i];
        sfeat[cfg_.freqDim + i] = (S)sh[i];
        sfeat[2 * cfg_.freqDim + i] = (S)sw[i];
    }
    auto* c1 = g.gelu(g.add_rowvec(g.matmul(g.leaf(std::move(sfeat), false), P["temb.w1"]), P["temb.b1"]));
    auto* cond = g.add_rowvec(g.matmul(c1, P["temb.w2"]), P["temb.b2"]);
    auto* condAct = g.gelu(cond);

    for (int b = 0; b < cfg_.depth; b++) {
        auto* mod = g.add_rowvec(g.matmul(condAct, P[blk(b, "adaln.w")]), P[blk(b, "adaln.b")]);
        auto* sh1 = g.slice_cols(mod, 0, d);
        auto* sc1 = g.slice_cols(mod, d, d);
        auto* g1 = g.slice_cols(mod, 2 * d, d);
        auto* sh2 = g.slice_cols(mod, 3 * d, d);
        auto* sc2 = g.slice_cols(mod, 4 * d, d);
        auto* g2 = g.slice_cols(mod, 5 * d, d);
        auto* sh3 = g.slice_cols(mod, 6 * d, d);
        auto* sc3 = g.slice_cols(mod, 7 * d, d);
        auto* g3 = g.slice_cols(mod, 8 * d, d);

        auto* h1 = g.modulate(g.layer_norm_rows(X), sh1, sc1);
        auto* qkv = g.add_rowvec(g.matmul(h1, P[blk(b, "attn.wqkv")]), P[blk(b, "attn.bqkv")]);
        auto* attnOut = mha(g, g.slice_cols(qkv, 0, d), g.slice_cols(qkv, d, d),
                            g.slice_cols(qkv, 2 * d, d), cfg_.heads, nullptr);
        auto* attnProj = g.add_rowvec(g.matmul(attnOut, P[blk(b, "attn.proj.w")]), P[blk(b, "attn.proj.b")]);
        X = g.add(X, g.mul_rowvec(attnProj, g1));

        auto* h2 = g.modulate(g.layer_norm_rows(X), sh2, sc2);
        std::vector<Node<S>*> attnNodes;
        auto* f = fga_sublayer(g, P, b, h2, iclip, label, fgaAttn ? &attnNodes : nullptr);
        if (fgaAttn) fgaAttn->push_back(attnNodes);
        if (cfg_.fgaMode == FgaMode::imageQuery)
            X = g.add(X, g.mul_rowvec(f, g2));
        else
            X = g.add_rowvec(X, g.hadamard(f, g2));

        auto* h3 = g.modulate(g.layer_norm_rows(X), sh3, sc3);
        auto* ffh = g.gelu(g.add_rowvec(g.matmul(h3, P[blk(b, "ff.w1")]), P[blk(b, "ff.b1")]));
        auto* ff = g.add_rowvec(g.matmul(ffh, P[blk(b, "ff.w2")]), P[blk(b, "ff.b2")]);
        X = g.add(X, g.mul_rowvec(ff, g3));
    }

    auto* modF = g.add_rowvec(g.matmul(condAct, P["final.adaln.w"]), P["final.adaln.b"]);
    auto* Xf = g.modulate(g.layer_norm_rows(X), g.slice_cols(modF, 0, d), g.slice_cols(modF, d, d));
    return g.add_rowvec(g.matmul(Xf, P["final.w"]), P["final.b"]);
}

template <typename S>
Tensor<S> FashionDiT<S>::predict(const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                                 const std::vector<double>& iclip, int label) const {
    Graph<S> g;
    auto P = bind_params(g, false);
    auto* out = build_forward(g, P, zIn, t, shapeH, shapeW, iclip, label);
    return unpatchify(out->value, cfg_.outChannels, (int)zIn.shape[1], (int)zIn.shape[2], cfg_.patch);
}

template <typename S>
Tensor<S> FashionDiT<S>::embed_time_shape(int t, int shapeH, int shapeW) const {
    if (t < 0 || t >= cfg_.maxTimestep) fail(ErrorKind::Range, "embed_time_shape: t out of range");
    Graph<S> g;
    std::vector<double> sf = sinusoid_features((double)t, cfg_.freqDim);
    std::vector<double> sh = sinusoid_features((double)shapeH, cfg_.freqDim);
    std::vector<double> sw = sinusoid_features((double)shapeW, cfg_.freqDim);
    Tensor<S> sfeat({1, (int64_t)3 * cfg_.freqDim});
    for (int i = 0; i < cfg_.freqDim; i++) {
        sfeat[i] = (S)sf[i];
        sfeat[cfg_.freqDim + i] = (S)sh[i];
        sfeat[2 * cfg_.freqDim + i] = (S)sw[i];
    }
    auto P = bind_params(g, false);
    auto* c1 = g.gelu(g.add_rowvec(g.matmul(g.leaf(std::move(sfeat), false), P["temb.w1"]), P["temb.b1"]));
    auto* cond = g.add_rowvec(g.matmul(c1, P["temb.w2"]), P["temb.b2"]);
    return cond->value;
}

template <typename S>
Tensor<S> FashionDiT<S>::fga_forward(int blockIndex, const Tensor<S>& imageTokens,
                                     const std::vector<double>& iclip, int label) const {
    if (blockIndex < 0 || blockIndex >= cfg_.depth) fail(ErrorKind::Range, "fga_forward: block out of range");
    if (imageTokens.shape.size() != 2 || imageTokens.cols() != cfg_.dim)
        fail(ErrorKind::Shape, "fga_forward: tokens must be [T, dim]");
    Graph<S> g;
    auto P = bind_params(g, false);
    auto* x = g.leaf(imageTokens, false);
    auto* f = fga_sublayer(g, P, blockIndex, g.layer_norm_rows(x), iclip, label, nullptr);
    Node<S>* out = cfg_.fgaMode == FgaMode::imageQuery ? g.add(x, f) : g.add_rowvec(x, f);
    return out->value;
}

template <typename S>
Tensor<S> FashionDiT<S>::map_from_attn(const std::vector<Tensor<S>>& heads, int gh, int gw) const {
    int64_t T = (int64_t)gh * gw;
    Tensor<S> map({(int64_t)gh, (int64_t)gw});
    for (const auto& att : heads) {
        if (cfg_.fgaMode == FgaMode::imageQuery) {
            // att: [T, condTokens]; the I_L-derived key is row 0 of I_F.
            for (int64_t i = 0; i < T; i++) map[i] += att[i * att.cols() + 0];
        } else {
            // att: [condTokens, T]; the I_L-derived query is row 0.
            for (int64_t i = 0; i < T; i++) map[i] += att[i];
        }
    }
    for (auto& v : map.data) v = (S)(v / (double)heads.size());
    return map;
}

template <typename S>
std::vector<Tensor<S>> FashionDiT<S>::extract_fga_maps(const Tensor<S>& zIn, int t, int shapeH,
                                                       int shapeW, const std::vector<double>& iclip,
                                                       int label) const {
    Graph<S> g;
    auto P = bind_params(g, false);
    std::vector<std::vector<Node<S>*>> attn;
    (void)build_forward(g, P, zIn, t, shapeH, shapeW, iclip, label, &attn);
    int gh = (int)(zIn.shape[1] / cfg_.patch), gw = (int)(zIn.shape[2] / cfg_.patch);
    std::vector<Tensor<S>> maps;
    for (const auto& blockAttn : attn) {
        std::vector<Tensor<S>> headVals;
        for (auto* n : blockAttn) headVals.push_back(n->value);
        maps.push_back(map_from_attn(headVals, gh, gw));
    }
    return maps;
}

template <typename S>
Tensor<S> FashionDiT<S>::extract_fga_map(const Tensor<S>& zIn, int t, int shapeH, int shapeW,
                                         const std::vector<double>& iclip, int label,
                                         int blockIndex) const {
    if (blockIndex < 0 || blockIndex >= cfg_.depth)
        fail(ErrorKind::Range, "extract_fga_map: block index out of range");
    return extract_fga_maps(zIn, t, shapeH, shapeW, iclip, label)[blockIndex];
}

template class FashionDiT<float>;
template class FashionDiT<double>;
template Tensor<float> patchify(const Tensor<float>&, int);
template Tensor<double> patchify(const Tensor<double>&, int);
template Tensor<float> unpatchify(const Tensor<float>&, int, int, int, int);
template Tensor<double> unpatchify(const Tensor<double>&, int, int, int, int);
template Tensor<float> pos_embed_2d(int, int, int);
template Tensor<double> pos_embed_2d(int, int, int);

}  // namespace fashedit
