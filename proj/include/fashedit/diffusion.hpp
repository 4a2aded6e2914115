#pragma once

#include "fashedit/fashiondit.hpp"
#include "fashedit/image.hpp"

namespace fashedit {

struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta, alpha, alphaBar;
};

// Linear beta schedule; defaults T=1000, beta in [1e-4, 0.02].
DiffusionSchedule make_schedule(int T, double betaMin = 1e-4, double betaMax = 0.02);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename S>
Tensor<S> q_sample(const Tensor<S>& z0, int t, const Tensor<S>& eps, const DiffusionSchedule& sched) {
    if (!z0.same_shape(eps)) fail(ErrorKind::Shape, "q_sample: eps shape mismatch");
    if (t < 0 || t >= sched.T) fail(ErrorKind::Range, "q_sample: t out of range");
    double a = std::sqrt(sched.alphaBar[t]);
    double b = std::sqrt(1.0 - sched.alphaBar[t]);
    Tensor<S> out = z0;
    for (int64_t i = 0; i < out.numel(); i++) out[i] = (S)(a * (double)z0[i] + b * (double)eps[i]);
    return out;
}

// Exact-inverse latent codec standing in for the pretrained autoencoder.
// spaceToDepth rearranges f x f pixel blocks into 3f^2 channels; the
// per-channel affine is fitted once on the training corpus and frozen.
struct LatentCodec {
    enum class Mode { identity, spaceToDepth };
    Mode mode = Mode::spaceToDepth;
    int f = 2;
    std::vector<double> chMean, chScale;

    int channels() const { return mode == Mode::identity ? 3 : 3 * f * f; }
    void default_normalization();  // mean .5 / scale .5 per channel
    void fit(const std::vector<const Image*>& trainImages);

    Tensor<float> encode(const Image& img) const;
    Image decode(const Tensor<float>& z) const;

    std::string mode_id() const { return mode == Mode::identity ? "identity" : "spaceToDepth"; }
    static Mode mode_from_id(const std::string& id);
};

template <typename S>
Tensor<S> concat_channels(const std::vector<const Tensor<S>*>& parts) {
    if (parts.empty()) fail(ErrorKind::Shape, "concat_channels: empty");
    int64_t h = parts[0]->shape[1], w = parts[0]->shape[2], C = 0;
    for (auto* p : parts) {
        if (p->shape.size() != 3 || p->shape[1] != h || p->shape[2] != w)
            fail(ErrorKind::Shape, "concat_channels: spatial dims differ");
        C += p->shape[0];
    }
    Tensor<S> out({C, h, w});
    int64_t off = 0;
    for (auto* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() + off);
        off += p->numel();
    }
    return out;
}

// A (t, eps) draw for the denoising loss; exposed so tests and the gradient
// checker can freeze it.
template <typename S>
struct TrainingDraw {
    int t = 0;
    Tensor<S> eps;
};

// Eq-style denoising objective: sample t ~ U[0,T), eps ~ N(0,1), feed
// concat(z_t, aux) and take the MSE between eps and the prediction. When
// gradOut is given, analytic gradients land there (keyed by parameter name),
// so callers can reduce per-example gradients in a fixed order.
template <typename S, typename Model>
double training_loss(const Model& model, const Tensor<S>& z0, const std::vector<Tensor<S>>& aux,
                     const std::vector<double>& iclip, int label, int shapeH, int shapeW,
                     const DiffusionSchedule& sched, Rng& rng,
                     std::map<std::string, Tensor<S>>* gradOut = nullptr,
                     const TrainingDraw<S>* drawIn = nullptr, TrainingDraw<S>* drawOut = nullptr) {
    TrainingDraw<S> draw;
    if (drawIn) {
        draw = *drawIn;
    } else {
        draw.t = (int)rng.uniform_int((uint64_t)sched.T);
        draw.eps = randn_tensor<S>(z0.shape, rng);
    }
    if (drawOut) *drawOut = draw;

    Tensor<S> zt = q_sample(z0, draw.t, draw.eps, sched);
    std::vector<const Tensor<S>*> parts = {&zt};
    for (const auto& a : aux) parts.push_back(&a);
    Tensor<S> input = concat_channels(parts);

    Graph<S> g;
    auto P = model.bind_params(g, gradOut != nullptr);
    auto* pred = model.build_forward(g, P, input, draw.t, shapeH, shapeW, iclip, label);
    auto* target = g.leaf(patchify(draw.eps, model.config().patch), false);
    auto* loss = g.mse(pred, target);
    double value = (double)loss->value[0];

    if (gradOut) {
        g.backward(loss);
        for (auto& [name, leafN] : P)
            if (leafN->gradTouched) (*gradOut)[name] = leafN->grad;
    }
    return value;
}

// Classifier-free guidance: (1-s) * uncond + s * cond, with exactly two
// model evaluations. s=1 reduces to the conditional branch exactly and s=0
// to the unconditional branch exactly.
template <typename Model, typename S = typename Model::Scalar>
Tensor<S> cfg_predict(const Model& model, const Tensor<S>& zt, int t, int shapeH, int shapeW,
                      const std::vector<double>& iclip, int label, const std::vector<double>& nullEmb,
                      double s, const std::vector<Tensor<S>>& aux) {
    if (s < 0) fail(ErrorKind::RejectedConfig, "guidance scale must be >= 0");
    std::vector<const Tensor<S>*> parts = {&zt};
    for (const auto& a : aux) parts.push_back(&a);
    Tensor<S> input = concat_channels(parts);
    Tensor<S> uncond = model.predict(input, t, shapeH, shapeW, nullEmb, kNullLabel);
    Tensor<S> cond = model.predict(input, t, shapeH, shapeW, iclip, label);
    Tensor<S> out = cond;
    for (int64_t i = 0; i < out.numel(); i++)
        out[i] = (S)((1.0 - s) * (double)uncond[i] + s * (double)cond[i]);
    return out;
}

enum class SamplerKind { ddpmAncestral, ddim };
SamplerKind sampler_from_id(const std::string& id);

// Reverse pass from an initial latent. ddpmAncestral follows the posterior
// mean with sigma_t noise per step; ddim is the deterministic eta=0 update
// over a uniformly strided sub-schedule (tau_i = i*T/steps).
template <typename Model, typename S = typename Model::Scalar>
Tensor<S> sample_loop(const Model& model, Tensor<S> z, const std::vector<Tensor<S>>& aux,
                      const std::vector<double>& iclip, int label, const std::vector<double>& nullEmb,
                      double s, SamplerKind sampler, int steps, int shapeH, int shapeW,
                      const DiffusionSchedule& sched, Rng& rng) {
    if (steps < 1 || steps > sched.T) fail(ErrorKind::RejectedConfig, "sampler steps must be in [1, T]");

    if (sampler == SamplerKind::ddim) {
        std::vector<int> taus(steps);
        for (int i = 0; i < steps; i++) taus[i] = (int)(((int64_t)i * sched.T) / steps);
        for (int i = steps - 1; i >= 0; i--) {
            int t = taus[i];
            double ab = sched.alphaBar[t];
            double abPrev = i > 0 ? sched.alphaBar[taus[i - 1]] : 1.0;
            Tensor<S> eps = cfg_predict(model, z, t, shapeH, shapeW, iclip, label, nullEmb, s, aux);
            for (int64_t k = 0; k < z.numel(); k++) {
                double z0hat = ((double)z[k] - std::sqrt(1.0 - ab) * (double)eps[k]) / std::sqrt(ab);
                z[k] = (S)(std::sqrt(abPrev) * z0hat + std::sqrt(1.0 - abPrev) * (double)eps[k]);
            }
        }
        return z;
    }

    // ddpmAncestral over the last `steps` timesteps (full chain when steps=T)
    for (int t = steps - 1; t >= 0; t--) {
        double ab = sched.alphaBar[t];
        double a = sched.alpha[t];
        double b = sched.beta[t];
        double abPrev = t > 0 ? sched.alphaBar[t - 1] : 1.0;
        double sigma = t > 0 ? std::sqrt((1.0 - abPrev) / (1.0 - ab) * b) : 0.0;
        Tensor<S> eps = cfg_predict(model, z, t, shapeH, shapeW, iclip, label, nullEmb, s, aux);
        for (int64_t k = 0; k < z.numel(); k++) {
            double mean = ((double)z[k] - b / std::sqrt(1.0 - ab) * (double)eps[k]) / std::sqrt(a);
            double noise = t > 0 ? rng.normal() : 0.0;
            z[k] = (S)(mean + sigma * noise);
        }
    }
    return z;
}

}  // namespace fashedit
