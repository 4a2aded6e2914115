#include "fashedit/diffusion.hpp"

#include <cmath>

namespace fashedit {

DiffusionSchedule make_schedule(int T, double betaMin, double betaMax) {
    if (T < 2) fail(ErrorKind::RejectedConfig, "schedule: T must be >= 2");
    if (!(betaMin > 0.0 && betaMin < betaMax && betaMax < 1.0))
        fail(ErrorKind::RejectedConfig, "schedule: need 0 < betaMin < betaMax < 1");
    DiffusionSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alphaBar.resize(T);
    double abar = 1.0;
    for (int t = 0; t < T; t++) {
        s.beta[t] = betaMin + (betaMax - betaMin) * t / (T - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        abar *= s.alpha[t];
        s.alphaBar[t] = abar;
    }
    return s;
}

SamplerKind sampler_from_id(const std::string& id) {
    if (id == "ddim") return SamplerKind::ddim;
    if (id == "ddpmAncestral") return SamplerKind::ddpmAncestral;
    fail(ErrorKind::RejectedConfig, "unknown sampler: " + id);
}

LatentCodec::Mode LatentCodec::mode_from_id(const std::string& id) {
    if (id == "identity") return Mode::identity;
    if (id == "spaceToDepth") return Mode::spaceToDepth;
    fail(ErrorKind::RejectedConfig, "unknown codec mode: " + id);
}

void LatentCodec::default_normalization() {
    chMean.assign(channels(), 0.5);
    chScale.assign(channels(), 0.5);
}

void LatentCodec::fit(const std::vector<const Image*>& trainImages) {
    int C = channels();
    std::vector<double> sum(C, 0.0), sumsq(C, 0.0);
    int64_t perCh = 0;
    for (const Image* img : trainImages) {
        if (mode == Mode::spaceToDepth && (img->h % f != 0 || img->w % f != 0))
            fail(ErrorKind::Shape, "codec.fit: image dims not divisible by f");
        int64_t n = (int64_t)img->h * img->w / (mode == Mode::identity ? 1 : f * f);
        perCh += n;
        for (int y = 0; y < img->h; y++)
            for (int x = 0; x < img->w; x++) {
                Rgb px = img->get(y, x);
                double v[3] = {px.r / 255.0, px.g / 255.0, px.b / 255.0};
                for (int k = 0; k < 3; k++) {
                    int c = mode == Mode::identity ? k : ((k * f + y % f) * f + x % f);
                    sum[c] += v[k];
                    sumsq[c] += v[k] * v[k];
                }
            }
    }
    if (perCh < 2) fail(ErrorKind::SampleSize, "codec.fit: not enough pixels");
    chMean.resize(C);
    chScale.resize(C);
    for (int c = 0; c < C; c++) {
        double mean = sum[c] / perCh;
        double var = std::max(0.0, sumsq[c] / perCh - mean * mean);
        chMean[c] = mean;
        chScale[c] = std::max(0.05, std::sqrt(var));
    }
}

Tensor<float> LatentCodec::encode(const Image& img) const {
    if ((int)chMean.size() != channels()) fail(ErrorKind::RejectedConfig, "codec: normalization not set");
    if (mode == Mode::identity) {
        Tensor<float> z({3, (int64_t)img.h, (int64_t)img.w});
        for (int y = 0; y < img.h; y++)
            for (int x = 0; x < img.w; x++) {
                Rgb px = img.get(y, x);
                double v[3] = {px.r / 255.0, px.g / 255.0, px.b / 255.0};
                for (int k = 0; k < 3; k++)
                    z[((int64_t)k * img.h + y) * img.w + x] = (float)((v[k] - chMean[k]) / chScale[k]);
            }
        return z;
    }
    if (img.h % f != 0 || img.w % f != 0) fail(ErrorKind::Shape, "codec.encode: dims not divisible by f");
    int64_t lh = img.h / f, lw = img.w / f;
    Tensor<float> z({(int64_t)channels(), lh, lw});
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++) {
            Rgb px = img.get(y, x);
            double v[3] = {px.r / 255.0, px.g / 255.0, px.b / 255.0};
            for (int k = 0; k < 3; k++) {
                int c = (k * f + y % f) * f + x % f;
                z[((int64_t)c * lh + y / f) * lw + x / f] = (float)((v[k] - chMean[c]) / chScale[c]);
            }
        }
    return z;
}

Image LatentCodec::decode(const Tensor<float>& z) const {
    if ((int)chMean.size() != channels()) fail(ErrorKind::RejectedConfig, "codec: normalization not set");
    if (z.shape.size() != 3 || z.shape[0] != channels())
        fail(ErrorKind::Shape, "codec.decode: latent channel mismatch");
    auto toByte = [](double u) {
        return (uint8_t)std::clamp((int)std::lround(u * 255.0), 0, 255);
    };
    if (mode == Mode::identity) {
        int h = (int)z.shape[1], w = (int)z.shape[2];
        Image img(h, w);
        for (int y = 0; y < h; y++)
            for (int x = 0; x < w; x++) {
                uint8_t* p = img.at(y, x);
                for (int k = 0; k < 3; k++)
                    p[k] = toByte((double)z[((int64_t)k * h + y) * w + x] * chScale[k] + chMean[k]);
            }
        return img;
    }
    int lh = (int)z.shape[1], lw = (int)z.shape[2];
    int h = lh * f, w = lw * f;
    Image img(h, w);
    for (int y = 0; y < h; y++)
        for (int x = 0; x < w; x++) {
            uint8_t* p = img.at(y, x);
            for (int k = 0; k < 3; k++) {
                int c = (k * f + y % f) * f + x % f;
                p[k] = toByte((double)z[((int64_t)c * lh + y / f) * lw + x / f] * chScale[c] + chMean[c]);
            }
        }
    return img;
}

}  // namespace fashedit
