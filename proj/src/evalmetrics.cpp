#include "fashedit/evalmetrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fashedit/corpus_io.hpp"
#include "fashedit/dataprep.hpp"

namespace fashedit {

FeatureExtractor::FeatureExtractor(uint64_t seed) {
    Rng rng(mix64(seed, 0x636f6e76ULL));
    filters_.resize(kConvFeatures);
    for (auto& f : filters_) {
        double mean = 0;
        for (auto& w : f) {
            w = rng.normal();
            mean += w;
        }
        mean /= f.size();
        for (auto& w : f) w -= mean;  // zero-sum filters ignore flat offsets
    }
}

std::vector<double> FeatureExtractor::extract(const Image& img) const {
    std::vector<double> feat(kDim, 0.0);
    int64_t n = (int64_t)img.h * img.w;

    // 0..23: per-channel 8-bin histograms (normalized)
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++) {
            const uint8_t* p = img.at(y, x);
            for (int c = 0; c < 3; c++) feat[c * 8 + p[c] / 32] += 1.0;
        }
    for (int i = 0; i < 24; i++) feat[i] /= (double)n;

    // 24..29: mean and variance per channel (on [0,1])
    for (int c = 0; c < 3; c++) {
        double s = 0, ss = 0;
        for (int y = 0; y < img.h; y++)
            for (int x = 0; x < img.w; x++) {
                double v = img.at(y, x)[c] / 255.0;
                s += v;
                ss += v * v;
            }
        double mean = s / n;
        feat[24 + c] = mean;
        feat[27 + c] = std::max(0.0, ss / n - mean * mean);
    }

    // 30..37: gradient-magnitude histogram on luma
    std::vector<double> lum((size_t)n);
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++) lum[(size_t)y * img.w + x] = luma601(img.get(y, x));
    int64_t gcount = 0;
    for (int y = 0; y + 1 < img.h; y++)
        for (int x = 0; x + 1 < img.w; x++) {
            double gx = lum[(size_t)y * img.w + x + 1] - lum[(size_t)y * img.w + x];
            double gy = lum[(size_t)(y + 1) * img.w + x] - lum[(size_t)y * img.w + x];
            double mag = std::sqrt(gx * gx + gy * gy);
            int bin = std::min(7, (int)(mag / 16.0));
            feat[30 + bin] += 1.0;
            gcount++;
        }
    for (int i = 30; i < 38; i++) feat[i] /= std::max<int64_t>(1, gcount);

    // 38..63: random 3x3 conv responses, tanh, global average pool
    for (int k = 0; k < kConvFeatures; k++) {
        const auto& f = filters_[k];
        double acc = 0;
        int64_t cnt = 0;
        for (int y = 1; y + 1 < img.h; y++)
            for (int x = 1; x + 1 < img.w; x++) {
                double r = 0;
                int wi = 0;
                for (int dy = -1; dy <= 1; dy++)
                    for (int dx = -1; dx <= 1; dx++) {
                        const uint8_t* p = img.at(y + dy, x + dx);
                        r += f[wi] * (p[0] / 255.0) + f[wi + 9] * (p[1] / 255.0) + f[wi + 18] * (p[2] / 255.0);
                        wi++;
                    }
                acc += std::tanh(r);
                cnt++;
            }
        feat[38 + k] = cnt > 0 ? acc / cnt : 0.0;
    }
    return feat;
}

Eigen::MatrixXd FeatureExtractor::extract_all(const std::vector<const Image*>& imgs, int threads) const {
    Eigen::MatrixXd out((int64_t)imgs.size(), kDim);
    parallel_for((int64_t)imgs.size(), threads, [&](int64_t i) {
        std::vector<double> f = extract(*imgs[i]);
        for (int j = 0; j < kDim; j++) out((Eigen::Index)i, j) = f[j];
    });
    return out;
}

namespace {

void mean_cov(const Eigen::MatrixXd& a, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    int64_t n = a.rows();
    mu = a.colwise().mean();
    Eigen::MatrixXd centered = a.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / double(n - 1);
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) fail(ErrorKind::Shape, "fid: feature dims differ");
    int64_t k = a.cols();
    if (a.rows() < k + 1 || b.rows() < k + 1)
        fail(ErrorKind::SampleSize, "fid: need at least dim+1 samples per set");

    Eigen::VectorXd muA, muB;
    Eigen::MatrixXd covA, covB;
    mean_cov(a, muA, covA);
    mean_cov(b, muB, covB);

    Eigen::MatrixXd sqrtA = sym_sqrt(covA);
    Eigen::MatrixXd inner = sqrtA * covB * sqrtA;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    double trSqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    return (muA - muB).squaredNorm() + covA.trace() + covB.trace() - 2.0 * trSqrt;
}

namespace {

double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    // polynomial kernel (u.v/d + 1)^3; all i==j terms excluded
    int64_t m = x.rows();
    double d = (double)x.cols();
    auto kern = [&](const auto& u, const auto& v) {
        double t = u.dot(v) / d + 1.0;
        return t * t * t;
    };
    double acc = 0;
    for (int64_t i = 0; i < m; i++)
        for (int64_t j = 0; j < m; j++) {
            if (i == j) continue;
            acc += kern(x.row(i), x.row(j)) + kern(y.row(i), y.row(j)) - kern(x.row(i), y.row(j)) -
                   kern(x.row(j), y.row(i));
        }
    return acc / double(m * (m - 1));
}

}  // namespace

KidStats kid_stats(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int subsetSize, int subsets,
                   uint64_t seed) {
    if (a.cols() != b.cols()) fail(ErrorKind::Shape, "kid: feature dims differ");
    if (subsetSize < 2) fail(ErrorKind::SampleSize, "kid: subsetSize must be >= 2");
    if (subsetSize > a.rows() || subsetSize > b.rows())
        fail(ErrorKind::SampleSize, "kid: subsetSize exceeds set size");
    if (subsets < 1) fail(ErrorKind::SampleSize, "kid: need at least one subset");

    Rng rng(mix64(seed, (uint64_t)subsetSize, (uint64_t)subsets));
    auto pick = [&](int64_t n) {
        std::vector<int64_t> idx(n);
        for (int64_t i = 0; i < n; i++) idx[i] = i;
        // identity when the subset is the whole set, so equal sets cancel
        // term-by-term and the estimate is exactly zero
        if (subsetSize < n)
            for (int64_t i = n - 1; i > 0; i--) std::swap(idx[i], idx[rng.uniform_int((uint64_t)i + 1)]);
        idx.resize(subsetSize);
        return idx;
    };

    std::vector<double> ests(subsets);
    for (int s = 0; s < subsets; s++) {
        std::vector<int64_t> ia = pick(a.rows()), ib = pick(b.rows());
        Eigen::MatrixXd xs(subsetSize, a.cols()), ys(subsetSize, b.cols());
        for (int i = 0; i < subsetSize; i++) {
            xs.row(i) = a.row(ia[i]);
            ys.row(i) = b.row(ib[i]);
        }
        ests[s] = mmd2_unbiased(xs, ys) * 1000.0;
    }
    KidStats st;
    st.subsets = subsets;
    for (double e : ests) st.mean += e;
    st.mean /= subsets;
    if (subsets > 1) {
        double var = 0;
        for (double e : ests) var += (e - st.mean) * (e - st.mean);
        st.sd = std::sqrt(var / (subsets - 1));
    }
    return st;
}

double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int subsetSize, int subsets, uint64_t seed) {
    return kid_stats(a, b, subsetSize, subsets, seed).mean;
}

namespace {

std::vector<double> gaussian_window(int window, double sigma) {
    std::vector<double> w(window);
    int half = window / 2;
    double sum = 0;
    for (int i = 0; i < window; i++) {
        double d = i - half;
        w[i] = std::exp(-d * d / (2 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

struct SsimContext {
    std::vector<double> lx, ly;
    int h, w, window;
    std::vector<double> win;
    double C1, C2;
};

double ssim_at(const SsimContext& c, int cy, int cx) {
    int half = c.window / 2;
    double mx = 0, my = 0;
    for (int dy = -half; dy <= half; dy++)
        for (int dx = -half; dx <= half; dx++) {
            double wv = c.win[dy + half] * c.win[dx + half];
            mx += wv * c.lx[(size_t)(cy + dy) * c.w + cx + dx];
            my += wv * c.ly[(size_t)(cy + dy) * c.w + cx + dx];
        }
    double vx = 0, vy = 0, cxy = 0;
    for (int dy = -half; dy <= half; dy++)
        for (int dx = -half; dx <= half; dx++) {
            double wv = c.win[dy + half] * c.win[dx + half];
            double ax = c.lx[(size_t)(cy + dy) * c.w + cx + dx] - mx;
            double ay = c.ly[(size_t)(cy + dy) * c.w + cx + dx] - my;
            vx += wv * ax * ax;
            vy += wv * ay * ay;
            cxy += wv * ax * ay;
        }
    return ((2 * mx * my + c.C1) * (2 * cxy + c.C2)) /
           ((mx * mx + my * my + c.C1) * (vx + vy + c.C2));
}

SsimContext make_ssim_context(const Image& x, const Image& y, int window, double K1, double K2, double L) {
    if (x.h != y.h || x.w != y.w) fail(ErrorKind::Shape, "ssim: shape mismatch");
    if (x.h < window || x.w < window) fail(ErrorKind::Shape, "ssim: image smaller than window");
    SsimContext c;
    c.h = x.h;
    c.w = x.w;
    c.window = window;
    c.win = gaussian_window(window, 1.5);
    c.C1 = (K1 * L) * (K1 * L);
    c.C2 = (K2 * L) * (K2 * L);
    c.lx.resize((size_t)x.h * x.w);
    c.ly.resize((size_t)x.h * x.w);
    for (int i = 0; i < x.h; i++)
        for (int j = 0; j < x.w; j++) {
            c.lx[(size_t)i * x.w + j] = luma601(x.get(i, j));
            c.ly[(size_t)i * x.w + j] = luma601(y.get(i, j));
        }
    return c;
}

}  // namespace

double ssim(const Image& x, const Image& y, int window, double K1, double K2, double L) {
    SsimContext c = make_ssim_context(x, y, window, K1, K2, L);
    int half = window / 2;
    double acc = 0;
    int64_t n = 0;
    for (int cy = half; cy < c.h - half; cy++)
        for (int cx = half; cx < c.w - half; cx++) {
            acc += ssim_at(c, cy, cx);
            n++;
        }
    return acc / n;
}

double ssim_masked(const Image& x, const Image& y, const BoolMap& centers, int window, double K1,
                   double K2, double L) {
    if (centers.h != x.h || centers.w != x.w) fail(ErrorKind::Shape, "ssim_masked: mask shape mismatch");
    SsimContext c = make_ssim_context(x, y, window, K1, K2, L);
    int half = window / 2;
    double acc = 0;
    int64_t n = 0;
    for (int cy = half; cy < c.h - half; cy++)
        for (int cx = half; cx < c.w - half; cx++) {
            if (!centers.at(cy, cx)) continue;
            acc += ssim_at(c, cy, cx);
            n++;
        }
    if (n == 0) fail(ErrorKind::SampleSize, "ssim_masked: no windows selected");
    return acc / n;
}

namespace {

// channel-normalized conv feature map distance at one scale
double lpips_scale(const Image& x, const Image& y, const std::vector<std::array<double, 27>>& filters,
                   int nf) {
    int h = x.h, w = x.w;
    if (h < 3 || w < 3) return 0.0;
    auto respond = [&](const Image& img, int fy, int fx, int k) {
        const auto& f = filters[k];
        double r = 0;
        int wi = 0;
        for (int dy = -1; dy <= 1; dy++)
            for (int dx = -1; dx <= 1; dx++) {
                const uint8_t* p = img.at(fy + dy, fx + dx);
                r += f[wi] * (p[0] / 255.0) + f[wi + 9] * (p[1] / 255.0) + f[wi + 18] * (p[2] / 255.0);
                wi++;
            }
        return r;
    };
    double acc = 0;
    int64_t n = 0;
    std::vector<double> fx(nf), fy(nf);
    for (int yy = 1; yy + 1 < h; yy++)
        for (int xx = 1; xx + 1 < w; xx++) {
            double nx = 0, ny = 0;
            for (int k = 0; k < nf; k++) {
                fx[k] = respond(x, yy, xx, k);
                fy[k] = respond(y, yy, xx, k);
                nx += fx[k] * fx[k];
                ny += fy[k] * fy[k];
            }
            nx = std::sqrt(nx) + 1e-8;
            ny = std::sqrt(ny) + 1e-8;
            for (int k = 0; k < nf; k++) {
                double d = fx[k] / nx - fy[k] / ny;
                acc += d * d;
            }
            n++;
        }
    return acc / (n * nf);
}

Image box_downsample2(const Image& img) {
    Image out(img.h / 2, img.w / 2);
    for (int y = 0; y < out.h; y++)
        for (int x = 0; x < out.w; x++) {
            int r = 0, g = 0, b = 0;
            for (int dy = 0; dy < 2; dy++)
                for (int dx = 0; dx < 2; dx++) {
                    const uint8_t* p = img.at(2 * y + dy, 2 * x + dx);
                    r += p[0];
                    g += p[1];
                    b += p[2];
                }
            out.set(y, x, {(uint8_t)(r / 4), (uint8_t)(g / 4), (uint8_t)(b / 4)});
        }
    return out;
}

const FeatureExtractor& shared_extractor() {
    static FeatureExtractor fe;
    return fe;
}

}  // namespace

double lpips_analog(const Image& x, const Image& y) {
    if (x.h != y.h || x.w != y.w) fail(ErrorKind::Shape, "lpips_analog: shape mismatch");
    const auto& filters = shared_extractor().filters();
    const int nf = 16;
    double d0 = lpips_scale(x, y, filters, nf);
    double d1 = lpips_scale(box_downsample2(x), box_downsample2(y), filters, nf);
    return 0.5 * (d0 + d1);
}

const std::vector<std::pair<std::string, std::vector<Apparel>>>& category_groups() {
    static const std::vector<std::pair<std::string, std::vector<Apparel>>> groups = {
        {"tops", {Apparel::tops}},
        {"pants", {Apparel::pants}},
        {"dresses&skirts", {Apparel::dress, Apparel::skirt}},
        {"shoes", {Apparel::shoes}},
        {"accessories", {Apparel::bag, Apparel::scarf, Apparel::headwear, Apparel::socks}},
    };
    return groups;
}

GuidancePrompt region_crop(const Image& img, const Sample& reference, Apparel cat) {
    uint8_t lbl = parse_label(cat);
    int x0 = img.w, y0 = img.h, x1 = -1, y1 = -1;
    for (int y = 0; y < img.h; y++)
        for (int x = 0; x < img.w; x++)
            if (reference.parse.at(y, x) == lbl) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) fail(ErrorKind::MissingApparel, "region_crop: category absent in reference parse");
    int S = std::max({x1 - x0 + 1, y1 - y0 + 1, 16}) + 4;
    GuidancePrompt gp;
    gp.sourceCategory = cat;
    gp.image = Image(S, S, kWhite);
    int ox = (S - (x1 - x0 + 1)) / 2, oy = (S - (y1 - y0 + 1)) / 2;
    for (int y = y0; y <= y1; y++)
        for (int x = x0; x <= x1; x++)
            if (reference.parse.at(y, x) == lbl) {
                Rgb c = img.get(y, x);
                if (c == kWhite) c = {254, 254, 254};  // keep content detectable
                gp.image.set(oy + y - y0, ox + x - x0, c);
            }
    return gp;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    if (distributionMetrics) {
        j["unpaired"]["fid"] = fidValue;
        j["unpaired"]["kid"] = kidValue;
        j["unpaired"]["kidSd"] = kidSd;
    } else {
        j["unpaired"]["fid"] = nullptr;
        j["unpaired"]["kid"] = nullptr;
        j["unpaired"]["note"] = "set too small for dim+1 covariance rank";
    }
    j["unpaired"]["clipScore"] = clipScore;
    j["paired"]["ssim"] = ssimPaired;
    j["paired"]["lpips"] = lpipsPaired;
    auto rows = [](const std::vector<CategoryRow>& v) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : v)
            out.push_back({{"category", r.name}, {"n", r.n}, {"clipScore", r.clipScore},
                           {"ssim", r.ssim}, {"lpips", r.lpips}});
        return out;
    };
    j["perCategory"] = rows(perCategory);
    j["perGroup"] = rows(perGroup);
    return j;
}

std::string EvalReport::to_csv() const {
    std::string out = "scope,name,n,clipScore,ssim,lpips\n";
    auto add = [&](const std::string& scope, const CategoryRow& r) {
        out += scope + "," + r.name + "," + std::to_string(r.n) + "," + std::to_string(r.clipScore) +
               "," + std::to_string(r.ssim) + "," + std::to_string(r.lpips) + "\n";
    };
    for (const auto& r : perCategory) add("category", r);
    for (const auto& r : perGroup) add("group", r);
    return out;
}

namespace {

Image gallery_grid(const std::vector<std::array<Image, 3>>& rows) {
    if (rows.empty()) return Image(8, 8, kWhite);
    int h = rows[0][0].h, w = rows[0][0].w, pad = 2;
    Image grid((h + pad) * (int)rows.size() + pad, (w + pad) * 3 + pad, kWhite);
    for (size_t r = 0; r < rows.size(); r++)
        for (int c = 0; c < 3; c++) {
            int oy = pad + (int)r * (h + pad), ox = pad + c * (w + pad);
            for (int y = 0; y < h; y++)
                for (int x = 0; x < w; x++) grid.set(oy + y, ox + x, rows[r][c].get(y, x));
        }
    return grid;
}

}  // namespace

EvalReport evaluate_run(const std::string& editedDir, const std::string& referenceDir,
                        const std::string& promptManifestPath, const std::string& outDir,
                        const PromptEncoder& enc, int threads) {
    std::ifstream mf(promptManifestPath);
    if (!mf) fail(ErrorKind::Manifest, "cannot open prompt manifest: " + promptManifestPath);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const std::exception& e) {
        fail(ErrorKind::Manifest, std::string("bad manifest json: ") + e.what());
    }

    struct Entry {
        int64_t id;
        Apparel category;
        AttributeTriple prompt;
        Sample reference;
        Image edited;
    };
    std::vector<Entry> entries;
    for (const auto& row : manifest.at("entries")) {
        Entry e;
        e.id = row.at("id").get<int64_t>();
        e.category = category_from_id(row.at("category").get<std::string>());
        e.prompt = enc.parse_text(row.at("prompt").get<std::string>());
        std::string editedPath = editedDir + "/" + std::to_string(e.id) + ".png";
        if (!std::filesystem::exists(editedPath))
            fail(ErrorKind::Manifest, "manifest id has no edited image: " + editedPath);
        std::string refDir = referenceDir + "/" + std::to_string(e.id);
        if (!std::filesystem::exists(refDir + "/image.png"))
            fail(ErrorKind::Manifest, "manifest id has no reference sample: " + refDir);
        e.reference = read_sample_dir(refDir);
        e.edited = read_png_rgb(editedPath);
        if (e.edited.h != e.reference.image.h || e.edited.w != e.reference.image.w)
            fail(ErrorKind::Shape, "edited/reference size mismatch for id " + std::to_string(e.id));
        entries.push_back(std::move(e));
    }

    EvalReport rep;
    rep.n = (int)entries.size();
    if (entries.empty()) fail(ErrorKind::Manifest, "manifest has no entries");

    // unpaired distribution metrics (need dim+1 samples for covariance rank)
    FeatureExtractor fe;
    if (rep.n >= FeatureExtractor::kDim + 1) {
        std::vector<const Image*> ea, eb;
        for (const auto& e : entries) {
            ea.push_back(&e.edited);
            eb.push_back(&e.reference.image);
        }
        Eigen::MatrixXd fa = fe.extract_all(ea, threads), fb = fe.extract_all(eb, threads);
        rep.fidValue = fid(fa, fb);
        int subsetSize = std::min<int>(rep.n, 64);
        KidStats ks = kid_stats(fa, fb, subsetSize, 10);
        rep.kidValue = ks.mean;
        rep.kidSd = ks.sd;
        rep.distributionMetrics = true;
    }

    struct PerEntry {
        double cs, ssimV, lpipsV;
    };
    std::vector<PerEntry> per(entries.size());
    parallel_for((int64_t)entries.size(), threads, [&](int64_t i) {
        const Entry& e = entries[i];
        PromptEmbedding promptEmb = enc.embed(e.prompt, Modality::text);
        GuidancePrompt crop = region_crop(e.edited, e.reference, e.category);
        double cs = 0.0;
        try {
            AttributeTriple got = enc.analyze_image(crop);
            cs = PromptEncoder::alignment_score(promptEmb, enc.embed(got, Modality::image));
        } catch (const Error&) {
            cs = 0.0;  // fully white crop: no content survived editing
        }
        per[i] = {cs, ssim(e.edited, e.reference.image), lpips_analog(e.edited, e.reference.image)};
    });

    std::array<CategoryRow, kNumCategories> cat{};
    for (int c = 0; c < kNumCategories; c++) cat[c].name = category_ids()[c];
    for (size_t i = 0; i < entries.size(); i++) {
        rep.clipScore += per[i].cs;
        rep.ssimPaired += per[i].ssimV;
        rep.lpipsPaired += per[i].lpipsV;
        CategoryRow& r = cat[(int)entries[i].category];
        r.n++;
        r.clipScore += per[i].cs;
        r.ssim += per[i].ssimV;
        r.lpips += per[i].lpipsV;
    }
    rep.clipScore /= rep.n;
    rep.ssimPaired /= rep.n;
    rep.lpipsPaired /= rep.n;

    for (auto& r : cat) {
        if (r.n > 0) {
            r.clipScore /= r.n;
            r.ssim /= r.n;
            r.lpips /= r.n;
        }
        rep.perCategory.push_back(r);
    }
    for (const auto& [name, cats] : category_groups()) {
        CategoryRow g;
        g.name = name;
        for (Apparel a : cats) {
            const CategoryRow& r = cat[(int)a];
            g.n += r.n;
            g.clipScore += r.clipScore * r.n;
            g.ssim += r.ssim * r.n;
            g.lpips += r.lpips * r.n;
        }
        if (g.n > 0) {
            g.clipScore /= g.n;
            g.ssim /= g.n;
            g.lpips /= g.n;
        }
        rep.perGroup.push_back(g);
    }

    std::filesystem::create_directories(outDir);
    write_file_atomic(outDir + "/report.json", rep.to_json().dump(2));
    write_file_atomic(outDir + "/report.csv", rep.to_csv());

    std::vector<std::array<Image, 3>> rows;
    for (size_t i = 0; i < entries.size() && i < 8; i++) {
        const Entry& e = entries[i];
        AgnosticResult agn = remove_apparel(e.reference, e.category);
        rows.push_back({e.reference.image, agn.agnosticImage, e.edited});
    }
    write_png_rgb(outDir + "/gallery.png", gallery_grid(rows));
    return rep;
}

}  // namespace fashedit
