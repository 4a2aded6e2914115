#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "fashedit/promptenc.hpp"

namespace fashedit {

// Deterministic 64-dim toy image features standing in for Inception
// activations: 24 color-histogram bins + 6 channel moments + 8
// gradient-magnitude bins + 26 pooled random-conv responses.
class FeatureExtractor {
public:
    static constexpr int kDim = 64;
    static constexpr int kConvFeatures = 26;

    explicit FeatureExtractor(uint64_t seed = 0xfea7u);
    std::vector<double> extract(const Image& img) const;
    Eigen::MatrixXd extract_all(const std::vector<const Image*>& imgs, int threads = 0) const;

    // 3x3x3 filter bank shared with the perceptual distance.
    const std::vector<std::array<double, 27>>& filters() const { return filters_; }

private:
    std::vector<std::array<double, 27>> filters_;
};

// Frechet distance between Gaussians fitted to the rows of a and b;
// matrix square root via symmetric eigendecomposition with negative
// eigenvalues clamped at zero. Requires rows >= cols+1 on both sides.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Unbiased MMD^2 with kernel (x.y/d + 1)^3 averaged over seeded subsets,
// scaled by 1000 (reporting convention). Diagonal terms are excluded from
// all three sums, so identical sets give exactly zero.
double kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int subsetSize, int subsets,
           uint64_t seed = 0x6b6964ULL);
struct KidStats {
    double mean = 0, sd = 0;
    int subsets = 0;
};
KidStats kid_stats(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int subsetSize, int subsets,
                   uint64_t seed = 0x6b6964ULL);

// Gaussian-windowed SSIM (window 11, sigma 1.5, K1 0.01, K2 0.03, L 255) on
// ITU-R 601 luma, averaged over valid window positions.
double ssim(const Image& x, const Image& y, int window = 11, double K1 = 0.01, double K2 = 0.03,
            double L = 255.0);

// Same, restricted to windows whose center lies in `centers`.
double ssim_masked(const Image& x, const Image& y, const BoolMap& centers, int window = 11,
                   double K1 = 0.01, double K2 = 0.03, double L = 255.0);

// Fixed-feature perceptual distance: mean squared difference between
// channel-normalized conv feature maps at two scales.
double lpips_analog(const Image& x, const Image& y);

struct CategoryRow {
    std::string name;
    int n = 0;
    double clipScore = 0, ssim = 0, lpips = 0;
};

struct EvalReport {
    int n = 0;
    double fidValue = -1, kidValue = 0, kidSd = 0;  // fidValue < 0 => not computed
    bool distributionMetrics = false;
    double clipScore = 0, ssimPaired = 0, lpipsPaired = 0;
    std::vector<CategoryRow> perCategory;  // 9 rows
    std::vector<CategoryRow> perGroup;     // 5 rows incl accessories
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// Directory-level protocol: edited images vs reference corpus samples with a
// prompt manifest; unpaired distribution metrics plus paired similarity and
// per-category breakdowns. Writes report.json, report.csv and a gallery grid.
EvalReport evaluate_run(const std::string& editedDir, const std::string& referenceDir,
                        const std::string& promptManifestPath, const std::string& outDir,
                        const PromptEncoder& enc, int threads = 0);

// Group labels used in the per-group breakdown.
const std::vector<std::pair<std::string, std::vector<Apparel>>>& category_groups();

// Crop the parse region of `cat` out of `img` (white elsewhere) for
// CLIP-analog scoring of an edited area.
GuidancePrompt region_crop(const Image& img, const Sample& reference, Apparel cat);

}  // namespace fashedit
