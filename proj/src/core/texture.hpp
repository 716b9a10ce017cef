#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "types.hpp"

namespace qct {

constexpr int kFeatureCount = 26;

// Canonical feature order; every downstream CSV uses these names as columns.
enum FeatureId : int {
    kMean = 0,
    kMin,
    kMax,
    kPct05,
    kMean05,
    kPct95,
    kMean95,
    kSum,
    kSigma,
    kEntropy,
    kKurtosis,
    kSkewness,
    kClusterShade,
    kCorrelation,
    kHaralickCorrelation,
    kEnergy,
    kGlcmEntropy,
    kInertia,
    kInverseDifferenceMoment,
    kGrayLevelNonuniformity,
    kHighGrayLevelRunEmphasis,
    kLongRunEmphasis,
    kLowGrayLevelRunEmphasis,
    kRunLengthNonuniformity,
    kRunPercentage,
    kShortRunEmphasis,
};

const std::array<std::string, kFeatureCount>& feature_names();

using FeatureVector = std::array<double, kFeatureCount>;

// A cubic sample around a lattice point. Voxels outside the lung mask (or
// clipped away at the volume border) are present in the cube but flagged
// invalid; they never contribute values, pairs, or runs.
struct WindowSample {
    Index3 dims{0, 0, 0};
    std::vector<int16_t> hu;      // x fastest, size dx*dy*dz
    std::vector<uint8_t> valid;   // same layout, 1 = usable voxel
    size_t valid_count = 0;

    size_t size() const {
        return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    }
    size_t flatten(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) +
                                               static_cast<size_t>(dims[1]) * z);
    }
};

// Offsets are accumulated over the 13 unique 3D directions (26-neighborhood
// modulo sign) unless a caller narrows the set.
const std::vector<Index3>& all_directions_3d();

struct TextureConfig {
    int glcm_levels = 32;            // G
    int16_t glcm_lo = -1024;         // quantization range for GLCM/RLM
    int16_t glcm_hi = 240;
    int glcm_distance = 1;           // d, voxels
    std::vector<Index3> directions;  // empty = all 13

    const std::vector<Index3>& effective_directions() const {
        return directions.empty() ? all_directions_3d() : directions;
    }
};

// level = floor(G * (clamp(v,lo,hi) - lo) / (hi - lo)), capped at G-1
std::vector<int> quantize(const std::vector<int16_t>& hu, int levels, int16_t lo, int16_t hi);

// First-order statistics of the gray-level histogram. Bin values are the
// HU values themselves (1-HU bins over the clamp range); g(k) is the
// relative frequency, so Sum = K * Mean.
struct GrayLevelHistogram {
    std::vector<int> bin_values;   // ascending, only occupied bins
    std::vector<double> g;         // relative frequency per occupied bin
    size_t total = 0;              // K, voxel count
};

GrayLevelHistogram build_histogram(const WindowSample& w);
std::array<double, 12> histogram_features(const GrayLevelHistogram& h);

// Symmetric normalized co-occurrence matrix over G x G gray levels.
struct CoOccurrenceMatrix {
    int levels = 0;
    std::vector<double> f;  // levels*levels, row-major (i, j), sums to 1
    double mu_i = 0, mu_j = 0, sigma_i = 0, sigma_j = 0;

    double at(int i, int j) const { return f[static_cast<size_t>(i) * levels + j]; }
};

CoOccurrenceMatrix build_glcm(const WindowSample& w, const std::vector<int>& levels, int num_levels,
                              int distance, const std::vector<Index3>& directions);
std::array<double, 7> glcm_features(const CoOccurrenceMatrix& m);

// Run counts over M gray levels (rows indexed 1..M, level+1) by run length
// (columns 1..N). voxels_traversed is the denominator of RunPercentage:
// each direction's line set covers every valid voxel once.
struct RunLengthMatrix {
    int num_levels = 0;    // M
    int max_run = 0;       // N
    std::vector<double> r;  // num_levels*max_run counts, row-major
    double total_runs = 0;       // n_r
    double voxels_traversed = 0;

    double at(int level1, int len1) const {  // 1-based indices
        return r[static_cast<size_t>(level1 - 1) * max_run + (len1 - 1)];
    }
};

RunLengthMatrix build_rlm(const WindowSample& w, const std::vector<int>& levels, int num_levels,
                          const std::vector<Index3>& directions);
std::array<double, 7> rlm_features(const RunLengthMatrix& r);

// The full 26-feature vector in canonical order: histogram features on raw
// HU, matrix features on quantized levels.
FeatureVector compute_feature_vector(const WindowSample& w, const TextureConfig& cfg);

}  // namespace qct
