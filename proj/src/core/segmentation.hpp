#pragma once

#include <cstdint>
#include <vector>

#include "types.hpp"

namespace qct {

struct SegmentationConfig {
    int k_intensity = 3;  // air / lung+fibrosis / soft tissue
    int max_iters = 100;
    double tol_hu = 0.01;
    int min_component_voxels = 64;
    uint64_t seed = 1;

    void validate() const;
};

struct IntensityClusters {
    std::vector<double> centers;   // HU, ascending
    std::vector<uint8_t> labels;   // per voxel, index into centers
};

// 1-D Lloyd over the HU histogram; k-means++ style seeding from cfg.seed.
IntensityClusters intensity_kmeans(const Volume& v, const SegmentationConfig& cfg);

// Thresholds at the midpoint of the lung and soft-tissue centers, drops
// boundary-connected air and small components, keeps the largest two.
LungMask segment_lung(const Volume& v, const SegmentationConfig& cfg);

// 6-connected component labels over set mask bits; 0 = background,
// components numbered from 1.
std::vector<int32_t> connected_components(const LungMask& mask, int* num_components);

}  // namespace qct
