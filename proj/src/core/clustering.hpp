#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace qct {

struct ClusterModel {
    int k = 5;
    uint64_t seed = 0;
    std::vector<int> used_dims;              // feature indices kept (non-constant)
    std::vector<double> feature_mean;        // per used dim
    std::vector<double> feature_scale;       // per used dim, > 0
    std::vector<std::vector<double>> centers;  // k x used_dims, standardized space
    std::vector<double> objective_trace;     // WCSS after each assignment step
    int iterations = 0;
    bool converged = false;
};

struct ClusterResult {
    ClusterModel model;
    std::vector<int> labels;  // per lattice point, 1..K, canonical attenuation order
};

// Standardized 26-dim Lloyd with greedy farthest-point seeding; clusters are
// relabeled by ascending mean of the attenuation (Mean) feature so ratio
// vectors line up across patients.
ClusterResult fit_clusters(const FeatureMap& map, int k, uint64_t seed);

// ratio_c = count(label == c) / total, c = 1..k
std::vector<double> volume_ratios(const std::vector<int>& labels, int k);

void write_labels_csv(const FeatureMap& map, const std::vector<int>& labels,
                      const std::string& path);

}  // namespace qct
