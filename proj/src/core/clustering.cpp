#include "clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"
#include "volume_io.hpp"

namespace qct {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

}  // namespace

ClusterResult fit_clusters(const FeatureMap& map, int k, uint64_t seed) {
    const size_t n = map.points.size();
    if (k < 2) throw ValidationError("fit_clusters: k must be >= 2");
    if (n < static_cast<size_t>(k))
        throw ValidationError("fit_clusters: fewer points (" + std::to_string(n) + ") than k (" +
                              std::to_string(k) + ")");

    ClusterModel model;
    model.k = k;
    model.seed = seed;

    // standardize per dimension; constant dimensions carry no distance
    for (int d = 0; d < kFeatureCount; ++d) {
        double mean = 0.0;
        for (const auto& p : map.points) mean += p.features[d];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& p : map.points) {
            const double t = p.features[d] - mean;
            var += t * t;
        }
        var /= static_cast<double>(n);
        const double scale = std::sqrt(var);
        if (scale > 0.0) {
            model.used_dims.push_back(d);
            model.feature_mean.push_back(mean);
            model.feature_scale.push_back(scale);
        }
    }
    if (model.used_dims.empty())
        throw ComputeError("fit_clusters: every feature is constant across points");

    const size_t dims = model.used_dims.size();
    std::vector<std::vector<double>> x(n, std::vector<double>(dims));
    for (size_t i = 0; i < n; ++i)
        for (size_t d = 0; d < dims; ++d)
            x[i][d] = (map.points[i].features[model.used_dims[d]] - model.feature_mean[d]) /
                      model.feature_scale[d];

    // greedy farthest-point seeding; only the first pick uses the rng
    Rng rng(seed);
    std::vector<size_t> center_idx;
    center_idx.push_back(static_cast<size_t>(rng.next_below(n)));
    std::vector<double> nearest(n, std::numeric_limits<double>::max());
    while (static_cast<int>(center_idx.size()) < k) {
        const auto& latest = x[center_idx.back()];
        size_t far = 0;
        double far_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(x[i], latest));
            if (nearest[i] > far_d) {
                far_d = nearest[i];
                far = i;
            }
        }
        center_idx.push_back(far);
    }

    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    for (size_t ci : center_idx) centers.push_back(x[ci]);

    constexpr double kTol = 1e-6;
    constexpr int kMaxIters = 300;

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < kMaxIters; ++iter) {
        model.iterations = iter + 1;

        double wcss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(x[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(x[i], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            wcss += best_d;
        }
        model.objective_trace.push_back(wcss);

        std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
        std::vector<size_t> counts(k, 0);
        for (size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (size_t d = 0; d < dims; ++d) sums[assign[i]][d] += x[i][d];
        }

        double max_move = 0.0;
        for (int c = 0; c < k; ++c) {
            std::vector<double> updated(dims);
            if (counts[c] > 0) {
                for (size_t d = 0; d < dims; ++d)
                    updated[d] = sums[c][d] / static_cast<double>(counts[c]);
            } else {
                // park an empty cluster on the worst-served point
                size_t far = 0;
                double far_d = -1.0;
                for (size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(x[i], centers[assign[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                updated = x[far];
            }
            max_move = std::max(max_move, sq_dist(updated, centers[c]));
            centers[c] = std::move(updated);
        }
        if (std::sqrt(max_move) < kTol) {
            model.converged = true;
            break;
        }
    }

    // final assignment against the converged centers
    for (size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = sq_dist(x[i], centers[0]);
        for (int c = 1; c < k; ++c) {
            const double d = sq_dist(x[i], centers[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assign[i] = best;
    }

    // canonical order: ascending cluster mean of the raw attenuation feature
    std::vector<double> mean_hu(k, std::numeric_limits<double>::max());
    std::vector<double> hu_sum(k, 0.0);
    std::vector<size_t> hu_n(k, 0);
    for (size_t i = 0; i < n; ++i) {
        hu_sum[assign[i]] += map.points[i].features[kMean];
        ++hu_n[assign[i]];
    }
    for (int c = 0; c < k; ++c)
        if (hu_n[c] > 0) mean_hu[c] = hu_sum[c] / static_cast<double>(hu_n[c]);

    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return mean_hu[a] < mean_hu[b]; });
    std::vector<int> rank(k);
    for (int i = 0; i < k; ++i) rank[order[i]] = i;

    ClusterResult result;
    result.model = std::move(model);
    result.model.centers.resize(k);
    for (int i = 0; i < k; ++i) result.model.centers[i] = centers[order[i]];
    result.labels.resize(n);
    for (size_t i = 0; i < n; ++i) result.labels[i] = rank[assign[i]] + 1;
    return result;
}

std::vector<double> volume_ratios(const std::vector<int>& labels, int k) {
    if (labels.empty()) throw ValidationError("volume_ratios: empty label list");
    std::vector<double> counts(k, 0.0);
    for (int l : labels) {
        if (l < 1 || l > k)
            throw ValidationError("volume_ratios: label " + std::to_string(l) +
                                  " outside 1.." + std::to_string(k));
        counts[l - 1] += 1.0;
    }
    const double total = static_cast<double>(labels.size());
    for (double& c : counts) c /= total;
    return counts;
}

void write_labels_csv(const FeatureMap& map, const std::vector<int>& labels,
                      const std::string& path) {
    if (labels.size() != map.points.size())
        throw ValidationError("write_labels_csv: label count does not match map");
    std::ostringstream out;
    out << "x,y,z,label\n";
    for (size_t i = 0; i < labels.size(); ++i) {
        const auto& p = map.points[i].voxel;
        out << p[0] << "," << p[1] << "," << p[2] << "," << labels[i] << "\n";
    }
    atomic_write_file(path, out.str());
}

}  // namespace qct
