#include "segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"

namespace qct {

void SegmentationConfig::validate() const {
    if (k_intensity < 2) throw ValidationError("segmentation: k_intensity must be >= 2");
    if (!(tol_hu > 0.0)) throw ValidationError("segmentation: tol_hu must be > 0");
    if (min_component_voxels < 1)
        throw ValidationError("segmentation: min_component_voxels must be >= 1");
    if (max_iters < 1) throw ValidationError("segmentation: max_iters must be >= 1");
}

namespace {

constexpr int kBins = kHuMax - kHuMin + 1;

std::vector<int64_t> hu_histogram(const Volume& v) {
    std::vector<int64_t> counts(kBins, 0);
    for (int16_t hu : v.voxels) {
        const int b = std::clamp<int>(hu, kHuMin, kHuMax) - kHuMin;
        ++counts[b];
    }
    return counts;
}

// k-means++ on the weighted histogram; all randomness from the seed.
std::vector<double> seed_centers(const std::vector<int64_t>& counts, int k, uint64_t seed) {
    std::vector<int> occupied;
    int64_t total = 0;
    for (int b = 0; b < kBins; ++b)
        if (counts[b] > 0) {
            occupied.push_back(b);
            total += counts[b];
        }

    Rng rng(seed);
    std::vector<double> centers;

    // first center: weighted draw over the histogram
    {
        double target = rng.next_double() * static_cast<double>(total);
        for (int b : occupied) {
            target -= static_cast<double>(counts[b]);
            if (target <= 0.0) {
                centers.push_back(static_cast<double>(kHuMin + b));
                break;
            }
        }
        if (centers.empty()) centers.push_back(static_cast<double>(kHuMin + occupied.back()));
    }

    while (static_cast<int>(centers.size()) < k) {
        double weight_sum = 0.0;
        std::vector<double> weights(occupied.size());
        for (size_t i = 0; i < occupied.size(); ++i) {
            const double v = kHuMin + occupied[i];
            double d2 = std::numeric_limits<double>::max();
            for (double c : centers) d2 = std::min(d2, (v - c) * (v - c));
            weights[i] = d2 * static_cast<double>(counts[occupied[i]]);
            weight_sum += weights[i];
        }
        double target = rng.next_double() * weight_sum;
        double picked = kHuMin + occupied.back();
        for (size_t i = 0; i < occupied.size(); ++i) {
            target -= weights[i];
            if (target <= 0.0) {
                picked = kHuMin + occupied[i];
                break;
            }
        }
        centers.push_back(picked);
    }
    return centers;
}

}  // namespace

IntensityClusters intensity_kmeans(const Volume& v, const SegmentationConfig& cfg) {
    cfg.validate();
    if (v.voxels.empty()) throw ValidationError("intensity_kmeans: empty volume");

    const auto counts = hu_histogram(v);
    int distinct = 0;
    for (int64_t c : counts) distinct += (c > 0);
    if (distinct < cfg.k_intensity)
        throw ComputeError("intensity_kmeans: fewer distinct intensities (" +
                           std::to_string(distinct) + ") than k (" +
                           std::to_string(cfg.k_intensity) + ")");

    const int k = cfg.k_intensity;
    std::vector<double> centers = seed_centers(counts, k, cfg.seed);

    std::vector<int> bin_label(kBins, 0);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        // assignment over bins (ties to the lower center index)
        for (int b = 0; b < kBins; ++b) {
            if (counts[b] == 0) continue;
            const double x = kHuMin + b;
            int best = 0;
            double best_d = std::abs(x - centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = std::abs(x - centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            bin_label[b] = best;
        }

        // weighted means
        std::vector<double> sum(k, 0.0);
        std::vector<int64_t> n(k, 0);
        for (int b = 0; b < kBins; ++b) {
            if (counts[b] == 0) continue;
            sum[bin_label[b]] += static_cast<double>(counts[b]) * (kHuMin + b);
            n[bin_label[b]] += counts[b];
        }

        double max_shift = 0.0;
        for (int c = 0; c < k; ++c) {
            double updated = centers[c];
            if (n[c] > 0) {
                updated = sum[c] / static_cast<double>(n[c]);
            } else {
                // re-seed an empty cluster at the farthest occupied bin
                double far_d = -1.0;
                for (int b = 0; b < kBins; ++b) {
                    if (counts[b] == 0) continue;
                    const double x = kHuMin + b;
                    double d2 = std::numeric_limits<double>::max();
                    for (double cc : centers) d2 = std::min(d2, (x - cc) * (x - cc));
                    if (d2 > far_d) {
                        far_d = d2;
                        updated = x;
                    }
                }
            }
            max_shift = std::max(max_shift, std::abs(updated - centers[c]));
            centers[c] = updated;
        }
        if (max_shift < cfg.tol_hu) break;
    }

    // ascending centers; remap bin labels to the sorted order
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return centers[a] < centers[b]; });
    std::vector<double> sorted(k);
    for (int i = 0; i < k; ++i) sorted[i] = centers[order[i]];

    // final assignment against sorted centers, as a per-bin lookup
    std::vector<uint8_t> lut(kBins);
    for (int b = 0; b < kBins; ++b) {
        const double x = kHuMin + b;
        int best = 0;
        double best_d = std::abs(x - sorted[0]);
        for (int c = 1; c < k; ++c) {
            const double d = std::abs(x - sorted[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        lut[b] = static_cast<uint8_t>(best);
    }

    IntensityClusters out;
    out.centers = std::move(sorted);
    out.labels.resize(v.voxels.size());
    for (size_t i = 0; i < v.voxels.size(); ++i) {
        const int b = std::clamp<int>(v.voxels[i], kHuMin, kHuMax) - kHuMin;
        out.labels[i] = lut[b];
    }
    return out;
}

std::vector<int32_t> connected_components(const LungMask& mask, int* num_components) {
    const int nx = mask.dims[0], ny = mask.dims[1], nz = mask.dims[2];
    std::vector<int32_t> labels(mask.bits.size(), 0);
    int next_label = 0;
    std::vector<size_t> stack;

    for (size_t start = 0; start < mask.bits.size(); ++start) {
        if (!mask.bits[start] || labels[start] != 0) continue;
        ++next_label;
        labels[start] = next_label;
        stack.push_back(start);
        while (!stack.empty()) {
            const size_t idx = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(idx % nx);
            const int y = static_cast<int>((idx / nx) % ny);
            const int z = static_cast<int>(idx / (static_cast<size_t>(nx) * ny));

            const auto visit = [&](int xx, int yy, int zz) {
                if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz) return;
                const size_t j = mask.flatten(xx, yy, zz);
                if (mask.bits[j] && labels[j] == 0) {
                    labels[j] = next_label;
                    stack.push_back(j);
                }
            };
            visit(x - 1, y, z);
            visit(x + 1, y, z);
            visit(x, y - 1, z);
            visit(x, y + 1, z);
            visit(x, y, z - 1);
            visit(x, y, z + 1);
        }
    }
    if (num_components) *num_components = next_label;
    return labels;
}

LungMask segment_lung(const Volume& v, const SegmentationConfig& cfg) {
    const IntensityClusters clusters = intensity_kmeans(v, cfg);
    const int k = cfg.k_intensity;

    // an air-like mode must exist for the threshold construction to mean anything
    if (clusters.centers.front() >= -500.0)
        throw ComputeError("segment_lung: no air-like attenuation mode (lowest center " +
                           std::to_string(clusters.centers.front()) + " HU)");

    // root between the lung and soft-tissue centers
    const double threshold = 0.5 * (clusters.centers[k - 2] + clusters.centers[k - 1]);

    LungMask candidate;
    candidate.dims = v.dims;
    candidate.bits.resize(v.voxels.size());
    for (size_t i = 0; i < v.voxels.size(); ++i)
        candidate.bits[i] = v.voxels[i] < threshold ? 1 : 0;

    int ncomp = 0;
    const auto labels = connected_components(candidate, &ncomp);
    if (ncomp == 0) throw ComputeError("segment_lung: nothing below the lung/soft-tissue root");

    std::vector<int64_t> size(ncomp + 1, 0);
    std::vector<uint8_t> touches_boundary(ncomp + 1, 0);
    const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
    for (size_t i = 0; i < labels.size(); ++i) {
        const int32_t c = labels[i];
        if (c == 0) continue;
        ++size[c];
        const int x = static_cast<int>(i % nx);
        const int y = static_cast<int>((i / nx) % ny);
        const int z = static_cast<int>(i / (static_cast<size_t>(nx) * ny));
        if (x == 0 || x == nx - 1 || y == 0 || y == ny - 1 || z == 0 || z == nz - 1)
            touches_boundary[c] = 1;
    }

    // exterior air touches the border; small islands are noise
    std::vector<int> kept;
    for (int c = 1; c <= ncomp; ++c)
        if (!touches_boundary[c] && size[c] >= cfg.min_component_voxels) kept.push_back(c);

    // the lungs are the largest one or two of what is left
    std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) { return size[a] > size[b]; });
    if (kept.size() > 2) kept.resize(2);
    if (kept.empty()) throw ComputeError("segment_lung: empty mask after cleanup");

    std::vector<uint8_t> keep_lut(ncomp + 1, 0);
    for (int c : kept) keep_lut[c] = 1;

    LungMask out;
    out.dims = v.dims;
    out.bits.resize(v.voxels.size());
    for (size_t i = 0; i < labels.size(); ++i) out.bits[i] = keep_lut[labels[i]];
    return out;
}

}  // namespace qct
