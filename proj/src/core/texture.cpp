#include "texture.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace qct {

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "Mean",
        "Min",
        "Max",
        "5thPercentile",
        "5thMean",
        "95thPercentile",
        "95thMean",
        "Sum",
        "Sigma",
        "Entropy",
        "Kurtosis",
        "Skewness",
        "ClusterShade",
        "Correlation",
        "HaralickCorrelation",
        "Energy",
        "GLCMEntropy",
        "Inertia",
        "InverseDifferenceMoment",
        "GrayLevelNonuniformity",
        "HighGrayLevelRunEmphasis",
        "LongRunEmphasis",
        "LowGrayLevelRunEmphasis",
        "RunLengthNonuniformity",
        "RunPercentage",
        "ShortRunEmphasis",
    };
    return names;
}

const std::vector<Index3>& all_directions_3d() {
    // 26-neighborhood modulo sign: 3 axes, 6 face diagonals, 4 space diagonals
    static const std::vector<Index3> dirs = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
        {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1},
        {1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
    };
    return dirs;
}

std::vector<int> quantize(const std::vector<int16_t>& hu, int levels, int16_t lo, int16_t hi) {
    if (hu.empty()) throw ValidationError("quantize: empty window");
    if (levels < 2) throw ValidationError("quantize: levels must be >= 2");
    if (!(lo < hi)) throw ValidationError("quantize: range lo must be < hi");

    const double span = static_cast<double>(hi) - static_cast<double>(lo);
    std::vector<int> out(hu.size());
    for (size_t i = 0; i < hu.size(); ++i) {
        const double v = std::clamp<double>(hu[i], lo, hi);
        int level = static_cast<int>(std::floor(levels * (v - lo) / span));
        if (level >= levels) level = levels - 1;
        out[i] = level;
    }
    return out;
}

GrayLevelHistogram build_histogram(const WindowSample& w) {
    if (w.valid_count == 0) throw ValidationError("histogram: window has no valid voxels");

    // HU values are integers in [-1024, 3071]; count into a dense table.
    constexpr int span = kHuMax - kHuMin + 1;
    std::vector<uint32_t> counts(span, 0);
    for (size_t i = 0; i < w.hu.size(); ++i) {
        if (!w.valid[i]) continue;
        int v = w.hu[i];
        v = std::clamp<int>(v, kHuMin, kHuMax);
        ++counts[v - kHuMin];
    }

    GrayLevelHistogram h;
    h.total = w.valid_count;
    for (int b = 0; b < span; ++b) {
        if (counts[b] == 0) continue;
        h.bin_values.push_back(kHuMin + b);
        // divide rather than multiply by 1/total: a single occupied bin must
        // come out as exactly 1.0
        h.g.push_back(static_cast<double>(counts[b]) / static_cast<double>(h.total));
    }
    return h;
}

std::array<double, 12> histogram_features(const GrayLevelHistogram& h) {
    const size_t nb = h.bin_values.size();
    if (nb == 0 || h.total == 0) throw ValidationError("histogram_features: empty histogram");

    double mean = 0.0;
    for (size_t b = 0; b < nb; ++b) mean += h.bin_values[b] * h.g[b];

    const double vmin = h.bin_values.front();
    const double vmax = h.bin_values.back();

    // smallest bin with cumulative relative frequency >= p
    const auto percentile = [&](double p) {
        double cum = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            cum += h.g[b];
            if (cum >= p - 1e-12) return static_cast<double>(h.bin_values[b]);
        }
        return vmax;
    };
    const double p05 = percentile(0.05);
    const double p95 = percentile(0.95);

    // tail means over k <= p05 and k >= p95
    double lo_sum = 0.0, lo_mass = 0.0, hi_sum = 0.0, hi_mass = 0.0;
    for (size_t b = 0; b < nb; ++b) {
        const double k = h.bin_values[b];
        if (k <= p05) {
            lo_sum += k * h.g[b];
            lo_mass += h.g[b];
        }
        if (k >= p95) {
            hi_sum += k * h.g[b];
            hi_mass += h.g[b];
        }
    }
    const double mean05 = lo_mass > 0 ? lo_sum / lo_mass : p05;
    const double mean95 = hi_mass > 0 ? hi_sum / hi_mass : p95;

    const double sum = mean * static_cast<double>(h.total);

    double var = 0.0, entropy = 0.0, m3 = 0.0, m4 = 0.0;
    for (size_t b = 0; b < nb; ++b) {
        const double d = h.bin_values[b] - mean;
        var += d * d * h.g[b];
        m3 += d * d * d * h.g[b];
        m4 += d * d * d * d * h.g[b];
        entropy -= h.g[b] * std::log(h.g[b]);
    }
    const double sigma = std::sqrt(std::max(0.0, var));
    const double skew = sigma > 0 ? m3 / (sigma * sigma * sigma) : 0.0;
    const double kurt = sigma > 0 ? m4 / (sigma * sigma * sigma * sigma) : 0.0;

    return {mean, vmin, vmax, p05, mean05, p95, mean95, sum, sigma, entropy, kurt, skew};
}

CoOccurrenceMatrix build_glcm(const WindowSample& w, const std::vector<int>& levels, int num_levels,
                              int distance, const std::vector<Index3>& directions) {
    CoOccurrenceMatrix m;
    m.levels = num_levels;
    std::vector<uint32_t> counts(static_cast<size_t>(num_levels) * num_levels, 0);

    const int dx = w.dims[0], dy = w.dims[1], dz = w.dims[2];
    uint64_t total = 0;
    for (const auto& dir : directions) {
        const int ox = dir[0] * distance, oy = dir[1] * distance, oz = dir[2] * distance;
        for (int z = 0; z < dz; ++z) {
            const int z2 = z + oz;
            if (z2 < 0 || z2 >= dz) continue;
            for (int y = 0; y < dy; ++y) {
                const int y2 = y + oy;
                if (y2 < 0 || y2 >= dy) continue;
                for (int x = 0; x < dx; ++x) {
                    const int x2 = x + ox;
                    if (x2 < 0 || x2 >= dx) continue;
                    const size_t a = w.flatten(x, y, z);
                    const size_t b = w.flatten(x2, y2, z2);
                    if (!w.valid[a] || !w.valid[b]) continue;
                    // count the pair in both orders so f is symmetric
                    ++counts[static_cast<size_t>(levels[a]) * num_levels + levels[b]];
                    ++counts[static_cast<size_t>(levels[b]) * num_levels + levels[a]];
                    total += 2;
                }
            }
        }
    }
    if (total == 0) throw ComputeError("glcm: no valid voxel pairs in window");

    m.f.resize(counts.size());
    for (size_t i = 0; i < counts.size(); ++i)
        m.f[i] = static_cast<double>(counts[i]) / static_cast<double>(total);

    double mu_i = 0, mu_j = 0;
    for (int i = 0; i < num_levels; ++i)
        for (int j = 0; j < num_levels; ++j) {
            const double fij = m.at(i, j);
            mu_i += i * fij;
            mu_j += j * fij;
        }
    double var_i = 0, var_j = 0;
    for (int i = 0; i < num_levels; ++i)
        for (int j = 0; j < num_levels; ++j) {
            const double fij = m.at(i, j);
            var_i += (i - mu_i) * (i - mu_i) * fij;
            var_j += (j - mu_j) * (j - mu_j) * fij;
        }
    m.mu_i = mu_i;
    m.mu_j = mu_j;
    m.sigma_i = std::sqrt(std::max(0.0, var_i));
    m.sigma_j = std::sqrt(std::max(0.0, var_j));
    return m;
}

std::array<double, 7> glcm_features(const CoOccurrenceMatrix& m) {
    double shade = 0, corr_num = 0, prod_sum = 0, energy = 0, entropy = 0, inertia = 0, idm = 0;
    for (int i = 0; i < m.levels; ++i) {
        for (int j = 0; j < m.levels; ++j) {
            const double f = m.at(i, j);
            if (f == 0.0) continue;
            const double di = i - m.mu_i;
            const double dj = j - m.mu_j;
            const double s = di + dj;
            shade += s * s * s * f;
            corr_num += di * dj * f;
            prod_sum += static_cast<double>(i) * j * f;
            energy += f * f;
            entropy -= f * std::log(f);
            inertia += static_cast<double>(i - j) * (i - j) * f;
            idm += f / (1.0 + static_cast<double>(i - j) * (i - j));
        }
    }
    const double ss = m.sigma_i * m.sigma_j;
    const double correlation = ss > 0 ? corr_num / ss : 0.0;
    const double haralick = ss > 0 ? (prod_sum - m.mu_i * m.mu_j) / ss : 0.0;
    return {shade, correlation, haralick, energy, entropy, inertia, idm};
}

RunLengthMatrix build_rlm(const WindowSample& w, const std::vector<int>& levels, int num_levels,
                          const std::vector<Index3>& directions) {
    if (w.valid_count == 0) throw ValidationError("rlm: window has no valid voxels");

    const int dx = w.dims[0], dy = w.dims[1], dz = w.dims[2];
    const int max_run = std::max({dx, dy, dz});

    RunLengthMatrix m;
    m.num_levels = num_levels;
    m.max_run = max_run;
    m.r.assign(static_cast<size_t>(num_levels) * max_run, 0.0);

    for (const auto& dir : directions) {
        // line starts: voxels whose predecessor along dir lies outside the cube
        for (int z = 0; z < dz; ++z) {
            for (int y = 0; y < dy; ++y) {
                for (int x = 0; x < dx; ++x) {
                    const int px = x - dir[0], py = y - dir[1], pz = z - dir[2];
                    if (px >= 0 && px < dx && py >= 0 && py < dy && pz >= 0 && pz < dz) continue;

                    int cur_level = -1;
                    int run_len = 0;
                    int cx = x, cy = y, cz = z;
                    while (cx >= 0 && cx < dx && cy >= 0 && cy < dy && cz >= 0 && cz < dz) {
                        const size_t idx = w.flatten(cx, cy, cz);
                        if (!w.valid[idx]) {
                            if (run_len > 0) {
                                m.r[static_cast<size_t>(cur_level) * max_run + (run_len - 1)] += 1;
                                m.total_runs += 1;
                            }
                            cur_level = -1;
                            run_len = 0;
                        } else {
                            const int lv = levels[idx];
                            if (lv == cur_level) {
                                ++run_len;
                            } else {
                                if (run_len > 0) {
                                    m.r[static_cast<size_t>(cur_level) * max_run + (run_len - 1)] += 1;
                                    m.total_runs += 1;
                                }
                                cur_level = lv;
                                run_len = 1;
                            }
                            m.voxels_traversed += 1;
                        }
                        cx += dir[0];
                        cy += dir[1];
                        cz += dir[2];
                    }
                    if (run_len > 0) {
                        m.r[static_cast<size_t>(cur_level) * max_run + (run_len - 1)] += 1;
                        m.total_runs += 1;
                    }
                }
            }
        }
    }
    return m;
}

std::array<double, 7> rlm_features(const RunLengthMatrix& m) {
    if (m.total_runs < 1) throw ComputeError("rlm_features: no runs (n_r = 0)");

    // gray index shifted to 1..M so the 1/i^2 term is defined at level 0
    double gln = 0, hglre = 0, lre = 0, lglre = 0, rln = 0, sre = 0;
    std::vector<double> row_sum(m.num_levels, 0.0), col_sum(m.max_run, 0.0);
    for (int l = 1; l <= m.num_levels; ++l) {
        for (int j = 1; j <= m.max_run; ++j) {
            const double r = m.at(l, j);
            if (r == 0.0) continue;
            row_sum[l - 1] += r;
            col_sum[j - 1] += r;
            hglre += r * static_cast<double>(l) * l;
            lre += r * static_cast<double>(j) * j;
            lglre += r / (static_cast<double>(l) * l);
            sre += r / (static_cast<double>(j) * j);
        }
    }
    for (double s : row_sum) gln += s * s;
    for (double s : col_sum) rln += s * s;

    const double inv_nr = 1.0 / m.total_runs;
    const double run_pct = m.total_runs / m.voxels_traversed;
    return {gln * inv_nr, hglre * inv_nr, lre * inv_nr, lglre * inv_nr, rln * inv_nr,
            run_pct,      sre * inv_nr};
}

FeatureVector compute_feature_vector(const WindowSample& w, const TextureConfig& cfg) {
    if (w.valid_count == 0) throw ValidationError("feature vector: window has no valid voxels");

    FeatureVector out{};
    const auto hist = histogram_features(build_histogram(w));
    for (int i = 0; i < 12; ++i) out[i] = hist[i];

    const auto levels = quantize(w.hu, cfg.glcm_levels, cfg.glcm_lo, cfg.glcm_hi);
    const auto& dirs = cfg.effective_directions();

    const auto glcm =
        glcm_features(build_glcm(w, levels, cfg.glcm_levels, cfg.glcm_distance, dirs));
    for (int i = 0; i < 7; ++i) out[12 + i] = glcm[i];

    const auto rlm = rlm_features(build_rlm(w, levels, cfg.glcm_levels, dirs));
    for (int i = 0; i < 7; ++i) out[19 + i] = rlm[i];

    return out;
}

}  // namespace qct
