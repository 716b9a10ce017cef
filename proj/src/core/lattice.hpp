#pragma once

#include <string>
#include <vector>

#include "texture.hpp"
#include "types.hpp"

namespace qct {

struct LatticeConfig {
    double window_mm = 8.0;
    double lattice_step_mm = 0.0;   // <= 0 means window_mm / 2 (50% overlap)
    double min_lung_fraction = 0.5;
    TextureConfig texture;
    int workers = 1;                // 0 = hardware concurrency

    double effective_step_mm() const {
        return lattice_step_mm > 0.0 ? lattice_step_mm : window_mm / 2.0;
    }

    void validate() const;
};

struct LatticePoint {
    Index3 voxel;        // lattice point, voxel coordinates
    double occupancy;    // masked voxels / clipped-cube voxels
    FeatureVector features;
};

// Per-window texture vectors over the lattice, sorted by (z, y, x).
struct FeatureMap {
    double window_mm = 0.0;
    double min_lung_fraction = 0.0;
    std::vector<LatticePoint> points;
};

// Grid points at integer multiples of round(step_mm / spacing) per axis
// (minimum one voxel), kept iff the center voxel is masked; sorted.
std::vector<Index3> place_lattice(const LungMask& mask, const std::array<double, 3>& spacing_mm,
                                  double step_mm);

// Cube side per axis = max(2, round(window_mm / spacing_axis)), clipped at
// the volume border. Voxels outside the mask stay in the cube but invalid.
WindowSample extract_window(const Volume& v, const LungMask& mask, const Index3& center,
                            double window_mm);

FeatureMap compute_feature_map(const Volume& v, const LungMask& mask, const LatticeConfig& cfg);

void write_feature_map_csv(const FeatureMap& map, const std::string& path);
FeatureMap read_feature_map_csv(const std::string& path);

// "8" for 8.0, "7.5" for 7.5; used in artifact filenames and CSV cells
std::string format_mm(double mm);

}  // namespace qct
