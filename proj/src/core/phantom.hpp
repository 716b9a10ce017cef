#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "types.hpp"

namespace qct {

// Tissue classes realized by the generators; values are the label codes
// written to the labels file (0 = outside the lung).
enum class TextureClass : uint8_t {
    Normal = 1,
    GroundGlass = 2,
    Reticular = 3,
    Honeycomb = 4,
    Hyperlucent = 5,
};

const char* texture_class_name(TextureClass c);

struct PhantomSpec {
    Index3 dims{64, 64, 48};
    std::array<double, 3> spacing_mm{2.0, 2.0, 2.0};
    uint64_t seed = 1;

    // z-slab layout inside the lungs; fractions are normalized over the sum
    struct Region {
        TextureClass cls = TextureClass::Normal;
        double fraction = 1.0;
    };
    std::vector<Region> regions{{TextureClass::Normal, 1.0}};

    // unmasked separator between slabs; windows then never blend two
    // region textures (ground-truth evaluation phantoms)
    double region_gap_mm = 0.0;

    // when > 0, the lung is cut into fixed slabs of this thickness with a
    // gap after every slab, and regions claim whole slabs by quota; the
    // masked voxel count then does not depend on the fractions
    double slab_mm = 0.0;

    // spherical patches of a second texture scattered through the lung,
    // instead of slabs, when patch_fraction > 0
    double patch_fraction = 0.0;
    double patch_radius_mm = 4.0;
    TextureClass patch_class = TextureClass::Honeycomb;

    // scanner-like nuisances
    double hu_offset = 0.0;
    double noise_scale = 1.0;

    // structure periods
    double reticular_period_mm = 6.0;
    double honeycomb_period_mm = 8.0;

    void validate() const;
};

struct Phantom {
    Volume volume;
    LungMask mask;                // ground truth
    std::vector<uint8_t> labels;  // per voxel class code, 0 outside lung
};

// Exterior air, a soft-tissue body ellipsoid, two lung ellipsoids filled
// with the requested textures. Byte-deterministic in the seed.
Phantom generate_phantom(const PhantomSpec& spec);

enum class CohortMode {
    Composition,  // classes differ in fibrotic volume fraction
    FineTexture,  // classes differ only at sub-6 mm scale
    Null,         // labels and outcomes carry no signal
};

struct SyntheticCohortSpec {
    int n_uip = 20;
    int n_nonuip = 20;
    Index3 dims{48, 48, 36};
    std::array<double, 3> spacing_mm{2.0, 2.0, 2.0};
    CohortMode mode = CohortMode::Composition;
    double hazard_ratio = 4.0;   // linking texture burden to event rate
    double censor_rate = 0.3;
    double offset_jitter_hu = 60.0;  // per-patient attenuation shift range
    uint64_t seed = 1;

    void validate() const;
};

struct SyntheticPatient {
    CohortRecord record;
    double burden = 0.0;  // planted fibrotic fraction
    PhantomSpec phantom;
};

// Plans the cohort (no volumes yet): per-patient phantom specs, planted
// burdens, outcomes, labels.
std::vector<SyntheticPatient> plan_cohort(const SyntheticCohortSpec& spec);

// Generates and writes volumes, ground-truth masks (wired in as
// mask_override_path), labels, and the cohort CSV into out_dir.
std::vector<SyntheticPatient> generate_cohort(const SyntheticCohortSpec& spec,
                                              const std::string& out_dir);

}  // namespace qct
