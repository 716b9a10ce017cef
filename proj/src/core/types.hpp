#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qct {

constexpr int16_t kHuMin = -1024;
constexpr int16_t kHuMax = 3071;

using Index3 = std::array<int, 3>;

// 3D scalar grid of CT attenuation with physical spacing.
// Voxels are stored x fastest-varying, then y, then z.
struct Volume {
    Index3 dims{0, 0, 0};
    std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
    std::array<double, 3> origin_mm{0.0, 0.0, 0.0};
    std::vector<int16_t> voxels;

    size_t voxel_count() const {
        return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) *
               static_cast<size_t>(dims[2]);
    }

    size_t flatten(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(dims[0]) *
                   (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * static_cast<size_t>(z));
    }

    Index3 unflatten(size_t i) const {
        const int x = static_cast<int>(i % static_cast<size_t>(dims[0]));
        i /= static_cast<size_t>(dims[0]);
        const int y = static_cast<int>(i % static_cast<size_t>(dims[1]));
        const int z = static_cast<int>(i / static_cast<size_t>(dims[1]));
        return {x, y, z};
    }

    int16_t at(int x, int y, int z) const { return voxels[flatten(x, y, z)]; }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }

    void validate() const {
        if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
            throw ValidationError("volume dims must all be >= 1");
        for (double s : spacing_mm)
            if (!(s > 0.0)) throw ValidationError("volume spacing components must be > 0");
        if (voxels.size() != voxel_count())
            throw ValidationError("voxel count does not match dims");
    }
};

// Binary parenchyma mask paired with a Volume of identical dims.
struct LungMask {
    Index3 dims{0, 0, 0};
    std::vector<uint8_t> bits;

    size_t voxel_count() const {
        return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) *
               static_cast<size_t>(dims[2]);
    }

    size_t flatten(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(dims[0]) *
                   (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * static_cast<size_t>(z));
    }

    bool get(int x, int y, int z) const { return bits[flatten(x, y, z)] != 0; }
    void set(int x, int y, int z, bool v) { bits[flatten(x, y, z)] = v ? 1 : 0; }

    size_t set_count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += (b != 0);
        return n;
    }

    void validate_against(const Volume& v) const {
        if (dims != v.dims) throw ValidationError("mask dims do not match volume dims");
        if (bits.size() != voxel_count()) throw ValidationError("mask bit count does not match dims");
    }
};

enum class Gender { Female = 0, Male = 1 };

// One cohort row: demographics, expert label, outcome, file pointers.
struct CohortRecord {
    std::string patient_id;
    double age = 0.0;
    Gender gender = Gender::Female;
    int severity = 1;  // 1 mild, 2 moderate, 3 severe
    bool uip = false;  // expert label, UIP=true
    double time_days = 0.0;
    bool event = false;  // death / transplant / ICU composite
    std::string volume_path;         // may be empty
    std::string mask_override_path;  // may be empty
};

}  // namespace qct
