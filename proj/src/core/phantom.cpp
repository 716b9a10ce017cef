#include "phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "errors.hpp"
#include "rng.hpp"
#include "volume_io.hpp"

namespace fs = std::filesystem;

namespace qct {

const char* texture_class_name(TextureClass c) {
    switch (c) {
        case TextureClass::Normal: return "normal";
        case TextureClass::GroundGlass: return "ground-glass";
        case TextureClass::Reticular: return "reticular";
        case TextureClass::Honeycomb: return "honeycombing";
        case TextureClass::Hyperlucent: return "hyperlucent";
    }
    return "unknown";
}

void PhantomSpec::validate() const {
    if (dims[0] < 8 || dims[1] < 8 || dims[2] < 8)
        throw ValidationError("phantom: dims must be at least 8 per axis");
    for (double s : spacing_mm)
        if (!(s > 0.0)) throw ValidationError("phantom: spacing must be > 0");
    if (regions.empty()) throw ValidationError("phantom: at least one region required");
    double total = 0.0;
    for (const auto& r : regions) {
        if (!(r.fraction >= 0.0)) throw ValidationError("phantom: region fraction must be >= 0");
        total += r.fraction;
    }
    if (!(total > 0.0)) throw ValidationError("phantom: region fractions sum to zero");
    if (patch_fraction < 0.0 || patch_fraction >= 1.0)
        throw ValidationError("phantom: patch_fraction must be in [0, 1)");
    if (reticular_period_mm < 2.0 * *std::min_element(spacing_mm.begin(), spacing_mm.end()) ||
        honeycomb_period_mm < 2.0 * *std::min_element(spacing_mm.begin(), spacing_mm.end()))
        throw ValidationError("phantom: structure periods must span at least 2 voxels");
}

namespace {

// deterministic standard normal per (seed, voxel); independent of traversal
double voxel_normal(uint64_t seed, uint64_t index) {
    uint64_t s = hash_mix(seed, index);
    const uint64_t u1 = splitmix64(s);
    const uint64_t u2 = splitmix64(s);
    double a = static_cast<double>(u1 >> 11) * 0x1.0p-53;
    const double b = static_cast<double>(u2 >> 11) * 0x1.0p-53;
    if (a < 1e-300) a = 1e-300;
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * 3.14159265358979323846 * b);
}

struct Ellipsoid {
    double cx, cy, cz;  // voxel coordinates
    double rx, ry, rz;

    bool contains(double x, double y, double z) const {
        const double u = (x - cx) / rx, v = (y - cy) / ry, w = (z - cz) / rz;
        return u * u + v * v + w * w <= 1.0;
    }
};

int period_voxels(double period_mm, double spacing) {
    return std::max(2, static_cast<int>(std::lround(period_mm / spacing)));
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];

    const Ellipsoid body{nx * 0.5, ny * 0.5, nz * 0.5, nx * 0.46, ny * 0.46, nz * 0.48};
    const Ellipsoid lung_l{nx * 0.30, ny * 0.5, nz * 0.5, nx * 0.155, ny * 0.30, nz * 0.40};
    const Ellipsoid lung_r{nx * 0.70, ny * 0.5, nz * 0.5, nx * 0.155, ny * 0.30, nz * 0.40};

    Phantom out;
    out.volume.dims = spec.dims;
    out.volume.spacing_mm = spec.spacing_mm;
    out.volume.origin_mm = {0.0, 0.0, 0.0};
    out.volume.voxels.resize(out.volume.voxel_count());
    out.mask.dims = spec.dims;
    out.mask.bits.assign(out.volume.voxel_count(), 0);
    out.labels.assign(out.volume.voxel_count(), 0);

    // z-slab class lookup, normalized over the lung's z extent; an optional
    // unmasked gap straddles each internal boundary
    double frac_total = 0.0;
    for (const auto& r : spec.regions) frac_total += r.fraction;
    const double z_lo = lung_l.cz - lung_l.rz;
    const double z_hi = lung_l.cz + lung_l.rz;
    const double gap_u =
        spec.region_gap_mm > 0.0 ? spec.region_gap_mm / spec.spacing_mm[2] / (z_hi - z_lo) : 0.0;

    // fixed-grid layout: whole slabs per region by quota, one gap per slab
    std::vector<int> slab_of_class;
    double slab_pitch_vox = 0.0, slab_data_vox = 0.0;
    if (spec.slab_mm > 0.0) {
        slab_data_vox = spec.slab_mm / spec.spacing_mm[2];
        slab_pitch_vox = slab_data_vox + spec.region_gap_mm / spec.spacing_mm[2];
        const int n_slabs =
            std::max<int>(1, static_cast<int>((z_hi - z_lo) / slab_pitch_vox));
        std::vector<int> quota(spec.regions.size(), 0);
        int assigned = 0;
        for (size_t r = 0; r < spec.regions.size(); ++r) {
            quota[r] = static_cast<int>(std::lround(spec.regions[r].fraction / frac_total * n_slabs));
            assigned += quota[r];
        }
        // settle rounding on the largest region
        size_t biggest = 0;
        for (size_t r = 1; r < spec.regions.size(); ++r)
            if (spec.regions[r].fraction > spec.regions[biggest].fraction) biggest = r;
        quota[biggest] += n_slabs - assigned;
        for (size_t r = 0; r < spec.regions.size(); ++r)
            for (int q = 0; q < quota[r]; ++q) slab_of_class.push_back(static_cast<int>(r));
        while (static_cast<int>(slab_of_class.size()) < n_slabs)
            slab_of_class.push_back(static_cast<int>(spec.regions.size()) - 1);
    }

    const auto slab_class = [&](double z, bool* in_gap) {
        *in_gap = false;
        if (spec.slab_mm > 0.0) {
            const double offset = z - z_lo;
            int slab = static_cast<int>(offset / slab_pitch_vox);
            if (slab < 0) slab = 0;
            if (slab >= static_cast<int>(slab_of_class.size()))
                slab = static_cast<int>(slab_of_class.size()) - 1;
            const double within = offset - slab * slab_pitch_vox;
            if (within > slab_data_vox) *in_gap = true;
            return spec.regions[slab_of_class[slab]].cls;
        }
        const double u = std::clamp((z - z_lo) / (z_hi - z_lo), 0.0, 1.0);
        double cum = 0.0;
        for (size_t r = 0; r < spec.regions.size(); ++r) {
            cum += spec.regions[r].fraction / frac_total;
            if (u <= cum + 1e-12) {
                if (r + 1 < spec.regions.size() && std::abs(u - cum) < 0.5 * gap_u)
                    *in_gap = true;
                if (r > 0) {
                    const double prev = cum - spec.regions[r].fraction / frac_total;
                    if (std::abs(u - prev) < 0.5 * gap_u) *in_gap = true;
                }
                return spec.regions[r].cls;
            }
        }
        return spec.regions.back().cls;
    };

    // scattered spherical patches of the patch class, grown until the
    // requested fraction of lung voxels is covered
    std::vector<uint8_t> in_patch(out.volume.voxel_count(), 0);
    if (spec.patch_fraction > 0.0) {
        size_t lung_total = 0;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x)
                    if (lung_l.contains(x + 0.5, y + 0.5, z + 0.5) ||
                        lung_r.contains(x + 0.5, y + 0.5, z + 0.5))
                        ++lung_total;

        Rng rng(hash_mix(spec.seed, 0x9a7c4e5));
        const double rx = spec.patch_radius_mm / spec.spacing_mm[0];
        const double ry = spec.patch_radius_mm / spec.spacing_mm[1];
        const double rz = spec.patch_radius_mm / spec.spacing_mm[2];
        size_t covered = 0;
        const size_t target = static_cast<size_t>(spec.patch_fraction * lung_total);
        for (int attempt = 0; attempt < 4000 && covered < target; ++attempt) {
            const double px = rng.uniform(0.0, nx);
            const double py = rng.uniform(0.0, ny);
            const double pz = rng.uniform(0.0, nz);
            if (!lung_l.contains(px, py, pz) && !lung_r.contains(px, py, pz)) continue;
            const int x0 = std::max(0, static_cast<int>(px - rx) - 1);
            const int x1 = std::min(nx - 1, static_cast<int>(px + rx) + 1);
            const int y0 = std::max(0, static_cast<int>(py - ry) - 1);
            const int y1 = std::min(ny - 1, static_cast<int>(py + ry) + 1);
            const int z0 = std::max(0, static_cast<int>(pz - rz) - 1);
            const int z1 = std::min(nz - 1, static_cast<int>(pz + rz) + 1);
            for (int z = z0; z <= z1; ++z)
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        const double du = (x + 0.5 - px) / rx;
                        const double dv = (y + 0.5 - py) / ry;
                        const double dw = (z + 0.5 - pz) / rz;
                        if (du * du + dv * dv + dw * dw > 1.0) continue;
                        const size_t idx = out.volume.flatten(x, y, z);
                        if (in_patch[idx]) continue;
                        if (!lung_l.contains(x + 0.5, y + 0.5, z + 0.5) &&
                            !lung_r.contains(x + 0.5, y + 0.5, z + 0.5))
                            continue;
                        in_patch[idx] = 1;
                        ++covered;
                    }
        }
    }

    const int ret_p = period_voxels(spec.reticular_period_mm, spec.spacing_mm[0]);
    const int hc_p = period_voxels(spec.honeycomb_period_mm, spec.spacing_mm[0]);

    const auto texture_hu = [&](TextureClass cls, int x, int y, int z, double noise) -> double {
        switch (cls) {
            case TextureClass::Normal:
                return -850.0 + 30.0 * noise * spec.noise_scale;
            case TextureClass::GroundGlass:
                return -650.0 + 30.0 * noise * spec.noise_scale;
            case TextureClass::Reticular: {
                // wireframe of high-attenuation lines over a normal base
                const int on = (x % ret_p == 0) + (y % ret_p == 0) + (z % ret_p == 0);
                if (on >= 2) return -100.0 + 20.0 * noise * spec.noise_scale;
                return -850.0 + 30.0 * noise * spec.noise_scale;
            }
            case TextureClass::Honeycomb: {
                // air pockets sealed by soft-tissue walls; wall thickness
                // scales with the period so the wall volume fraction (and
                // with it the marginal histogram) is scale-invariant
                const int t = std::max(1, hc_p / 4);
                const bool wall = (x % hc_p) < t || (y % hc_p) < t || (z % hc_p) < t;
                if (wall) return -150.0 + 30.0 * noise * spec.noise_scale;
                return -950.0 + 20.0 * noise * spec.noise_scale;
            }
            case TextureClass::Hyperlucent:
                return -980.0 + 6.0 * noise * spec.noise_scale;
        }
        return -850.0;
    };

    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const size_t idx = out.volume.flatten(x, y, z);
                const double cx = x + 0.5, cy = y + 0.5, cz = z + 0.5;
                const double noise = voxel_normal(spec.seed, idx);

                double hu;
                if (lung_l.contains(cx, cy, cz) || lung_r.contains(cx, cy, cz)) {
                    bool in_gap = false;
                    const TextureClass cls =
                        in_patch[idx] ? spec.patch_class : slab_class(cz, &in_gap);
                    hu = texture_hu(cls, x, y, z, noise) + spec.hu_offset;
                    if (in_gap && !in_patch[idx]) {
                        // separator stays lung-like in HU but outside the mask
                        hu = texture_hu(TextureClass::Normal, x, y, z, noise) + spec.hu_offset;
                        out.mask.bits[idx] = 0;
                        out.labels[idx] = 0;
                    } else {
                        out.mask.bits[idx] = 1;
                        out.labels[idx] = static_cast<uint8_t>(cls);
                    }
                } else if (body.contains(cx, cy, cz)) {
                    hu = 30.0 + 12.0 * noise;
                } else {
                    hu = -1000.0 + 4.0 * noise;
                }
                out.volume.voxels[idx] = static_cast<int16_t>(
                    std::lround(std::clamp(hu, static_cast<double>(kHuMin),
                                           static_cast<double>(kHuMax))));
            }
        }
    }
    return out;
}

void SyntheticCohortSpec::validate() const {
    if (n_uip < 2 || n_nonuip < 2)
        throw ValidationError("cohort: need at least 2 patients per class");
    if (!(hazard_ratio > 0.0)) throw ValidationError("cohort: hazard_ratio must be > 0");
    if (censor_rate < 0.0 || censor_rate >= 1.0)
        throw ValidationError("cohort: censor_rate must be in [0, 1)");
}

std::vector<SyntheticPatient> plan_cohort(const SyntheticCohortSpec& spec) {
    spec.validate();
    Rng rng(hash_mix(spec.seed, 0xc0407));

    std::vector<SyntheticPatient> patients;
    const int total = spec.n_uip + spec.n_nonuip;
    for (int i = 0; i < total; ++i) {
        const bool uip = i < spec.n_uip;
        SyntheticPatient p;
        p.record.patient_id = (uip ? "UIP" : "NON") + std::to_string(uip ? i + 1 : i - spec.n_uip + 1);
        p.record.uip = uip;
        p.record.age = std::clamp(rng.normal(60.0, 10.0), 30.0, 90.0);
        p.record.gender = rng.next_double() < 0.5 ? Gender::Female : Gender::Male;

        p.phantom.dims = spec.dims;
        p.phantom.spacing_mm = spec.spacing_mm;
        p.phantom.seed = hash_mix(spec.seed, 0xf00d + static_cast<uint64_t>(i));
        p.phantom.hu_offset = rng.uniform(-spec.offset_jitter_hu, spec.offset_jitter_hu);
        p.phantom.noise_scale = rng.uniform(0.7, 1.4);

        switch (spec.mode) {
            case CohortMode::Composition: {
                // the UIP-like class carries more fibrosis AND a finer
                // honeycombing scale; the marginal histogram of honeycomb is
                // scale-invariant by construction, so most of the class
                // signal lives in the spatial texture, not the histogram.
                // ground-glass, hyperlucency and scanner jitters are
                // nuisances; every patient keeps some of each texture so the
                // canonical cluster slots align across the cohort
                const double f = uip ? rng.uniform(0.30, 0.42) : rng.uniform(0.23, 0.35);
                const double gg = rng.uniform(0.15, 0.30);
                const double hyper = rng.uniform(0.05, 0.10);
                p.burden = f;
                p.phantom.regions = {
                    {TextureClass::Hyperlucent, hyper},
                    {TextureClass::Normal, std::max(0.0, 1.0 - f - gg - hyper)},
                    {TextureClass::GroundGlass, gg},
                    {TextureClass::Reticular, f * 0.3},
                    {TextureClass::Honeycomb, f * 0.7},
                };
                p.phantom.slab_mm = 8.0;
                p.phantom.region_gap_mm = 4.0;
                p.phantom.reticular_period_mm = 4.0;
                p.phantom.honeycomb_period_mm = uip ? 8.0 : 16.0;
                break;
            }
            case CohortMode::FineTexture: {
                // fine-scale patches; invisible to coarse windows under the
                // per-patient attenuation jitter
                const double f = uip ? rng.uniform(0.30, 0.45) : rng.uniform(0.05, 0.18);
                p.burden = f;
                p.phantom.regions = {{TextureClass::Normal, 1.0}};
                p.phantom.patch_fraction = f;
                p.phantom.patch_radius_mm = 4.0;
                p.phantom.patch_class = TextureClass::Honeycomb;
                p.phantom.honeycomb_period_mm = 4.0;
                break;
            }
            case CohortMode::Null: {
                const double f = rng.uniform(0.15, 0.35);
                p.burden = 0.0;  // no contrast, no hazard link
                p.phantom.regions = {
                    {TextureClass::Normal, 1.0 - f},
                    {TextureClass::GroundGlass, f},
                };
                break;
            }
        }

        // exponential event time, hazard scaled by the planted burden
        const double log_hr = std::log(spec.hazard_ratio);
        const double rate = 1e-3 * std::exp(log_hr * (p.burden / 0.25));
        const double t_event = rng.exponential(rate);
        if (rng.next_double() < spec.censor_rate) {
            p.record.event = false;
            p.record.time_days = t_event * rng.next_double();
        } else {
            p.record.event = true;
            p.record.time_days = t_event;
        }
        p.record.time_days = std::round(p.record.time_days * 10.0) / 10.0;

        patients.push_back(std::move(p));
    }

    // severity follows the within-cohort burden terciles; with no burden
    // signal it is an uninformative draw
    const bool flat_burden =
        std::all_of(patients.begin(), patients.end(),
                    [&](const SyntheticPatient& p) { return p.burden == patients[0].burden; });
    if (flat_burden) {
        Rng sev_rng(hash_mix(spec.seed, 0x5e7e));
        for (auto& p : patients)
            p.record.severity = 1 + static_cast<int>(sev_rng.next_below(3));
    } else {
        std::vector<size_t> order(patients.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return patients[a].burden < patients[b].burden;
        });
        for (size_t rank = 0; rank < order.size(); ++rank)
            patients[order[rank]].record.severity =
                1 + static_cast<int>(rank * 3 / order.size());
    }
    return patients;
}

std::vector<SyntheticPatient> generate_cohort(const SyntheticCohortSpec& spec,
                                              const std::string& out_dir) {
    auto patients = plan_cohort(spec);
    fs::create_directories(out_dir);

    std::vector<CohortRecord> records;
    for (auto& p : patients) {
        const Phantom ph = generate_phantom(p.phantom);
        const std::string base = (fs::path(out_dir) / p.record.patient_id).string();
        write_volume(ph.volume, base + "_vol.json");
        write_mask(ph.mask, base + "_mask.json");
        write_labels(ph.labels, ph.volume.dims, ph.volume.spacing_mm, base + "_classes.json");
        p.record.volume_path = p.record.patient_id + "_vol.json";
        p.record.mask_override_path = p.record.patient_id + "_mask.json";
        records.push_back(p.record);
    }
    write_cohort(records, (fs::path(out_dir) / "cohort.csv").string());
    return patients;
}

}  // namespace qct
