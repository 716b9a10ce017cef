#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "classify.hpp"
#include "clustering.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "phantom.hpp"
#include "rng.hpp"
#include "volume_io.hpp"

using namespace qct;
namespace fs = std::filesystem;

TEST_CASE("a pure normal-texture lung averages -850 HU") {
    PhantomSpec spec;
    spec.seed = 5;
    const Phantom ph = generate_phantom(spec);

    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < ph.mask.bits.size(); ++i) {
        if (!ph.mask.bits[i]) continue;
        sum += ph.volume.voxels[i];
        ++n;
    }
    REQUIRE(n > 0);
    CHECK(std::abs(sum / static_cast<double>(n) + 850.0) < 10.0);
}

TEST_CASE("the same seed regenerates a byte-identical phantom") {
    PhantomSpec spec;
    spec.seed = 42;
    spec.regions = {{TextureClass::Normal, 0.5}, {TextureClass::Honeycomb, 0.5}};
    const Phantom a = generate_phantom(spec);
    const Phantom b = generate_phantom(spec);
    CHECK(a.volume.voxels == b.volume.voxels);
    CHECK(a.mask.bits == b.mask.bits);
    CHECK(a.labels == b.labels);

    PhantomSpec other = spec;
    other.seed = 43;
    const Phantom c = generate_phantom(other);
    CHECK(a.volume.voxels != c.volume.voxels);
}

TEST_CASE("labels align with the mask voxel for voxel") {
    PhantomSpec spec;
    spec.seed = 9;
    spec.regions = {{TextureClass::GroundGlass, 0.4}, {TextureClass::Reticular, 0.6}};
    const Phantom ph = generate_phantom(spec);
    REQUIRE(ph.labels.size() == ph.mask.bits.size());
    for (size_t i = 0; i < ph.labels.size(); ++i) {
        if (ph.mask.bits[i])
            CHECK(ph.labels[i] != 0);
        else
            CHECK(ph.labels[i] == 0);
    }
}

TEST_CASE("honeycomb regions carry more GLCM inertia than normal ones") {
    PhantomSpec spec;
    spec.seed = 21;
    spec.dims = {56, 56, 48};
    spec.regions = {{TextureClass::Normal, 0.5}, {TextureClass::Honeycomb, 0.5}};
    const Phantom ph = generate_phantom(spec);

    LatticeConfig lc;
    lc.window_mm = 8.0;
    const auto map = compute_feature_map(ph.volume, ph.mask, lc);

    std::vector<double> inertia_normal, inertia_honeycomb;
    for (const auto& p : map.points) {
        const auto label = ph.labels[ph.volume.flatten(p.voxel[0], p.voxel[1], p.voxel[2])];
        if (label == static_cast<uint8_t>(TextureClass::Normal))
            inertia_normal.push_back(p.features[kInertia]);
        else if (label == static_cast<uint8_t>(TextureClass::Honeycomb))
            inertia_honeycomb.push_back(p.features[kInertia]);
    }
    REQUIRE(inertia_normal.size() > 10);
    REQUIRE(inertia_honeycomb.size() > 10);

    const auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(inertia_honeycomb) > median(inertia_normal));
}

TEST_CASE("region fractions must be usable") {
    PhantomSpec spec;
    spec.regions = {};
    CHECK_THROWS_AS(generate_phantom(spec), ValidationError);
    spec.regions = {{TextureClass::Normal, 0.0}};
    CHECK_THROWS_AS(generate_phantom(spec), ValidationError);
    spec.regions = {{TextureClass::Normal, 1.0}};
    spec.reticular_period_mm = 0.5;  // under two voxels
    CHECK_THROWS_AS(generate_phantom(spec), ValidationError);
}

TEST_CASE("cohort spec validation") {
    SyntheticCohortSpec spec;
    spec.n_uip = 1;
    CHECK_THROWS_AS(plan_cohort(spec), ValidationError);
    spec.n_uip = 2;
    spec.censor_rate = 1.0;
    CHECK_THROWS_AS(plan_cohort(spec), ValidationError);
    spec.censor_rate = 0.3;
    spec.hazard_ratio = 0.0;
    CHECK_THROWS_AS(plan_cohort(spec), ValidationError);
}

TEST_CASE("recorded event rate tracks one minus the censor rate") {
    SyntheticCohortSpec spec;
    spec.n_uip = 50;
    spec.n_nonuip = 50;
    spec.censor_rate = 0.3;
    spec.seed = 17;
    const auto patients = plan_cohort(spec);
    REQUIRE(patients.size() == 100);
    int events = 0;
    for (const auto& p : patients) events += p.record.event ? 1 : 0;
    const double rate = events / 100.0;
    CHECK(std::abs(rate - 0.7) <= 0.10);
}

TEST_CASE("composition cohorts plant burden and texture scale by class") {
    SyntheticCohortSpec spec;
    spec.seed = 8;
    const auto comp = plan_cohort(spec);
    double uip_burden = 0, non_burden = 0;
    for (const auto& p : comp) {
        (p.record.uip ? uip_burden : non_burden) += p.burden;
        // UIP-like carries the finer honeycombing scale
        CHECK(p.phantom.honeycomb_period_mm == (p.record.uip ? 8.0 : 16.0));
        // and more fibrotic slab mass
        double fib = 0;
        for (const auto& r : p.phantom.regions)
            if (r.cls == TextureClass::Reticular || r.cls == TextureClass::Honeycomb)
                fib += r.fraction;
        CHECK(fib == doctest::Approx(p.burden));
    }
    CHECK(uip_burden / spec.n_uip > non_burden / spec.n_nonuip + 0.04);

    SyntheticCohortSpec null_spec;
    null_spec.mode = CohortMode::Null;
    null_spec.seed = 8;
    for (const auto& p : plan_cohort(null_spec)) CHECK(p.burden == 0.0);
}

TEST_CASE("planning is deterministic in the seed") {
    SyntheticCohortSpec spec;
    spec.seed = 31;
    const auto a = plan_cohort(spec);
    const auto b = plan_cohort(spec);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record.time_days == b[i].record.time_days);
        CHECK(a[i].burden == b[i].burden);
        CHECK(a[i].phantom.seed == b[i].phantom.seed);
        CHECK(a[i].phantom.hu_offset == b[i].phantom.hu_offset);
    }
}

TEST_CASE("generate_cohort writes volumes, masks, labels and the cohort CSV") {
    const fs::path dir = fs::temp_directory_path() / "qct_cohort_smoke";
    fs::remove_all(dir);

    SyntheticCohortSpec spec;
    spec.n_uip = 2;
    spec.n_nonuip = 2;
    spec.dims = {24, 24, 20};
    spec.seed = 3;
    generate_cohort(spec, dir.string());

    const auto records = read_cohort((dir / "cohort.csv").string());
    REQUIRE(records.size() == 4);
    for (const auto& r : records) {
        const Volume v = read_volume((dir / r.volume_path).string());
        CHECK(v.dims == Index3{24, 24, 20});
        const LungMask m = read_mask((dir / r.mask_override_path).string());
        CHECK(m.dims == v.dims);
        CHECK(m.set_count() > 0);
        Index3 label_dims;
        const auto labels =
            read_labels((dir / (r.patient_id + "_classes.json")).string(), &label_dims);
        CHECK(label_dims == v.dims);
        size_t in_lung = 0;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i]) {
                ++in_lung;
                CHECK(m.bits[i] == 1);
            }
        CHECK(in_lung == m.set_count());
    }
}

TEST_CASE("null cohorts keep the end-to-end classifier near chance over 20 seeds") {
    for (uint64_t seed = 12; seed <= 31; ++seed) {
        SyntheticCohortSpec spec;
        spec.mode = CohortMode::Null;
        spec.seed = seed;
        const auto patients = plan_cohort(spec);

        DesignMatrix x;
        for (int c = 1; c <= 5; ++c) x.column_names.push_back("r" + std::to_string(c));
        for (const auto& p : patients) {
            const Phantom ph = generate_phantom(p.phantom);
            LatticeConfig lc;
            lc.window_mm = 8.0;
            const auto map = compute_feature_map(ph.volume, ph.mask, lc);
            const auto res = fit_clusters(map, 5, seed);
            x.rows.push_back(volume_ratios(res.labels, 5));
            x.labels.push_back(p.record.uip ? 1 : 0);
        }
        CvConfig cfg;
        cfg.seed = seed;
        const auto r = cross_validated_auc(x, cfg);
        CHECK(r.pooled_auc >= 0.3);
        CHECK(r.pooled_auc <= 0.7);
    }
}
