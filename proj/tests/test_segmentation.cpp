#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "oracles.hpp"
#include "phantom.hpp"
#include "rng.hpp"
#include "segmentation.hpp"

using namespace qct;

namespace {

Volume volume_of(const std::vector<int16_t>& voxels, const Index3& dims) {
    Volume v;
    v.dims = dims;
    v.voxels = voxels;
    return v;
}

}  // namespace

TEST_CASE("two separated intensity groups converge to their means") {
    std::vector<int16_t> voxels(200);
    for (int i = 0; i < 100; ++i) voxels[i] = -1000;
    for (int i = 100; i < 200; ++i) voxels[i] = 0;
    // a couple of off values so k=2 has more than two distinct intensities
    voxels[0] = -999;
    voxels[199] = 1;

    SegmentationConfig cfg;
    cfg.k_intensity = 2;
    const auto result = intensity_kmeans(volume_of(voxels, {200, 1, 1}), cfg);
    REQUIRE(result.centers.size() == 2);
    CHECK(result.centers[0] == doctest::Approx(-1000.0).epsilon(0.01));
    CHECK(result.centers[1] == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
    CHECK(result.centers[0] < result.centers[1]);
    for (int i = 2; i < 100; ++i) CHECK(result.labels[i] == 0);
    for (int i = 100; i < 198; ++i) CHECK(result.labels[i] == 1);
}

TEST_CASE("a constant volume cannot support k clusters") {
    SegmentationConfig cfg;
    cfg.k_intensity = 2;
    CHECK_THROWS_AS(intensity_kmeans(volume_of(std::vector<int16_t>(64, 50), {4, 4, 4}), cfg),
                    ComputeError);
}

TEST_CASE("three planted gaussian modes are recovered within 25 HU") {
    Rng rng(2024);
    std::vector<int16_t> voxels;
    const double modes[3] = {-950.0, -400.0, 40.0};
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 4000; ++i)
            voxels.push_back(static_cast<int16_t>(std::lround(
                std::clamp(rng.normal(modes[m], 40.0), -1024.0, 3071.0))));

    SegmentationConfig cfg;
    const auto result = intensity_kmeans(volume_of(voxels, {200, 60, 1}), cfg);
    REQUIRE(result.centers.size() == 3);
    for (int m = 0; m < 3; ++m)
        CHECK(std::abs(result.centers[m] - modes[m]) < 25.0);
}

TEST_CASE("kmeans is deterministic in the seed") {
    Rng rng(5);
    std::vector<int16_t> voxels(5000);
    for (auto& v : voxels) v = static_cast<int16_t>(-1000 + rng.next_below(1200));
    const auto vol = volume_of(voxels, {50, 10, 10});

    SegmentationConfig cfg;
    cfg.seed = 77;
    const auto a = intensity_kmeans(vol, cfg);
    const auto b = intensity_kmeans(vol, cfg);
    CHECK(a.centers == b.centers);
    CHECK(a.labels == b.labels);
}

TEST_CASE("phantom lungs segment with high Dice and zero exterior leakage") {
    PhantomSpec spec;
    spec.dims = {48, 48, 40};
    spec.seed = 3;
    const Phantom ph = generate_phantom(spec);

    SegmentationConfig cfg;
    cfg.seed = 3;
    const LungMask mask = segment_lung(ph.volume, cfg);

    CHECK(oracle::dice(mask.bits, ph.mask.bits) >= 0.95);

    // nothing outside the body: compare against exterior air
    size_t exterior_hits = 0;
    for (size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i] && ph.volume.voxels[i] <= -990 && !ph.mask.bits[i]) ++exterior_hits;
    CHECK(exterior_hits == 0);
}

TEST_CASE("an all-soft-tissue volume fails segmentation") {
    Rng rng(9);
    std::vector<int16_t> voxels(4096);
    for (auto& v : voxels) v = static_cast<int16_t>(rng.next_below(100));  // 0..99 HU
    SegmentationConfig cfg;
    CHECK_THROWS_AS(segment_lung(volume_of(voxels, {16, 16, 16}), cfg), ComputeError);
}

TEST_CASE("segmentation is deterministic") {
    PhantomSpec spec;
    spec.dims = {40, 40, 32};
    spec.seed = 10;
    const Phantom ph = generate_phantom(spec);
    SegmentationConfig cfg;
    cfg.seed = 10;
    const auto a = segment_lung(ph.volume, cfg);
    const auto b = segment_lung(ph.volume, cfg);
    CHECK(a.bits == b.bits);
}

TEST_CASE("no masked component touches the volume boundary") {
    PhantomSpec spec;
    spec.dims = {40, 40, 32};
    spec.seed = 11;
    const Phantom ph = generate_phantom(spec);
    SegmentationConfig cfg;
    const auto mask = segment_lung(ph.volume, cfg);

    const auto [nx, ny, nz] = ph.volume.dims;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                if (x == 0 || x == nx - 1 || y == 0 || y == ny - 1 || z == 0 || z == nz - 1)
                    CHECK(!mask.get(x, y, z));
}

TEST_CASE("cleanup only removes voxels from the thresholded set") {
    PhantomSpec spec;
    spec.dims = {40, 40, 32};
    spec.seed = 12;
    const Phantom ph = generate_phantom(spec);
    SegmentationConfig cfg;
    cfg.seed = 12;
    const auto mask = segment_lung(ph.volume, cfg);
    const auto clusters = intensity_kmeans(ph.volume, cfg);
    const double threshold = 0.5 * (clusters.centers[1] + clusters.centers[2]);
    for (size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) CHECK(ph.volume.voxels[i] < threshold);
}

TEST_CASE("connected components: 6-connectivity splits diagonal touches") {
    LungMask m;
    m.dims = {4, 4, 1};
    m.bits.assign(m.voxel_count(), 0);
    m.set(0, 0, 0, true);
    m.set(1, 1, 0, true);  // diagonal neighbor only
    int n = 0;
    const auto labels = connected_components(m, &n);
    CHECK(n == 2);
    CHECK(labels[m.flatten(0, 0, 0)] != labels[m.flatten(1, 1, 0)]);
}
