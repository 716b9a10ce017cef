#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"

using namespace qct;

namespace {

Volume filled_volume(const Index3& dims, int16_t value,
                     const std::array<double, 3>& spacing = {1, 1, 1}) {
    Volume v;
    v.dims = dims;
    v.spacing_mm = spacing;
    v.voxels.assign(v.voxel_count(), value);
    return v;
}

LungMask full_mask(const Index3& dims) {
    LungMask m;
    m.dims = dims;
    m.bits.assign(m.voxel_count(), 1);
    return m;
}

LungMask ellipsoid_mask(const Index3& dims) {
    LungMask m;
    m.dims = dims;
    m.bits.assign(m.voxel_count(), 0);
    const double cx = dims[0] / 2.0, cy = dims[1] / 2.0, cz = dims[2] / 2.0;
    const double rx = dims[0] * 0.35, ry = dims[1] * 0.3, rz = dims[2] * 0.4;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const double u = (x - cx) / rx, v = (y - cy) / ry, w = (z - cz) / rz;
                if (u * u + v * v + w * w <= 1.0) m.set(x, y, z, true);
            }
    return m;
}

Volume noise_volume(const Index3& dims, uint64_t seed,
                    const std::array<double, 3>& spacing = {1, 1, 1}) {
    Volume v = filled_volume(dims, 0, spacing);
    Rng rng(seed);
    for (auto& hu : v.voxels)
        hu = static_cast<int16_t>(-1000 + static_cast<int>(rng.next_below(1100)));
    return v;
}

}  // namespace

TEST_CASE("full-cube mask with a 5-voxel step lands on the grid corners") {
    const auto mask = full_mask({10, 10, 10});
    const auto points = place_lattice(mask, {1, 1, 1}, 5.0);
    REQUIRE(points.size() == 8);
    for (const auto& p : points)
        for (int a = 0; a < 3; ++a) CHECK((p[a] == 0 || p[a] == 5));
    // sorted by (z, y, x)
    CHECK(points.front() == Index3{0, 0, 0});
    CHECK(points.back() == Index3{5, 5, 5});
}

TEST_CASE("a single set voxel yields at most one point") {
    LungMask m;
    m.dims = {9, 9, 9};
    m.bits.assign(m.voxel_count(), 0);
    m.set(3, 6, 3, true);
    const auto points = place_lattice(m, {1, 1, 1}, 3.0);
    REQUIRE(points.size() == 1);
    CHECK(points[0] == Index3{3, 6, 3});
}

TEST_CASE("empty mask is rejected") {
    LungMask m;
    m.dims = {4, 4, 4};
    m.bits.assign(m.voxel_count(), 0);
    CHECK_THROWS_AS(place_lattice(m, {1, 1, 1}, 2.0), ValidationError);
}

TEST_CASE("lattice point count matches an independent triple-loop scan") {
    const Index3 dims{24, 20, 18};
    const auto mask = ellipsoid_mask(dims);
    const std::array<double, 3> spacing{1.5, 1.5, 2.0};
    const double step_mm = 4.0;
    const auto points = place_lattice(mask, spacing, step_mm);

    size_t expected = 0;
    const int sx = std::max(1, static_cast<int>(std::lround(step_mm / spacing[0])));
    const int sy = std::max(1, static_cast<int>(std::lround(step_mm / spacing[1])));
    const int sz = std::max(1, static_cast<int>(std::lround(step_mm / spacing[2])));
    for (int z = 0; z < dims[2]; z += sz)
        for (int y = 0; y < dims[1]; y += sy)
            for (int x = 0; x < dims[0]; x += sx)
                if (mask.get(x, y, z)) ++expected;
    CHECK(points.size() == expected);
}

TEST_CASE("grid refinement is a superset: halving the step keeps every point") {
    const auto mask = ellipsoid_mask({20, 20, 20});
    const auto coarse = place_lattice(mask, {1, 1, 1}, 8.0);
    const auto fine = place_lattice(mask, {1, 1, 1}, 4.0);
    for (const auto& p : coarse)
        CHECK(std::find(fine.begin(), fine.end(), p) != fine.end());
}

TEST_CASE("corner window clips to the volume") {
    const auto v = filled_volume({16, 16, 16}, -800);
    const auto mask = full_mask({16, 16, 16});
    const auto w = extract_window(v, mask, {0, 0, 0}, 4.0);
    CHECK(w.dims[0] <= 4);
    CHECK(w.dims[1] <= 4);
    CHECK(w.dims[2] <= 4);
    CHECK(w.dims[0] >= 2);
    CHECK(w.valid_count == w.size());  // fully masked
}

TEST_CASE("interior fully masked window has occupancy one") {
    const auto v = filled_volume({16, 16, 16}, -800);
    const auto mask = full_mask({16, 16, 16});
    const auto w = extract_window(v, mask, {8, 8, 8}, 8.0);
    CHECK(w.dims == Index3{8, 8, 8});
    CHECK(static_cast<double>(w.valid_count) / w.size() == 1.0);
}

TEST_CASE("half-masked window occupancy matches a direct count") {
    const Index3 dims{16, 16, 16};
    const auto v = filled_volume(dims, -800);
    LungMask mask;
    mask.dims = dims;
    mask.bits.assign(mask.voxel_count(), 0);
    for (int z = 0; z < 16; ++z)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 8; ++x) mask.set(x, y, z, true);  // left half only

    const Index3 center{7, 8, 8};
    const auto w = extract_window(v, mask, center, 6.0);

    // direct recount over the same cube: side 6, spanning [c-2, c+3]
    size_t masked = 0, total = 0;
    for (int z = center[2] - 2; z <= center[2] + 3; ++z)
        for (int y = center[1] - 2; y <= center[1] + 3; ++y)
            for (int x = center[0] - 2; x <= center[0] + 3; ++x) {
                ++total;
                if (mask.get(x, y, z)) ++masked;
            }
    CHECK(w.size() == total);
    CHECK(w.valid_count == masked);
}

TEST_CASE("anisotropic spacing produces a window that is near-isotropic in mm") {
    const auto v = filled_volume({32, 32, 32}, -800, {0.5, 1.0, 2.0});
    const auto mask = full_mask({32, 32, 32});
    const auto w = extract_window(v, mask, {16, 16, 16}, 8.0);
    CHECK(w.dims == Index3{16, 8, 4});
}

TEST_CASE("constant phantom map: every vector equals the constant-window vector") {
    const Index3 dims{20, 20, 20};
    const auto v = filled_volume(dims, -850);
    const auto mask = full_mask(dims);
    LatticeConfig cfg;
    cfg.window_mm = 6.0;
    cfg.lattice_step_mm = 3.0;
    const auto map = compute_feature_map(v, mask, cfg);
    REQUIRE(!map.points.empty());
    for (const auto& p : map.points) {
        CHECK(p.features[kMean] == -850.0);
        CHECK(p.features[kSigma] == 0.0);
        CHECK(p.features[kEnergy] == 1.0);
    }
}

TEST_CASE("feature map is bit-identical across worker counts") {
    const Index3 dims{32, 32, 32};
    const auto v = noise_volume(dims, 99);
    const auto mask = ellipsoid_mask(dims);

    std::vector<FeatureMap> maps;
    for (int workers : {1, 2, 8}) {
        LatticeConfig cfg;
        cfg.window_mm = 6.0;
        cfg.workers = workers;
        maps.push_back(compute_feature_map(v, mask, cfg));
    }
    for (size_t m = 1; m < maps.size(); ++m) {
        REQUIRE(maps[m].points.size() == maps[0].points.size());
        for (size_t i = 0; i < maps[0].points.size(); ++i) {
            CHECK(maps[m].points[i].voxel == maps[0].points[i].voxel);
            CHECK(maps[m].points[i].occupancy == maps[0].points[i].occupancy);
            for (int f = 0; f < kFeatureCount; ++f)
                CHECK(maps[m].points[i].features[f] == maps[0].points[i].features[f]);
        }
    }
}

TEST_CASE("map vectors equal single-window calls at the same centers") {
    const Index3 dims{32, 32, 32};
    const auto v = noise_volume(dims, 123, {2, 2, 2});
    const auto mask = ellipsoid_mask(dims);
    LatticeConfig cfg;
    cfg.window_mm = 8.0;
    cfg.workers = 2;
    const auto map = compute_feature_map(v, mask, cfg);
    REQUIRE(!map.points.empty());

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto& p = map.points[rng.next_below(map.points.size())];
        const auto w = extract_window(v, mask, p.voxel, cfg.window_mm);
        const auto direct = compute_feature_vector(w, cfg.texture);
        for (int f = 0; f < kFeatureCount; ++f) CHECK(p.features[f] == direct[f]);
    }
}

TEST_CASE("points below the occupancy threshold are omitted") {
    const Index3 dims{16, 16, 16};
    const auto v = filled_volume(dims, -800);
    LungMask mask;
    mask.dims = dims;
    mask.bits.assign(mask.voxel_count(), 0);
    // a thin 2-voxel slab: windows at 8mm are at most 25% occupied
    for (int z = 7; z <= 8; ++z)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) mask.set(x, y, z, true);

    LatticeConfig strict;
    strict.window_mm = 8.0;
    strict.min_lung_fraction = 0.5;
    CHECK_THROWS_AS(compute_feature_map(v, mask, strict), ComputeError);

    LatticeConfig loose = strict;
    loose.min_lung_fraction = 0.05;
    const auto map = compute_feature_map(v, mask, loose);
    CHECK(!map.points.empty());
    for (const auto& p : map.points) CHECK(p.occupancy >= 0.05);
}

TEST_CASE("feature map CSV round-trips") {
    const Index3 dims{20, 20, 20};
    const auto v = noise_volume(dims, 17);
    const auto mask = full_mask(dims);
    LatticeConfig cfg;
    cfg.window_mm = 6.0;
    const auto map = compute_feature_map(v, mask, cfg);

    const auto path = std::string("/tmp/qct_map_test.csv");
    write_feature_map_csv(map, path);
    const auto back = read_feature_map_csv(path);
    REQUIRE(back.points.size() == map.points.size());
    for (size_t i = 0; i < map.points.size(); ++i) {
        CHECK(back.points[i].voxel == map.points[i].voxel);
        CHECK(back.points[i].occupancy == map.points[i].occupancy);
        for (int f = 0; f < kFeatureCount; ++f)
            CHECK(back.points[i].features[f] == map.points[i].features[f]);
    }
}

TEST_CASE("config validation rejects nonsense") {
    LatticeConfig cfg;
    cfg.window_mm = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.window_mm = 8.0;
    cfg.min_lung_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.min_lung_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
