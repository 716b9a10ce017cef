#include "qct/qct.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "../core/clustering.hpp"
#include "../core/errors.hpp"
#include "../core/lattice.hpp"
#include "../core/phantom.hpp"
#include "../core/pipeline.hpp"
#include "../core/segmentation.hpp"
#include "../core/volume_io.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

qct_status fail(qct_status code, const char* what) {
    g_last_error = what ? what : "unknown error";
    return code;
}

// exceptions stop at the C boundary
template <typename Fn>
qct_status guarded(Fn&& fn) {
    try {
        fn();
        return QCT_OK;
    } catch (const qct::ValidationError& e) {
        return fail(QCT_E_INVALID, e.what());
    } catch (const qct::IoError& e) {
        return fail(QCT_E_IO, e.what());
    } catch (const std::exception& e) {
        return fail(QCT_E_RUNTIME, e.what());
    } catch (...) {
        return fail(QCT_E_RUNTIME, "unknown failure");
    }
}

json parse_optional_json(const char* text, const char* what) {
    if (!text || !*text) return json::object();
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw qct::ValidationError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

struct qct_volume {
    qct::Volume v;
};
struct qct_mask {
    qct::LungMask m;
};
struct qct_feature_map {
    qct::FeatureMap map;
};

extern "C" {

const char* qct_version(void) { return "0.1.0"; }

const char* qct_last_error(void) { return g_last_error.c_str(); }

qct_status qct_volume_read(const char* header_path, qct_volume** out) {
    if (!header_path || !out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { *out = new qct_volume{qct::read_volume(header_path)}; });
}

qct_status qct_volume_create(const int dims[3], const double spacing_mm[3],
                             const double origin_mm[3], const int16_t* voxels, qct_volume** out) {
    if (!dims || !spacing_mm || !origin_mm || !voxels || !out)
        return fail(QCT_E_INVALID, "null argument");
    return guarded([&] {
        qct::Volume v;
        v.dims = {dims[0], dims[1], dims[2]};
        v.spacing_mm = {spacing_mm[0], spacing_mm[1], spacing_mm[2]};
        v.origin_mm = {origin_mm[0], origin_mm[1], origin_mm[2]};
        if (v.dims[0] < 1 || v.dims[1] < 1 || v.dims[2] < 1)
            throw qct::ValidationError("volume dims must all be >= 1");
        v.voxels.assign(voxels, voxels + v.voxel_count());
        v.validate();
        *out = new qct_volume{std::move(v)};
    });
}

qct_status qct_volume_write(const qct_volume* v, const char* header_path) {
    if (!v || !header_path) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { qct::write_volume(v->v, header_path); });
}

void qct_volume_free(qct_volume* v) { delete v; }

void qct_volume_dims(const qct_volume* v, int dims[3]) {
    for (int a = 0; a < 3; ++a) dims[a] = v->v.dims[a];
}

void qct_volume_spacing(const qct_volume* v, double spacing_mm[3]) {
    for (int a = 0; a < 3; ++a) spacing_mm[a] = v->v.spacing_mm[a];
}

const int16_t* qct_volume_data(const qct_volume* v) { return v->v.voxels.data(); }

qct_status qct_mask_read(const char* header_path, qct_mask** out) {
    if (!header_path || !out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { *out = new qct_mask{qct::read_mask(header_path)}; });
}

qct_status qct_mask_write(const qct_mask* m, const char* header_path) {
    if (!m || !header_path) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { qct::write_mask(m->m, header_path); });
}

void qct_mask_free(qct_mask* m) { delete m; }

void qct_mask_dims(const qct_mask* m, int dims[3]) {
    for (int a = 0; a < 3; ++a) dims[a] = m->m.dims[a];
}

const uint8_t* qct_mask_data(const qct_mask* m) { return m->m.bits.data(); }

size_t qct_mask_set_count(const qct_mask* m) { return m->m.set_count(); }

qct_status qct_segment_lung(const qct_volume* v, const char* config_json, qct_mask** out) {
    if (!v || !out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] {
        const json j = parse_optional_json(config_json, "segmentation config");
        qct::SegmentationConfig cfg;
        cfg.k_intensity = get_or(j, "k_intensity", cfg.k_intensity);
        cfg.max_iters = get_or(j, "max_iters", cfg.max_iters);
        cfg.tol_hu = get_or(j, "tol_hu", cfg.tol_hu);
        cfg.min_component_voxels = get_or(j, "min_component_voxels", cfg.min_component_voxels);
        cfg.seed = get_or(j, "seed", cfg.seed);
        *out = new qct_mask{qct::segment_lung(v->v, cfg)};
    });
}

int qct_feature_count(void) { return qct::kFeatureCount; }

const char* qct_feature_name(int index) {
    if (index < 0 || index >= qct::kFeatureCount) return nullptr;
    return qct::feature_names()[index].c_str();
}

qct_status qct_feature_map_compute(const qct_volume* v, const qct_mask* m,
                                   const char* config_json, qct_feature_map** out) {
    if (!v || !m || !out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] {
        const json j = parse_optional_json(config_json, "lattice config");
        qct::LatticeConfig cfg;
        cfg.window_mm = get_or(j, "window_mm", cfg.window_mm);
        cfg.lattice_step_mm = get_or(j, "lattice_step_mm", cfg.lattice_step_mm);
        cfg.min_lung_fraction = get_or(j, "min_lung_fraction", cfg.min_lung_fraction);
        cfg.workers = get_or(j, "workers", cfg.workers);
        cfg.texture.glcm_levels = get_or(j, "glcm_levels", cfg.texture.glcm_levels);
        cfg.texture.glcm_lo = static_cast<int16_t>(get_or(j, "glcm_lo", int(cfg.texture.glcm_lo)));
        cfg.texture.glcm_hi = static_cast<int16_t>(get_or(j, "glcm_hi", int(cfg.texture.glcm_hi)));
        cfg.texture.glcm_distance = get_or(j, "glcm_distance", cfg.texture.glcm_distance);
        *out = new qct_feature_map{qct::compute_feature_map(v->v, m->m, cfg)};
    });
}

size_t qct_feature_map_point_count(const qct_feature_map* map) { return map->map.points.size(); }

qct_status qct_feature_map_point(const qct_feature_map* map, size_t index, int xyz[3],
                                 double* occupancy, double* values) {
    if (!map) return fail(QCT_E_INVALID, "null argument");
    if (index >= map->map.points.size()) return fail(QCT_E_INVALID, "point index out of range");
    const auto& p = map->map.points[index];
    if (xyz)
        for (int a = 0; a < 3; ++a) xyz[a] = p.voxel[a];
    if (occupancy) *occupancy = p.occupancy;
    if (values) std::memcpy(values, p.features.data(), sizeof(double) * qct::kFeatureCount);
    return QCT_OK;
}

qct_status qct_feature_map_write_csv(const qct_feature_map* map, const char* path) {
    if (!map || !path) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { qct::write_feature_map_csv(map->map, path); });
}

qct_status qct_feature_map_read_csv(const char* path, qct_feature_map** out) {
    if (!path || !out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { *out = new qct_feature_map{qct::read_feature_map_csv(path)}; });
}

void qct_feature_map_free(qct_feature_map* map) { delete map; }

qct_status qct_cluster_fit(const qct_feature_map* map, int k, uint64_t seed, int* labels_out,
                           double* ratios_out) {
    if (!map || !labels_out || !ratios_out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] {
        const qct::ClusterResult r = qct::fit_clusters(map->map, k, seed);
        for (size_t i = 0; i < r.labels.size(); ++i) labels_out[i] = r.labels[i];
        const auto ratios = qct::volume_ratios(r.labels, k);
        for (int c = 0; c < k; ++c) ratios_out[c] = ratios[c];
    });
}

qct_status qct_phantom_generate(const char* spec_json, qct_volume** vol_out, qct_mask** mask_out,
                                uint8_t** labels_out) {
    if (!vol_out || !mask_out) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] {
        const json j = parse_optional_json(spec_json, "phantom spec");
        qct::PhantomSpec spec;
        if (j.contains("dims"))
            for (int a = 0; a < 3; ++a) spec.dims[a] = j.at("dims").at(a).get<int>();
        if (j.contains("spacing_mm"))
            for (int a = 0; a < 3; ++a) spec.spacing_mm[a] = j.at("spacing_mm").at(a).get<double>();
        spec.seed = get_or(j, "seed", spec.seed);
        spec.hu_offset = get_or(j, "hu_offset", spec.hu_offset);
        spec.noise_scale = get_or(j, "noise_scale", spec.noise_scale);
        spec.reticular_period_mm = get_or(j, "reticular_period_mm", spec.reticular_period_mm);
        spec.honeycomb_period_mm = get_or(j, "honeycomb_period_mm", spec.honeycomb_period_mm);
        spec.patch_fraction = get_or(j, "patch_fraction", spec.patch_fraction);
        spec.patch_radius_mm = get_or(j, "patch_radius_mm", spec.patch_radius_mm);
        if (j.contains("regions")) {
            spec.regions.clear();
            for (const auto& r : j.at("regions")) {
                qct::PhantomSpec::Region region;
                region.cls = static_cast<qct::TextureClass>(r.at("class").get<int>());
                region.fraction = r.at("fraction").get<double>();
                spec.regions.push_back(region);
            }
        }
        qct::Phantom ph = qct::generate_phantom(spec);
        if (labels_out) {
            *labels_out = static_cast<uint8_t*>(malloc(ph.labels.size()));
            if (*labels_out) std::memcpy(*labels_out, ph.labels.data(), ph.labels.size());
        }
        *mask_out = new qct_mask{std::move(ph.mask)};
        *vol_out = new qct_volume{std::move(ph.volume)};
    });
}

void qct_buffer_free(void* buffer) { free(buffer); }

qct_status qct_run_phantom_cohort(const char* spec_json) {
    if (!spec_json) return fail(QCT_E_INVALID, "null argument");
    return guarded([&] { qct::run_phantom_cohort(spec_json); });
}

namespace {

qct_status run_stage(const char* config_json, const char* base_dir,
                     void (*stage)(const qct::RunConfig&)) {
    if (!config_json) return fail(QCT_E_INVALID, "null config");
    return guarded([&] {
        const qct::RunConfig cfg =
            qct::parse_run_config(config_json, base_dir ? base_dir : "");
        stage(cfg);
    });
}

}  // namespace

qct_status qct_run_segment(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_segment);
}
qct_status qct_run_extract(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_extract);
}
qct_status qct_run_cluster(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_cluster);
}
qct_status qct_run_classify(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_classify);
}
qct_status qct_run_survival(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_survival);
}
qct_status qct_run_pipeline(const char* config_json, const char* base_dir) {
    return run_stage(config_json, base_dir, qct::run_pipeline);
}

}  // extern "C"
