/* qct.h - C API for the quantitative CT texture pipeline.
 *
 * All functions return qct_status; qct_last_error() carries a thread-local
 * message for the most recent failure on the calling thread. Objects are
 * opaque handles released with their matching _free function.
 */
#ifndef QCT_H
#define QCT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined _WIN32 || defined __CYGWIN__
#define QCT_API __declspec(dllexport)
#else
#define QCT_API __attribute__((visibility("default")))
#endif

typedef enum qct_status {
    QCT_OK = 0,
    QCT_E_INVALID = 1, /* bad inputs: files, arguments, configuration */
    QCT_E_IO = 2,      /* filesystem failure */
    QCT_E_RUNTIME = 3, /* computation failed on valid inputs */
} qct_status;

QCT_API const char* qct_version(void);
QCT_API const char* qct_last_error(void);

/* ---- volumes and masks -------------------------------------------------- */

typedef struct qct_volume qct_volume;
typedef struct qct_mask qct_mask;

QCT_API qct_status qct_volume_read(const char* header_path, qct_volume** out);
QCT_API qct_status qct_volume_create(const int dims[3], const double spacing_mm[3],
                                     const double origin_mm[3], const int16_t* voxels,
                                     qct_volume** out);
QCT_API qct_status qct_volume_write(const qct_volume* v, const char* header_path);
QCT_API void qct_volume_free(qct_volume* v);
QCT_API void qct_volume_dims(const qct_volume* v, int dims[3]);
QCT_API void qct_volume_spacing(const qct_volume* v, double spacing_mm[3]);
QCT_API const int16_t* qct_volume_data(const qct_volume* v);

QCT_API qct_status qct_mask_read(const char* header_path, qct_mask** out);
QCT_API qct_status qct_mask_write(const qct_mask* m, const char* header_path);
QCT_API void qct_mask_free(qct_mask* m);
QCT_API void qct_mask_dims(const qct_mask* m, int dims[3]);
QCT_API const uint8_t* qct_mask_data(const qct_mask* m);
QCT_API size_t qct_mask_set_count(const qct_mask* m);

/* ---- segmentation ------------------------------------------------------- */

/* config_json keys (all optional): k_intensity, max_iters, tol_hu,
 * min_component_voxels, seed. NULL or "" uses the defaults. */
QCT_API qct_status qct_segment_lung(const qct_volume* v, const char* config_json, qct_mask** out);

/* ---- lattice feature maps ------------------------------------------------ */

typedef struct qct_feature_map qct_feature_map;

QCT_API int qct_feature_count(void);
QCT_API const char* qct_feature_name(int index);

/* config_json keys (all optional): window_mm, lattice_step_mm,
 * min_lung_fraction, glcm_levels, glcm_lo, glcm_hi, glcm_distance, workers. */
QCT_API qct_status qct_feature_map_compute(const qct_volume* v, const qct_mask* m,
                                           const char* config_json, qct_feature_map** out);
QCT_API size_t qct_feature_map_point_count(const qct_feature_map* map);
QCT_API qct_status qct_feature_map_point(const qct_feature_map* map, size_t index, int xyz[3],
                                         double* occupancy, double* values /* 26 */);
QCT_API qct_status qct_feature_map_write_csv(const qct_feature_map* map, const char* path);
QCT_API qct_status qct_feature_map_read_csv(const char* path, qct_feature_map** out);
QCT_API void qct_feature_map_free(qct_feature_map* map);

/* ---- tissue clustering --------------------------------------------------- */

/* labels_out must hold point_count ints (labels 1..k, attenuation order);
 * ratios_out must hold k doubles summing to 1. */
QCT_API qct_status qct_cluster_fit(const qct_feature_map* map, int k, uint64_t seed,
                                   int* labels_out, double* ratios_out);

/* ---- phantoms ------------------------------------------------------------ */

/* spec_json: see the phantom section of the config reference in README.md.
 * labels_out (optional) receives one class code per voxel; free with
 * qct_buffer_free. */
QCT_API qct_status qct_phantom_generate(const char* spec_json, qct_volume** vol_out,
                                        qct_mask** mask_out, uint8_t** labels_out);
QCT_API void qct_buffer_free(void* buffer);

/* ---- batch stage runners (file-driven, same configs as the CLI) --------- */

QCT_API qct_status qct_run_phantom_cohort(const char* spec_json);
QCT_API qct_status qct_run_segment(const char* config_json, const char* base_dir);
QCT_API qct_status qct_run_extract(const char* config_json, const char* base_dir);
QCT_API qct_status qct_run_cluster(const char* config_json, const char* base_dir);
QCT_API qct_status qct_run_classify(const char* config_json, const char* base_dir);
QCT_API qct_status qct_run_survival(const char* config_json, const char* base_dir);
QCT_API qct_status qct_run_pipeline(const char* config_json, const char* base_dir);

#ifdef __cplusplus
}
#endif

#endif /* QCT_H */
