#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "classify.hpp"
#include "clustering.hpp"
#include "lattice.hpp"
#include "phantom.hpp"
#include "segmentation.hpp"
#include "survival.hpp"

namespace qct {

// Parsed run configuration shared by every stage command.
struct RunConfig {
    std::string cohort_csv;
    std::string cohort_dir;  // directory of the CSV; patient paths resolve here
    std::string output_dir;
    std::vector<double> windows_mm{4, 6, 8, 10, 12, 14, 16, 18, 20};
    uint64_t seed = 1;
    int workers = 1;
    int folds = 5;

    SegmentationConfig segmentation;
    LatticeConfig lattice;  // window_mm is overridden per sweep entry
    int cluster_k = 5;

    bool with_clinical = true;
    std::string model = "svm";  // svm | mlp | hm (extra models for classify)
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0};
    int mlp_epochs = 300;
    double mlp_learning_rate = 0.05;
    int mlp_hidden = 64;
    double mlp_window_mm = 4.0;

    double survival_window_mm = 8.0;
    double cox_lambda = 0.1;
    int survival_top_features = 3;

    void validate() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir);
RunConfig load_run_config(const std::string& config_path);

// Stage entry points; each is idempotent for identical inputs and seed.
void run_segment(const RunConfig& cfg);
void run_extract(const RunConfig& cfg);
void run_cluster(const RunConfig& cfg);
void run_classify(const RunConfig& cfg);
void run_survival(const RunConfig& cfg);
void run_pipeline(const RunConfig& cfg);  // all stages plus the manifest

// Phantom cohort generation from its own JSON spec.
SyntheticCohortSpec parse_cohort_spec(const std::string& json_text);
void run_phantom_cohort(const std::string& json_text);

// Artifact paths used across stages.
std::string mask_artifact_path(const RunConfig& cfg, const std::string& patient_id);
std::string feature_map_path(const RunConfig& cfg, const std::string& patient_id, double window_mm);
std::string ratios_path(const RunConfig& cfg, double window_mm);
std::string hm_features_path(const RunConfig& cfg);

// Manifest helpers: every artifact of a run with a content hash.
void write_manifest(const RunConfig& cfg, const std::vector<std::string>& artifact_paths,
                    bool partial);

}  // namespace qct
