#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "hash.hpp"
#include "svg.hpp"
#include "volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qct {

void RunConfig::validate() const {
    if (cohort_csv.empty()) throw ValidationError("config: cohort_csv is required");
    if (output_dir.empty()) throw ValidationError("config: output_dir is required");
    if (windows_mm.empty()) throw ValidationError("config: windows_mm must be non-empty");
    for (double w : windows_mm)
        if (w < 4.0 || w > 20.0)
            throw ValidationError("config: window sizes must lie in [4, 20] mm");
    if (folds < 2) throw ValidationError("config: folds must be >= 2");
    if (cluster_k < 2) throw ValidationError("config: cluster k must be >= 2");
    segmentation.validate();
}

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }

    RunConfig cfg;
    const auto resolve = [&](const std::string& p) {
        if (p.empty() || fs::path(p).is_absolute() || base_dir.empty()) return p;
        return (fs::path(base_dir) / p).string();
    };

    cfg.cohort_csv = resolve(get_or<std::string>(j, "cohort_csv", ""));
    cfg.output_dir = resolve(get_or<std::string>(j, "output_dir", ""));
    cfg.cohort_dir = fs::path(cfg.cohort_csv).parent_path().string();
    if (j.contains("windows_mm")) cfg.windows_mm = j.at("windows_mm").get<std::vector<double>>();
    cfg.seed = get_or<uint64_t>(j, "seed", 1);
    cfg.workers = get_or<int>(j, "workers", 1);
    cfg.folds = get_or<int>(j, "folds", 5);

    if (j.contains("segmentation")) {
        const auto& s = j.at("segmentation");
        cfg.segmentation.k_intensity = get_or<int>(s, "k_intensity", 3);
        cfg.segmentation.max_iters = get_or<int>(s, "max_iters", 100);
        cfg.segmentation.tol_hu = get_or<double>(s, "tol_hu", 0.01);
        cfg.segmentation.min_component_voxels = get_or<int>(s, "min_component_voxels", 64);
    }
    cfg.segmentation.seed = cfg.seed;

    if (j.contains("lattice")) {
        const auto& l = j.at("lattice");
        cfg.lattice.lattice_step_mm = get_or<double>(l, "lattice_step_mm", 0.0);
        cfg.lattice.min_lung_fraction = get_or<double>(l, "min_lung_fraction", 0.5);
        cfg.lattice.texture.glcm_levels = get_or<int>(l, "glcm_levels", 32);
        cfg.lattice.texture.glcm_lo = static_cast<int16_t>(get_or<int>(l, "glcm_lo", -1024));
        cfg.lattice.texture.glcm_hi = static_cast<int16_t>(get_or<int>(l, "glcm_hi", 240));
        cfg.lattice.texture.glcm_distance = get_or<int>(l, "glcm_distance", 1);
    }
    cfg.lattice.workers = cfg.workers;

    if (j.contains("clustering")) cfg.cluster_k = get_or<int>(j.at("clustering"), "k", 5);

    if (j.contains("classification")) {
        const auto& c = j.at("classification");
        cfg.with_clinical = get_or<bool>(c, "with_clinical", true);
        cfg.model = get_or<std::string>(c, "model", "svm");
        if (c.contains("c_grid")) cfg.c_grid = c.at("c_grid").get<std::vector<double>>();
        cfg.mlp_epochs = get_or<int>(c, "mlp_epochs", 300);
        cfg.mlp_learning_rate = get_or<double>(c, "mlp_learning_rate", 0.05);
        cfg.mlp_hidden = get_or<int>(c, "mlp_hidden", 64);
        cfg.mlp_window_mm = get_or<double>(c, "mlp_window_mm", 4.0);
    }

    if (j.contains("survival")) {
        const auto& s = j.at("survival");
        cfg.survival_window_mm = get_or<double>(s, "window_mm", 8.0);
        cfg.cox_lambda = get_or<double>(s, "lambda", 0.1);
        cfg.survival_top_features = get_or<int>(s, "top_features", 3);
    }

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config: " + config_path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), fs::path(config_path).parent_path().string());
}

std::string mask_artifact_path(const RunConfig& cfg, const std::string& patient_id) {
    return (fs::path(cfg.output_dir) / (patient_id + "_lungmask.json")).string();
}

std::string feature_map_path(const RunConfig& cfg, const std::string& patient_id,
                             double window_mm) {
    return (fs::path(cfg.output_dir) / (patient_id + "_W" + format_mm(window_mm) + ".csv"))
        .string();
}

std::string ratios_path(const RunConfig& cfg, double window_mm) {
    return (fs::path(cfg.output_dir) / ("ratios_W" + format_mm(window_mm) + ".csv")).string();
}

std::string hm_features_path(const RunConfig& cfg) {
    return (fs::path(cfg.output_dir) / "hm_features.csv").string();
}

namespace {

std::string resolve_patient_path(const RunConfig& cfg, const std::string& rel) {
    if (rel.empty() || fs::path(rel).is_absolute()) return rel;
    return (fs::path(cfg.cohort_dir) / rel).string();
}

[[noreturn]] void stage_failure(const std::string& stage, const std::string& patient,
                                const std::exception& e) {
    throw ComputeError("stage " + stage + (patient.empty() ? "" : " (patient " + patient + ")") +
                       ": " + e.what());
}

}  // namespace

void run_segment(const RunConfig& cfg) {
    const auto cohort = read_cohort(cfg.cohort_csv);
    fs::create_directories(cfg.output_dir);
    for (const auto& rec : cohort) {
        try {
            LungMask mask;
            if (!rec.mask_override_path.empty()) {
                // expert-corrected masks bypass the automatic segmentation
                mask = read_mask(resolve_patient_path(cfg, rec.mask_override_path));
            } else {
                const Volume v = read_volume(resolve_patient_path(cfg, rec.volume_path));
                mask = segment_lung(v, cfg.segmentation);
            }
            write_mask(mask, mask_artifact_path(cfg, rec.patient_id));
        } catch (const std::exception& e) {
            stage_failure("segment", rec.patient_id, e);
        }
    }
}

void run_extract(const RunConfig& cfg) {
    const auto cohort = read_cohort(cfg.cohort_csv);
    fs::create_directories(cfg.output_dir);

    std::ostringstream hm_csv;
    hm_csv << "patient_id";
    for (int i = 0; i < 12; ++i) hm_csv << "," << feature_names()[i];
    hm_csv << "\n";

    for (const auto& rec : cohort) {
        try {
            const Volume v = read_volume(resolve_patient_path(cfg, rec.volume_path));
            const LungMask mask = read_mask(mask_artifact_path(cfg, rec.patient_id));
            mask.validate_against(v);

            for (double wmm : cfg.windows_mm) {
                LatticeConfig lc = cfg.lattice;
                lc.window_mm = wmm;
                const FeatureMap map = compute_feature_map(v, mask, lc);
                write_feature_map_csv(map, feature_map_path(cfg, rec.patient_id, wmm));
            }

            const auto hm = hm_baseline(v, mask);
            hm_csv << rec.patient_id;
            for (double f : hm) {
                char buf[32];
                snprintf(buf, sizeof(buf), "%.17g", f);
                hm_csv << "," << buf;
            }
            hm_csv << "\n";
        } catch (const std::exception& e) {
            stage_failure("extract", rec.patient_id, e);
        }
    }
    atomic_write_file(hm_features_path(cfg), hm_csv.str());
}

void run_cluster(const RunConfig& cfg) {
    const auto cohort = read_cohort(cfg.cohort_csv);
    fs::create_directories(cfg.output_dir);

    for (double wmm : cfg.windows_mm) {
        std::ostringstream ratios_csv;
        ratios_csv << "patient_id,window_mm";
        for (int c = 1; c <= cfg.cluster_k; ++c) ratios_csv << ",r" << c;
        ratios_csv << "\n";

        for (const auto& rec : cohort) {
            try {
                const FeatureMap map =
                    read_feature_map_csv(feature_map_path(cfg, rec.patient_id, wmm));
                const ClusterResult result = fit_clusters(map, cfg.cluster_k, cfg.seed);
                write_labels_csv(
                    map, result.labels,
                    (fs::path(cfg.output_dir) /
                     (rec.patient_id + "_W" + format_mm(wmm) + "_labels.csv"))
                        .string());
                const auto ratios = volume_ratios(result.labels, cfg.cluster_k);
                ratios_csv << rec.patient_id << "," << format_mm(wmm);
                for (double r : ratios) {
                    char buf[32];
                    snprintf(buf, sizeof(buf), "%.17g", r);
                    ratios_csv << "," << buf;
                }
                ratios_csv << "\n";
            } catch (const std::exception& e) {
                stage_failure("cluster", rec.patient_id, e);
            }
        }
        atomic_write_file(ratios_path(cfg, wmm), ratios_csv.str());
    }
}

namespace {

// patient_id -> ratio vector from a ratios CSV
std::map<std::string, std::vector<double>> read_ratios_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ratios CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("ratios CSV is empty: " + path);
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "patient_id")
        throw ValidationError("ratios CSV header mismatch: " + path);

    std::map<std::string, std::vector<double>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        std::vector<double> r;
        for (size_t i = 2; i < cells.size(); ++i) r.push_back(std::stod(cells[i]));
        out[cells[0]] = std::move(r);
    }
    return out;
}

std::map<std::string, std::vector<double>> read_hm_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open HM features CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("HM features CSV is empty: " + path);
    std::map<std::string, std::vector<double>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        std::vector<double> r;
        for (size_t i = 1; i < cells.size(); ++i) r.push_back(std::stod(cells[i]));
        out[cells[0]] = std::move(r);
    }
    return out;
}

void append_clinical(DesignMatrix& x, const CohortRecord& rec) {
    x.rows.back().push_back(rec.age);
    x.rows.back().push_back(rec.gender == Gender::Male ? 1.0 : 0.0);
    x.rows.back().push_back(static_cast<double>(rec.severity));
}

DesignMatrix build_design(const std::vector<CohortRecord>& cohort,
                          const std::map<std::string, std::vector<double>>& features,
                          const std::vector<std::string>& feature_names_in, bool with_clinical) {
    DesignMatrix x;
    x.column_names = feature_names_in;
    if (with_clinical) {
        x.column_names.push_back("age");
        x.column_names.push_back("gender");
        x.column_names.push_back("severity");
    }
    for (const auto& rec : cohort) {
        const auto it = features.find(rec.patient_id);
        if (it == features.end())
            throw ValidationError("no feature row for patient " + rec.patient_id);
        if (it->second.size() != feature_names_in.size())
            throw ValidationError("feature width mismatch for patient " + rec.patient_id);
        x.rows.push_back(it->second);
        if (with_clinical) append_clinical(x, rec);
        x.labels.push_back(rec.uip ? 1 : 0);
    }
    x.validate();
    return x;
}

std::vector<std::string> ratio_names(int k) {
    std::vector<std::string> names;
    for (int c = 1; c <= k; ++c) names.push_back("r" + std::to_string(c));
    return names;
}

}  // namespace

void run_classify(const RunConfig& cfg) {
    const auto cohort = read_cohort(cfg.cohort_csv);
    fs::create_directories(cfg.output_dir);

    json results;
    results["seed"] = cfg.seed;
    results["folds"] = cfg.folds;

    CvConfig cv;
    cv.folds = cfg.folds;
    cv.seed = cfg.seed;
    cv.c_grid = cfg.c_grid;

    // TM sweep across window sizes, with and without clinical covariates
    SweepTable table;
    json sweep_json = json::array();
    for (double wmm : cfg.windows_mm) {
        const auto ratios = read_ratios_csv(ratios_path(cfg, wmm));
        const auto names = ratio_names(cfg.cluster_k);
        for (bool clinical : {false, true}) {
            const DesignMatrix x = build_design(cohort, ratios, names, clinical);
            const CvResult r = cross_validated_auc(x, cv);
            json cell;
            cell["window_mm"] = wmm;
            cell["covariate_set"] = clinical ? "ratios+clinical" : "ratios";
            cell["model"] = "svm";
            cell["pooled_auc"] = r.pooled_auc;
            cell["per_fold_auc"] = r.per_fold_auc;
            sweep_json.push_back(cell);
            if (clinical)
                table.auc_with.push_back(r.pooled_auc);
            else
                table.auc_without.push_back(r.pooled_auc);
        }
        table.windows_mm.push_back(wmm);
    }
    results["tm_sweep"] = sweep_json;
    write_sweep_csv(table, (fs::path(cfg.output_dir) / "sweep.csv").string());

    // HM baseline rows through the same machinery
    const auto hm = read_hm_csv(hm_features_path(cfg));
    std::vector<std::string> hm_names(feature_names().begin(), feature_names().begin() + 12);
    json hm_json = json::array();
    std::array<double, 2> hm_auc{0.5, 0.5};
    for (bool clinical : {false, true}) {
        const DesignMatrix x = build_design(cohort, hm, hm_names, clinical);
        const CvResult r = cross_validated_auc(x, cv);
        json cell;
        cell["covariate_set"] = clinical ? "histogram+clinical" : "histogram";
        cell["model"] = "svm";
        cell["pooled_auc"] = r.pooled_auc;
        cell["per_fold_auc"] = r.per_fold_auc;
        hm_json.push_back(cell);
        hm_auc[clinical ? 1 : 0] = r.pooled_auc;
    }
    results["hm_baseline"] = hm_json;

    // appendix network at its reference window size
    if (cfg.model == "mlp" ||
        std::find(cfg.windows_mm.begin(), cfg.windows_mm.end(), cfg.mlp_window_mm) !=
            cfg.windows_mm.end()) {
        const auto ratios = read_ratios_csv(ratios_path(cfg, cfg.mlp_window_mm));
        const DesignMatrix x =
            build_design(cohort, ratios, ratio_names(cfg.cluster_k), cfg.with_clinical);
        CvConfig mcv = cv;
        mcv.model = ModelKind::Mlp;
        mcv.mlp_epochs = cfg.mlp_epochs;
        mcv.mlp_learning_rate = cfg.mlp_learning_rate;
        mcv.mlp_hidden = cfg.mlp_hidden;
        const CvResult r = cross_validated_auc(x, mcv);
        size_t correct = 0;
        for (size_t i = 0; i < r.pooled_scores.size(); ++i)
            correct += (r.pooled_scores[i] >= 0.5 ? 1 : 0) == x.labels[i];
        json cell;
        cell["window_mm"] = cfg.mlp_window_mm;
        cell["model"] = "mlp";
        cell["pooled_auc"] = r.pooled_auc;
        cell["per_fold_auc"] = r.per_fold_auc;
        cell["cv_accuracy"] = static_cast<double>(correct) / static_cast<double>(x.n_rows());
        results["mlp"] = cell;
    }

    // AUC vs window size, TM and the flat HM reference
    std::vector<PlotSeries> series;
    PlotSeries tm_without{"TM", "#d62728", false, false, table.windows_mm, table.auc_without};
    PlotSeries tm_with{"TM + clinical", "#1f77b4", false, false, table.windows_mm, table.auc_with};
    PlotSeries hm_without{"HM", "#000000", false, false, table.windows_mm, {}};
    PlotSeries hm_with{"HM + clinical", "#000000", true, false, table.windows_mm, {}};
    for (size_t i = 0; i < table.windows_mm.size(); ++i) {
        hm_without.y.push_back(hm_auc[0]);
        hm_with.y.push_back(hm_auc[1]);
    }
    series = {tm_without, tm_with, hm_without, hm_with};
    write_svg((fs::path(cfg.output_dir) / "sweep.svg").string(),
              render_line_chart("Classification AUC vs window size", "window size (mm)", "AUC",
                                series));

    atomic_write_file((fs::path(cfg.output_dir) / "results_classify.json").string(),
                      results.dump(2) + "\n");
}

void run_survival(const RunConfig& cfg) {
    const auto cohort = read_cohort(cfg.cohort_csv);
    fs::create_directories(cfg.output_dir);

    const auto ratios = read_ratios_csv(ratios_path(cfg, cfg.survival_window_mm));
    const auto names = ratio_names(cfg.cluster_k);

    SurvivalData data;
    data.covariate_names = names;
    for (const auto& rec : cohort) {
        const auto it = ratios.find(rec.patient_id);
        if (it == ratios.end()) throw ValidationError("no ratios for patient " + rec.patient_id);
        data.times.push_back(rec.time_days);
        data.events.push_back(rec.event ? 1 : 0);
        data.covariates.push_back(it->second);
    }

    // univariable screen over the imaging features, then the multivariable
    // model on the survivors plus the clinical covariates
    const auto screen = univariable_screen(data, cfg.folds, cfg.seed, cfg.cox_lambda);

    std::vector<std::string> chosen;
    for (const auto& e : screen) {
        if (!e.ok) continue;
        chosen.push_back(e.name);
        if (static_cast<int>(chosen.size()) >= cfg.survival_top_features) break;
    }
    if (chosen.empty()) throw ComputeError("survival: no usable imaging feature after screening");

    SurvivalData model_data;
    model_data.covariate_names = chosen;
    model_data.covariate_names.push_back("age");
    model_data.covariate_names.push_back("gender");
    model_data.covariate_names.push_back("severity");
    for (size_t i = 0; i < cohort.size(); ++i) {
        std::vector<double> row;
        for (const auto& name : chosen) {
            const auto at = std::find(names.begin(), names.end(), name) - names.begin();
            row.push_back(data.covariates[i][at]);
        }
        row.push_back(cohort[i].age);
        row.push_back(cohort[i].gender == Gender::Male ? 1.0 : 0.0);
        row.push_back(static_cast<double>(cohort[i].severity));
        model_data.covariates.push_back(std::move(row));
        model_data.times.push_back(data.times[i]);
        model_data.events.push_back(data.events[i]);
    }

    // a covariate constant across the cohort carries nothing; drop it
    // rather than abort the stage
    std::vector<std::string> dropped;
    for (size_t j = model_data.covariate_names.size(); j-- > 0;) {
        bool constant = true;
        for (size_t i = 1; i < model_data.covariates.size() && constant; ++i)
            constant = model_data.covariates[i][j] == model_data.covariates[0][j];
        if (!constant) continue;
        dropped.push_back(model_data.covariate_names[j]);
        model_data.covariate_names.erase(model_data.covariate_names.begin() + j);
        for (auto& row : model_data.covariates) row.erase(row.begin() + j);
    }
    if (model_data.covariate_names.empty())
        throw ComputeError("survival: every candidate covariate is constant");

    const CoxModel model = fit_cox(model_data, cfg.cox_lambda);

    std::vector<double> predictors(cohort.size());
    for (size_t i = 0; i < cohort.size(); ++i)
        predictors[i] = model.linear_predictor(model_data.covariates[i]);
    const double c_stat = c_statistic(predictors, model_data.times, model_data.events);

    const RiskPartition partition = partition_by_risk(model, model_data);

    // the expert-label partition, for the comparison the figures draw
    std::vector<double> t_uip, t_non;
    std::vector<uint8_t> e_uip, e_non;
    for (size_t i = 0; i < cohort.size(); ++i) {
        (cohort[i].uip ? t_uip : t_non).push_back(model_data.times[i]);
        (cohort[i].uip ? e_uip : e_non).push_back(model_data.events[i]);
    }
    LogRankResult expert_test;
    KmCurve uip_curve, non_curve;
    if (!t_uip.empty() && !t_non.empty()) {
        expert_test = log_rank(t_uip, e_uip, t_non, e_non);
        uip_curve = km_curve(t_uip, e_uip);
        non_curve = km_curve(t_non, e_non);
        write_km_csv(uip_curve, (fs::path(cfg.output_dir) / "km_expert_uip.csv").string());
        write_km_csv(non_curve, (fs::path(cfg.output_dir) / "km_expert_nonuip.csv").string());
    }

    write_km_csv(partition.low_curve, (fs::path(cfg.output_dir) / "km_tm_low.csv").string());
    write_km_csv(partition.high_curve, (fs::path(cfg.output_dir) / "km_tm_high.csv").string());

    json out;
    out["seed"] = cfg.seed;
    out["window_mm"] = cfg.survival_window_mm;
    out["lambda"] = cfg.cox_lambda;
    out["covariates"] = model.covariate_names;
    out["dropped_constant_covariates"] = dropped;
    out["beta"] = model.beta;
    out["beta_raw"] = model.beta_raw;
    out["converged"] = model.converged;
    out["c_statistic"] = c_stat;
    out["partition_rule"] = "median linear predictor, ties low";
    out["logrank_p_tm"] = partition.test.p_value;
    out["logrank_chi2_tm"] = partition.test.chi_square;
    out["logrank_p_expert"] = expert_test.p_value;
    out["logrank_chi2_expert"] = expert_test.chi_square;
    json screen_json = json::array();
    for (const auto& e : screen) {
        json s;
        s["feature"] = e.name;
        s["cv_c"] = e.cv_c;
        s["ok"] = e.ok;
        if (!e.ok) s["error"] = e.error;
        screen_json.push_back(s);
    }
    out["screen"] = screen_json;
    atomic_write_file((fs::path(cfg.output_dir) / "survival.json").string(), out.dump(2) + "\n");

    // Kaplan-Meier step plot, TM split and expert split side by side
    const auto to_series = [](const KmCurve& c, const std::string& label, const std::string& color,
                              bool dashed) {
        PlotSeries s{label, color, dashed, true, {0.0}, {1.0}};
        for (size_t i = 0; i < c.times.size(); ++i) {
            s.x.push_back(c.times[i]);
            s.y.push_back(c.survival[i]);
        }
        return s;
    };
    std::vector<PlotSeries> series = {
        to_series(partition.low_curve, "TM low risk", "#1f77b4", false),
        to_series(partition.high_curve, "TM high risk", "#d62728", false),
    };
    if (!uip_curve.times.empty() || !non_curve.times.empty()) {
        series.push_back(to_series(non_curve, "expert non-UIP", "#1f77b4", true));
        series.push_back(to_series(uip_curve, "expert UIP", "#d62728", true));
    }
    write_svg((fs::path(cfg.output_dir) / "km.svg").string(),
              render_line_chart("Survival by TM risk split and expert label", "time (days)",
                                "survival probability", series));
}

void run_pipeline(const RunConfig& cfg) {
    bool partial = true;
    std::vector<std::string> artifacts;
    const auto note = [&](const std::string& p) { artifacts.push_back(p); };

    try {
        const auto cohort = read_cohort(cfg.cohort_csv);

        run_segment(cfg);
        for (const auto& rec : cohort) {
            note(mask_artifact_path(cfg, rec.patient_id));
            note(fs::path(mask_artifact_path(cfg, rec.patient_id))
                     .replace_extension(".raw")
                     .string());
        }

        run_extract(cfg);
        for (const auto& rec : cohort)
            for (double wmm : cfg.windows_mm) note(feature_map_path(cfg, rec.patient_id, wmm));
        note(hm_features_path(cfg));

        run_cluster(cfg);
        for (double wmm : cfg.windows_mm) {
            note(ratios_path(cfg, wmm));
            for (const auto& rec : cohort)
                note((fs::path(cfg.output_dir) /
                      (rec.patient_id + "_W" + format_mm(wmm) + "_labels.csv"))
                         .string());
        }

        run_classify(cfg);
        note((fs::path(cfg.output_dir) / "sweep.csv").string());
        note((fs::path(cfg.output_dir) / "sweep.svg").string());
        note((fs::path(cfg.output_dir) / "results_classify.json").string());

        run_survival(cfg);
        note((fs::path(cfg.output_dir) / "survival.json").string());
        note((fs::path(cfg.output_dir) / "km_tm_low.csv").string());
        note((fs::path(cfg.output_dir) / "km_tm_high.csv").string());
        note((fs::path(cfg.output_dir) / "km.svg").string());

        partial = false;
    } catch (...) {
        write_manifest(cfg, artifacts, true);
        throw;
    }
    write_manifest(cfg, artifacts, partial);
}

void write_manifest(const RunConfig& cfg, const std::vector<std::string>& artifact_paths,
                    bool partial) {
    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["partial"] = partial;
    json arr = json::array();
    for (const auto& p : artifact_paths) {
        json a;
        a["path"] = fs::path(p).lexically_relative(cfg.output_dir).string();
        a["hash"] = fs::exists(p) ? fnv1a64_file_hex(p) : "missing";
        arr.push_back(a);
    }
    manifest["artifacts"] = arr;
    atomic_write_file((fs::path(cfg.output_dir) / "manifest.json").string(),
                      manifest.dump(2) + "\n");
}

SyntheticCohortSpec parse_cohort_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("cohort spec: malformed JSON: ") + e.what());
    }
    SyntheticCohortSpec spec;
    spec.n_uip = get_or<int>(j, "n_uip", 20);
    spec.n_nonuip = get_or<int>(j, "n_nonuip", 20);
    if (j.contains("dims")) {
        for (int a = 0; a < 3; ++a) spec.dims[a] = j.at("dims").at(a).get<int>();
    }
    if (j.contains("spacing_mm")) {
        for (int a = 0; a < 3; ++a) spec.spacing_mm[a] = j.at("spacing_mm").at(a).get<double>();
    }
    const std::string mode = get_or<std::string>(j, "mode", "composition");
    if (mode == "composition")
        spec.mode = CohortMode::Composition;
    else if (mode == "fine_texture")
        spec.mode = CohortMode::FineTexture;
    else if (mode == "null")
        spec.mode = CohortMode::Null;
    else
        throw ValidationError("cohort spec: unknown mode '" + mode + "'");
    spec.hazard_ratio = get_or<double>(j, "hazard_ratio", 4.0);
    spec.censor_rate = get_or<double>(j, "censor_rate", 0.3);
    spec.offset_jitter_hu = get_or<double>(j, "offset_jitter_hu", 60.0);
    spec.seed = get_or<uint64_t>(j, "seed", 1);
    spec.validate();

    if (!j.contains("out_dir")) throw ValidationError("cohort spec: out_dir is required");
    return spec;
}

void run_phantom_cohort(const std::string& json_text) {
    const SyntheticCohortSpec spec = parse_cohort_spec(json_text);
    const json j = json::parse(json_text);
    generate_cohort(spec, j.at("out_dir").get<std::string>());
}

}  // namespace qct
