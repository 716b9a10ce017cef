// qct - batch front end for the CT texture pipeline, built on the C API.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qct/qct.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int status_to_exit(qct_status s) {
    switch (s) {
        case QCT_OK: return kExitOk;
        case QCT_E_INVALID: return kExitValidation;
        case QCT_E_IO:
        case QCT_E_RUNTIME: return kExitRuntime;
    }
    return kExitRuntime;
}

int report(qct_status s, const std::string& what) {
    if (s == QCT_OK) {
        std::cout << what << ": ok\n";
        return kExitOk;
    }
    std::cerr << what << ": error: " << qct_last_error() << "\n";
    return status_to_exit(s);
}

struct CommonFlags {
    std::string config_path;
    std::string windows;
    int64_t seed = -1;
    int workers = -1;
    int with_clinical = -1;  // -1 unset, 0 no, 1 yes
    std::string model;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "run configuration JSON")->required();
    cmd->add_option("--windows", f.windows, "comma-separated window sizes in mm");
    cmd->add_option("--seed", f.seed, "global seed override");
    cmd->add_option("--workers", f.workers, "worker thread count override");
    cmd->add_flag("--with-clinical{1},--without-clinical{0}", f.with_clinical,
                  "include clinical covariates");
    cmd->add_option("--model", f.model, "classifier: svm, mlp or hm")
        ->check(CLI::IsMember({"svm", "mlp", "hm"}));
}

// Flags override the corresponding config keys; the merged JSON goes to the
// library as-is.
std::string merged_config(const CommonFlags& f, std::string* base_dir, std::string* error) {
    std::ifstream in(f.config_path);
    if (!in) {
        *error = "cannot open config: " + f.config_path;
        return "";
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        *error = std::string("malformed config JSON: ") + e.what();
        return "";
    }
    if (!f.windows.empty()) {
        std::vector<double> ws;
        std::stringstream ss(f.windows);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                ws.push_back(std::stod(tok));
            } catch (const std::exception&) {
                *error = "bad --windows token: " + tok;
                return "";
            }
        }
        j["windows_mm"] = ws;
    }
    if (f.seed >= 0) j["seed"] = static_cast<uint64_t>(f.seed);
    if (f.workers >= 0) j["workers"] = f.workers;
    if (f.with_clinical >= 0 || !f.model.empty()) {
        json c = j.contains("classification") ? j["classification"] : json::object();
        if (f.with_clinical >= 0) c["with_clinical"] = f.with_clinical == 1;
        if (!f.model.empty()) c["model"] = f.model;
        j["classification"] = c;
    }
    *base_dir = fs::absolute(fs::path(f.config_path)).parent_path().string();
    return j.dump();
}

int run_with(const CommonFlags& f, const std::string& name,
             qct_status (*fn)(const char*, const char*)) {
    std::string base_dir, error;
    const std::string cfg = merged_config(f, &base_dir, &error);
    if (cfg.empty()) {
        std::cerr << name << ": error: " << error << "\n";
        return kExitValidation;
    }
    return report(fn(cfg.c_str(), base_dir.c_str()), name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantitative CT texture pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;

    std::string phantom_spec_path;
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic labeled cohort");
    phantom->add_option("--spec", phantom_spec_path, "cohort spec JSON")->required();

    auto* segment = app.add_subcommand("segment", "lung segmentation for every patient");
    auto* extract = app.add_subcommand("extract", "lattice feature maps per window size");
    auto* cluster = app.add_subcommand("cluster", "tissue clustering and volume ratios");
    auto* classify = app.add_subcommand("classify", "UIP vs non-UIP models and the window sweep");
    auto* survival = app.add_subcommand("survival", "Cox model, risk partition, KM curves");
    auto* pipeline = app.add_subcommand("pipeline", "all stages plus the artifact manifest");
    for (auto* cmd : {segment, extract, cluster, classify, survival, pipeline})
        add_common(cmd, flags);

    CLI11_PARSE(app, argc, argv);

    if (phantom->parsed()) {
        std::ifstream in(phantom_spec_path);
        if (!in) {
            std::cerr << "phantom: error: cannot open spec: " << phantom_spec_path << "\n";
            return kExitValidation;
        }
        std::ostringstream text;
        text << in.rdbuf();
        json j;
        try {
            j = json::parse(text.str());
        } catch (const json::exception& e) {
            std::cerr << "phantom: error: malformed spec JSON: " << e.what() << "\n";
            return kExitValidation;
        }
        // out_dir is resolved relative to the spec file
        if (j.contains("out_dir")) {
            const fs::path p(j["out_dir"].get<std::string>());
            if (p.is_relative())
                j["out_dir"] =
                    (fs::absolute(fs::path(phantom_spec_path)).parent_path() / p).string();
        }
        return report(qct_run_phantom_cohort(j.dump().c_str()), "phantom");
    }
    if (segment->parsed()) return run_with(flags, "segment", qct_run_segment);
    if (extract->parsed()) return run_with(flags, "extract", qct_run_extract);
    if (cluster->parsed()) return run_with(flags, "cluster", qct_run_cluster);
    if (classify->parsed()) return run_with(flags, "classify", qct_run_classify);
    if (survival->parsed()) return run_with(flags, "survival", qct_run_survival);
    if (pipeline->parsed()) return run_with(flags, "pipeline", qct_run_pipeline);
    return kExitValidation;
}
