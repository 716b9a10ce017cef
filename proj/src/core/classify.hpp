#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texture.hpp"
#include "types.hpp"

namespace qct {

// Rows are patients, columns named covariates, labels UIP=1 / nonUIP=0.
struct DesignMatrix {
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> sample_weights;  // empty = all 1

    size_t n_rows() const { return rows.size(); }
    size_t n_cols() const { return column_names.size(); }
    void validate() const;
};

struct LinearSvmModel {
    std::vector<double> weights;  // standardized feature space
    double bias = 0.0;
    double c = 1.0;
    std::vector<double> col_mean, col_scale;  // standardization fitted on training rows
    int epochs_run = 0;
    double final_objective = 0.0;
    std::vector<double> objective_trace;  // best-so-far, non-increasing

    double score(const std::vector<double>& raw_row) const;
};

struct SvmConfig {
    double c = 1.0;
    int max_epochs = 20000;
    double tol = 1e-6;
    int patience = 500;  // epochs without improvement before stopping
};

// L2-regularized hinge loss, full-batch subgradient descent keeping the
// best iterate. Columns are standardized from the training rows.
LinearSvmModel train_svm(const DesignMatrix& x, const SvmConfig& cfg);

// Mann-Whitney AUC; ties between scores count one half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

enum class ModelKind { Svm, Mlp };

struct CvConfig {
    int folds = 5;
    uint64_t seed = 0;
    ModelKind model = ModelKind::Svm;
    std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0};  // inner 3-fold selection
    int mlp_epochs = 300;
    double mlp_learning_rate = 0.05;
    int mlp_hidden = 64;
};

struct CvResult {
    double pooled_auc = 0.0;
    std::vector<double> per_fold_auc;
    std::vector<double> pooled_scores;  // out-of-fold score per row
    std::vector<int> fold_of_row;
};

// Deterministic stratified folds keyed by the seed; every statistic that
// feeds a fit comes from that fold's training rows only.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, uint64_t seed);
CvResult cross_validated_auc(const DesignMatrix& x, const CvConfig& cfg);

// Inner 3-fold grid selection of C over the supplied training rows; the
// per-fold model of cross_validated_auc is train_svm at this C.
double select_svm_c(const DesignMatrix& train, const CvConfig& cfg);

// [n_in, hidden, hidden, 1]; rectifier hidden units, logistic output.
struct MlpModel {
    std::vector<int> layer_sizes;
    std::vector<std::vector<double>> weights;  // per layer, row-major [out][in]
    std::vector<std::vector<double>> biases;

    size_t parameter_count() const;
    void get_parameters(std::vector<double>& out) const;
    void set_parameters(const std::vector<double>& in);
    double predict(const std::vector<double>& input) const;
};

struct MlpConfig {
    int hidden = 64;
    int epochs = 300;
    int batch_size = 8;
    double learning_rate = 0.05;
    uint64_t seed = 0;
};

MlpModel mlp_init(int n_in, const MlpConfig& cfg);

// Mean logistic loss over the batch and its gradient via reverse
// accumulation, flattened in parameter order.
double mlp_loss_and_gradients(const MlpModel& model, const std::vector<std::vector<double>>& inputs,
                              const std::vector<int>& labels, std::vector<double>& grad_out);

// Seeded mini-batch gradient descent; throws naming the epoch if the loss
// leaves the reals.
MlpModel train_mlp(const DesignMatrix& x, const MlpConfig& cfg);

// The 12 histogram features pooled over every masked voxel of the lung.
std::array<double, 12> hm_baseline(const Volume& v, const LungMask& mask);

struct SweepCell {
    double window_mm = 0.0;
    bool with_clinical = false;
    double pooled_auc = 0.0;
    std::vector<double> per_fold_auc;
};

struct SweepTable {
    std::vector<double> windows_mm;
    std::vector<double> auc_without;  // aligned with windows_mm
    std::vector<double> auc_with;
};

// Two rows ("AUC without clinical measures" / "AUC with clinical measures"),
// one column per window size.
void write_sweep_csv(const SweepTable& table, const std::string& path);

}  // namespace qct
