#include "classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "volume_io.hpp"

namespace qct {

void DesignMatrix::validate() const {
    if (rows.size() != labels.size())
        throw ValidationError("design matrix: row/label count mismatch");
    std::set<std::string> names(column_names.begin(), column_names.end());
    if (names.size() != column_names.size())
        throw ValidationError("design matrix: duplicate column names");
    for (const auto& r : rows) {
        if (r.size() != column_names.size())
            throw ValidationError("design matrix: ragged row");
        for (double v : r)
            if (!std::isfinite(v)) throw ValidationError("design matrix: non-finite cell");
    }
    for (int l : labels)
        if (l != 0 && l != 1) throw ValidationError("design matrix: labels must be 0/1");
    if (!sample_weights.empty() && sample_weights.size() != rows.size())
        throw ValidationError("design matrix: sample weight count mismatch");
}

double LinearSvmModel::score(const std::vector<double>& raw_row) const {
    double s = bias;
    for (size_t j = 0; j < weights.size(); ++j) {
        const double z = (raw_row[j] - col_mean[j]) / col_scale[j];
        s += weights[j] * z;
    }
    return s;
}

namespace {

struct Standardization {
    std::vector<double> mean, scale;
};

Standardization fit_standardization(const std::vector<std::vector<double>>& rows, size_t cols) {
    Standardization s;
    s.mean.assign(cols, 0.0);
    s.scale.assign(cols, 1.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (size_t j = 0; j < cols; ++j) s.mean[j] += r[j];
    for (size_t j = 0; j < cols; ++j) s.mean[j] /= n;
    for (size_t j = 0; j < cols; ++j) {
        double var = 0.0;
        for (const auto& r : rows) {
            const double t = r[j] - s.mean[j];
            var += t * t;
        }
        var /= n;
        s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

}  // namespace

LinearSvmModel train_svm(const DesignMatrix& x, const SvmConfig& cfg) {
    x.validate();
    if (x.n_rows() < 2) throw ValidationError("train_svm: need at least two rows");
    const bool has_pos = std::count(x.labels.begin(), x.labels.end(), 1) > 0;
    const bool has_neg = std::count(x.labels.begin(), x.labels.end(), 0) > 0;
    if (!has_pos || !has_neg) throw ValidationError("train_svm: single-class training set");

    const size_t n = x.n_rows();
    const size_t d = x.n_cols();

    const Standardization std_fit = fit_standardization(x.rows, d);
    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j)
            z[i][j] = (x.rows[i][j] - std_fit.mean[j]) / std_fit.scale[j];

    std::vector<double> y(n), sw(n, 1.0);
    for (size_t i = 0; i < n; ++i) y[i] = x.labels[i] == 1 ? 1.0 : -1.0;
    if (!x.sample_weights.empty()) sw = x.sample_weights;

    // J(w, b) = 0.5 |w|^2 + C sum_i s_i max(0, 1 - y_i (w.z_i + b))
    const auto objective = [&](const std::vector<double>& w, double b) {
        double j = 0.0;
        for (double wj : w) j += 0.5 * wj * wj;
        for (size_t i = 0; i < n; ++i) {
            double m = b;
            for (size_t jj = 0; jj < d; ++jj) m += w[jj] * z[i][jj];
            j += cfg.c * sw[i] * std::max(0.0, 1.0 - y[i] * m);
        }
        return j;
    };

    std::vector<double> w(d, 0.0), best_w(d, 0.0);
    double b = 0.0, best_b = 0.0;
    double best_j = objective(w, b);

    LinearSvmModel model;
    model.objective_trace.push_back(best_j);

    // step scale follows total weight, so reweighting and row duplication
    // walk the same trajectory
    double total_weight = 0.0;
    for (double s : sw) total_weight += s;
    const double eta0 = 0.5 / (1.0 + cfg.c * total_weight);
    int stale = 0;
    int epoch = 0;
    std::vector<double> grad(d);
    for (; epoch < cfg.max_epochs; ++epoch) {
        for (size_t j = 0; j < d; ++j) grad[j] = w[j];
        double grad_b = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double m = b;
            for (size_t j = 0; j < d; ++j) m += w[j] * z[i][j];
            if (y[i] * m < 1.0) {
                const double g = cfg.c * sw[i] * y[i];
                for (size_t j = 0; j < d; ++j) grad[j] -= g * z[i][j];
                grad_b -= g;
            }
        }
        const double eta = eta0 / (1.0 + 0.001 * epoch);
        for (size_t j = 0; j < d; ++j) w[j] -= eta * grad[j];
        b -= eta * grad_b;

        const double j_now = objective(w, b);
        if (j_now < best_j - cfg.tol * (1.0 + std::abs(best_j))) {
            best_j = j_now;
            best_w = w;
            best_b = b;
            stale = 0;
        } else {
            if (j_now < best_j) {
                best_j = j_now;
                best_w = w;
                best_b = b;
            }
            ++stale;
        }
        model.objective_trace.push_back(best_j);
        if (stale >= cfg.patience) break;
    }

    model.weights = std::move(best_w);
    model.bias = best_b;
    model.c = cfg.c;
    model.col_mean = std_fit.mean;
    model.col_scale = std_fit.scale;
    model.epochs_run = epoch;
    model.final_objective = best_j;
    return model;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("auc: size mismatch");
    size_t npos = 0, nneg = 0;
    for (int l : labels) (l == 1 ? npos : nneg) += 1;
    if (npos == 0 || nneg == 0) throw ValidationError("auc: single-class input");

    // sort once, then count positive-over-negative wins with tie groups
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double wins = 0.0, ties = 0.0;
    size_t neg_below = 0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        size_t pos_here = 0, neg_here = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? pos_here : neg_here) += 1;
            ++j;
        }
        wins += static_cast<double>(pos_here) * static_cast<double>(neg_below);
        ties += static_cast<double>(pos_here) * static_cast<double>(neg_here);
        neg_below += neg_here;
        i = j;
    }
    return (wins + 0.5 * ties) / (static_cast<double>(npos) * static_cast<double>(nneg));
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, uint64_t seed) {
    if (folds < 2) throw ValidationError("stratified_folds: folds must be >= 2");
    std::vector<int> fold_of(labels.size(), -1);
    for (int cls : {0, 1}) {
        std::vector<size_t> members;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        Rng rng(hash_mix(seed, 0x10c0 + cls));
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i)
            fold_of[members[i]] = static_cast<int>(i % folds);
    }
    return fold_of;
}

namespace {

DesignMatrix subset(const DesignMatrix& x, const std::vector<size_t>& rows) {
    DesignMatrix out;
    out.column_names = x.column_names;
    for (size_t i : rows) {
        out.rows.push_back(x.rows[i]);
        out.labels.push_back(x.labels[i]);
    }
    return out;
}

}  // namespace

double select_svm_c(const DesignMatrix& train, const CvConfig& cfg) {
    if (cfg.c_grid.size() == 1) return cfg.c_grid[0];
    const auto inner_folds = stratified_folds(train.labels, 3, hash_mix(cfg.seed, 0xc5e1));

    double best_c = cfg.c_grid.front();
    double best_auc = -1.0;
    for (double c : cfg.c_grid) {
        std::vector<double> scores(train.n_rows(), 0.0);
        bool usable = true;
        for (int f = 0; f < 3 && usable; ++f) {
            std::vector<size_t> tr, va;
            for (size_t i = 0; i < train.n_rows(); ++i)
                (inner_folds[i] == f ? va : tr).push_back(i);
            const DesignMatrix fit_set = subset(train, tr);
            const bool two_class =
                std::count(fit_set.labels.begin(), fit_set.labels.end(), 1) > 0 &&
                std::count(fit_set.labels.begin(), fit_set.labels.end(), 0) > 0;
            if (!two_class || va.empty()) {
                usable = false;
                break;
            }
            SvmConfig scfg;
            scfg.c = c;
            const LinearSvmModel m = train_svm(fit_set, scfg);
            for (size_t i : va) scores[i] = m.score(train.rows[i]);
        }
        if (!usable) continue;
        const double a = auc(scores, train.labels);
        if (a > best_auc + 1e-12) {
            best_auc = a;
            best_c = c;
        }
    }
    return best_c;
}

CvResult cross_validated_auc(const DesignMatrix& x, const CvConfig& cfg) {
    x.validate();
    if (cfg.folds < 2) throw ValidationError("cross_validated_auc: folds must be >= 2");

    const auto fold_of = stratified_folds(x.labels, cfg.folds, cfg.seed);

    CvResult result;
    result.fold_of_row = fold_of;
    result.pooled_scores.assign(x.n_rows(), 0.0);

    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<size_t> tr, va;
        for (size_t i = 0; i < x.n_rows(); ++i) (fold_of[i] == f ? va : tr).push_back(i);

        const DesignMatrix train = subset(x, tr);
        const auto count_class = [&](const std::vector<int>& ls, int c) {
            return std::count(ls.begin(), ls.end(), c);
        };
        if (count_class(train.labels, 0) == 0 || count_class(train.labels, 1) == 0)
            throw ValidationError("cross_validated_auc: training fold " + std::to_string(f) +
                                  " lost a class");
        std::vector<int> va_labels;
        for (size_t i : va) va_labels.push_back(x.labels[i]);
        if (count_class(va_labels, 0) == 0 || count_class(va_labels, 1) == 0)
            throw ValidationError("cross_validated_auc: validation fold " + std::to_string(f) +
                                  " lost a class");

        std::vector<double> va_scores;
        if (cfg.model == ModelKind::Svm) {
            SvmConfig scfg;
            scfg.c = select_svm_c(train, cfg);
            const LinearSvmModel m = train_svm(train, scfg);
            for (size_t i : va) {
                const double s = m.score(x.rows[i]);
                result.pooled_scores[i] = s;
                va_scores.push_back(s);
            }
        } else {
            MlpConfig mcfg;
            mcfg.hidden = cfg.mlp_hidden;
            mcfg.epochs = cfg.mlp_epochs;
            mcfg.learning_rate = cfg.mlp_learning_rate;
            mcfg.seed = hash_mix(cfg.seed, 0x317 + static_cast<uint64_t>(f));
            const Standardization st = fit_standardization(train.rows, train.n_cols());
            DesignMatrix ztrain = train;
            for (auto& r : ztrain.rows)
                for (size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - st.mean[j]) / st.scale[j];
            const MlpModel m = train_mlp(ztrain, mcfg);
            for (size_t i : va) {
                std::vector<double> zr(x.rows[i].size());
                for (size_t j = 0; j < zr.size(); ++j)
                    zr[j] = (x.rows[i][j] - st.mean[j]) / st.scale[j];
                const double s = m.predict(zr);
                result.pooled_scores[i] = s;
                va_scores.push_back(s);
            }
        }
        result.per_fold_auc.push_back(auc(va_scores, va_labels));
    }

    result.pooled_auc = auc(result.pooled_scores, x.labels);
    return result;
}

size_t MlpModel::parameter_count() const {
    size_t n = 0;
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        n += static_cast<size_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
    return n;
}

void MlpModel::get_parameters(std::vector<double>& out) const {
    out.clear();
    out.reserve(parameter_count());
    for (size_t l = 0; l < weights.size(); ++l) {
        out.insert(out.end(), weights[l].begin(), weights[l].end());
        out.insert(out.end(), biases[l].begin(), biases[l].end());
    }
}

void MlpModel::set_parameters(const std::vector<double>& in) {
    size_t k = 0;
    for (size_t l = 0; l < weights.size(); ++l) {
        for (double& w : weights[l]) w = in[k++];
        for (double& b : biases[l]) b = in[k++];
    }
    if (k != in.size()) throw ValidationError("mlp: parameter vector size mismatch");
}

namespace {

struct MlpForward {
    // activations[0] is the input, then per layer post-activation values
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre;  // pre-activation per layer
};

MlpForward mlp_forward(const MlpModel& m, const std::vector<double>& input) {
    MlpForward f;
    f.activations.push_back(input);
    for (size_t l = 0; l < m.weights.size(); ++l) {
        const int n_out = m.layer_sizes[l + 1];
        const int n_in = m.layer_sizes[l];
        std::vector<double> z(n_out);
        for (int o = 0; o < n_out; ++o) {
            double s = m.biases[l][o];
            const double* wrow = &m.weights[l][static_cast<size_t>(o) * n_in];
            for (int i = 0; i < n_in; ++i) s += wrow[i] * f.activations.back()[i];
            z[o] = s;
        }
        f.pre.push_back(z);
        std::vector<double> a(n_out);
        const bool last = (l + 1 == m.weights.size());
        for (int o = 0; o < n_out; ++o)
            a[o] = last ? 1.0 / (1.0 + std::exp(-z[o])) : std::max(0.0, z[o]);
        f.activations.push_back(std::move(a));
    }
    return f;
}

}  // namespace

double MlpModel::predict(const std::vector<double>& input) const {
    return mlp_forward(*this, input).activations.back()[0];
}

MlpModel mlp_init(int n_in, const MlpConfig& cfg) {
    MlpModel m;
    m.layer_sizes = {n_in, cfg.hidden, cfg.hidden, 1};
    Rng rng(hash_mix(cfg.seed, 0x313a));
    for (size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int fan_in = m.layer_sizes[l];
        const int fan_out = m.layer_sizes[l + 1];
        const double sd = std::sqrt(2.0 / fan_in);
        std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
        for (double& wi : w) wi = rng.normal(0.0, sd);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

double mlp_loss_and_gradients(const MlpModel& m, const std::vector<std::vector<double>>& inputs,
                              const std::vector<int>& labels, std::vector<double>& grad_out) {
    if (inputs.empty() || inputs.size() != labels.size())
        throw ValidationError("mlp gradients: bad batch");

    const size_t n_layers = m.weights.size();
    std::vector<std::vector<double>> gw(n_layers), gb(n_layers);
    for (size_t l = 0; l < n_layers; ++l) {
        gw[l].assign(m.weights[l].size(), 0.0);
        gb[l].assign(m.biases[l].size(), 0.0);
    }

    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(inputs.size());
    for (size_t s = 0; s < inputs.size(); ++s) {
        const MlpForward f = mlp_forward(m, inputs[s]);
        const double p = f.activations.back()[0];
        const double y = labels[s];
        const double eps = 1e-12;
        loss += -(y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps)) * inv_n;

        // logistic + cross-entropy collapses to (p - y) at the output
        std::vector<double> delta = {(p - y) * inv_n};
        for (size_t l = n_layers; l-- > 0;) {
            const int n_out = m.layer_sizes[l + 1];
            const int n_in = m.layer_sizes[l];
            const auto& a_in = f.activations[l];
            for (int o = 0; o < n_out; ++o) {
                gb[l][o] += delta[o];
                double* gwrow = &gw[l][static_cast<size_t>(o) * n_in];
                for (int i = 0; i < n_in; ++i) gwrow[i] += delta[o] * a_in[i];
            }
            if (l == 0) break;
            std::vector<double> prev(n_in, 0.0);
            for (int i = 0; i < n_in; ++i) {
                double s2 = 0.0;
                for (int o = 0; o < n_out; ++o)
                    s2 += m.weights[l][static_cast<size_t>(o) * n_in + i] * delta[o];
                prev[i] = f.pre[l - 1][i] > 0.0 ? s2 : 0.0;
            }
            delta = std::move(prev);
        }
    }

    grad_out.clear();
    grad_out.reserve(m.parameter_count());
    for (size_t l = 0; l < n_layers; ++l) {
        grad_out.insert(grad_out.end(), gw[l].begin(), gw[l].end());
        grad_out.insert(grad_out.end(), gb[l].begin(), gb[l].end());
    }
    return loss;
}

MlpModel train_mlp(const DesignMatrix& x, const MlpConfig& cfg) {
    x.validate();
    if (x.n_rows() == 0) throw ValidationError("train_mlp: empty design matrix");

    MlpModel m = mlp_init(static_cast<int>(x.n_cols()), cfg);
    Rng rng(hash_mix(cfg.seed, 0xba7c4));

    std::vector<size_t> order(x.n_rows());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> params, grad;
    m.get_parameters(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const size_t bs = std::max<size_t>(1, cfg.batch_size);
        for (size_t start = 0; start < order.size(); start += bs) {
            std::vector<std::vector<double>> batch_in;
            std::vector<int> batch_y;
            for (size_t i = start; i < std::min(order.size(), start + bs); ++i) {
                batch_in.push_back(x.rows[order[i]]);
                batch_y.push_back(x.labels[order[i]]);
            }
            const double loss = mlp_loss_and_gradients(m, batch_in, batch_y, grad);
            if (!std::isfinite(loss))
                throw ComputeError("train_mlp: loss diverged at epoch " + std::to_string(epoch));
            m.get_parameters(params);
            bool finite = true;
            for (size_t k = 0; k < params.size(); ++k) {
                params[k] -= cfg.learning_rate * grad[k];
                finite = finite && std::isfinite(params[k]);
            }
            if (!finite)
                throw ComputeError("train_mlp: parameters diverged at epoch " +
                                   std::to_string(epoch));
            m.set_parameters(params);
        }
    }
    return m;
}

std::array<double, 12> hm_baseline(const Volume& v, const LungMask& mask) {
    mask.validate_against(v);
    WindowSample w;
    w.dims = v.dims;
    w.hu = v.voxels;
    w.valid = mask.bits;
    w.valid_count = mask.set_count();
    if (w.valid_count == 0) throw ValidationError("hm_baseline: empty mask");
    return histogram_features(build_histogram(w));
}

void write_sweep_csv(const SweepTable& table, const std::string& path) {
    std::ostringstream out;
    out << "series";
    for (double wmm : table.windows_mm) out << ",W = " << format_mm(wmm) << " mm";
    out << "\n";
    out << "AUC without clinical measures";
    for (double a : table.auc_without) out << "," << a;
    out << "\n";
    out << "AUC with clinical measures";
    for (double a : table.auc_with) out << "," << a;
    out << "\n";
    atomic_write_file(path, out.str());
}

}  // namespace qct
