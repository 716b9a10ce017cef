#include "survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"
#include "volume_io.hpp"

namespace qct {

void SurvivalData::validate() const {
    if (times.size() != events.size()) throw ValidationError("survival: time/event size mismatch");
    if (covariates.size() != times.size())
        throw ValidationError("survival: covariate row count mismatch");
    for (double t : times) {
        if (!std::isfinite(t)) throw ValidationError("survival: non-finite time");
        if (t < 0.0) throw ValidationError("survival: negative time");
    }
    for (const auto& r : covariates) {
        if (r.size() != covariate_names.size()) throw ValidationError("survival: ragged covariates");
        for (double v : r)
            if (!std::isfinite(v)) throw ValidationError("survival: non-finite covariate");
    }
}

double cox_log_likelihood(const std::vector<double>& times, const std::vector<uint8_t>& events,
                          const std::vector<std::vector<double>>& z, const std::vector<double>& beta,
                          double lambda, std::vector<double>* grad_out,
                          std::vector<double>* hessian_out) {
    const size_t n = times.size();
    const size_t d = beta.size();

    std::vector<double> eta(n), w(n);
    for (size_t i = 0; i < n; ++i) {
        double e = 0.0;
        for (size_t j = 0; j < d; ++j) e += beta[j] * z[i][j];
        eta[i] = e;
        w[i] = std::exp(e);
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] > times[b]; });

    double ll = 0.0;
    std::vector<double> grad(d, 0.0);
    std::vector<double> hess(d * d, 0.0);

    // running risk-set sums, built walking times downward
    double s0 = 0.0;
    std::vector<double> s1(d, 0.0);
    std::vector<double> s2(d * d, 0.0);

    size_t i = 0;
    while (i < n) {
        size_t j = i;
        const double t = times[order[i]];
        while (j < n && times[order[j]] == t) {
            const size_t idx = order[j];
            s0 += w[idx];
            for (size_t a = 0; a < d; ++a) {
                s1[a] += w[idx] * z[idx][a];
                for (size_t b = 0; b < d; ++b) s2[a * d + b] += w[idx] * z[idx][a] * z[idx][b];
            }
            ++j;
        }

        int d_t = 0;
        for (size_t k = i; k < j; ++k) {
            const size_t idx = order[k];
            if (!events[idx]) continue;
            ++d_t;
            ll += eta[idx];
            for (size_t a = 0; a < d; ++a) grad[a] += z[idx][a];
        }
        if (d_t > 0) {
            ll -= d_t * std::log(s0);
            for (size_t a = 0; a < d; ++a) grad[a] -= d_t * s1[a] / s0;
            for (size_t a = 0; a < d; ++a)
                for (size_t b = 0; b < d; ++b)
                    hess[a * d + b] -= d_t * (s2[a * d + b] / s0 - (s1[a] / s0) * (s1[b] / s0));
        }
        i = j;
    }

    for (size_t a = 0; a < d; ++a) {
        ll -= 0.5 * lambda * beta[a] * beta[a];
        grad[a] -= lambda * beta[a];
        hess[a * d + a] -= lambda;
    }

    if (grad_out) *grad_out = std::move(grad);
    if (hessian_out) *hessian_out = std::move(hess);
    return ll;
}

namespace {

// Gaussian elimination with partial pivoting; a is destroyed.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const size_t d = b.size();
    for (size_t col = 0; col < d; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < d; ++r)
            if (std::abs(a[r * d + col]) > std::abs(a[pivot * d + col])) pivot = r;
        if (std::abs(a[pivot * d + col]) < 1e-300)
            throw ComputeError("cox: singular information matrix");
        if (pivot != col) {
            for (size_t c = 0; c < d; ++c) std::swap(a[col * d + c], a[pivot * d + c]);
            std::swap(b[col], b[pivot]);
        }
        for (size_t r = col + 1; r < d; ++r) {
            const double f = a[r * d + col] / a[col * d + col];
            for (size_t c = col; c < d; ++c) a[r * d + c] -= f * a[col * d + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(d);
    for (size_t r = d; r-- > 0;) {
        double s = b[r];
        for (size_t c = r + 1; c < d; ++c) s -= a[r * d + c] * x[c];
        x[r] = s / a[r * d + r];
    }
    return x;
}

}  // namespace

double CoxModel::linear_predictor(const std::vector<double>& raw_row) const {
    double s = 0.0;
    for (size_t j = 0; j < beta.size(); ++j)
        s += beta[j] * (raw_row[j] - col_mean[j]) / col_scale[j];
    return s;
}

CoxModel fit_cox(const SurvivalData& data, double lambda) {
    data.validate();
    const size_t n = data.n();
    const size_t d = data.covariate_names.size();
    if (n < 2) throw ValidationError("fit_cox: need at least two subjects");
    if (std::count(data.events.begin(), data.events.end(), uint8_t{1}) == 0)
        throw ValidationError("fit_cox: no events in sample");
    if (lambda < 0.0) throw ValidationError("fit_cox: lambda must be >= 0");

    CoxModel model;
    model.covariate_names = data.covariate_names;
    model.lambda = lambda;
    model.col_mean.assign(d, 0.0);
    model.col_scale.assign(d, 1.0);

    for (size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += data.covariates[i][j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double t = data.covariates[i][j] - mean;
            var += t * t;
        }
        var /= static_cast<double>(n);
        if (!(var > 0.0))
            throw ValidationError("fit_cox: covariate '" + data.covariate_names[j] +
                                  "' is constant across subjects");
        model.col_mean[j] = mean;
        model.col_scale[j] = std::sqrt(var);
    }

    std::vector<std::vector<double>> z(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j)
            z[i][j] = (data.covariates[i][j] - model.col_mean[j]) / model.col_scale[j];

    std::vector<double> beta(d, 0.0), grad, hess;
    double ll = cox_log_likelihood(data.times, data.events, z, beta, lambda, &grad, &hess);
    model.log_likelihood_trace.push_back(ll);

    constexpr double kGradTol = 1e-8;
    constexpr int kMaxIters = 100;

    for (int iter = 0; iter < kMaxIters; ++iter) {
        model.iterations = iter + 1;

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < kGradTol) {
            model.converged = true;
            break;
        }

        // Newton direction: (-H) delta = grad
        std::vector<double> neg_h(hess.size());
        for (size_t k = 0; k < hess.size(); ++k) neg_h[k] = -hess[k];
        const std::vector<double> delta = solve_linear(std::move(neg_h), grad);

        // step halving until the penalized likelihood does not drop
        double step = 1.0;
        bool accepted = false;
        std::vector<double> candidate(d);
        for (int h = 0; h < 40; ++h) {
            for (size_t j = 0; j < d; ++j) candidate[j] = beta[j] + step * delta[j];
            const double cll =
                cox_log_likelihood(data.times, data.events, z, candidate, lambda, nullptr, nullptr);
            if (std::isfinite(cll) && cll >= ll) {
                beta = candidate;
                ll = cll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no uphill step left at this scale

        for (double bj : beta)
            if (std::abs(bj) > 50.0)
                throw ComputeError(
                    "fit_cox: coefficient escaped (|beta| > 50 in standardized space); "
                    "monotone likelihood, increase lambda");

        ll = cox_log_likelihood(data.times, data.events, z, beta, lambda, &grad, &hess);
        model.log_likelihood_trace.push_back(ll);
    }

    model.beta = beta;
    model.beta_raw.resize(d);
    for (size_t j = 0; j < d; ++j) model.beta_raw[j] = beta[j] / model.col_scale[j];
    return model;
}

double c_statistic(const std::vector<double>& risk_scores, const std::vector<double>& times,
                   const std::vector<uint8_t>& events) {
    if (risk_scores.size() != times.size() || times.size() != events.size())
        throw ValidationError("c_statistic: size mismatch");

    double concordant = 0.0, comparable = 0.0;
    const size_t n = times.size();
    for (size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (size_t j = 0; j < n; ++j) {
            if (times[i] >= times[j]) continue;  // needs t_i < t_j
            comparable += 1.0;
            if (risk_scores[i] > risk_scores[j])
                concordant += 1.0;
            else if (risk_scores[i] == risk_scores[j])
                concordant += 0.5;
        }
    }
    if (comparable == 0.0) throw ComputeError("c_statistic: no comparable pairs");
    return concordant / comparable;
}

std::vector<ScreenEntry> univariable_screen(const SurvivalData& data, int folds, uint64_t seed,
                                            double lambda) {
    data.validate();
    if (folds < 2) throw ValidationError("univariable_screen: folds must be >= 2");

    // stratify folds by event flag so every training fold keeps events
    const size_t n = data.n();
    std::vector<int> fold_of(n, -1);
    for (int flag : {0, 1}) {
        std::vector<size_t> members;
        for (size_t i = 0; i < n; ++i)
            if ((data.events[i] != 0) == (flag == 1)) members.push_back(i);
        Rng rng(hash_mix(seed, 0x5c4ee7 + flag));
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i)
            fold_of[members[i]] = static_cast<int>(i % folds);
    }

    std::vector<ScreenEntry> entries;
    for (size_t f = 0; f < data.covariate_names.size(); ++f) {
        ScreenEntry entry;
        entry.name = data.covariate_names[f];
        try {
            std::vector<double> pooled(n, 0.0);
            for (int k = 0; k < folds; ++k) {
                SurvivalData train;
                train.covariate_names = {entry.name};
                std::vector<size_t> val_rows;
                for (size_t i = 0; i < n; ++i) {
                    if (fold_of[i] == k) {
                        val_rows.push_back(i);
                        continue;
                    }
                    train.times.push_back(data.times[i]);
                    train.events.push_back(data.events[i]);
                    train.covariates.push_back({data.covariates[i][f]});
                }
                const CoxModel m = fit_cox(train, lambda);
                for (size_t i : val_rows)
                    pooled[i] = m.linear_predictor({data.covariates[i][f]});
            }
            entry.cv_c = c_statistic(pooled, data.times, data.events);
            entry.ok = true;
        } catch (const std::exception& e) {
            entry.ok = false;
            entry.error = e.what();
        }
        entries.push_back(std::move(entry));
    }

    std::stable_sort(entries.begin(), entries.end(), [](const ScreenEntry& a, const ScreenEntry& b) {
        if (a.ok != b.ok) return a.ok;
        if (a.cv_c != b.cv_c) return a.cv_c > b.cv_c;
        return a.name < b.name;
    });
    return entries;
}

KmCurve km_curve(const std::vector<double>& times, const std::vector<uint8_t>& events) {
    if (times.empty() || times.size() != events.size())
        throw ValidationError("km_curve: empty or mismatched input");

    std::vector<size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] < times[b]; });

    KmCurve curve;
    double s = 1.0;
    size_t i = 0;
    const size_t n = times.size();
    while (i < n) {
        const double t = times[order[i]];
        const int at_risk = static_cast<int>(n - i);
        int d = 0;
        size_t j = i;
        while (j < n && times[order[j]] == t) {
            if (events[order[j]]) ++d;
            ++j;
        }
        if (d > 0) {
            s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            curve.times.push_back(t);
            curve.survival.push_back(s);
            curve.at_risk.push_back(at_risk);
            curve.events.push_back(d);
        }
        i = j;
    }
    return curve;
}

LogRankResult log_rank(const std::vector<double>& times_a, const std::vector<uint8_t>& events_a,
                       const std::vector<double>& times_b, const std::vector<uint8_t>& events_b) {
    if (times_a.empty() || times_b.empty())
        throw ValidationError("log_rank: both groups must be non-empty");
    if (times_a.size() != events_a.size() || times_b.size() != events_b.size())
        throw ValidationError("log_rank: time/event size mismatch");

    std::vector<double> event_times;
    for (size_t i = 0; i < times_a.size(); ++i)
        if (events_a[i]) event_times.push_back(times_a[i]);
    for (size_t i = 0; i < times_b.size(); ++i)
        if (events_b[i]) event_times.push_back(times_b[i]);
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

    double u = 0.0, v = 0.0;
    for (double t : event_times) {
        int n1 = 0, n2 = 0, d1 = 0, d2 = 0;
        for (size_t i = 0; i < times_a.size(); ++i) {
            if (times_a[i] >= t) ++n1;
            if (events_a[i] && times_a[i] == t) ++d1;
        }
        for (size_t i = 0; i < times_b.size(); ++i) {
            if (times_b[i] >= t) ++n2;
            if (events_b[i] && times_b[i] == t) ++d2;
        }
        const double n = n1 + n2;
        const double d = d1 + d2;
        if (n <= 1.0) continue;
        u += d1 - n1 * d / n;
        v += (n1 / n) * (n2 / n) * d * (n - d) / (n - 1.0);
    }

    LogRankResult r;
    if (v > 0.0) {
        r.chi_square = u * u / v;
        r.p_value = std::erfc(std::sqrt(r.chi_square / 2.0));
    } else {
        r.chi_square = 0.0;
        r.p_value = 1.0;
    }
    return r;
}

RiskPartition partition_by_risk(const CoxModel& model, const SurvivalData& data) {
    data.validate();
    const size_t n = data.n();
    if (n < 2) throw ValidationError("partition_by_risk: need at least two subjects");

    std::vector<double> eta(n);
    for (size_t i = 0; i < n; ++i) eta[i] = model.linear_predictor(data.covariates[i]);

    const auto [mn, mx] = std::minmax_element(eta.begin(), eta.end());
    if (*mx - *mn < 1e-12)
        throw ComputeError("partition_by_risk: all linear predictors equal, degenerate split");

    std::vector<double> sorted = eta;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    RiskPartition part;
    part.threshold = median;
    part.group.resize(n);
    std::vector<double> t_low, t_high;
    std::vector<uint8_t> e_low, e_high;
    for (size_t i = 0; i < n; ++i) {
        const bool high = eta[i] > median;  // ties stay in the low-risk group
        part.group[i] = high ? 1 : 0;
        (high ? t_high : t_low).push_back(data.times[i]);
        (high ? e_high : e_low).push_back(data.events[i]);
    }
    if (t_low.empty() || t_high.empty())
        throw ComputeError("partition_by_risk: median split left one group empty");

    part.low_curve = km_curve(t_low, e_low);
    part.high_curve = km_curve(t_high, e_high);
    part.test = log_rank(t_low, e_low, t_high, e_high);
    return part;
}

void write_km_csv(const KmCurve& curve, const std::string& path) {
    std::ostringstream out;
    out << "time,survival,at_risk,events\n";
    for (size_t i = 0; i < curve.times.size(); ++i)
        out << curve.times[i] << "," << curve.survival[i] << "," << curve.at_risk[i] << ","
            << curve.events[i] << "\n";
    atomic_write_file(path, out.str());
}

}  // namespace qct
