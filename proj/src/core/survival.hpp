#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qct {

// Per-subject outcome plus named covariates, in column-major style.
struct SurvivalData {
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::string> covariate_names;
    std::vector<std::vector<double>> covariates;  // rows = subjects

    size_t n() const { return times.size(); }
    void validate() const;
};

struct CoxModel {
    std::vector<std::string> covariate_names;
    std::vector<double> beta;        // standardized-covariate scale
    std::vector<double> beta_raw;    // original covariate units
    std::vector<double> col_mean, col_scale;
    std::vector<double> log_likelihood_trace;  // penalized, non-decreasing
    double lambda = 0.1;
    int iterations = 0;
    bool converged = false;

    // linear predictor in standardized space; differences are
    // shift-invariant in the raw covariates
    double linear_predictor(const std::vector<double>& raw_row) const;
};

// Ridge-penalized Breslow partial likelihood; Newton with step halving.
CoxModel fit_cox(const SurvivalData& data, double lambda = 0.1);

// Penalized log partial likelihood with analytic gradient and Hessian at
// beta (standardized covariates supplied by the caller). Exposed so tests
// can probe the derivatives directly.
double cox_log_likelihood(const std::vector<double>& times, const std::vector<uint8_t>& events,
                          const std::vector<std::vector<double>>& z, const std::vector<double>& beta,
                          double lambda, std::vector<double>* grad_out,
                          std::vector<double>* hessian_out /* d*d row-major */);

// Harrell concordance: pairs with t_i < t_j and event_i, ties in score = 1/2.
double c_statistic(const std::vector<double>& risk_scores, const std::vector<double>& times,
                   const std::vector<uint8_t>& events);

struct ScreenEntry {
    std::string name;
    double cv_c = 0.0;
    bool ok = false;
    std::string error;  // set when the per-feature fit failed
};

// Per-feature univariable Cox with K-fold cross validation; ranked by CV
// concordance, ties broken by name.
std::vector<ScreenEntry> univariable_screen(const SurvivalData& data, int folds, uint64_t seed,
                                            double lambda = 0.1);

struct KmCurve {
    std::vector<double> times;      // distinct event times, ascending
    std::vector<double> survival;   // S after each time
    std::vector<int> at_risk;
    std::vector<int> events;
};

KmCurve km_curve(const std::vector<double>& times, const std::vector<uint8_t>& events);

struct LogRankResult {
    double chi_square = 0.0;
    double p_value = 1.0;
};

LogRankResult log_rank(const std::vector<double>& times_a, const std::vector<uint8_t>& events_a,
                       const std::vector<double>& times_b, const std::vector<uint8_t>& events_b);

struct RiskPartition {
    std::vector<int> group;  // 0 = low risk, 1 = high risk
    double threshold = 0.0;  // median linear predictor
    KmCurve low_curve, high_curve;
    LogRankResult test;
};

// Median split of the linear predictor (ties go low); degenerate when all
// predictors are equal.
RiskPartition partition_by_risk(const CoxModel& model, const SurvivalData& data);

void write_km_csv(const KmCurve& curve, const std::string& path);

}  // namespace qct
