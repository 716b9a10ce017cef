#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "oracles.hpp"
#include "rng.hpp"
#include "survival.hpp"

using namespace qct;

namespace {

SurvivalData make_data(const std::vector<double>& times, const std::vector<uint8_t>& events,
                       const std::vector<std::vector<double>>& covs,
                       std::vector<std::string> names = {}) {
    SurvivalData d;
    d.times = times;
    d.events = events;
    d.covariates = covs;
    if (names.empty())
        for (size_t j = 0; j < (covs.empty() ? 0 : covs[0].size()); ++j)
            names.push_back("x" + std::to_string(j));
    d.covariate_names = names;
    return d;
}

// planted two-group exponential cohort for the log-rank power studies
void simulate_groups(Rng& rng, double hazard_ratio, int n_per_group, std::vector<double>& ta,
                     std::vector<uint8_t>& ea, std::vector<double>& tb, std::vector<uint8_t>& eb) {
    ta.clear();
    ea.clear();
    tb.clear();
    eb.clear();
    const double censor_at = 1500.0;
    for (int i = 0; i < n_per_group; ++i) {
        const double t1 = rng.exponential(1e-3);
        ta.push_back(std::min(t1, censor_at));
        ea.push_back(t1 <= censor_at ? 1 : 0);
        const double t2 = rng.exponential(1e-3 * hazard_ratio);
        tb.push_back(std::min(t2, censor_at));
        eb.push_back(t2 <= censor_at ? 1 : 0);
    }
}

}  // namespace

TEST_CASE("two-subject fit matches a grid search of the penalized likelihood") {
    // exposed subject dies first; the other is censored later
    const auto data = make_data({1.0, 2.0}, {1, 0}, {{1.0}, {0.0}});
    const double lambda = 0.1;
    const CoxModel model = fit_cox(data, lambda);

    // the same objective on the standardized covariate, swept over a grid
    const std::vector<std::vector<double>> z = {{1.0}, {-1.0}};  // mean .5, sigma .5
    double best_beta = 0.0, best_ll = -1e300;
    for (double b = -10.0; b <= 10.0; b += 1e-4) {
        const double ll = oracle::cox_log_likelihood(data.times, data.events, z, {b}, lambda);
        if (ll > best_ll) {
            best_ll = ll;
            best_beta = b;
        }
    }
    CHECK(std::abs(model.beta[0] - best_beta) < 1e-3);
    CHECK(model.converged);
}

TEST_CASE("library likelihood value agrees with the direct-definition oracle") {
    Rng rng(1);
    const size_t n = 25;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> z;
    for (size_t i = 0; i < n; ++i) {
        times.push_back(std::round(rng.exponential(1e-3)));
        events.push_back(rng.next_double() < 0.7 ? 1 : 0);
        z.push_back({rng.normal(), rng.normal()});
    }
    events[0] = 1;
    const std::vector<double> beta = {0.4, -0.7};
    const double got = cox_log_likelihood(times, events, z, beta, 0.1, nullptr, nullptr);
    const double want = oracle::cox_log_likelihood(times, events, z, beta, 0.1);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("analytic gradient and hessian match central finite differences") {
    Rng rng(2);
    const size_t n = 30;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> z;
    for (size_t i = 0; i < n; ++i) {
        times.push_back(std::round(rng.exponential(1e-3)));
        events.push_back(rng.next_double() < 0.6 ? 1 : 0);
        z.push_back({rng.normal(), rng.normal(), rng.normal()});
    }
    events[0] = 1;
    const std::vector<double> beta = {0.3, -0.2, 0.5};
    const double lambda = 0.1;

    std::vector<double> grad, hess;
    cox_log_likelihood(times, events, z, beta, lambda, &grad, &hess);

    const double h = 1e-6;
    for (size_t j = 0; j < beta.size(); ++j) {
        auto up = beta, down = beta;
        up[j] += h;
        down[j] -= h;
        const double fd =
            (cox_log_likelihood(times, events, z, up, lambda, nullptr, nullptr) -
             cox_log_likelihood(times, events, z, down, lambda, nullptr, nullptr)) /
            (2 * h);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6));

        std::vector<double> gu, gd;
        cox_log_likelihood(times, events, z, up, lambda, &gu, nullptr);
        cox_log_likelihood(times, events, z, down, lambda, &gd, nullptr);
        for (size_t k = 0; k < beta.size(); ++k) {
            const double fd2 = (gu[k] - gd[k]) / (2 * h);
            if (std::abs(fd2) > 1e-4)
                CHECK(hess[j * beta.size() + k] == doctest::Approx(fd2).epsilon(1e-5));
        }
    }
}

TEST_CASE("permuted covariates fit smaller coefficients than the planted one") {
    Rng rng(3);
    const size_t n = 40;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        const double rate = 1e-3 * std::exp(1.2 * x);
        times.push_back(rng.exponential(rate));
        events.push_back(1);
        covs.push_back({x});
    }
    const auto planted = fit_cox(make_data(times, events, covs), 0.1);
    const double planted_beta = std::abs(planted.beta[0]);

    std::vector<double> permuted_betas;
    std::vector<std::vector<double>> shuffled = covs;
    for (int perm = 0; perm < 200; ++perm) {
        rng.shuffle(shuffled);
        permuted_betas.push_back(
            std::abs(fit_cox(make_data(times, events, shuffled), 0.1).beta[0]));
    }
    std::sort(permuted_betas.begin(), permuted_betas.end());
    CHECK(permuted_betas[100] < planted_beta);
}

TEST_CASE("shifting a covariate moves neither beta nor risk-score differences") {
    Rng rng(4);
    const size_t n = 30;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < n; ++i) {
        times.push_back(rng.exponential(1e-3));
        events.push_back(rng.next_double() < 0.7 ? 1 : 0);
        covs.push_back({rng.normal(), rng.normal()});
    }
    events[0] = 1;
    const auto base = fit_cox(make_data(times, events, covs), 0.1);

    auto shifted_covs = covs;
    for (auto& row : shifted_covs) row[0] += 1234.5;
    const auto shifted = fit_cox(make_data(times, events, shifted_covs), 0.1);

    for (size_t j = 0; j < 2; ++j)
        CHECK(shifted.beta_raw[j] == doctest::Approx(base.beta_raw[j]).epsilon(1e-8));
    const double d_base =
        base.linear_predictor(covs[0]) - base.linear_predictor(covs[1]);
    const double d_shift =
        shifted.linear_predictor(shifted_covs[0]) - shifted.linear_predictor(shifted_covs[1]);
    CHECK(d_shift == doctest::Approx(d_base).epsilon(1e-8));
}

TEST_CASE("scaling a covariate by c scales its raw beta by 1/c") {
    Rng rng(5);
    const size_t n = 30;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < n; ++i) {
        times.push_back(rng.exponential(1e-3));
        events.push_back(rng.next_double() < 0.7 ? 1 : 0);
        covs.push_back({rng.normal()});
    }
    events[0] = 1;
    const auto base = fit_cox(make_data(times, events, covs), 0.1);

    const double c = 7.25;
    auto scaled_covs = covs;
    for (auto& row : scaled_covs) row[0] *= c;
    const auto scaled = fit_cox(make_data(times, events, scaled_covs), 0.1);
    CHECK(scaled.beta_raw[0] == doctest::Approx(base.beta_raw[0] / c).epsilon(1e-6));

    // linear-predictor ranks are untouched
    std::vector<double> eta_base(n), eta_scaled(n);
    for (size_t i = 0; i < n; ++i) {
        eta_base[i] = base.linear_predictor(covs[i]);
        eta_scaled[i] = scaled.linear_predictor(scaled_covs[i]);
    }
    for (size_t i = 1; i < n; ++i)
        CHECK((eta_base[i] > eta_base[0]) == (eta_scaled[i] > eta_scaled[0]));
}

TEST_CASE("monotone likelihood without a ridge raises the separation error") {
    // perfectly concordant: higher covariate always dies earlier
    const size_t n = 10;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < n; ++i) {
        covs.push_back({static_cast<double>(i)});
        times.push_back(static_cast<double>(n - i));
        events.push_back(1);
    }
    try {
        fit_cox(make_data(times, events, covs), 0.0);
        FAIL("expected separation error");
    } catch (const ComputeError& e) {
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
    // the default ridge tames the same data
    const auto model = fit_cox(make_data(times, events, covs), 0.1);
    CHECK(model.converged);
}

TEST_CASE("cox rejects event-free samples and constant covariates") {
    CHECK_THROWS_AS(fit_cox(make_data({1, 2}, {0, 0}, {{0.0}, {1.0}}), 0.1), ValidationError);
    CHECK_THROWS_AS(fit_cox(make_data({1, 2}, {1, 0}, {{3.0}, {3.0}}), 0.1), ValidationError);
}

TEST_CASE("likelihood trace is non-decreasing under step halving") {
    Rng rng(6);
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < 35; ++i) {
        const double x = rng.normal();
        times.push_back(rng.exponential(1e-3 * std::exp(0.8 * x)));
        events.push_back(rng.next_double() < 0.8 ? 1 : 0);
        covs.push_back({x, rng.normal()});
    }
    events[0] = 1;
    const auto model = fit_cox(make_data(times, events, covs), 0.1);
    for (size_t i = 1; i < model.log_likelihood_trace.size(); ++i)
        CHECK(model.log_likelihood_trace[i] >= model.log_likelihood_trace[i - 1] - 1e-12);
}

TEST_CASE("c-statistic trivial values") {
    // risk order matches death order exactly, no censoring
    const std::vector<double> times = {1, 2, 3, 4};
    const std::vector<uint8_t> events = {1, 1, 1, 1};
    CHECK(c_statistic({4, 3, 2, 1}, times, events) == 1.0);
    CHECK(c_statistic({1, 1, 1, 1}, times, events) == 0.5);
}

TEST_CASE("c-statistic matches the pair-enumeration oracle exactly") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 30;
        std::vector<double> times, risk;
        std::vector<uint8_t> events;
        for (size_t i = 0; i < n; ++i) {
            times.push_back(static_cast<double>(1 + rng.next_below(40)));  // ties likely
            events.push_back(rng.next_double() < 0.7 ? 1 : 0);
            risk.push_back(static_cast<double>(rng.next_below(6)));  // score ties likely
        }
        events[0] = 1;
        times[0] = 0.5;  // guarantees a comparable pair
        CHECK(c_statistic(risk, times, events) == oracle::c_statistic(risk, times, events));
    }
}

TEST_CASE("c-statistic rejects data with no comparable pairs") {
    CHECK_THROWS_AS(c_statistic({1, 2}, {5, 5}, {1, 1}), ComputeError);
    CHECK_THROWS_AS(c_statistic({1, 2}, {1, 2}, {0, 0}), ComputeError);
}

TEST_CASE("c-statistic is invariant under monotone transforms of risk") {
    Rng rng(8);
    std::vector<double> times, risk;
    std::vector<uint8_t> events;
    for (size_t i = 0; i < 25; ++i) {
        times.push_back(rng.exponential(1e-2));
        events.push_back(rng.next_double() < 0.8 ? 1 : 0);
        risk.push_back(rng.normal());
    }
    events[0] = 1;
    const double base = c_statistic(risk, times, events);
    std::vector<double> warped(risk.size());
    for (size_t i = 0; i < risk.size(); ++i) warped[i] = std::tanh(risk[i]) * 10 + 100;
    CHECK(c_statistic(warped, times, events) == base);
}

TEST_CASE("screening ranks a perfect hazard proxy first with high CV concordance") {
    Rng rng(9);
    const size_t n = 36;
    SurvivalData data;
    data.covariate_names = {"noise_a", "planted", "noise_b"};
    for (size_t i = 0; i < n; ++i) {
        const double t = rng.exponential(1e-3);
        data.times.push_back(t);
        data.events.push_back(1);  // uncensored cohort
        data.covariates.push_back({rng.normal(), -t, rng.normal()});
    }
    const auto entries = univariable_screen(data, 4, 5);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].name == "planted");
    CHECK(entries[0].ok);
    CHECK(entries[0].cv_c >= 0.9);
}

TEST_CASE("pure-noise features screen near chance across 20 seeds") {
    Rng rng(33);
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        const size_t n = 40;
        SurvivalData data;
        data.covariate_names = {"noise"};
        for (size_t i = 0; i < n; ++i) {
            data.times.push_back(rng.exponential(1e-3));
            data.events.push_back(rng.next_double() < 0.75 ? 1 : 0);
            data.covariates.push_back({rng.normal()});
        }
        data.events[0] = 1;
        const auto entries = univariable_screen(data, 4, seed);
        REQUIRE(entries.size() == 1);
        if (entries[0].ok) {
            CHECK(entries[0].cv_c >= 0.35);
            CHECK(entries[0].cv_c <= 0.65);
        }
    }
}

TEST_CASE("identical features tie and break by name") {
    Rng rng(11);
    const size_t n = 30;
    SurvivalData data;
    data.covariate_names = {"zeta", "alpha"};
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        data.times.push_back(rng.exponential(1e-3 * std::exp(0.5 * x)));
        data.events.push_back(1);
        data.covariates.push_back({x, x});
    }
    const auto entries = univariable_screen(data, 3, 2);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].cv_c == entries[1].cv_c);
    CHECK(entries[0].name == "alpha");
    CHECK(entries[1].name == "zeta");
}

TEST_CASE("screening records per-feature failures without dying") {
    SurvivalData data;
    data.covariate_names = {"constant", "ok"};
    Rng rng(12);
    for (size_t i = 0; i < 20; ++i) {
        data.times.push_back(rng.exponential(1e-3));
        data.events.push_back(1);
        data.covariates.push_back({5.0, rng.normal()});
    }
    const auto entries = univariable_screen(data, 4, 3);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].name == "ok");
    CHECK(entries[0].ok);
    CHECK(!entries[1].ok);
    CHECK(!entries[1].error.empty());
}

TEST_CASE("the hand-computed three-subject KM curve") {
    const KmCurve c = km_curve({1, 2, 3}, {1, 1, 0});
    REQUIRE(c.times.size() == 2);
    CHECK(c.times[0] == 1.0);
    CHECK(c.survival[0] == doctest::Approx(2.0 / 3.0));
    CHECK(c.times[1] == 2.0);
    CHECK(c.survival[1] == doctest::Approx(1.0 / 3.0));
    CHECK(c.at_risk[0] == 3);
    CHECK(c.at_risk[1] == 2);
    CHECK(c.events[0] == 1);
    CHECK(c.events[1] == 1);
}

TEST_CASE("KM with no censoring equals the empirical survival function") {
    Rng rng(13);
    std::vector<double> times;
    for (int i = 0; i < 25; ++i) times.push_back(static_cast<double>(1 + rng.next_below(15)));
    const std::vector<uint8_t> events(times.size(), 1);
    const KmCurve c = km_curve(times, events);
    for (size_t i = 0; i < c.times.size(); ++i) {
        const double empirical =
            static_cast<double>(std::count_if(times.begin(), times.end(),
                                              [&](double t) { return t > c.times[i]; })) /
            static_cast<double>(times.size());
        CHECK(c.survival[i] == doctest::Approx(empirical).epsilon(1e-12));
    }
}

TEST_CASE("KM curve matches the from-scratch oracle with ties and censoring") {
    Rng rng(14);
    std::vector<double> times;
    std::vector<uint8_t> events;
    for (int i = 0; i < 40; ++i) {
        times.push_back(static_cast<double>(1 + rng.next_below(12)));
        events.push_back(rng.next_double() < 0.7 ? 1 : 0);
    }
    events[0] = 1;
    const KmCurve c = km_curve(times, events);
    const auto want = oracle::km_points(times, events);
    REQUIRE(c.times.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(c.times[i] == want[i].first);
        CHECK(c.survival[i] == doctest::Approx(want[i].second).epsilon(1e-12));
    }
    // survival starts below one and never increases
    double prev = 1.0;
    for (double s : c.survival) {
        CHECK(s <= prev + 1e-12);
        CHECK(s >= 0.0);
        prev = s;
    }
}

TEST_CASE("identical groups give chi-square zero and p one") {
    const std::vector<double> t = {1, 3, 5, 7, 9};
    const std::vector<uint8_t> e = {1, 1, 0, 1, 0};
    const auto r = log_rank(t, e, t, e);
    CHECK(r.chi_square == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("log-rank rejects empty groups") {
    CHECK_THROWS_AS(log_rank({}, {}, {1}, {1}), ValidationError);
}

TEST_CASE("hazard ratio 4 is detected in at least 80 of 100 seeded cohorts") {
    int significant = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(hash_mix(seed, 0x104a4));
        std::vector<double> ta, tb;
        std::vector<uint8_t> ea, eb;
        simulate_groups(rng, 4.0, 20, ta, ea, tb, eb);
        if (log_rank(ta, ea, tb, eb).p_value < 0.05) ++significant;
    }
    CHECK(significant >= 80);
}

TEST_CASE("null cohorts stay below a 10% false-positive rate over 100 seeds") {
    int significant = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(hash_mix(seed, 0x9e11));
        std::vector<double> ta, tb;
        std::vector<uint8_t> ea, eb;
        simulate_groups(rng, 1.0, 20, ta, ea, tb, eb);
        if (log_rank(ta, ea, tb, eb).p_value < 0.05) ++significant;
    }
    CHECK(significant <= 10);
}

TEST_CASE("risk partition separates a reversed-time predictor sharply") {
    Rng rng(15);
    const size_t n = 40;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<std::vector<double>> covs;
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        times.push_back(rng.exponential(1e-3 * std::exp(1.5 * x)));
        events.push_back(1);
        covs.push_back({x});
    }
    const auto data = make_data(times, events, covs);
    const auto model = fit_cox(data, 0.1);
    const auto part = partition_by_risk(model, data);

    // the high-risk group dies earlier on average
    double mean_low = 0, mean_high = 0;
    int n_low = 0, n_high = 0;
    for (size_t i = 0; i < n; ++i) {
        if (part.group[i] == 1) {
            mean_high += times[i];
            ++n_high;
        } else {
            mean_low += times[i];
            ++n_low;
        }
    }
    CHECK(n_low + n_high == static_cast<int>(n));
    CHECK(n_low >= static_cast<int>(n) / 2);  // median ties stay low
    CHECK(mean_high / n_high < mean_low / n_low);

    // and the split is far more significant than a label-shuffled split
    std::vector<int> shuffled = part.group;
    Rng perm_rng(99);
    perm_rng.shuffle(shuffled);
    std::vector<double> t_lo, t_hi;
    std::vector<uint8_t> e_lo, e_hi;
    for (size_t i = 0; i < n; ++i) {
        (shuffled[i] ? t_hi : t_lo).push_back(times[i]);
        (shuffled[i] ? e_hi : e_lo).push_back(events[i]);
    }
    const double shuffled_p = log_rank(t_lo, e_lo, t_hi, e_hi).p_value;
    CHECK(part.test.p_value < shuffled_p);
    CHECK(part.test.p_value < 0.05);
}

TEST_CASE("equal predictors cannot be partitioned") {
    const auto data = make_data({1, 2, 3, 4}, {1, 1, 1, 0}, {{1.0}, {2.0}, {3.0}, {4.0}});
    CoxModel flat;
    flat.covariate_names = {"x0"};
    flat.beta = {0.0};
    flat.beta_raw = {0.0};
    flat.col_mean = {2.5};
    flat.col_scale = {1.0};
    CHECK_THROWS_AS(partition_by_risk(flat, data), ComputeError);
}
