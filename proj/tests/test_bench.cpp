#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stable_stein/bench.hpp"

using namespace stable_stein;

namespace {

const DensityTable& table15() {
    static const DensityTable t = DensityTable::build(StableParams(1.5, 1.0, 0.0));
    return t;
}

std::vector<double> stable_sample(std::size_t n, std::uint64_t seed) {
    StableSampler smp(StableParams(1.5, 1.0, 0.0));
    rng::Stream s(seed);
    std::vector<double> xs(n);
    for (auto& x : xs) x = smp(s);
    std::sort(xs.begin(), xs.end());
    return xs;
}

ExperimentPlan small_plan() {
    ExperimentPlan p;
    p.law.family = "pareto";
    p.law.alpha = 1.5;
    p.n_grid = {4, 16, 64};
    p.replications = 6;
    p.batch_size = 400;
    p.seed = 99;
    return p;
}

}  // namespace

TEST(PartialSum, SingleTermIsScaledDraw) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    rng::Stream a(5), b(5);
    const double s = simulate_partial_sum(L, 1, a);
    EXPECT_DOUBLE_EQ(s, L.draw(b) / L.sigma());
    EXPECT_THROW(simulate_partial_sum(L, 0, a, SumNormalization{}), InvalidParameter);
}

TEST(PartialSum, CenteredBySubtractingTheMean) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.5);
    const double mean = L.moments().mean;
    ASSERT_GT(mean, 1.0);
    const std::uint64_t n = 1024;
    const auto nz = sum_normalization(L, n, mean);
    rng::Stream s(17);
    const int m = 10000;
    std::vector<double> v(m);
    for (auto& x : v) x = simulate_partial_sum(L, n, s, nz);
    const double avg = std::accumulate(v.begin(), v.end(), 0.0) / m;
    double ss = 0.0;
    for (double x : v) ss += (x - avg) * (x - avg);
    EXPECT_LT(std::abs(avg), 4.0 * std::sqrt(ss / (m - 1) / m));
}

TEST(PartialSum, SlowlyVaryingLawUsesGammaN) {
    const SlowVaryLaw L(1.5);
    const std::uint64_t n = static_cast<std::uint64_t>(std::ceil(std::exp(1.5)));
    const auto nz = sum_normalization(L, n);
    EXPECT_DOUBLE_EQ(nz.scale, L.sigma() * gamma_n_solve(1.5, double(n)));
    EXPECT_EQ(nz.shift, 0.0);
    EXPECT_NEAR(gamma_n_solve(1.5, std::exp(1.5)), std::numbers::e, 1e-12);
}

TEST(PartialSum, CompensatedSumKeepsSmallTerms) {
    CompensatedSum c;
    c.add(1e16);
    for (int i = 0; i < 1000; ++i) c.add(1.0);
    c.add(-1e16);
    EXPECT_EQ(c.value(), 1000.0);
}

TEST(EmpiricalWasserstein, QuantileStratifiedSampleConverges) {
    const auto& t = table15();
    auto strat = [&](std::size_t n) {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = t.quantile((i + 0.5) / n);
        return empirical_wasserstein(xs, t).estimate;
    };
    const double e3 = strat(1000), e4 = strat(10000);
    // dominated by the mass beyond the extreme order statistics, of order n^{1/alpha - 1}
    EXPECT_LT(e3, 2.0 * std::pow(1000.0, 1 / 1.5 - 1));
    EXPECT_NEAR(std::log(e4 / e3) / std::log(10.0), 1 / 1.5 - 1, 0.05);
}

TEST(EmpiricalWasserstein, LocationShift) {
    const auto& t = table15();
    auto xs = stable_sample(100000, 3);
    const double base = empirical_wasserstein(xs, t).estimate;
    for (auto& x : xs) x += 0.7;
    const double shifted = empirical_wasserstein(xs, t).estimate;
    // triangle inequality: the shift moves the distance by at most the unshifted distance
    EXPECT_LE(std::abs(shifted - 0.7), base + 1e-12);
    EXPECT_NEAR(shifted, 0.7, 0.1);
}

TEST(EmpiricalWasserstein, SinglePointIsMeanAbsoluteDeviation) {
    const auto& t = table15();
    const double q = t.quantile(0.5);
    boost::math::quadrature::exp_sinh<double> es;
    const double oracle = es.integrate([&](double u) { return u * t.pdf(q + u); }, 1e-12) +
                          es.integrate([&](double u) { return u * t.pdf(q - u); }, 1e-12);
    EXPECT_NEAR(empirical_wasserstein({q}, t).estimate, oracle, 1e-6);
}

TEST(EmpiricalWasserstein, Errors) {
    const auto& t = table15();
    EXPECT_THROW(empirical_wasserstein({}, t), EmptySample);
    EXPECT_THROW(empirical_wasserstein({2.0, 1.0}, t), InvalidParameter);
    EXPECT_THROW(empirical_wasserstein({1.0}, t, StableParams(1.6, 1.0, 0.0)), TableMismatch);
}

TEST(EmpiricalWasserstein, DecreasesWithSampleSize) {
    const auto& t = table15();
    std::vector<double> med;
    for (std::size_t n : {100, 1000, 10000}) {
        std::vector<double> v;
        for (int r = 0; r < 20; ++r) v.push_back(empirical_wasserstein(stable_sample(n, 1000 + r * 7 + n), t).estimate);
        std::nth_element(v.begin(), v.begin() + 10, v.end());
        med.push_back(v[10]);
    }
    EXPECT_GT(med[0], med[1]);
    EXPECT_GT(med[1], med[2]);
}

TEST(PooledEstimator, MatchesExactDistanceForSingleTerms) {
    // n = 1: S = X / sigma, whose distance to the target is a one-dimensional integral
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    const auto& t = table15();
    const double sg = L.sigma();
    std::vector<std::vector<SumRecord>> reps(20);
    const SumNormalization nz{sg, 0.0};
    for (std::size_t r = 0; r < reps.size(); ++r) {
        rng::Stream s(rng::stream_key(4, {r}));
        for (int i = 0; i < 5000; ++i) reps[r].push_back(simulate_record(L, 1, s, nz));
    }
    const auto est = pooled_conditional_wasserstein(reps, L, 1, nz, t, EstimatorSettings{});
    auto gap = [&](double x) { return std::abs(L.cdf(sg * x) - t.cdf(x)); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double exact = 0.0;
    const std::vector<double> br{-1e4, -100, -10, -1 / sg, 0.0, 1 / sg, 10, 100, 1e4};
    for (std::size_t i = 0; i + 1 < br.size(); ++i) exact += GK::integrate(gap, br[i], br[i + 1], 20, 1e-10);
    EXPECT_GT(est.stderr_jackknife, 0.0);
    EXPECT_NEAR(est.estimate, exact, 4 * est.stderr_jackknife + 2e-3);
    EXPECT_NEAR(est.estimate, est.bulk + est.upper_tail + est.lower_tail, 1e-15);
}

TEST(PooledEstimator, ConditionalTailAgreesWithEmpiricalTail) {
    const auto L = NormalAttractionLaw::two_power(1.5, 1.8, 0.25, 0.3);
    const std::uint64_t n = 8;
    const auto nz = sum_normalization(L, n, L.moments().mean);
    rng::Stream s(8);
    std::vector<SumRecord> recs(200000);
    for (auto& r : recs) r = simulate_record(L, n, s, nz);
    for (double y : {2.0, 5.0}) {
        double cond = 0.0, emp = 0.0;
        for (const auto& r : recs) {
            cond += L.tail_upper(std::max(r.rest_max, nz.scale * y + nz.shift - r.rest));
            emp += r.s > y ? 1.0 : 0.0;
        }
        cond *= double(n) / recs.size();
        emp /= recs.size();
        EXPECT_NEAR(cond, emp, 4 * std::sqrt(emp / recs.size()));
    }
}

TEST(FitRate, ExactPowerLaw) {
    std::vector<RatePoint> pts;
    for (int k = 8; k <= 15; ++k) {
        const double n = std::ldexp(1.0, k);
        pts.push_back({n, 5 * std::pow(n, -1.0 / 3), 0.01});
    }
    const auto f = fit_rate(pts);
    EXPECT_NEAR(f.slope, -1.0 / 3, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(5.0), 1e-10);
    EXPECT_LE(f.slope_ci_low, f.slope);
    EXPECT_GE(f.slope_ci_high, f.slope);
}

TEST(FitRate, LogFactorBiasesTheSlopeUpward) {
    std::vector<RatePoint> pts;
    for (int k = 10; k <= 13; ++k) {
        const double n = std::ldexp(1.0, k);
        pts.push_back({n, std::pow(n, -1.0 / 3) * std::log(n), 0.01 * std::pow(n, -1.0 / 3) * std::log(n)});
    }
    // equal relative errors: ordinary least squares in log-log coordinates
    double mx = 0, my = 0;
    for (auto& p : pts) mx += std::log(p.n) / 4, my += std::log(p.dw) / 4;
    double sxy = 0, sxx = 0;
    for (auto& p : pts) sxy += (std::log(p.n) - mx) * (std::log(p.dw) - my), sxx += (std::log(p.n) - mx) * (std::log(p.n) - mx);
    const auto f = fit_rate(pts);
    EXPECT_NEAR(f.slope, sxy / sxx, 1e-12);
    EXPECT_GT(f.slope, -1.0 / 3);
}

TEST(FitRate, ConstantAndErrors) {
    const auto f = fit_rate({{100, 0.2, 0.01}, {200, 0.2, 0.02}, {400, 0.2, 0.01}});
    EXPECT_NEAR(f.slope, 0.0, 1e-14);
    EXPECT_THROW(fit_rate({{100, 0.2, 0.01}, {100, 0.3, 0.01}, {200, 0.1, 0.01}}), InsufficientPoints);
    EXPECT_THROW(fit_rate({{100, 0.2, 0.0}, {200, 0.3, 0.01}, {400, 0.1, 0.01}}), InvalidParameter);
}

TEST(Experiment, PlanValidation) {
    auto p = small_plan();
    EXPECT_NO_THROW(p.validate());
    p.n_grid = {64, 64, 64};
    EXPECT_THROW(run_rate_experiment(p), InvalidPlan);
    p = small_plan();
    p.replications = 1;
    EXPECT_THROW(p.validate(), InvalidPlan);
    p = small_plan();
    p.law.family = "slowvary";
    p.n_grid = {2, 8, 32};
    EXPECT_THROW(p.validate(), InvalidPlan);
    p = small_plan();
    p.estimator.bulk_quantile = 0.7;
    EXPECT_THROW(p.validate(), InvalidPlan);
    EXPECT_THROW(ExperimentPlan::from_json({{"n_grid", {1, 2}}, {"colour", 3}}), InvalidPlan);
    const auto q = ExperimentPlan::from_json(small_plan().to_json());
    EXPECT_EQ(q.to_json(), small_plan().to_json());
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
    const auto p = small_plan();
    std::string ref;
    for (unsigned th : {1u, 3u, 8u}) {
        RunOptions o;
        o.threads = th;
        const auto rep = run_rate_experiment(p, o);
        const auto s = rep.to_json().dump();
        if (ref.empty())
            ref = s;
        else
            EXPECT_EQ(s, ref) << th;
    }
}

TEST(Experiment, ReportContents) {
    const auto rep = run_rate_experiment(small_plan());
    ASSERT_TRUE(rep.complete);
    ASSERT_EQ(rep.rows.size(), 3u);
    ASSERT_TRUE(rep.fit.has_value());
    EXPECT_LE(rep.fit->slope_ci_low, rep.fit->slope);
    EXPECT_GE(rep.fit->slope_ci_high, rep.fit->slope);
    for (const auto& r : rep.rows) {
        EXPECT_GT(r.dw_stderr, 0.0);
        ASSERT_TRUE(r.bound.has_value());
        EXPECT_TRUE(r.bound->applicable);
        EXPECT_LE(r.dw_mean - 3 * r.dw_stderr, r.bound->total);
    }
    const auto j = rep.to_json();
    EXPECT_EQ(j["format_version"], kReportFormatVersion);
    EXPECT_TRUE(j["rows"][0].contains("bound_components"));
    EXPECT_TRUE(j["fit"].contains("ci"));
    EXPECT_FALSE(j["warnings"].empty());  // fewer than 30 replications
    std::ostringstream os;
    rep.write_csv(os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "n,dw_mean,dw_stderr,tail_remainder,bound_total,term_I,term_II,term_III_IV");
}

TEST(Experiment, TailRemainderIsSmall) {
    auto p = small_plan();
    p.n_grid = {10000, 20000, 40000};
    p.replications = 2;
    p.batch_size = 300;
    const auto rep = run_rate_experiment(p);
    for (const auto& r : rep.rows) EXPECT_LE(r.tail_remainder, 0.05 * r.dw_mean);
}

TEST(Experiment, EmpiricalModeRuns) {
    auto p = small_plan();
    p.estimator.mode = EstimatorSettings::Mode::empirical;
    const auto rep = run_rate_experiment(p);
    for (const auto& r : rep.rows) {
        EXPECT_GT(r.dw_mean, 0.0);
        EXPECT_GT(r.dw_stderr, 0.0);
    }
}

TEST(Experiment, CancellationKeepsPartialRows) {
    std::atomic<bool> stop{false};
    RunOptions o;
    o.cancel = &stop;
    int calls = 0;
    o.on_row = [&](const RateReport& r) {
        ++calls;
        EXPECT_FALSE(r.rows.empty());
        stop = true;
    };
    const auto rep = run_rate_experiment(small_plan(), o);
    EXPECT_EQ(calls, 1);
    EXPECT_EQ(rep.rows.size(), 1u);
    EXPECT_FALSE(rep.complete);
    EXPECT_FALSE(rep.fit.has_value());
}

TEST(Experiment, SlowlyVaryingLawHasNoBound) {
    auto p = small_plan();
    p.law = LawSpec::from_json({{"family", "slowvary"}, {"alpha", 1.5}});
    p.n_grid = {8, 32, 128};
    const auto rep = run_rate_experiment(p);
    for (const auto& r : rep.rows) EXPECT_FALSE(r.bound.has_value());
    EXPECT_TRUE(rep.to_json()["rows"][0]["bound_total"].is_null());
}
