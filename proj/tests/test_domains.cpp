#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <numbers>

#include "stable_stein/domains.hpp"
#include "stable_stein/stats.hpp"

using namespace stable_stein;

namespace {

constexpr double kE = std::numbers::e;

double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// Independent moment oracle from the density of a law with tails
// (A y^{-alpha} + At y^{-alpha_t}) on y >= 1.
double two_power_frac_oracle(double alpha, double A, double at, double At, double beta, double m) {
    const double p = 2.0 - alpha;
    auto dens = [&](double y) { return alpha * A * std::pow(y, -alpha - 1) + at * At * std::pow(y, -at - 1); };
    auto side = [&](double sg, double w) {
        auto f = [&](double y) { return w * std::pow(std::abs(sg * y - m), p) * dens(y); };
        boost::math::quadrature::exp_sinh<double> es;
        const double split = std::max(1.0, std::abs(m) + 1.0);
        return gk(f, 1.0, split) + es.integrate([&](double t) { return f(split + t); }, 1e-13);
    };
    return side(1.0, 1.0 + beta) + side(-1.0, 1.0 - beta);
}

template <class Law>
void expect_ks_ok(const Law& law, const std::vector<double>& xs) {
    const double d = stats::ks_statistic(xs, [&](double x) { return law.cdf(x); });
    EXPECT_LT(d, stats::ks_critical_value(xs.size(), 0.999));
}

}  // namespace

TEST(NormalAttractionLaw, ParetoTailValue) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    EXPECT_NEAR(L.tail_upper(2.0), std::pow(2.0, -2.5), 1e-15);
    EXPECT_NEAR(L.tail_lower(-2.0), std::pow(2.0, -2.5), 1e-15);
    EXPECT_DOUBLE_EQ(L.tail_upper(0.3), 0.5);
    EXPECT_DOUBLE_EQ(L.cdf(0.3), 0.5);
}

TEST(NormalAttractionLaw, CdfIsContinuousAndMonotone) {
    std::vector<NormalAttractionLaw> laws{NormalAttractionLaw::pareto(1.3, 0.4),
                                          NormalAttractionLaw::two_power(1.5, 1.8, 0.25, -0.5),
                                          NormalAttractionLaw::trig_tail(1.7, 0.3, 0.2),
                                          NormalAttractionLaw::log_tail(1.2, 1.0, 0.0)};
    for (const auto& L : laws) {
        const double c = L.cutoff();
        EXPECT_NEAR(L.cdf(c * (1 + 1e-12)), 0.5 * (1 - L.beta()), 1e-10);
        EXPECT_NEAR(L.cdf(-c * (1 + 1e-12)), 0.5 * (1 - L.beta()), 1e-10);
        double prev = 0.0;
        for (double x = -200.0; x <= 200.0; x += 0.01) {
            const double F = L.cdf(x);
            EXPECT_GE(F, prev - 1e-15);
            EXPECT_NEAR(F + L.tail_upper(x), 1.0, 1e-14);
            prev = F;
        }
    }
}

TEST(NormalAttractionLaw, FamilyConstants) {
    const auto L2 = NormalAttractionLaw::two_power(1.5, 1.8, 0.1, 0.0);
    EXPECT_DOUBLE_EQ(L2.A(), 0.4);
    EXPECT_DOUBLE_EQ(L2.K(), 0.4);
    EXPECT_NEAR(L2.gamma(), 0.3, 1e-15);
    const auto L3 = NormalAttractionLaw::trig_tail(1.5, 0.2, 0.0);
    EXPECT_NEAR(L3.A(), 0.5 - 0.2 * std::sin(1.0), 1e-16);
    EXPECT_DOUBLE_EQ(L3.gamma(), 1.0);
    EXPECT_FALSE(L3.ultimately_monotone());
    EXPECT_THROW(L3.monotone_from(), NotUltimatelyMonotone);
    const auto L4 = NormalAttractionLaw::log_tail(1.5, 1.0, 0.0);
    EXPECT_NEAR(L4.A() + 1.0, 0.5 * std::exp(1.5), 1e-14);
    EXPECT_DOUBLE_EQ(L4.monotone_from(), kE);
    EXPECT_NEAR(L4.sigma(), sigma_from_A(1.5, L4.A()), 1e-15);
}

TEST(NormalAttractionLaw, InvalidParametersThrow) {
    EXPECT_THROW(NormalAttractionLaw::pareto(2.0, 0.0), OutOfRangeAlpha);
    EXPECT_THROW(NormalAttractionLaw::pareto(1.5, 1.2), InvalidParameter);
    EXPECT_THROW(NormalAttractionLaw::two_power(1.5, 1.4, 0.25, 0.0), InvalidFamilyParams);
    EXPECT_THROW(NormalAttractionLaw::two_power(1.5, 1.8, 0.5, 0.0), InvalidFamilyParams);
    EXPECT_THROW(NormalAttractionLaw::trig_tail(1.5, 10.0, 0.0), InvalidFamilyParams);
    EXPECT_THROW(NormalAttractionLaw::trig_tail(1.5, 0.45, 0.0), InvalidFamilyParams);  // alpha A < |B|
    EXPECT_THROW(NormalAttractionLaw::log_tail(1.5, 3.0, 0.0), InvalidFamilyParams);
    EXPECT_THROW(NormalAttractionLaw::log_tail(1.5, -0.1, 0.0), InvalidFamilyParams);
}

TEST(NormalAttractionLaw, CustomAuditsRejectBadLaws) {
    CustomLawSpec s;
    s.alpha = 1.5;
    s.A = 0.4;
    s.epsilon = [](double x) { return 0.1 / std::sqrt(std::abs(x)); };
    s.K = 0.4;
    s.gamma = 0.5;
    EXPECT_NO_THROW(NormalAttractionLaw::custom(s));
    auto bad_bound = s;
    bad_bound.K = 0.05;  // also fails inside the cutoff where |eps| = A
    EXPECT_THROW(NormalAttractionLaw::custom(bad_bound), InvalidFamilyParams);
    auto jump = s;
    jump.epsilon = [](double x) { return 0.2 / std::abs(x); };
    EXPECT_THROW(NormalAttractionLaw::custom(jump), InvalidFamilyParams);
    auto wiggly = s;
    wiggly.epsilon = [](double x) { return 0.1 * std::cos(5.0 * (std::abs(x) - 1.0)) / std::sqrt(std::abs(x)); };
    EXPECT_THROW(NormalAttractionLaw::custom(wiggly), InvalidFamilyParams);
    auto flat = s;
    flat.A = 0.3;
    flat.epsilon = [](double) { return 0.2; };
    EXPECT_THROW(NormalAttractionLaw::custom(flat), InvalidFamilyParams);
}

TEST(NormalAttractionLaw, CustomMatchesTwoPower) {
    const auto L2 = NormalAttractionLaw::two_power(1.4, 1.9, 0.2, 0.3);
    CustomLawSpec s;
    s.alpha = 1.4;
    s.A = 0.3;
    s.beta = 0.3;
    s.epsilon = [](double x) { return 0.2 * std::pow(std::abs(x), -0.5); };
    s.K = 0.3;
    s.gamma = 0.5;
    s.monotone_from = 1.0;
    const auto C = NormalAttractionLaw::custom(s);
    for (double x : {-30.0, -2.0, -0.5, 0.7, 1.0, 3.0, 1e4}) EXPECT_NEAR(C.cdf(x), L2.cdf(x), 1e-15);
    const auto m1 = C.moments(), m2 = L2.moments();
    EXPECT_NEAR(m1.mean, m2.mean, 1e-9);
    EXPECT_NEAR(m1.centered_frac_moment, m2.centered_frac_moment, 1e-9);
    EXPECT_NEAR(C.epsilon_integral(50.0), L2.epsilon_integral(50.0), 1e-9);
    // numerical inversion serves as the sampler for custom laws
    expect_ks_ok(C, C.sample(20000, 7));
}

TEST(NormalAttractionLaw, ParetoMoments) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    const auto m = L.moments();
    EXPECT_NEAR(m.mean, 0.0, 1e-12);
    EXPECT_NEAR(m.abs_mean, 3.0, 1e-10);
    EXPECT_NEAR(m.centered_frac_moment, 1.5, 1e-9);
    const auto Lb = NormalAttractionLaw::pareto(1.3, 0.6);
    const auto mb = Lb.moments();
    EXPECT_NEAR(mb.mean, 0.6 * 1.3 / 0.3, 1e-9);
    EXPECT_NEAR(mb.abs_mean, 1.3 / 0.3, 1e-9);
    EXPECT_NEAR(mb.centered_frac_moment, two_power_frac_oracle(1.3, 0.5, 1.9, 0.0, 0.6, mb.mean), 1e-7);
}

TEST(NormalAttractionLaw, TwoPowerMoments) {
    const double a = 1.5, at = 1.8, At = 0.25, beta = -0.3;
    const auto L = NormalAttractionLaw::two_power(a, at, At, beta);
    const auto m = L.moments();
    const double side = 1.0 + 2.0 * 0.25 / (a - 1) + 2.0 * At / (at - 1);
    EXPECT_NEAR(m.abs_mean, side, 1e-9);
    EXPECT_NEAR(m.mean, beta * side, 1e-9);
    EXPECT_NEAR(m.centered_frac_moment, two_power_frac_oracle(a, 0.25, at, At, beta, m.mean), 1e-7);
}

TEST(NormalAttractionLaw, TrigMomentsAgainstOscillatoryOracle) {
    const double a = 1.6, B = 0.3, beta = 0.4;
    const auto L = NormalAttractionLaw::trig_tail(a, B, beta);
    // integral of sin y / y^{a+1} on [1, inf): period-by-period plus the leading
    // integration-by-parts tail at T = 2 pi k where cos T = 1
    double osc = gk([&](double y) { return std::sin(y) * std::pow(y, -a - 1); }, 1.0, 2 * std::numbers::pi);
    const int periods = 4000;
    for (int k = 1; k < periods; ++k)
        osc += gk([&](double y) { return std::sin(y) * std::pow(y, -a - 1); }, 2 * std::numbers::pi * k,
                  2 * std::numbers::pi * (k + 1));
    const double T = 2 * std::numbers::pi * periods;
    osc += std::pow(T, -a - 1);
    const double I = L.A() / (a - 1) + B * osc;
    const auto m = L.moments();
    EXPECT_NEAR(m.abs_mean, 1.0 + 2.0 * I, 1e-8);
    EXPECT_NEAR(m.mean, beta * (1.0 + 2.0 * I), 1e-8);
    EXPECT_GT(m.centered_frac_moment, 0.0);
}

TEST(NormalAttractionLaw, LogTailMomentsUseExponentialIntegral) {
    const double a = 1.5, D = 1.0;
    const auto L = NormalAttractionLaw::log_tail(a, D, 0.0);
    const double side = L.A() * std::exp(1 - a) / (a - 1) + D * boost::math::expint(1, a - 1);
    const auto m = L.moments();
    EXPECT_NEAR(m.abs_mean, kE + 2 * side, 1e-8);
    EXPECT_NEAR(m.mean, 0.0, 1e-10);
}

TEST(NormalAttractionLaw, EpsilonSupAndIntegral) {
    const auto L1 = NormalAttractionLaw::pareto(1.5, 0.0);
    EXPECT_DOUBLE_EQ(L1.epsilon_sup(2.0), 0.0);
    EXPECT_DOUBLE_EQ(L1.epsilon_sup(0.5), 0.5);
    EXPECT_NEAR(L1.epsilon_integral(7.0), 2.0, 1e-10);  // 2 A / (2 - alpha)
    EXPECT_NEAR(L1.epsilon_integral(0.25), 2.0 * std::sqrt(0.25), 1e-10);
    EXPECT_THROW(L1.epsilon_integral(0.0), InvalidParameter);
    EXPECT_THROW(L1.epsilon_sup(-1.0), InvalidParameter);

    const auto L4 = NormalAttractionLaw::log_tail(1.5, 1.0, 0.0);
    EXPECT_NEAR(L4.epsilon_sup(10.0), 1.0 / std::log(10.0), 1e-15);
    const double R = 300.0;
    const double oracle = 2.0 * (L4.A() * std::pow(kE, 0.5) / 0.5 +
                                 gk([](double x) { return std::pow(x, -0.5) / std::log(x); }, kE, R));
    EXPECT_NEAR(L4.epsilon_integral(R), oracle, 1e-9 * oracle);

    const auto L3 = NormalAttractionLaw::trig_tail(1.5, 0.2, 0.0);
    for (double r : {5.0, 50.0, 500.0}) {
        const double s = L3.epsilon_sup(r);
        EXPECT_LE(s, 0.2 / r * (1 + 1e-12));
        EXPECT_GE(s, 0.2 / (r + 2 * std::numbers::pi) * 0.99);
    }
    const double R3 = 40.0;
    const double o3 = 2.0 * (L3.A() / 0.5 +
                             gk([](double x) { return 0.2 * std::abs(std::sin(x)) * std::pow(x, -1.5); }, 1.0, R3));
    EXPECT_NEAR(L3.epsilon_integral(R3), o3, 1e-7);
}

TEST(NormalAttractionLaw, SamplersPassKolmogorovSmirnov) {
    std::vector<NormalAttractionLaw> laws{NormalAttractionLaw::pareto(1.5, 0.0),
                                          NormalAttractionLaw::pareto(1.2, -0.8),
                                          NormalAttractionLaw::two_power(1.5, 1.8, 0.25, 0.3),
                                          NormalAttractionLaw::trig_tail(1.7, 0.3, 0.5),
                                          NormalAttractionLaw::trig_tail(1.3, -0.2, 0.0),
                                          NormalAttractionLaw::log_tail(1.5, 1.0, 0.0),
                                          NormalAttractionLaw::log_tail(1.8, 2.5, -0.4)};
    for (const auto& L : laws) {
        expect_ks_ok(L, L.sample(100000, 11));
        expect_ks_ok(L, L.sample_by_inversion(20000, 12));
    }
}

TEST(NormalAttractionLaw, ParetoInversionMatchesClosedForm) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    for (double u : {1e-9, 0.01, 0.3, 0.999}) {
        const double y = detail::invert_survival([](double v) { return std::pow(v, -1.5); }, 1.0, u);
        EXPECT_NEAR(y, std::pow(u, -1.0 / 1.5), 1e-12 * y);
    }
    EXPECT_THROW(detail::invert_survival([](double v) { return v < 3 ? std::pow(v, -1.0) : 1.0; }, 1.0, 0.1),
                 InversionFailure);
    (void)L;
}

TEST(NormalAttractionLaw, SamplingIsDeterministic) {
    const auto L = NormalAttractionLaw::trig_tail(1.5, 0.1, 0.0);
    EXPECT_EQ(L.sample(1000, 3), L.sample(1000, 3));
    EXPECT_NE(L.sample(1000, 3), L.sample(1000, 4));
}

TEST(SlowVaryLaw, DensityAndTails) {
    const SlowVaryLaw L(1.5);
    EXPECT_NEAR(L.total_mass(), 1.0, 1e-10);
    EXPECT_DOUBLE_EQ(L.cdf(0.0), 0.5);
    EXPECT_DOUBLE_EQ(L.tail_upper(2.0), 0.5);
    for (double y : {3.0, 10.0, 1e3}) {
        const double num = gk([&](double x) { return L.pdf(x); }, y, 1e3 * y) + 0.0;
        const double rest = L.tail_upper(1e3 * y);
        EXPECT_NEAR(L.tail_upper(y), num + rest, 1e-10);
    }
    EXPECT_NEAR(L.sigma(), std::pow(1.5 * 1.5 * std::exp(1.5) / (2.5 * d_alpha(1.5)), 1 / 1.5), 1e-14);
}

TEST(SlowVaryLaw, MomentsClosedForm) {
    const double a = 1.5;
    const SlowVaryLaw L(a);
    const double C = L.normalization_constant();
    auto logmom = [](double q) { return std::exp(-q) * (q + 1) / (q * q); };  // int_e^inf log x x^{-1-q}
    const auto m = L.moments();
    EXPECT_NEAR(m.mean, 0.0, 1e-12);
    EXPECT_NEAR(m.abs_mean, 2 * C * logmom(a - 1), 1e-8);
    EXPECT_NEAR(m.centered_frac_moment, 2 * C * logmom(2 * a - 2), 1e-8);
}

TEST(SlowVaryLaw, SamplersAgreeWithCdf) {
    for (double a : {1.2, 1.5, 1.9}) {
        const SlowVaryLaw L(a);
        expect_ks_ok(L, L.sample(100000, 5));
        expect_ks_ok(L, L.sample_by_inversion(50000, 6));
        for (double u : {1e-12, 0.2, 0.9999}) EXPECT_NEAR(L.abs_survival(L.invert_abs_survival(u)), u, 1e-13);
    }
}

TEST(GammaN, BoundaryValue) {
    for (double a : {1.1, 1.5, 1.9}) EXPECT_NEAR(gamma_n_solve(a, std::exp(a)), kE, 1e-12);
}

TEST(GammaN, ResidualAndMonotonicity) {
    for (double a : {1.1, 1.5, 1.9}) {
        double prev = 0.0;
        for (double n = std::ceil(std::exp(a)); n < 1e12; n *= 1.7) {
            const double g = gamma_n_solve(a, n);
            const double r = std::abs(g - std::pow(n * std::log(g), 1 / a));
            const double ulp = std::nextafter(g, 1e300) - g;
            EXPECT_LE(r, std::max(1e-12, 2 * ulp));
            EXPECT_GT(g, prev);
            prev = g;
        }
    }
    EXPECT_THROW(gamma_n_solve(1.5, 2.0), InvalidParameter);
    EXPECT_THROW(gamma_n_solve(2.5, 100.0), OutOfRangeAlpha);
}

TEST(LawSpec, JsonRoundTripAndFactory) {
    const auto j = nlohmann::json::parse(R"({"family":"twopower","alpha":1.5,"alpha_tilde":1.8,"A_tilde":0.2,"beta":0.1})");
    const auto s = LawSpec::from_json(j);
    EXPECT_EQ(LawSpec::from_json(s.to_json()).to_json(), s.to_json());
    const auto law = make_example(s);
    ASSERT_TRUE(std::holds_alternative<NormalAttractionLaw>(law));
    EXPECT_NEAR(std::get<NormalAttractionLaw>(law).A(), 0.3, 1e-15);
    EXPECT_TRUE(std::holds_alternative<SlowVaryLaw>(make_example(LawSpec::from_json({{"family", "slowvary"}}))));
    EXPECT_THROW(LawSpec::from_json({{"family", "pareto"}, {"gamma", 1.0}}), InvalidConfig);
    EXPECT_THROW(LawSpec::from_json({{"alpha", "x"}}), InvalidConfig);
    EXPECT_THROW(make_example(LawSpec::from_json({{"family", "cauchy"}})), InvalidConfig);
}
