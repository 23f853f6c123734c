#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "stable_stein/bounds.hpp"

using namespace stable_stein;

namespace {

const double kEta15 = eta(StableParams(1.5, 1.0, 0.0));

BoundInputs inputs(const NormalAttractionLaw& L, std::uint64_t n) {
    return BoundInputs::make(L, n, eta(StableParams(L.alpha(), 1.0, L.beta())), L.moments());
}

double slope(const BoundInputs& base, BoundVariant v, std::uint64_t n1, std::uint64_t n2) {
    const double b1 = theorem_bound(base.at(n1), v).total, b2 = theorem_bound(base.at(n2), v).total;
    return std::log(b2 / b1) / std::log(double(n2) / double(n1));
}

}  // namespace

TEST(RateExponent, TableValues) {
    auto r = rate_exponent(1.5, 1.0);
    EXPECT_NEAR(r.exponent, -1.0 / 3.0, 1e-15);
    EXPECT_FALSE(r.log_factor);
    r = rate_exponent(1.5, 0.5);
    EXPECT_NEAR(r.exponent, -1.0 / 3.0, 1e-15);
    EXPECT_TRUE(r.log_factor);
    r = rate_exponent(1.5, 0.25);
    EXPECT_NEAR(r.exponent, -1.0 / 9.0, 1e-15);
    r = rate_exponent(1.5, 0.0);
    EXPECT_TRUE(r.data_dependent);
    EXPECT_TRUE(std::isnan(r.exponent));
    EXPECT_THROW(rate_exponent(1.5, -0.1), InvalidParameter);
}

TEST(RateExponent, ContinuousAcrossCriticalGamma) {
    for (double a : {1.1, 1.3, 1.5, 1.7, 1.9}) {
        const double c = 2.0 - a;
        const double lo = rate_exponent(a, c - 1e-3).exponent, hi = rate_exponent(a, c + 1e-3).exponent;
        EXPECT_LT(std::abs(lo - hi), 0.01);
        EXPECT_LT(std::abs(rate_exponent(a, c - 1e-9).exponent - (1.0 - 2.0 / a)), 1e-6);
    }
}

TEST(TBound, RegimeDispatch) {
    EXPECT_EQ(taylor_regime(1.5, 0.0), Regime::gamma_zero);
    EXPECT_EQ(taylor_regime(1.5, 0.5), Regime::gamma_critical);
    EXPECT_EQ(taylor_regime(1.5, 0.3), Regime::gamma_small);
    EXPECT_EQ(taylor_regime(1.5, 1.0), Regime::gamma_large);
    EXPECT_EQ(theorem_bound(inputs(NormalAttractionLaw::two_power(1.5, 2.0, 0.25, 0.0), 4096), BoundVariant::thm12).regime,
              Regime::gamma_critical);
    EXPECT_EQ(theorem_bound(inputs(NormalAttractionLaw::trig_tail(1.5, 0.1, 0.0), 4096), BoundVariant::thm12).regime,
              Regime::gamma_large);
}

TEST(TBound, ParetoCaseFourClosedForm) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    const auto in = BoundInputs::make(L, 5000, kEta15, L.moments());
    const double c2A = 1.0;  // (2A)^{2/alpha} with A = 1/2
    // eps = -A inside the cutoff and 0 outside, so the integral is 2 A / (2 - alpha) = 2 and the sup term vanishes
    const double oracle = 2 * 1.5 * c2A / 0.5 * kEta15 * in.a + 4 * kEta15 * in.a * 2.0;
    EXPECT_NEAR(t_bound_taylor(in), oracle, 1e-10 * oracle);
}

TEST(TBound, CaseOneClosedForm) {
    const auto L = NormalAttractionLaw::trig_tail(1.5, 0.1, 0.0);
    const auto in = inputs(L, 10000);
    const double A = L.A(), K = L.K(), g = 1.0, al = 1.5;
    const double oracle = 2 * std::pow(2 * A, 2 / al) *
                          (2 / (2 - al) + 2 * K * std::pow(2 * A, (-al - g) / al) / (al + g - 2)) * in.phi_second_sup *
                          in.a;
    EXPECT_NEAR(t_bound_taylor(in), oracle, 1e-13 * oracle);
}

TEST(TBound, CriticalAndSmallCasesClosedForm) {
    const double al = 1.5;
    {
        const auto L = NormalAttractionLaw::two_power(al, 2.0, 0.25, 0.0);
        const auto in = inputs(L, 20000);
        const double A = L.A(), K = L.K(), c2A = std::pow(2 * A, 2 / al), e2 = in.phi_second_sup;
        const double tc = (8 * al * (A + K) - 4 * K) / (al - 1);
        const double oracle = 2 * al / (2 - al) * c2A * e2 * in.a +
                              ((2 * c2A + 8 * K / (al - 1)) * e2 + tc * al) * in.a * std::abs(std::log(in.a));
        EXPECT_NEAR(t_bound_taylor(in), oracle, 1e-13 * oracle);
        auto alt = in;
        alt.log_convention = LogConvention::log_n;
        EXPECT_GT(t_bound_taylor(alt), t_bound_taylor(in));  // log n > |log a| here
        EXPECT_TRUE(std::isfinite(t_bound_taylor(alt)));
    }
    {
        const auto L = NormalAttractionLaw::two_power(al, 1.75, 0.25, 0.0);
        const auto in = inputs(L, 20000);
        const double A = L.A(), K = L.K(), g = 0.25, c2A = std::pow(2 * A, 2 / al), e2 = in.phi_second_sup;
        const double tc = (8 * al * (A + K) - 4 * K) / (al - 1);
        const double oracle =
            ((4 * c2A / (2 - al) + 8 * K / (2 - al - g)) * e2 + tc * al) * std::pow(in.a, (1 - al) / (g - 1));
        EXPECT_NEAR(t_bound_taylor(in), oracle, 1e-13 * oracle);
    }
}

TEST(TBound, VanishesAsAGoesToZero) {
    std::vector<NormalAttractionLaw> laws{NormalAttractionLaw::pareto(1.5, 0.0), NormalAttractionLaw::two_power(1.5, 2.0, 0.25, 0.0),
                                          NormalAttractionLaw::two_power(1.5, 1.7, 0.25, 0.0),
                                          NormalAttractionLaw::trig_tail(1.5, 0.1, 0.0), NormalAttractionLaw::log_tail(1.5, 1.0, 0.0)};
    for (const auto& L : laws) {
        const auto in = inputs(L, 1000);
        const double t1 = t_bound_taylor(in.at(1000)), t2 = t_bound_taylor(in.at(1000000000000ULL));
        EXPECT_LT(t2, 0.01 * t1) << family_name(L.family());
    }
}

TEST(TBound, PreconditionReportsMinimumN) {
    const auto L = NormalAttractionLaw::two_power(1.5, 1.8, 0.45, 0.0);  // A = 0.05, small sigma
    const auto in = inputs(L, 1);
    const auto nm = n_min(L, in.sigma, BoundVariant::thm12);
    ASSERT_GT(nm, 1u);
    EXPECT_LT(in.at(nm).a, admissible_a(L, BoundVariant::thm12));
    EXPECT_GE(in.at(nm - 1).a, admissible_a(L, BoundVariant::thm12));
    EXPECT_THROW(t_bound_taylor(in.at(nm - 1)), PreconditionViolated);
    EXPECT_NO_THROW(t_bound_taylor(in.at(nm)));
    const auto b = theorem_bound(in.at(nm - 1), BoundVariant::thm12);
    EXPECT_FALSE(b.applicable);
    EXPECT_EQ(b.n_min, nm);
    EXPECT_TRUE(std::isnan(b.total));
    try {
        t_bound_taylor(in.at(1));
    } catch (const PreconditionViolated& e) {
        EXPECT_NE(std::string(e.what()).find(std::to_string(nm)), std::string::npos);
    }
}

TEST(TBound, MonotoneVariant) {
    const auto L1 = NormalAttractionLaw::pareto(1.5, 0.0);
    const auto in1 = BoundInputs::make(L1, 4096, kEta15, L1.moments());
    EXPECT_NEAR(t_bound_monotone(in1), 2 * std::pow(1.0, 1 / 1.5) * in1.a + 2 * kEta15 * in1.a * 2.0, 1e-12);

    EXPECT_THROW(t_bound_monotone(inputs(NormalAttractionLaw::trig_tail(1.5, 0.1, 0.0), 4096)), NotUltimatelyMonotone);

    const auto L4 = NormalAttractionLaw::log_tail(1.5, 1.0, 0.0);
    const auto in4 = inputs(L4, 1000000);
    const double a = in4.a, R = 1 / a;
    const double lin = 2 * std::pow(2 * L4.A(), 1 / 1.5) * a;
    const double sup = (16 * 1.5 - 1) * 1.5 / 0.5 * std::pow(a, 0.5) * (1.0 / std::log(R));
    const double integ = 2 * in4.phi_second_sup * a * L4.epsilon_integral(R);
    EXPECT_NEAR(t_bound_monotone(in4), lin + sup + integ, 1e-9 * (lin + sup + integ));
    EXPECT_GT(sup, lin);
    EXPECT_GT(sup, integ);
}

TEST(Terms, TermIAndCentering) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.0);
    const auto in = BoundInputs::make(L, 1024, kEta15, L.moments());
    const double sigma = std::pow(2 * 0.5 * 1.5 / d_alpha_by_quadrature(1.5), 1 / 1.5);
    const double oracle = 4 * d_alpha_by_quadrature(1.5) / (0.5 * 0.5) * kEta15 * 1.5 * std::pow(sigma, -0.5) *
                          std::pow(1024.0, 1 - 2 / 1.5);
    EXPECT_NEAR(term_I(in), oracle, 1e-9 * oracle);
    EXPECT_NEAR(term_III_IV(in), 0.0, 1e-12);
    const auto Lb = NormalAttractionLaw::pareto(1.5, 0.5);
    const auto inb = inputs(Lb, 1024);
    EXPECT_GT(term_I(inb), 0.0);
    const double m = 0.5 * 3.0, am = 3.0;
    EXPECT_NEAR(term_III_IV(inb), 3 * inb.phi_second_sup / (inb.sigma * inb.sigma) * am * m * std::pow(1024.0, -1.0 / 3),
                1e-8);
}

TEST(TheoremBound, AssemblyAndMonotoneDecrease) {
    const auto L = NormalAttractionLaw::pareto(1.5, 0.3);
    const auto base = inputs(L, 1024);
    for (auto v : {BoundVariant::thm12, BoundVariant::thm13}) {
        double prev = std::numeric_limits<double>::infinity();
        for (std::uint64_t n = 1024; n <= (1u << 22); n *= 2) {
            const auto b = theorem_bound(base.at(n), v);
            ASSERT_TRUE(b.applicable);
            EXPECT_GE(b.term_I, 0.0);
            EXPECT_GE(b.term_II, 0.0);
            EXPECT_GE(b.term_III_IV, 0.0);
            EXPECT_NEAR(b.total, b.term_I + b.term_II + b.term_III_IV, 1e-15 * b.total);
            EXPECT_GT(b.total, 0.0);
            EXPECT_LT(b.total, prev);
            prev = b.total;
        }
    }
    const auto b = theorem_bound(base.at(4096), BoundVariant::thm12);
    EXPECT_NEAR(b.term_I, term_I(base.at(4096)) / 1.5, 1e-15);
    EXPECT_NEAR(b.term_II, 4096 * base.at(4096).a * t_bound_taylor(base.at(4096)) / 1.5, 1e-12);
}

TEST(TheoremBound, ParetoSlopeIsOneMinusTwoOverAlpha) {
    for (double al : {1.2, 1.5, 1.8}) {
        const auto base = inputs(NormalAttractionLaw::pareto(al, 0.0), 1024);
        EXPECT_NEAR(slope(base, BoundVariant::thm12, 1u << 16, 1u << 24), 1 - 2 / al, 1e-3);
    }
}

TEST(TheoremBound, VanishesForPositiveGamma) {
    for (const auto& L : {NormalAttractionLaw::two_power(1.5, 1.7, 0.25, 0.0), NormalAttractionLaw::trig_tail(1.5, 0.1, 0.2)}) {
        const auto base = inputs(L, 1024);
        const double b1 = theorem_bound(base.at(1u << 10), BoundVariant::thm12).total;
        const double b2 = theorem_bound(base.at(1ULL << 50), BoundVariant::thm12).total;
        EXPECT_LT(b2, 0.2 * b1);  // slowest case decays like n^{-1/12}
    }
}

TEST(TheoremBound, TwoPowerMonotoneSlope) {
    for (double at : {1.7, 1.8, 1.9}) {
        const auto base = inputs(NormalAttractionLaw::two_power(1.5, at, 0.25, 0.0), 1024);
        EXPECT_NEAR(slope(base, BoundVariant::thm13, 1u << 10, 1u << 20), 1 - at / 1.5, 0.05) << at;
    }
    const auto big = inputs(NormalAttractionLaw::two_power(1.5, 2.5, 0.25, 0.0), 1024);
    EXPECT_NEAR(slope(big, BoundVariant::thm13, 1u << 14, 1u << 24), -1.0 / 3, 0.02);
}

TEST(TheoremBound, DoubledSigmaStaysFinite) {
    const auto L = NormalAttractionLaw::log_tail(1.5, 1.0, 0.0);
    auto in = inputs(L, 4096);
    in.sigma *= 2;
    in.a = std::pow(4096.0, -1 / 1.5) / in.sigma;
    for (auto v : {BoundVariant::thm12, BoundVariant::thm13}) {
        const auto b = theorem_bound(in, v);
        ASSERT_TRUE(b.applicable);
        EXPECT_TRUE(std::isfinite(b.total));
        EXPECT_GT(b.total, 0.0);
    }
}

TEST(BoundTable, CsvLayout) {
    const auto L = NormalAttractionLaw::two_power(1.5, 1.8, 0.45, 0.0);
    const auto rows = bound_table(L, {1, 2, 1024}, BoundVariant::thm13);
    ASSERT_EQ(rows.size(), 3u);
    std::ostringstream os;
    write_bound_csv(os, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "n,term_I,term_II,term_III_IV,total,regime");
    std::getline(is, line);
    EXPECT_EQ(line, "1,,,,,not_applicable");
    std::getline(is, line);
    std::getline(is, line);
    EXPECT_EQ(line.rfind("1024,", 0), 0u);
    EXPECT_NE(line.find("ultimately_monotone"), std::string::npos);
}
