#pragma once

// Explicit Wasserstein error bounds for the stable CLT with entry laws in the
// domain of normal attraction. For a = n^{-1/alpha}/sigma the leave-one-out
// decomposition gives
//
//   alpha d_W <= I + n a T(a) + (III + IV),
//
// where T(a) is the Taylor-type (or monotone-tail) one-summand bound and the
// test class is {|phi'| <= alpha, |phi''| <= eta_{alpha,beta}}.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stable_stein/domains.hpp"
#include "stable_stein/errors.hpp"
#include "stable_stein/stable.hpp"

namespace stable_stein {

enum class Regime { gamma_large, gamma_critical, gamma_small, gamma_zero, ultimately_monotone };
enum class BoundVariant { thm12, thm13 };

/// How the gamma = 2 - alpha case measures the logarithm: |log a| as in the
/// one-summand bound, or log n as in rate_exponent. They differ by an additive
/// constant times n^{1-2/alpha}.
enum class LogConvention { abs_log_a, log_n };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::gamma_large: return "gamma_large";
        case Regime::gamma_critical: return "gamma_critical";
        case Regime::gamma_small: return "gamma_small";
        case Regime::gamma_zero: return "gamma_zero";
        case Regime::ultimately_monotone: return "ultimately_monotone";
    }
    return "?";
}

/// Regime of the Taylor-type bound, chosen by the position of gamma relative to 2 - alpha.
inline Regime taylor_regime(double alpha, double gamma) {
    if (gamma == 0.0) return Regime::gamma_zero;
    const double crit = 2.0 - alpha;
    if (std::abs(gamma - crit) <= 1e-12) return Regime::gamma_critical;
    return gamma > crit ? Regime::gamma_large : Regime::gamma_small;
}

struct BoundInputs {
    NormalAttractionLaw law;
    std::uint64_t n = 0;
    double phi_prime_sup = 0.0;   ///< alpha
    double phi_second_sup = 0.0;  ///< eta_{alpha,beta}
    double sigma = 0.0;
    double a = 0.0;  ///< n^{-1/alpha} / sigma
    Moments moments;
    LogConvention log_convention = LogConvention::abs_log_a;

    /// Inputs with precomputed eta and moments (both are n-independent).
    static BoundInputs make(const NormalAttractionLaw& law, std::uint64_t n, double eta, const Moments& m) {
        if (n == 0) throw InvalidParameter("n must be positive");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be positive");
        BoundInputs in{law, n, law.alpha(), eta, law.sigma(), 0.0, m};
        in.a = std::pow(static_cast<double>(n), -1.0 / law.alpha()) / in.sigma;
        return in;
    }

    static BoundInputs make(const NormalAttractionLaw& law, std::uint64_t n) {
        return make(law, n, eta(StableParams(law.alpha(), 1.0, law.beta())), law.moments());
    }

    BoundInputs at(std::uint64_t m) const {
        BoundInputs c = *this;
        c.n = m;
        c.a = std::pow(static_cast<double>(m), -1.0 / law.alpha()) / sigma;
        return c;
    }
};

/// Largest admissible a (exclusive): (2A)^{-1/alpha} and 1, and for the monotone
/// variant also 1/x0 where x0 is the monotonicity threshold.
inline double admissible_a(const NormalAttractionLaw& law, BoundVariant v) {
    double amax = std::min(std::pow(2.0 * law.A(), -1.0 / law.alpha()), 1.0);
    if (v == BoundVariant::thm13) amax = std::min(amax, 1.0 / law.monotone_from());
    return amax;
}

/// Smallest n with n^{-1/alpha}/sigma below the admissible range of a.
inline std::uint64_t n_min(const NormalAttractionLaw& law, double sigma, BoundVariant v) {
    const double t = std::pow(sigma * admissible_a(law, v), -law.alpha());
    return static_cast<std::uint64_t>(std::floor(t)) + 1;
}

namespace detail {

inline void require_a(const BoundInputs& in, BoundVariant v) {
    if (!(in.a < admissible_a(in.law, v))) {
        std::ostringstream os;
        os << "a = " << in.a << " is outside the admissible range (a < " << admissible_a(in.law, v)
           << "); the smallest admissible n is " << n_min(in.law, in.sigma, v);
        throw PreconditionViolated(os.str());
    }
}

inline double tail_coefficient(const BoundInputs& in) {
    const double al = in.law.alpha(), A = in.law.A(), K = in.law.K();
    return (8.0 * al * (A + K) - 4.0 * K) / (al - 1.0);
}

}  // namespace detail

/// One-summand Taylor-type bound T(a), dispatched on gamma.
inline double t_bound_taylor(const BoundInputs& in) {
    detail::require_a(in, BoundVariant::thm12);
    const double al = in.law.alpha(), A = in.law.A(), K = in.law.K(), g = in.law.gamma();
    const double d1 = in.phi_prime_sup, d2 = in.phi_second_sup, a = in.a;
    const double c2A = std::pow(2.0 * A, 2.0 / al);
    const double tc = detail::tail_coefficient(in);
    switch (taylor_regime(al, g)) {
        case Regime::gamma_large:
            return 2.0 * c2A * (2.0 / (2.0 - al) + 2.0 * K * std::pow(2.0 * A, (-al - g) / al) / (al + g - 2.0)) * d2 * a;
        case Regime::gamma_critical: {
            const double lg =
                in.log_convention == LogConvention::abs_log_a ? std::abs(std::log(a)) : std::log(static_cast<double>(in.n));
            return 2.0 * al / (2.0 - al) * c2A * d2 * a + ((2.0 * c2A + 8.0 * K / (al - 1.0)) * d2 + tc * d1) * a * lg;
        }
        case Regime::gamma_small:
            return ((4.0 * c2A / (2.0 - al) + 8.0 * K / (2.0 - al - g)) * d2 + tc * d1) * std::pow(a, (1.0 - al) / (g - 1.0));
        case Regime::gamma_zero:
        default: {
            const double R = 1.0 / a;
            const double sup = in.law.epsilon_sup(R);
            return 2.0 * al * c2A / (2.0 - al) * d2 * a + 4.0 * d2 * a * in.law.epsilon_integral(R) +
                   ((8.0 / (2.0 - al) + 2.0 * c2A) * d2 + tc * d1) * std::pow(a, al - 1.0) * std::pow(sup, al - 1.0);
        }
    }
}

/// One-summand bound for laws whose tails eps(x)/|x|^alpha are monotone beyond 1/a.
inline double t_bound_monotone(const BoundInputs& in) {
    const double x0 = in.law.monotone_from();  // throws NotUltimatelyMonotone
    (void)x0;
    detail::require_a(in, BoundVariant::thm13);
    const double al = in.law.alpha(), a = in.a, R = 1.0 / a;
    return 2.0 * std::pow(2.0 * in.law.A(), 1.0 / al) * a +
           (16.0 * al - 1.0) * in.phi_prime_sup / (al - 1.0) * std::pow(a, al - 1.0) * in.law.epsilon_sup(R) +
           2.0 * in.phi_second_sup * a * in.law.epsilon_integral(R);
}

/// Fractional-moment term I.
inline double term_I(const BoundInputs& in) {
    const double al = in.law.alpha();
    return 4.0 * d_alpha(al) / ((2.0 - al) * (al - 1.0)) * in.phi_second_sup * in.moments.centered_frac_moment *
           std::pow(in.sigma, al - 2.0) * std::pow(static_cast<double>(in.n), 1.0 - 2.0 / al);
}

/// Centering terms III + IV; zero for centered laws.
inline double term_III_IV(const BoundInputs& in) {
    const double al = in.law.alpha();
    return 3.0 * in.phi_second_sup / (in.sigma * in.sigma) * in.moments.abs_mean * std::abs(in.moments.mean) *
           std::pow(static_cast<double>(in.n), 1.0 - 2.0 / al);
}

struct TheoreticalBound {
    std::uint64_t n = 0;
    bool applicable = false;
    std::uint64_t n_min = 0;
    double total = std::numeric_limits<double>::quiet_NaN();
    double term_I = std::numeric_limits<double>::quiet_NaN();
    double term_II = std::numeric_limits<double>::quiet_NaN();
    double term_III_IV = std::numeric_limits<double>::quiet_NaN();
    Regime regime = Regime::gamma_zero;
};

/// Assembled bound on d_W(S_n, S_alpha(1, beta)). Components carry the 1/alpha of
/// the Stein-equation identity, so total is their sum. Below n_min the result is
/// flagged not applicable instead of being extrapolated.
inline TheoreticalBound theorem_bound(const BoundInputs& in, BoundVariant v) {
    TheoreticalBound b;
    b.n = in.n;
    b.regime = v == BoundVariant::thm13 ? Regime::ultimately_monotone : taylor_regime(in.law.alpha(), in.law.gamma());
    b.n_min = n_min(in.law, in.sigma, v);
    if (!(in.a < admissible_a(in.law, v))) return b;
    b.applicable = true;
    const double al = in.law.alpha();
    const double T = v == BoundVariant::thm13 ? t_bound_monotone(in) : t_bound_taylor(in);
    b.term_I = term_I(in) / al;
    b.term_II = static_cast<double>(in.n) * in.a * T / al;
    b.term_III_IV = term_III_IV(in) / al;
    b.total = b.term_I + b.term_II + b.term_III_IV;
    return b;
}

/// The variant suited to a law: the monotone-tail bound when available.
inline BoundVariant preferred_variant(const NormalAttractionLaw& law) {
    return law.ultimately_monotone() ? BoundVariant::thm13 : BoundVariant::thm12;
}

struct RateExponent {
    double exponent = std::numeric_limits<double>::quiet_NaN();  ///< NaN when data dependent
    bool log_factor = false;
    bool data_dependent = false;
};

/// Rate of the Taylor-type bound as a power of n.
inline RateExponent rate_exponent(double alpha, double gamma) {
    StableParams::check_alpha(alpha);
    if (!(gamma >= 0.0)) throw InvalidParameter("gamma must be nonnegative");
    RateExponent r;
    switch (taylor_regime(alpha, gamma)) {
        case Regime::gamma_large: r.exponent = 1.0 - 2.0 / alpha; break;
        case Regime::gamma_critical:
            r.exponent = 1.0 - 2.0 / alpha;
            r.log_factor = true;
            break;
        case Regime::gamma_small: r.exponent = -(alpha - 1.0) * gamma / (alpha * (1.0 - gamma)); break;
        default: r.data_dependent = true; break;
    }
    return r;
}

inline std::vector<TheoreticalBound> bound_table(const NormalAttractionLaw& law, const std::vector<std::uint64_t>& ns,
                                                 BoundVariant v) {
    std::vector<TheoreticalBound> out;
    if (ns.empty()) return out;
    const auto base = BoundInputs::make(law, ns.front());
    for (auto n : ns) out.push_back(theorem_bound(base.at(n), v));
    return out;
}

/// CSV with columns n, term_I, term_II, term_III_IV, total, regime; rows below
/// n_min have empty numeric fields and regime "not_applicable".
inline void write_bound_csv(std::ostream& os, const std::vector<TheoreticalBound>& rows) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "n,term_I,term_II,term_III_IV,total,regime\n";
    for (const auto& r : rows) {
        buf << r.n << ',';
        if (r.applicable)
            buf << r.term_I << ',' << r.term_II << ',' << r.term_III_IV << ',' << r.total << ',' << regime_name(r.regime);
        else
            buf << ",,,,not_applicable";
        buf << '\n';
    }
    os << buf.str();
    if (!os) throw IoError("failed to write bound table");
}

}  // namespace stable_stein
