#pragma once

// Entry laws for the stable central limit theorem: laws in the domain of normal
// attraction with CDF
//
//   F(x) = 1 - (A + eps(x)) (1 + beta) x^{-alpha}        for x >= c,
//   F(x) = (A + eps(x)) (1 - beta) |x|^{-alpha}           for x <= -c,
//
// with no mass in (-c, c), and the slowly varying law with density
// proportional to log|x| / |x|^{alpha+1} on |x| >= e.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "stable_stein/errors.hpp"
#include "stable_stein/quad.hpp"
#include "stable_stein/rng.hpp"
#include "stable_stein/stable.hpp"

namespace stable_stein {

enum class Family { pareto, two_power, trig_tail, log_tail, custom };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::pareto: return "pareto";
        case Family::two_power: return "twopower";
        case Family::trig_tail: return "trig";
        case Family::log_tail: return "logtail";
        case Family::custom: return "custom";
    }
    return "?";
}

struct Moments {
    double mean = 0.0;
    double abs_mean = 0.0;
    double centered_frac_moment = 0.0;  ///< E|X - EX|^{2 - alpha}
};

/// A user-supplied law in the domain of normal attraction. `epsilon` is consulted
/// only for |x| >= cutoff; inside the cutoff the law carries no mass and eps = -A.
struct CustomLawSpec {
    double alpha = 1.5;
    double A = 0.5;
    double beta = 0.0;
    std::function<double(double)> epsilon;
    double cutoff = 1.0;
    double K = 0.5;
    double gamma = 0.0;
    double tail_frequency = 0.0;         ///< oscillation frequency of eps in the tails, 0 if none
    std::optional<double> monotone_from;  ///< eps(x)/|x|^alpha is monotone on each side beyond this
};

namespace detail {

inline quad::QuadConfig law_quad() {
    quad::QuadConfig c;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-13;
    c.max_subdivisions = 4000;
    return c;
}

inline void check_law_alpha(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0)) {
        std::ostringstream os;
        os << "alpha must lie strictly inside (1, 2), got " << alpha;
        throw OutOfRangeAlpha(os.str());
    }
}

inline void check_law_beta(double beta) {
    if (!(beta >= -1.0 && beta <= 1.0)) {
        std::ostringstream os;
        os << "beta must lie in [-1, 1], got " << beta;
        throw InvalidParameter(os.str());
    }
}

/// Solve G(y) = u for y >= lo with G nonincreasing, G(lo) >= u: bracketing by
/// doubling, bisection in log y, then a few Newton steps.
template <class G>
double invert_survival(G&& surv, double lo, double u) {
    if (!(surv(lo) >= u)) throw InversionFailure("survival function below the target level at the cutoff");
    double a = lo, b = 2.0 * lo;
    double gb = surv(b);
    int doublings = 0;
    while (gb > u) {
        a = b;
        b *= 2.0;
        const double g = surv(b);
        if (g > gb) throw InversionFailure("survival function increases while bracketing");
        gb = g;
        if (++doublings > 2000) throw InversionFailure("no bracket found");
    }
    double ga = surv(a);
    while (b / a - 1.0 > 1e-7) {
        const double m = std::sqrt(a * b);
        const double gm = surv(m);
        if (gm > ga || gm < gb) throw InversionFailure("non-monotone survival function detected");
        if (gm > u) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    double y = 0.5 * (a + b);
    for (int it = 0; it < 4; ++it) {
        const double h = 1e-6 * y;
        const double d = (surv(y + h) - surv(y - h)) / (2.0 * h);
        if (!(d < 0.0)) break;
        const double next = y - (surv(y) - u) / d;
        if (!(next >= a && next <= b)) break;
        if (next == y) break;
        y = next;
    }
    return y;
}

}  // namespace detail

class NormalAttractionLaw {
public:
    /// Pareto law: P(X > x) = (1 + beta) / (2 x^alpha) on x >= 1.
    static NormalAttractionLaw pareto(double alpha, double beta) {
        NormalAttractionLaw L(Family::pareto, alpha, 0.5, beta);
        L.K_ = 0.5;
        L.gamma_ = 0.0;
        L.monotone_from_ = 1.0;
        L.finish();
        return L;
    }

    /// Two-power law: tails (A x^{-alpha} + At x^{-alpha_tilde})(1 +- beta), A + At = 1/2.
    static NormalAttractionLaw two_power(double alpha, double alpha_tilde, double A_tilde, double beta) {
        detail::check_law_alpha(alpha);
        if (!(alpha_tilde > alpha) || !std::isfinite(alpha_tilde))
            throw InvalidFamilyParams("two-power law needs alpha_tilde > alpha");
        if (!(A_tilde > 0.0 && A_tilde < 0.5))
            throw InvalidFamilyParams("two-power law needs 0 < A_tilde < 1/2 so that A = 1/2 - A_tilde > 0");
        NormalAttractionLaw L(Family::two_power, alpha, 0.5 - A_tilde, beta);
        L.p1_ = alpha_tilde;
        L.p2_ = A_tilde;
        L.K_ = std::max(L.A_, A_tilde);
        L.gamma_ = alpha_tilde - alpha;
        L.monotone_from_ = 1.0;
        L.finish();
        return L;
    }

    /// Trigonometric law: tails |x|^{-alpha}(A + B sin|x| / |x|)(1 +- beta), A + B sin 1 = 1/2.
    static NormalAttractionLaw trig_tail(double alpha, double B, double beta) {
        detail::check_law_alpha(alpha);
        const double A = 0.5 - B * std::sin(1.0);
        if (!std::isfinite(B) || !(A > 0.0))
            throw InvalidFamilyParams("trigonometric law needs A = 1/2 - B sin 1 > 0");
        if (!(alpha * A > std::abs(B)))
            throw InvalidFamilyParams("trigonometric law tail is not monotone: need alpha*A > |B|");
        NormalAttractionLaw L(Family::trig_tail, alpha, A, beta);
        L.p2_ = B;
        L.K_ = std::max(A, std::abs(B));
        L.gamma_ = 1.0;
        L.freq_ = 1.0;
        L.finish();
        return L;
    }

    /// Logarithmic law: tails |x|^{-alpha}(A + D / log|x|)(1 +- beta) on |x| >= e, A + D = e^alpha / 2.
    static NormalAttractionLaw log_tail(double alpha, double D, double beta) {
        detail::check_law_alpha(alpha);
        const double A = 0.5 * std::exp(alpha) - D;
        if (!(D > 0.0) || !(A > 0.0))
            throw InvalidFamilyParams("logarithmic law needs D > 0 and A = e^alpha/2 - D > 0");
        NormalAttractionLaw L(Family::log_tail, alpha, A, beta);
        L.cut_ = std::numbers::e;
        L.p2_ = D;
        L.K_ = std::max(A, D);
        L.gamma_ = 0.0;
        L.monotone_from_ = std::numbers::e;
        L.finish();
        return L;
    }

    static NormalAttractionLaw custom(const CustomLawSpec& s) {
        detail::check_law_alpha(s.alpha);
        if (!(s.A > 0.0)) throw InvalidFamilyParams("A must be positive");
        if (!s.epsilon) throw InvalidFamilyParams("custom law needs an epsilon function");
        if (!(s.cutoff > 0.0) || !std::isfinite(s.cutoff)) throw InvalidFamilyParams("cutoff must be positive");
        if (!(s.K >= 0.0) || !(s.gamma >= 0.0)) throw InvalidFamilyParams("K and gamma must be nonnegative");
        if (!(s.tail_frequency >= 0.0)) throw InvalidFamilyParams("tail frequency must be nonnegative");
        NormalAttractionLaw L(Family::custom, s.alpha, s.A, s.beta);
        L.cut_ = s.cutoff;
        L.eps_fn_ = s.epsilon;
        L.K_ = s.K;
        L.gamma_ = s.gamma;
        L.freq_ = s.tail_frequency;
        L.monotone_from_ = s.monotone_from;
        L.finish();
        return L;
    }

    double alpha() const { return alpha_; }
    double A() const { return A_; }
    double beta() const { return beta_; }
    double K() const { return K_; }
    double gamma() const { return gamma_; }
    double cutoff() const { return cut_; }
    Family family() const { return family_; }
    double tail_frequency() const { return freq_; }
    /// alpha_tilde of the two-power law (NaN otherwise).
    double alpha_tilde() const { return family_ == Family::two_power ? p1_ : std::nan(""); }
    /// Second family constant: A_tilde, B or D (NaN for Pareto and custom laws).
    double family_constant() const { return p2_; }

    bool ultimately_monotone() const { return monotone_from_.has_value(); }
    /// Threshold beyond which eps(x)/|x|^alpha is monotone on each side.
    double monotone_from() const {
        if (!monotone_from_) throw NotUltimatelyMonotone(std::string(family_name(family_)) + " law is not ultimately monotone");
        return *monotone_from_;
    }

    /// Scale of the stable limit: sigma = (2 A alpha / d_alpha)^{1/alpha}.
    double sigma() const { return sigma_from_A(alpha_, A_); }

    /// eps(x), including the value -A inside the cutoff.
    double epsilon(double x) const {
        if (std::abs(x) < cut_) return -A_;
        return eps_tail(x);
    }

    /// P(X > x).
    double tail_upper(double x) const {
        if (x >= cut_) return (1.0 + beta_) * amp(x) * std::pow(x, -alpha_);
        if (x >= -cut_) return 0.5 * (1.0 + beta_);
        return 1.0 - (1.0 - beta_) * amp(x) * std::pow(-x, -alpha_);
    }

    /// P(X <= x).
    double tail_lower(double x) const {
        if (x <= -cut_) return (1.0 - beta_) * amp(x) * std::pow(-x, -alpha_);
        if (x < cut_) return 0.5 * (1.0 - beta_);
        return 1.0 - (1.0 + beta_) * amp(x) * std::pow(x, -alpha_);
    }

    double cdf(double x) const { return tail_lower(x); }

    /// One exact draw. Pareto-type families use closed forms, mixtures or rejection
    /// from a Pareto envelope; custom laws fall back to numerical inversion.
    double draw(rng::Stream& s) const {
        const bool up = s.bernoulli(p_plus_);
        return rng::with_sign(draw_magnitude(s, up), up);
    }

    /// One draw by numerically inverting the side-conditional survival function.
    double draw_by_inversion(rng::Stream& s) const {
        const bool up = s.uniform() < p_plus_;
        const double u = s.uniform();
        const double sg = up ? 1.0 : -1.0;
        const double y = detail::invert_survival([&](double v) { return side_survival(sg, v); }, cut_, u);
        return sg * y;
    }

    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        std::vector<double> out(n);
        rng::Stream s(rng::stream_key(seed, {0xD0A1ULL, static_cast<std::uint64_t>(n)}));
        for (auto& x : out) x = draw(s);
        return out;
    }

    std::vector<double> sample_by_inversion(std::size_t n, std::uint64_t seed) const {
        std::vector<double> out(n);
        rng::Stream s(rng::stream_key(seed, {0xD0A2ULL, static_cast<std::uint64_t>(n)}));
        for (auto& x : out) x = draw_by_inversion(s);
        return out;
    }

    /// Mean, E|X| and E|X - EX|^{2 - alpha}, all by integrating tail probabilities.
    Moments moments(const quad::QuadConfig& cfg = detail::law_quad()) const {
        Moments m;
        const double up = eps_tail_integral(1.0, cfg);
        const double lo = eps_tail_integral(-1.0, cfg);
        const double pw = A_ * std::pow(cut_, 1.0 - alpha_) / (alpha_ - 1.0);
        const double I_up = pw + up, I_lo = pw + lo;
        m.mean = (1.0 + beta_) * (0.5 * cut_ + I_up) - (1.0 - beta_) * (0.5 * cut_ + I_lo);
        m.abs_mean = cut_ + (1.0 + beta_) * I_up + (1.0 - beta_) * I_lo;
        m.centered_frac_moment = centered_frac_moment(m.mean, cfg);
        return m;
    }

    /// Integral of |eps(x)| / |x|^{alpha - 1} over (-R, R).
    double epsilon_integral(double R, const quad::QuadConfig& cfg = detail::law_quad()) const {
        if (!(R > 0.0)) throw InvalidParameter("epsilon_integral needs R > 0");
        double total = 0.0;
        for (double sg : {1.0, -1.0}) {
            auto f = [&](double x) { return std::abs(epsilon(sg * x)) * std::pow(x, 1.0 - alpha_); };
            const double inner = std::min(R, cut_);
            total += quad::integrate(f, 0.0, inner, cfg, {alpha_ - 1.0, 0.0}).value;
            if (R > cut_) total += quad::integrate(f, cut_, R, cfg, {}, tail_breakpoints(cut_, R)).value;
        }
        return total;
    }

    /// sup of |eps(x)| over |x| >= R: dense probes near R, a geometric grid beyond,
    /// and the family's decreasing envelope past the grid.
    double epsilon_sup(double R) const {
        if (!(R > 0.0)) throw InvalidParameter("epsilon_sup needs R > 0");
        double s = R < cut_ ? A_ : 0.0;
        const double y0 = std::max(R, cut_);
        for (double sg : {1.0, -1.0}) {
            const int dense = 1024;
            for (int k = 0; k <= dense; ++k) s = std::max(s, std::abs(eps_tail(sg * (y0 + 2.0 * std::numbers::pi * k / dense))));
            const int geo = 600;
            for (int k = 0; k <= geo; ++k) s = std::max(s, std::abs(eps_tail(sg * y0 * std::pow(1e6, double(k) / geo))));
        }
        return std::max(s, envelope(y0 * 1e6));
    }

    /// The law as a JSON-serializable description (custom laws carry no closed form).
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["family"] = family_name(family_);
        j["alpha"] = alpha_;
        j["beta"] = beta_;
        switch (family_) {
            case Family::two_power:
                j["alpha_tilde"] = p1_;
                j["A_tilde"] = p2_;
                break;
            case Family::trig_tail: j["B"] = p2_; break;
            case Family::log_tail: j["D"] = p2_; break;
            case Family::custom:
                j["A"] = A_;
                j["K"] = K_;
                j["gamma"] = gamma_;
                j["cutoff"] = cut_;
                break;
            default: break;
        }
        return j;
    }

private:
    NormalAttractionLaw(Family f, double alpha, double A, double beta) : family_(f), alpha_(alpha), A_(A), beta_(beta) {
        detail::check_law_alpha(alpha);
        detail::check_law_beta(beta);
    }

    void finish() {
        inv_alpha_ = 1.0 / alpha_;
        p_plus_ = 0.5 * (1.0 + beta_);
        if (family_ == Family::two_power) inv_alpha_tilde_ = 1.0 / p1_;
        audit();
    }

    // eps for |x| >= cutoff
    double eps_tail(double x) const {
        const double y = std::abs(x);
        switch (family_) {
            case Family::pareto: return 0.0;
            case Family::two_power: return p2_ * std::pow(y, alpha_ - p1_);
            case Family::trig_tail: return p2_ * std::sin(y) / y;
            case Family::log_tail: return p2_ / std::log(y);
            case Family::custom: return eps_fn_(x);
        }
        return 0.0;
    }

    // decreasing bound of |eps| on |x| >= y >= cutoff
    double envelope(double y) const {
        switch (family_) {
            case Family::pareto: return 0.0;
            case Family::two_power: return p2_ * std::pow(y, alpha_ - p1_);
            case Family::trig_tail: return std::abs(p2_) / y;
            case Family::log_tail: return p2_ / std::log(y);
            case Family::custom: return K_ * std::pow(y, -gamma_);
        }
        return 0.0;
    }

    double amp(double x) const { return A_ + eps_tail(x); }

    // P(|X| > y | sign) for y >= cutoff, equal to 1 at the cutoff
    double side_survival(double sg, double y) const {
        if (y <= cut_) return 1.0;
        return 2.0 * amp(sg * y) * std::pow(y, -alpha_);
    }

    double draw_magnitude(rng::Stream& s, bool up) const {
        switch (family_) {
            // |X| = U^{-1/alpha} = exp(E/alpha) for the Pareto(alpha) magnitudes below
            case Family::pareto: return std::exp(s.exponential() * inv_alpha_);
            case Family::two_power: {
                const double e = s.bernoulli(2.0 * A_) ? inv_alpha_ : inv_alpha_tilde_;
                return std::exp(s.exponential() * e);
            }
            case Family::trig_tail: {
                const double B = p2_;
                const double top = alpha_ * A_ + (alpha_ + 2.0) * std::abs(B);
                while (true) {
                    const double y = std::exp(s.exponential() * inv_alpha_);
                    const double g = alpha_ * A_ - B * std::cos(y) + (alpha_ + 1.0) * B * std::sin(y) / y;
                    if (s.uniform() * top <= g) return y;
                }
            }
            case Family::log_tail: {
                const double D = p2_;
                const double top = alpha_ * A_ + (alpha_ + 1.0) * D;
                while (true) {
                    const double y = std::exp(1.0 + s.exponential() * inv_alpha_);
                    const double l = std::log(y);
                    const double g = alpha_ * (A_ + D / l) + D / (l * l);
                    if (s.uniform() * top <= g) return y;
                }
            }
            case Family::custom: {
                const double sg = up ? 1.0 : -1.0;
                return detail::invert_survival([&](double v) { return side_survival(sg, v); }, cut_, s.uniform());
            }
        }
        return 0.0;
    }

    std::vector<double> tail_breakpoints(double a, double b) const {
        std::vector<double> br;
        for (double x = 2.0 * a; x < b; x *= 2.0) br.push_back(x);
        if (freq_ > 0.0) {
            const double step = std::numbers::pi / freq_;
            const std::size_t cap = 100000;
            for (double x = std::ceil(a / step) * step; x < b && br.size() < cap; x += step)
                if (x > a) br.push_back(x);
            std::sort(br.begin(), br.end());
            br.erase(std::unique(br.begin(), br.end()), br.end());
        }
        return br;
    }

    // integral of eps(sg y) y^{-alpha} over [cutoff, infinity)
    double eps_tail_integral(double sg, const quad::QuadConfig& cfg) const {
        if (family_ == Family::pareto) return 0.0;
        auto f = [&](double y) { return eps_tail(sg * y) * std::pow(y, -alpha_); };
        return half_line(f, cut_, alpha_, cfg);
    }

    template <class F>
    double half_line(F& f, double a, double exponent, const quad::QuadConfig& cfg) const {
        quad::TailEnvelope env;
        env.audit = false;
        env.exponent = exponent;
        env.length_scale = std::max(a, 1.0);
        if (freq_ > 0.0) {
            quad::QuadConfig c = cfg;
            c.oscillation_mode = quad::OscillationMode::fourier_weighted;
            c.frequency = freq_;
            return quad::integrate_semi_infinite(f, a, c, env).value;
        }
        return quad::integrate_semi_infinite(f, a, cfg, env).value;
    }

    double centered_frac_moment(double m, const quad::QuadConfig& cfg) const {
        const double p = 2.0 - alpha_;
        auto prob = [&](double t) { return tail_upper(m + t) + tail_lower(m - t); };
        auto near = [&](double t) { return p * std::pow(t, p - 1.0) * prob(t); };
        const double T0 = std::abs(m) + cut_;
        std::vector<double> br;
        for (double k : {std::abs(cut_ - m), std::abs(cut_ + m)})
            if (k > 0.0 && k < T0) br.push_back(k);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        double total = quad::integrate(near, 0.0, T0, cfg, {1.0 - p, 0.0}, br).value;
        // beyond T0 both arguments are outside the cutoff
        auto powpart = [&](double t) {
            return A_ * ((1.0 + beta_) * std::pow(m + t, -alpha_) + (1.0 - beta_) * std::pow(t - m, -alpha_)) * p *
                   std::pow(t, p - 1.0);
        };
        quad::TailEnvelope env;
        env.audit = false;
        env.exponent = 2.0 * alpha_ - 1.0;
        env.length_scale = T0;
        total += quad::integrate_semi_infinite(powpart, T0, cfg, env).value;
        if (family_ != Family::pareto) {
            auto epspart = [&](double t) {
                return ((1.0 + beta_) * eps_tail(m + t) * std::pow(m + t, -alpha_) +
                        (1.0 - beta_) * eps_tail(m - t) * std::pow(t - m, -alpha_)) *
                       p * std::pow(t, p - 1.0);
            };
            total += half_line(epspart, T0, 2.0 * alpha_ - 1.0, cfg);
        }
        return total;
    }

    void audit() const {
        const std::string name = family_name(family_);
        // continuity of F at the cutoff on each charged side
        for (double sg : {1.0, -1.0}) {
            const double w = sg > 0 ? 1.0 + beta_ : 1.0 - beta_;
            if (w == 0.0) continue;
            const double edge = side_survival(sg, cut_ * (1.0 + 1e-15));
            if (!(std::abs(edge - 1.0) <= 1e-9)) {
                std::ostringstream os;
                os << name << " law: (A + eps) |x|^{-alpha} must equal 1/2 at the cutoff, got " << 0.5 * edge;
                throw InvalidFamilyParams(os.str());
            }
        }
        // monotone tails on a dense grid
        std::vector<double> grid;
        for (int k = 0; k <= 20000; ++k) grid.push_back(cut_ + 0.005 * k);
        for (int k = 1; k <= 4000; ++k) grid.push_back((cut_ + 100.0) * std::pow(1e7, k / 4000.0));
        for (double sg : {1.0, -1.0}) {
            double prev = side_survival(sg, cut_);
            for (double y : grid) {
                const double g = side_survival(sg, y);
                if (!(g >= 0.0) || g > prev * (1.0 + 1e-12)) {
                    std::ostringstream os;
                    os << name << " law: tail is not monotone near |x| = " << y;
                    throw InvalidFamilyParams(os.str());
                }
                prev = g;
            }
            if (!(side_survival(sg, 1e9 * cut_) < 1e-9)) throw InvalidFamilyParams(name + " law: tail does not vanish");
        }
        // eps bound |eps(x)| <= K / |x|^gamma
        std::vector<double> probe;
        for (int k = 0; k <= 400; ++k) probe.push_back(std::pow(10.0, -6.0 + 14.0 * k / 400.0));
        for (int k = 0; k <= 2000; ++k) probe.push_back(cut_ + 0.01 * k);
        for (double x : probe)
            for (double sg : {1.0, -1.0}) {
                const double e = std::abs(epsilon(sg * x));
                if (!(e <= K_ * std::pow(x, -gamma_) * (1.0 + 1e-12) + 1e-300)) {
                    std::ostringstream os;
                    os << name << " law: |eps(" << sg * x << ")| = " << e << " exceeds K/|x|^gamma";
                    throw InvalidFamilyParams(os.str());
                }
            }
        // eps vanishes at infinity
        auto window = [&](double R) {
            double s = 0.0;
            for (int k = 0; k <= 256; ++k)
                for (double sg : {1.0, -1.0})
                    s = std::max(s, std::abs(eps_tail(sg * (R + 2.0 * std::numbers::pi * k / 256))));
            return s;
        };
        const double s2 = window(1e2), s4 = window(1e4), s6 = window(1e6);
        if (!(s6 <= s4 && s4 <= s2 && (s6 < s2 || s2 == 0.0)))
            throw InvalidFamilyParams(name + " law: eps does not decay at infinity");
    }

    Family family_;
    double alpha_, A_, beta_;
    double K_ = 0.0, gamma_ = 0.0;
    double cut_ = 1.0;
    double p1_ = std::nan(""), p2_ = std::nan("");
    double freq_ = 0.0;
    std::optional<double> monotone_from_;
    std::function<double(double)> eps_fn_;
    double inv_alpha_ = 0.0, inv_alpha_tilde_ = 0.0, p_plus_ = 0.5;
};

/// Slowly varying law: symmetric density alpha^2 e^alpha / (2(1+alpha)) log|x| / |x|^{alpha+1} on |x| >= e.
class SlowVaryLaw {
public:
    explicit SlowVaryLaw(double alpha) : alpha_(alpha) {
        detail::check_law_alpha(alpha);
        C_ = alpha * alpha * std::exp(alpha) / (2.0 * (1.0 + alpha));
        inv_alpha_ = 1.0 / alpha;
        p_gamma_ = 1.0 / (1.0 + alpha);
    }

    double alpha() const { return alpha_; }
    double normalization_constant() const { return C_; }
    double cutoff() const { return std::numbers::e; }

    /// (alpha^2 e^alpha / ((1 + alpha) d_alpha))^{1/alpha}.
    double sigma() const {
        return std::pow(alpha_ * alpha_ * std::exp(alpha_) / ((1.0 + alpha_) * d_alpha(alpha_)), 1.0 / alpha_);
    }

    double pdf(double x) const {
        const double y = std::abs(x);
        if (y < std::numbers::e) return 0.0;
        return C_ * std::log(y) * std::pow(y, -alpha_ - 1.0);
    }

    /// P(|X| > y).
    double abs_survival(double y) const {
        if (y <= std::numbers::e) return 1.0;
        return std::exp(alpha_) * std::pow(y, -alpha_) * (alpha_ * std::log(y) + 1.0) / (1.0 + alpha_);
    }

    double tail_upper(double x) const { return x >= 0.0 ? 0.5 * abs_survival(x) : 1.0 - 0.5 * abs_survival(-x); }
    double tail_lower(double x) const { return x <= 0.0 ? 0.5 * abs_survival(-x) : 1.0 - 0.5 * abs_survival(x); }
    double cdf(double x) const { return tail_lower(x); }

    /// Exact draw: |X| = exp(1 + Y / alpha) with Y a (1/(1+alpha), alpha/(1+alpha))
    /// mixture of Gamma(2, 1) and Exp(1).
    double draw(rng::Stream& s) const {
        const bool up = (s.bits() >> 63) != 0;
        double Y = s.exponential();
        if (s.uniform() < p_gamma_) Y += s.exponential();
        return rng::with_sign(std::exp(1.0 + Y * inv_alpha_), up);
    }

    /// Draw by inverting P(|X| > y) = u, written in s = log y, with bisection and Newton.
    double draw_by_inversion(rng::Stream& s) const {
        const bool up = (s.bits() >> 63) != 0;
        const double u = s.uniform();
        const double y = invert_abs_survival(u);
        return up ? y : -y;
    }

    double invert_abs_survival(double u) const {
        // f(s) = alpha (1 - s) + log(alpha s + 1) - log(1 + alpha) - log u, concave and decreasing on s >= 1
        const double a = alpha_;
        const double lu = std::log(u);
        auto f = [&](double s) { return a * (1.0 - s) + std::log1p(a * s) - std::log1p(a) - lu; };
        double lo = 1.0, hi = 2.0;
        while (f(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e6) throw InversionFailure("slowly varying law: no bracket");
        }
        double s = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            const double v = f(s);
            (v > 0.0 ? lo : hi) = s;
            const double d = -a + a / (a * s + 1.0);
            double next = s - v / d;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - s) <= 1e-15 * s) {
                s = next;
                break;
            }
            s = next;
        }
        return std::exp(s);
    }

    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        std::vector<double> out(n);
        rng::Stream s(rng::stream_key(seed, {0xD0A5ULL, static_cast<std::uint64_t>(n)}));
        for (auto& x : out) x = draw(s);
        return out;
    }

    std::vector<double> sample_by_inversion(std::size_t n, std::uint64_t seed) const {
        std::vector<double> out(n);
        rng::Stream s(rng::stream_key(seed, {0xD0A6ULL, static_cast<std::uint64_t>(n)}));
        for (auto& x : out) x = draw_by_inversion(s);
        return out;
    }

    /// Integral of the density over the real line.
    double total_mass(const quad::QuadConfig& cfg = detail::law_quad()) const {
        auto f = [&](double x) { return pdf(x); };
        quad::TailEnvelope env;
        env.audit = false;
        env.exponent = alpha_ + 0.5;  // log x x^{-alpha-1} decays faster than this
        env.length_scale = std::numbers::e;
        return 2.0 * quad::integrate_semi_infinite(f, std::numbers::e, cfg, env).value;
    }

    Moments moments(const quad::QuadConfig& cfg = detail::law_quad()) const {
        const double e = std::numbers::e;
        quad::TailEnvelope env;
        env.audit = false;
        env.length_scale = e;
        env.exponent = alpha_ - 0.25;
        auto up = [&](double t) { return tail_upper(t); };
        auto lo = [&](double t) { return tail_lower(-t); };
        const double Iu = quad::integrate(up, 0.0, e, cfg).value + quad::integrate_semi_infinite(up, e, cfg, env).value;
        const double Il = quad::integrate(lo, 0.0, e, cfg).value + quad::integrate_semi_infinite(lo, e, cfg, env).value;
        Moments m;
        m.mean = Iu - Il;
        m.abs_mean = Iu + Il;
        const double p = 2.0 - alpha_;
        const double mu = m.mean;
        auto frac = [&](double t) { return p * std::pow(t, p - 1.0) * (tail_upper(mu + t) + tail_lower(mu - t)); };
        const double T0 = std::abs(mu) + e;
        std::vector<double> br;
        for (double k : {std::abs(e - mu), std::abs(e + mu)})
            if (k > 0.0 && k < T0) br.push_back(k);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        env.exponent = 2.0 * alpha_ - 1.25;
        env.length_scale = T0;
        m.centered_frac_moment = quad::integrate(frac, 0.0, T0, cfg, {1.0 - p, 0.0}, br).value +
                                 quad::integrate_semi_infinite(frac, T0, cfg, env).value;
        return m;
    }

    nlohmann::json to_json() const { return {{"family", "slowvary"}, {"alpha", alpha_}}; }

private:
    double alpha_, C_, inv_alpha_, p_gamma_;
};

/// gamma_n solving gamma = (n log gamma)^{1/alpha}, n >= e^alpha (so log gamma >= 1).
/// Newton's method on s = log gamma, then a polish in gamma; the residual is driven
/// to at most max(1e-12, 2 ulp(gamma)).
inline double gamma_n_solve(double alpha, double n) {
    detail::check_law_alpha(alpha);
    if (!(n >= std::exp(alpha) * (1.0 - 1e-15)) || !std::isfinite(n)) {
        std::ostringstream os;
        os << "gamma_n needs n >= e^alpha = " << std::exp(alpha) << ", got " << n;
        throw InvalidParameter(os.str());
    }
    const double ln = std::log(n);
    auto residual = [&](double g) { return g - std::pow(n * std::log(g), 1.0 / alpha); };
    double s = std::max(ln / alpha, 1.0);
    int it = 0;
    for (; it < 200; ++it) {
        const double F = alpha * s - ln - std::log(s);
        const double next = std::max(1.0, s - F / (alpha - 1.0 / s));
        if (std::abs(next - s) <= 4.0 * std::numeric_limits<double>::epsilon() * s) {
            s = next;
            break;
        }
        s = next;
    }
    double g = std::exp(s);
    for (; it < 200; ++it) {
        const double r = residual(g);
        const double lg = std::log(g);
        const double d = 1.0 - std::pow(n * lg, 1.0 / alpha) / (alpha * g * lg);
        const double next = g - r / d;
        if (next == g || std::abs(residual(next)) >= std::abs(r)) break;
        g = next;
    }
    if (it >= 200) throw NoConvergence("gamma_n fixed point: iteration cap of 200 reached");
    // best representable neighbour
    double best = g, best_r = std::abs(residual(g));
    double lo = g, hi = g;
    for (int k = 0; k < 8; ++k) {
        lo = std::nextafter(lo, 0.0);
        hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
        for (double c : {lo, hi}) {
            const double r = std::abs(residual(c));
            if (r < best_r) {
                best = c;
                best_r = r;
            }
        }
    }
    const double ulp = std::nextafter(best, std::numeric_limits<double>::infinity()) - best;
    if (!(best_r <= std::max(1e-12, 2.0 * ulp))) throw NoConvergence("gamma_n fixed point: residual did not reach tolerance");
    return best;
}

// ---------------------------------------------------------------------------
// law specifications

using EntryLaw = std::variant<NormalAttractionLaw, SlowVaryLaw>;

/// Named law with its family constants; unknown keys are rejected.
struct LawSpec {
    std::string family = "pareto";  ///< pareto | twopower | trig | logtail | slowvary
    double alpha = 1.5;
    double beta = 0.0;
    double alpha_tilde = 1.8;  ///< twopower
    double A_tilde = 0.25;     ///< twopower
    double B = 0.1;            ///< trig
    double D = 1.0;            ///< logtail

    static LawSpec from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw InvalidConfig("law specification must be a JSON object");
        LawSpec s;
        for (const auto& [key, val] : j.items()) {
            if (key == "family") {
                if (!val.is_string()) throw InvalidConfig("law family must be a string");
                s.family = val.get<std::string>();
                continue;
            }
            if (!val.is_number()) throw InvalidConfig("law field '" + key + "' must be a number");
            const double v = val.get<double>();
            if (key == "alpha") s.alpha = v;
            else if (key == "beta") s.beta = v;
            else if (key == "alpha_tilde") s.alpha_tilde = v;
            else if (key == "A_tilde") s.A_tilde = v;
            else if (key == "B") s.B = v;
            else if (key == "D") s.D = v;
            else throw InvalidConfig("unknown law field '" + key + "'");
        }
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"family", family}, {"alpha", alpha}};
        if (family != "slowvary") j["beta"] = beta;
        if (family == "twopower") {
            j["alpha_tilde"] = alpha_tilde;
            j["A_tilde"] = A_tilde;
        }
        if (family == "trig") j["B"] = B;
        if (family == "logtail") j["D"] = D;
        return j;
    }
};

inline EntryLaw make_example(const LawSpec& s) {
    if (s.family == "pareto") return NormalAttractionLaw::pareto(s.alpha, s.beta);
    if (s.family == "twopower") return NormalAttractionLaw::two_power(s.alpha, s.alpha_tilde, s.A_tilde, s.beta);
    if (s.family == "trig") return NormalAttractionLaw::trig_tail(s.alpha, s.B, s.beta);
    if (s.family == "logtail") return NormalAttractionLaw::log_tail(s.alpha, s.D, s.beta);
    if (s.family == "slowvary") return SlowVaryLaw(s.alpha);
    throw InvalidConfig("unknown law family '" + s.family + "' (pareto, twopower, trig, logtail, slowvary)");
}

}  // namespace stable_stein
