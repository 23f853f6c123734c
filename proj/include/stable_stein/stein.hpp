#pragma once

// The Stein operator of S_alpha(1, beta),
//   (L phi)(x) = d_alpha int [phi(x+u) - phi(x) - u phi'(x)] w_beta(u) / (2|u|^{1+alpha}) du,
// with w_beta = (1+beta) on u > 0 and (1-beta) on u < 0, in its defining form and
// the two first-derivative forms; the solution of the Stein equation
//   (L phi_h)(x) - (x/alpha) phi_h'(x) = h(x) - mu(h);
// and the diagnostics built on them.
//
// All integrals over u are split at |u| = delta and |u| = 1. Below delta the
// integrand is evaluated through a Taylor remainder in phi'' (no cancellation),
// between delta and 1 directly, and beyond 1 the terms that do not involve the
// shifted argument are integrated in closed form.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "stable_stein/errors.hpp"
#include "stable_stein/quad.hpp"
#include "stable_stein/stable.hpp"

namespace stable_stein {

/// A C^2 test function with declared bounds on |phi'| and |phi''|.
struct TestFunction {
    std::function<double(double)> phi;
    std::function<double(double)> phi_prime;
    std::function<double(double)> phi_second;
    double sup_phi_prime = std::numeric_limits<double>::quiet_NaN();
    double sup_phi_second = std::numeric_limits<double>::quiet_NaN();
    /// Angular frequency when phi is trigonometric; tails are then integrated over
    /// half-periods of the oscillation. Zero for non-oscillating functions.
    double frequency = 0.0;

    /// Checks the declared bounds on 10^3 probes over [-50, 50]; throws InvalidTestFunction.
    void validate() const {
        if (!phi || !phi_prime || !phi_second) throw InvalidTestFunction("phi, phi' and phi'' must all be provided");
        if (!(std::isfinite(sup_phi_prime) && sup_phi_prime >= 0.0) ||
            !(std::isfinite(sup_phi_second) && sup_phi_second >= 0.0))
            throw InvalidTestFunction("sup |phi'| and sup |phi''| must be finite and nonnegative");
        if (!(frequency >= 0.0 && std::isfinite(frequency)))
            throw InvalidTestFunction("frequency must be finite and nonnegative");
        const int probes = 1000;
        for (int k = 0; k < probes; ++k) {
            const double x = -50.0 + 100.0 * k / (probes - 1);
            const double d1 = std::abs(phi_prime(x));
            const double d2 = std::abs(phi_second(x));
            if (!(d1 <= sup_phi_prime * (1.0 + 1e-12) + 1e-15))
                throw InvalidTestFunction("|phi'(" + detail::num(x) + ")| = " + detail::num(d1) +
                                          " exceeds the declared bound " + detail::num(sup_phi_prime));
            if (!(d2 <= sup_phi_second * (1.0 + 1e-12) + 1e-15))
                throw InvalidTestFunction("|phi''(" + detail::num(x) + ")| = " + detail::num(d2) +
                                          " exceeds the declared bound " + detail::num(sup_phi_second));
        }
    }
};

namespace test_functions {

/// amplitude * sin(k x + shift)
inline TestFunction sine(double k = 1.0, double amplitude = 1.0, double shift = 0.0) {
    TestFunction f;
    f.phi = [=](double x) { return amplitude * std::sin(k * x + shift); };
    f.phi_prime = [=](double x) { return amplitude * k * std::cos(k * x + shift); };
    f.phi_second = [=](double x) { return -amplitude * k * k * std::sin(k * x + shift); };
    f.sup_phi_prime = std::abs(amplitude * k);
    f.sup_phi_second = std::abs(amplitude * k * k);
    f.frequency = std::abs(k);
    return f;
}

/// amplitude * exp(-(x - center)^2 / (2 width^2))
inline TestFunction gaussian_bump(double center = 0.0, double width = 1.0, double amplitude = 1.0) {
    if (!(width > 0.0)) throw InvalidTestFunction("bump width must be positive");
    const double w2 = width * width;
    TestFunction f;
    f.phi = [=](double x) { return amplitude * std::exp(-(x - center) * (x - center) / (2 * w2)); };
    f.phi_prime = [=](double x) {
        return -amplitude * (x - center) / w2 * std::exp(-(x - center) * (x - center) / (2 * w2));
    };
    f.phi_second = [=](double x) {
        const double d = x - center;
        return amplitude * (d * d / (w2 * w2) - 1.0 / w2) * std::exp(-d * d / (2 * w2));
    };
    f.sup_phi_prime = std::abs(amplitude) / (width * std::sqrt(std::numbers::e));
    f.sup_phi_second = std::abs(amplitude) / w2;
    return f;
}

/// Softplus ramp s log(1 + e^{x/s}): slope 0 on the far left and 1 on the far right.
inline TestFunction smoothed_ramp(double s = 1.0) {
    if (!(s > 0.0)) throw InvalidTestFunction("ramp smoothing must be positive");
    TestFunction f;
    f.phi = [=](double x) {
        const double z = x / s;
        return s * (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))));
    };
    f.phi_prime = [=](double x) { return 1.0 / (1.0 + std::exp(-x / s)); };
    f.phi_second = [=](double x) {
        const double e = std::exp(-std::abs(x) / s);
        return e / ((1.0 + e) * (1.0 + e) * s);
    };
    f.sup_phi_prime = 1.0;
    f.sup_phi_second = 0.25 / s;
    return f;
}

/// slope * x + intercept
inline TestFunction affine(double slope, double intercept) {
    TestFunction f;
    f.phi = [=](double x) { return slope * x + intercept; };
    f.phi_prime = [=](double) { return slope; };
    f.phi_second = [](double) { return 0.0; };
    f.sup_phi_prime = std::abs(slope);
    f.sup_phi_second = 0.0;
    return f;
}

/// c1 f1 + c2 f2, with the triangle-inequality bounds.
inline TestFunction linear_combination(double c1, const TestFunction& f1, double c2, const TestFunction& f2) {
    TestFunction f;
    f.phi = [=](double x) { return c1 * f1.phi(x) + c2 * f2.phi(x); };
    f.phi_prime = [=](double x) { return c1 * f1.phi_prime(x) + c2 * f2.phi_prime(x); };
    f.phi_second = [=](double x) { return c1 * f1.phi_second(x) + c2 * f2.phi_second(x); };
    f.sup_phi_prime = std::abs(c1) * f1.sup_phi_prime + std::abs(c2) * f2.sup_phi_prime;
    f.sup_phi_second = std::abs(c1) * f1.sup_phi_second + std::abs(c2) * f2.sup_phi_second;
    f.frequency = std::max(f1.frequency, f2.frequency);
    return f;
}

/// x -> f(-x)
inline TestFunction reflected(const TestFunction& g) {
    TestFunction f = g;
    f.phi = [g](double x) { return g.phi(-x); };
    f.phi_prime = [g](double x) { return -g.phi_prime(-x); };
    f.phi_second = [g](double x) { return g.phi_second(-x); };
    return f;
}

}  // namespace test_functions

namespace detail {

inline quad::QuadConfig default_operator_quad() {
    quad::QuadConfig c;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-13;
    c.max_subdivisions = 8000;
    return c;
}

/// Width of the Taylor zone around u = 0, in units of the argument shift.
inline constexpr double taylor_zone = 1e-2;

// 5-point Gauss-Legendre rule on [0, 1]
inline constexpr std::array<double, 5> gl5_nodes = {0.046910077030668004, 0.23076534494715845, 0.5,
                                                    0.76923465505284155, 0.95308992296933200};
inline constexpr std::array<double, 5> gl5_weights = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                                      0.23931433524968324, 0.11846344252809454};

inline void require_unit_scale(const StableParams& p) {
    if (p.sigma() != 1.0)
        throw InvalidParameter("the Stein operator is defined for sigma = 1, got sigma = " + detail::num(p.sigma()));
}

inline void add(quad::QuadResult& acc, const quad::QuadResult& r) {
    acc.value += r.value;
    acc.error_estimate += r.error_estimate;
    acc.evaluations += r.evaluations;
}

/// int_1^inf g(u) du. Oscillating integrands go over half-periods of `freq`;
/// otherwise 64 panels of width `panel` are followed by a mapped half-line of
/// decay exponent `exponent`.
template <class G>
quad::QuadResult tail_from_one(G&& g, double panel, double freq, double exponent, const quad::QuadConfig& cfg) {
    quad::TailEnvelope env;
    env.audit = false;  // test functions are probe-audited on their own
    env.exponent = exponent;
    if (freq > 0.0) {
        quad::QuadConfig c = cfg;
        c.oscillation_mode = quad::OscillationMode::fourier_weighted;
        c.frequency = freq;
        return quad::integrate_semi_infinite(g, 1.0, c, env);
    }
    const int panels = 64;
    std::vector<double> br;
    for (int k = 1; k < panels; ++k) br.push_back(1.0 + k * panel);
    const double U = 1.0 + panels * panel;
    auto r = quad::integrate(g, 1.0, U, cfg, {}, br);
    env.length_scale = panels * panel;
    add(r, quad::integrate_semi_infinite(g, U, cfg, env));
    return r;
}

/// Absolute tolerance no smaller than the cancellation noise of a difference of size
/// `level` weighted by u^{-1-p} on [uT, 1].
inline quad::QuadConfig roundoff_floor(quad::QuadConfig cfg, double level, double uT, double p) {
    const double weight = (std::pow(uT, -p) - 1.0) / p;
    cfg.abs_tol = std::max(cfg.abs_tol, 16.0 * std::numeric_limits<double>::epsilon() * level * weight);
    return cfg;
}

/// int_0^inf (phi'(x + sgn a u) - phi'(x)) u^{-alpha} du
inline quad::QuadResult one_sided_first_order(const TestFunction& f, double alpha, double x, double sgn, double a,
                                              const quad::QuadConfig& cfg) {
    const double fpx = f.phi_prime(x);
    const double uT = std::min(taylor_zone / a, 1.0);
    auto near = [&](double u) {
        double avg = 0.0;
        for (std::size_t k = 0; k < gl5_nodes.size(); ++k) avg += gl5_weights[k] * f.phi_second(x + sgn * gl5_nodes[k] * a * u);
        return sgn * a * std::pow(u, 1.0 - alpha) * avg;
    };
    quad::QuadResult r = quad::integrate(near, 0.0, uT, cfg, {alpha - 1.0, 0.0});
    if (uT < 1.0) {
        auto mid = [&](double u) { return (f.phi_prime(x + sgn * a * u) - fpx) * std::pow(u, -alpha); };
        add(r, quad::integrate(mid, uT, 1.0, roundoff_floor(cfg, std::abs(fpx), uT, alpha - 1.0)));
    }
    auto tail = [&](double u) { return f.phi_prime(x + sgn * a * u) * std::pow(u, -alpha); };
    add(r, tail_from_one(tail, 1.0 / a, a * f.frequency, alpha, cfg));
    r.value -= fpx / (alpha - 1.0);
    return r;
}

/// int_0^inf (phi(x + sgn u) - phi(x) - sgn u phi'(x)) u^{-1-alpha} du
inline quad::QuadResult one_sided_second_order(const TestFunction& f, double alpha, double x, double sgn,
                                               const quad::QuadConfig& cfg) {
    const double fx = f.phi(x);
    const double fpx = f.phi_prime(x);
    const double uT = taylor_zone;
    auto near = [&](double u) {
        // phi(x+v) - phi(x) - v phi'(x) = v^2 int_0^1 (1 - theta) phi''(x + theta v) dtheta
        double acc = 0.0;
        for (std::size_t k = 0; k < gl5_nodes.size(); ++k)
            acc += gl5_weights[k] * (1.0 - gl5_nodes[k]) * f.phi_second(x + sgn * gl5_nodes[k] * u);
        return std::pow(u, 1.0 - alpha) * acc;
    };
    quad::QuadResult r = quad::integrate(near, 0.0, uT, cfg, {alpha - 1.0, 0.0});
    auto mid = [&](double u) { return (f.phi(x + sgn * u) - fx - sgn * u * fpx) * std::pow(u, -1.0 - alpha); };
    add(r, quad::integrate(mid, uT, 1.0, roundoff_floor(cfg, std::abs(fx) + std::abs(fpx), uT, alpha)));
    auto tail = [&](double u) { return f.phi(x + sgn * u) * std::pow(u, -1.0 - alpha); };
    add(r, tail_from_one(tail, 1.0, f.frequency, alpha, cfg));
    r.value -= fx / alpha + sgn * fpx / (alpha - 1.0);
    return r;
}

inline quad::QuadResult scaled(quad::QuadResult r, double c) {
    r.value *= c;
    r.error_estimate *= std::abs(c);
    return r;
}

}  // namespace detail

/// Defining form, with the Taylor-remainder integrand near u = 0.
inline quad::QuadResult op_definition_result(const TestFunction& phi, const StableParams& p, double x,
                                             const quad::QuadConfig& cfg = detail::default_operator_quad()) {
    detail::require_unit_scale(p);
    phi.validate();
    const double a = p.alpha(), b = p.beta();
    quad::QuadResult out;
    if (1.0 + b != 0.0) detail::add(out, detail::scaled(detail::one_sided_second_order(phi, a, x, 1.0, cfg), 1.0 + b));
    if (1.0 - b != 0.0) detail::add(out, detail::scaled(detail::one_sided_second_order(phi, a, x, -1.0, cfg), 1.0 - b));
    return detail::scaled(out, 0.5 * d_alpha(a));
}

/// (d_alpha/alpha) int_0^inf [(1+beta)(phi'(x+u)-phi'(x)) - (1-beta)(phi'(x-u)-phi'(x))] / (2u^alpha) du
inline quad::QuadResult op_representation_1_result(const TestFunction& phi, const StableParams& p, double x,
                                                   const quad::QuadConfig& cfg = detail::default_operator_quad()) {
    detail::require_unit_scale(p);
    phi.validate();
    const double a = p.alpha(), b = p.beta();
    quad::QuadResult out;
    if (1.0 + b != 0.0) detail::add(out, detail::scaled(detail::one_sided_first_order(phi, a, x, 1.0, 1.0, cfg), 1.0 + b));
    if (1.0 - b != 0.0)
        detail::add(out, detail::scaled(detail::one_sided_first_order(phi, a, x, -1.0, 1.0, cfg), -(1.0 - b)));
    return detail::scaled(out, d_alpha(a) / (2.0 * a));
}

/// a^{1-alpha} (d_alpha/alpha) int_R u (phi'(x+au) - phi'(x)) w_beta(u) / (2|u|^{1+alpha}) du, for any a > 0.
inline quad::QuadResult op_representation_scaled_result(const TestFunction& phi, const StableParams& p, double x,
                                                        double scale,
                                                        const quad::QuadConfig& cfg = detail::default_operator_quad()) {
    detail::require_unit_scale(p);
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw NonPositiveScale("scale a must be a finite positive number, got " + detail::num(scale));
    phi.validate();
    const double a = p.alpha(), b = p.beta();
    quad::QuadResult out;
    if (1.0 + b != 0.0)
        detail::add(out, detail::scaled(detail::one_sided_first_order(phi, a, x, 1.0, scale, cfg), 1.0 + b));
    if (1.0 - b != 0.0)
        detail::add(out, detail::scaled(detail::one_sided_first_order(phi, a, x, -1.0, scale, cfg), -(1.0 - b)));
    return detail::scaled(out, std::pow(scale, 1.0 - a) * d_alpha(a) / (2.0 * a));
}

inline double op_definition(const TestFunction& phi, const StableParams& p, double x) {
    return op_definition_result(phi, p, x).value;
}
inline double op_representation_1(const TestFunction& phi, const StableParams& p, double x) {
    return op_representation_1_result(phi, p, x).value;
}
inline double op_representation_scaled(const TestFunction& phi, const StableParams& p, double x, double a) {
    return op_representation_scaled_result(phi, p, x, a).value;
}

// ---------------------------------------------------------------------------
// Hoelder certificate

struct HolderCertificate {
    double lhs = 0.0;        ///< |L phi(x) - L phi(y)|
    double rhs = 0.0;        ///< 4 d_alpha ||phi''|| |x-y|^{2-alpha} / (alpha (2-alpha)(alpha-1))
    double lhs_error = 0.0;  ///< quadrature error estimate of lhs
    bool passed = false;     ///< lhs + lhs_error <= rhs
};

inline HolderCertificate holder_certificate(const TestFunction& phi, const StableParams& p, double x, double y) {
    if (x == y) throw InvalidParameter("the Hoelder certificate needs x != y");
    const auto lx = op_representation_1_result(phi, p, x);
    const auto ly = op_representation_1_result(phi, p, y);
    const double a = p.alpha();
    HolderCertificate c;
    c.lhs = std::abs(lx.value - ly.value);
    c.lhs_error = lx.error_estimate + ly.error_estimate;
    c.rhs = 4.0 * d_alpha(a) * phi.sup_phi_second / (a * (2.0 - a) * (a - 1.0)) * std::pow(std::abs(x - y), 2.0 - a);
    c.passed = c.lhs + c.lhs_error <= c.rhs;
    return c;
}

// ---------------------------------------------------------------------------
// Stein solution for h_lambda, h_lambda'(x) = e^{i lambda x}

/// phi_{h_lambda} for S_alpha(1, beta). With s = e^{-t/alpha} the solution derivative is
///   phi'(y) = -alpha int_0^1 e^{i lambda s y} g(s) ds,  g(s) = exp(-kappa (1 - s^alpha)),
/// kappa = |lambda|^alpha (1 - i beta sign(lambda) tan(pi alpha/2)).
class SteinSolutionHLambda {
public:
    using complex = std::complex<double>;

    SteinSolutionHLambda(double lambda, const StableParams& params,
                         const quad::QuadConfig& cfg = detail::default_operator_quad())
        : lambda_(lambda), params_(params), cfg_(cfg) {
        if (!(lambda != 0.0) || !std::isfinite(lambda))
            throw InvalidParameter("lambda must be finite and nonzero, got " + detail::num(lambda));
        detail::require_unit_scale(params);
        const double sgn = lambda > 0.0 ? 1.0 : -1.0;
        skew_ = complex(1.0, -params.beta() * sgn * std::tan(std::numbers::pi * params.alpha() / 2.0));
        kappa_ = std::pow(std::abs(lambda), params.alpha()) * skew_;
        g0_ = std::exp(-kappa_);
    }

    double lambda() const noexcept { return lambda_; }
    const StableParams& params() const noexcept { return params_; }

    complex g(double s) const { return std::exp(-kappa_ * (1.0 - std::pow(s, params_.alpha()))); }

    complex phi_prime(double y) const {
        return -params_.alpha() * inner(y, std::abs(lambda_ * y), [](double) { return complex(1.0, 0.0); });
    }
    double phi_prime_re(double y) const { return phi_prime(y).real(); }
    double phi_prime_im(double y) const { return phi_prime(y).imag(); }

    complex phi_second(double y) const {
        const double l = lambda_;
        return -params_.alpha() * inner(y, std::abs(l * y), [l](double s) { return complex(0.0, l * s); });
    }

    /// h_lambda(x) - mu(h_lambda) = (e^{i lambda x} - e^{-kappa}) / (i lambda)
    complex h_centered(double x) const {
        return (std::exp(complex(0.0, lambda_ * x)) - g0_) / complex(0.0, lambda_);
    }

    /// (L phi_{h_lambda})(x) through the first-derivative form.
    complex op_value(double x) const {
        const double a = params_.alpha(), b = params_.beta();
        const double wl = std::abs(lambda_);
        const complex phx = phi_prime(x);

        // [0, 1]: the bracket (1+b)(phi'(x+u)-phi'(x)) - (1-b)(phi'(x-u)-phi'(x)) equals
        // -a int_0^1 e^{i l s x} g(s) K(l s u) ds with K(t) = 2i sin t - 4b sin^2(t/2).
        auto bracket_near = [&](double u) {
            const double l = lambda_;
            auto kern = [l, u, b](double s) {
                const double t = l * s * u;
                const double h = std::sin(0.5 * t);
                return complex(-4.0 * b * h * h, 2.0 * std::sin(t));
            };
            return -a * inner(x, wl * (std::abs(x) + u), kern) * std::pow(u, -a);
        };
        complex total = quad::integrate(bracket_near, 0.0, 1.0, cfg_, {a - 1.0, 0.0}).value;

        // [1, R]: direct, with the constant part -2 b phi'(x) integrated exactly over [1, inf)
        const double R = 40.0 + std::abs(x);
        auto bracket = [&](double u) {
            return ((1.0 + b) * phi_prime(x + u) - (1.0 - b) * phi_prime(x - u)) * std::pow(u, -a);
        };
        std::vector<double> br;
        const double hp = std::numbers::pi / wl;
        for (double u = 1.0 + hp; u < R; u += hp) br.push_back(u);
        total += quad::integrate(bracket, 1.0, R, cfg_, {}, br).value;
        total += -2.0 * b * phx / (a - 1.0);

        // [R, inf): the non-oscillating asymptotic part of phi' on a mapped half-line,
        // the oscillating remainder over half-periods of lambda
        auto smooth = [&](double u) {
            return ((1.0 + b) * phi_prime_smooth(x + u) - (1.0 - b) * phi_prime_smooth(x - u)) * std::pow(u, -a);
        };
        auto oscillating = [&](double u) { return bracket(u) - smooth(u); };
        quad::TailEnvelope env;
        env.audit = false;
        env.exponent = 1.0 + a;
        env.length_scale = R;
        total += quad::integrate_semi_infinite(smooth, R, cfg_, env).value;
        quad::QuadConfig osc = cfg_;
        osc.oscillation_mode = quad::OscillationMode::fourier_weighted;
        osc.frequency = wl;
        total += quad::integrate_semi_infinite(oscillating, R, osc, env).value;

        return d_alpha(a) / (2.0 * a) * total;
    }

    /// Non-oscillating part of phi'(y) for large |lambda y|: the expansion of the
    /// s = 0 endpoint, -alpha e^{-kappa} sum_m kappa^m Gamma(1 + m alpha)/m! (-i lambda y)^{-1-m alpha}.
    complex phi_prime_smooth(double y) const {
        const double a = params_.alpha();
        const complex z(0.0, -lambda_ * y);
        complex sum(0.0, 0.0);
        complex kpow(1.0, 0.0);
        double prev = std::numeric_limits<double>::infinity();
        for (int m = 0; m <= 60; ++m) {
            const complex term = kpow * std::exp(std::lgamma(1.0 + m * a) - std::lgamma(m + 1.0)) * std::pow(z, -1.0 - m * a);
            const double mag = std::abs(term);
            if (mag > prev) break;
            sum += term;
            prev = mag;
            if (mag < 1e-18 * std::abs(sum)) break;
            kpow *= kappa_;
        }
        return -a * g0_ * sum;
    }

private:
    /// int_0^1 e^{i lambda s y} g(s) w(s) ds, panelled by the oscillation frequency `omega`.
    template <class W>
    complex inner(double y, double omega, W&& w) const {
        auto f = [&](double s) { return std::exp(complex(0.0, lambda_ * s * y)) * g(s) * w(s); };
        const int pieces = std::min(2000, static_cast<int>(std::ceil(omega / std::numbers::pi)));
        std::vector<double> br;
        for (int k = 1; k < pieces; ++k) br.push_back(static_cast<double>(k) / pieces);
        return quad::integrate(f, 0.0, 1.0, cfg_, {}, br).value;
    }

    double lambda_;
    StableParams params_;
    quad::QuadConfig cfg_;
    complex skew_, kappa_, g0_;
};

inline std::complex<double> stein_solution_deriv_hlambda(const SteinSolutionHLambda& s, double x) {
    return s.phi_prime(x);
}

/// (L phi_h)(x) - (x/alpha) phi_h'(x) - (h(x) - mu(h)) for h = h_lambda; zero up to quadrature error.
inline std::complex<double> stein_residual(const SteinSolutionHLambda& s, double x) {
    return s.op_value(x) - x / s.params().alpha() * s.phi_prime(x) - s.h_centered(x);
}

// ---------------------------------------------------------------------------
// Stein solution for a generic Lipschitz h

struct LipschitzFunction {
    std::function<double(double)> h;
    /// sup |h'|; must be supplied.
    double lipschitz = std::numeric_limits<double>::quiet_NaN();
    /// Angular frequency when h oscillates; the heavy-tailed parts of the inner
    /// integrals are then summed over half-periods. Zero otherwise.
    double frequency = 0.0;
};

/// phi_h(x) = -int_0^inf J(t) dt with
///   J(t) = int p_{1,beta}(z) [h(e^{-t/alpha} x + (1 - e^{-t})^{1/alpha} z) - h(z)] dz,
/// which is the defining double integral after the scaling law. Since
/// |J(t)| <= ||h'|| e^{-t/alpha} (|x| + E|Z|), the t-integral is truncated at
/// T = alpha log(alpha ||h'|| (|x| + E|Z|) / abs_tol).
inline quad::QuadConfig default_generic_solution_quad() {
    quad::QuadConfig c;
    c.rel_tol = 1e-8;
    c.abs_tol = 1e-10;
    c.max_subdivisions = 20000;
    return c;
}

inline double stein_solution_generic(const LipschitzFunction& h, const DensityTable& table, double x,
                                     const quad::QuadConfig& cfg = default_generic_solution_quad()) {
    if (!h.h) throw LipschitzBoundMissing("h must be provided");
    if (!(std::isfinite(h.lipschitz) && h.lipschitz >= 0.0))
        throw LipschitzBoundMissing("a finite Lipschitz bound ||h'|| is required, got " + detail::num(h.lipschitz));
    if (table.params().sigma() != 1.0)
        throw TableMismatch("the Stein solution needs a sigma = 1 table, got sigma = " +
                            detail::num(table.params().sigma()));
    if (h.lipschitz == 0.0) return 0.0;
    const double a = table.params().alpha();
    const double mean_abs = table.lower_partial(0.0) + table.upper_partial(0.0);
    const double scale = a * h.lipschitz * (std::abs(x) + mean_abs);
    const double T = std::max(1.0, a * std::log(std::max(scale / cfg.abs_tol, 2.0)));

    const quad::QuadConfig& inner_cfg = cfg;
    const double Z0 = 64.0;
    std::vector<double> br;
    for (int k = 1; k < 64; ++k) br.push_back(k);
    quad::TailEnvelope env;
    env.audit = false;
    env.exponent = a;
    env.length_scale = Z0;
    // int_{Z0}^inf p(sgn z) g(z) dz for an integrand oscillating at angular frequency w (0: none)
    auto tail = [&](auto&& g, double w) {
        if (w < 0.05) return quad::integrate_semi_infinite(g, Z0, inner_cfg, env).value;
        quad::QuadConfig c = inner_cfg;
        c.oscillation_mode = quad::OscillationMode::fourier_weighted;
        c.frequency = w;
        return quad::integrate_semi_infinite(g, Z0, c, env).value;
    };
    auto J = [&](double t) {
        const double shrink = std::exp(-t / a);
        const double spread = std::pow(-std::expm1(-t), 1.0 / a);
        const double ax = shrink * x;
        double v = 0.0;
        for (double sgn : {1.0, -1.0}) {
            auto f = [&](double z) { return table.std_pdf(sgn * z) * (h.h(ax + spread * sgn * z) - h.h(sgn * z)); };
            v += quad::integrate(f, 0.0, Z0, inner_cfg, {}, br).value;
            if (h.frequency > 0.0) {
                // both pieces converge on their own since |h(z)| grows at most linearly
                auto shifted = [&](double z) { return table.std_pdf(sgn * z) * h.h(ax + spread * sgn * z); };
                auto plain = [&](double z) { return table.std_pdf(sgn * z) * h.h(sgn * z); };
                v += tail(shifted, h.frequency * spread) - tail(plain, h.frequency);
            } else {
                v += tail(f, 0.0);
            }
        }
        return v;
    };
    return -quad::integrate(J, 0.0, T, cfg, {1.0 - 1.0 / a, 0.0}).value;
}

}  // namespace stable_stein
