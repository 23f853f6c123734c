#pragma once

// One-dimensional adaptive quadrature: a global Gauss-Kronrod (10/21) driver,
// power-law endpoint substitutions, a rational map for half-lines and
// half-period partial summation with epsilon-algorithm acceleration for
// oscillatory tails. Integrands may return double, std::complex<double> or
// quad::Vec<T, N>; the error norm is the largest component magnitude.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include "stable_stein/errors.hpp"

namespace stable_stein::quad {

enum class OscillationMode { plain, fourier_weighted };

struct QuadConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int max_subdivisions = 4000;
    OscillationMode oscillation_mode = OscillationMode::plain;
    /// Angular frequency of the oscillation, used when oscillation_mode is fourier_weighted.
    double frequency = 0.0;
    /// Half-period panels wider than this are pre-split so slowly oscillating
    /// integrands with fast decay are still resolved near the origin.
    double max_panel_width = 16.0;

    void validate() const {
        if (!(rel_tol > 0.0)) throw InvalidConfig("rel_tol must be > 0");
        if (!(abs_tol >= 0.0)) throw InvalidConfig("abs_tol must be >= 0");
        if (max_subdivisions < 1) throw InvalidConfig("max_subdivisions must be >= 1");
        if (oscillation_mode == OscillationMode::fourier_weighted && !(frequency > 0.0) )
            throw InvalidConfig("fourier_weighted mode needs a positive frequency");
        if (!(max_panel_width > 0.0)) throw InvalidConfig("max_panel_width must be > 0");
    }
};

template <class T>
struct BasicQuadResult {
    T value{};
    double error_estimate = 0.0;
    std::size_t evaluations = 0;
};

using QuadResult = BasicQuadResult<double>;

/// Exponents s in [0, 1) of integrable endpoint behaviour f ~ |x - endpoint|^{-s}.
/// A positive value triggers the substitution x = a + (b - a) t^{1/(1-s)}.
struct EndpointSingularity {
    double left = 0.0;
    double right = 0.0;
};

/// Declared decay of an integrand on a half-line: |f(x)| <= scale * (1 + x - a)^{-exponent}.
/// `remainder`, when set, must return an upper bound of the integral of |f| beyond its argument.
struct TailEnvelope {
    double exponent = 2.0;
    double scale = std::numeric_limits<double>::quiet_NaN();
    bool audit = true;
    double length_scale = 1.0;
    std::function<double(double)> remainder;
};

// ---------------------------------------------------------------------------
// small fixed-size vector value type

template <class T, std::size_t N>
struct Vec {
    std::array<T, N> v{};

    T& operator[](std::size_t i) { return v[i]; }
    const T& operator[](std::size_t i) const { return v[i]; }

    Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) v[i] -= o.v[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (auto& x : v) x *= s;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
};

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z); }
template <class T, std::size_t N>
double magnitude(const Vec<T, N>& x) {
    double m = 0.0;
    for (const auto& c : x.v) m = std::max(m, magnitude(c));
    return m;
}

inline bool all_finite(double x) { return std::isfinite(x); }
inline bool all_finite(const std::complex<double>& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}
template <class T, std::size_t N>
bool all_finite(const Vec<T, N>& x) {
    return std::all_of(x.v.begin(), x.v.end(), [](const T& c) { return all_finite(c); });
}

namespace detail {

inline constexpr std::array<double, 11> xgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> wgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980223339, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> wg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

inline constexpr double eps = std::numeric_limits<double>::epsilon();

template <class T>
struct Panel {
    double a = 0.0;
    double b = 0.0;
    T value{};
    double error = 0.0;
    double resabs = 0.0;
};

template <class T>
struct PanelLess {
    bool operator()(const Panel<T>& x, const Panel<T>& y) const { return x.error < y.error; }
};

template <class T, class F>
T checked_eval(F& f, double x) {
    T y = f(x);
    if (!all_finite(y)) {
        std::ostringstream os;
        os.precision(17);
        os << "integrand is not finite at x = " << x;
        throw NonFiniteEvaluation(os.str());
    }
    return y;
}

template <class T, class F>
Panel<T> kronrod21(F& f, double a, double b, std::size_t& evals) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const T fc = checked_eval<T>(f, c);
    T resk = fc * wgk[10];
    T resg = fc * 0.0;
    double resabs = wgk[10] * magnitude(fc);
    std::array<T, 10> f1{}, f2{};
    for (std::size_t j = 0; j < 10; ++j) {
        const double dx = h * xgk[j];
        f1[j] = checked_eval<T>(f, c - dx);
        f2[j] = checked_eval<T>(f, c + dx);
        const T s = f1[j] + f2[j];
        resk += s * wgk[j];
        resabs += wgk[j] * (magnitude(f1[j]) + magnitude(f2[j]));
        if (j % 2 == 1) resg += s * wg[(j - 1) / 2];
    }
    evals += 21;
    const T mean = resk * 0.5;
    double resasc = wgk[10] * magnitude(fc - mean);
    for (std::size_t j = 0; j < 10; ++j)
        resasc += wgk[j] * (magnitude(f1[j] - mean) + magnitude(f2[j] - mean));

    Panel<T> p;
    p.a = a;
    p.b = b;
    p.value = resk * h;
    p.resabs = resabs * std::abs(h);
    resasc *= std::abs(h);
    double err = magnitude((resk - resg) * h);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    if (p.resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * p.resabs, err);
    p.error = err;
    return p;
}

/// Global adaptive bisection over the initial partition `pts` (sorted, size >= 2).
template <class T, class F>
BasicQuadResult<T> adaptive(F& f, const std::vector<double>& pts, const QuadConfig& cfg) {
    std::priority_queue<Panel<T>, std::vector<Panel<T>>, PanelLess<T>> heap;
    std::vector<Panel<T>> frozen;
    std::size_t evals = 0;
    T total{};
    total = total * 0.0;
    double total_err = 0.0;
    double total_abs = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        Panel<T> p = kronrod21<T>(f, pts[i], pts[i + 1], evals);
        total += p.value;
        total_err += p.error;
        total_abs += p.resabs;
        heap.push(p);
    }
    const std::size_t budget = static_cast<std::size_t>(cfg.max_subdivisions) + pts.size();
    while (true) {
        const double tol = std::max(cfg.abs_tol, cfg.rel_tol * magnitude(total));
        if (total_err <= tol || total_err <= 50.0 * eps * total_abs) break;
        if (heap.empty()) {
            std::ostringstream os;
            os << "panels cannot be refined further; error estimate " << total_err << " exceeds " << tol;
            throw NonConvergent(os.str());
        }
        if (heap.size() + frozen.size() >= budget) {
            std::ostringstream os;
            os << "subdivision budget of " << cfg.max_subdivisions << " exhausted; error estimate "
               << total_err << " exceeds " << tol;
            throw NonConvergent(os.str());
        }
        Panel<T> worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const double scale = std::max(std::abs(worst.a), std::abs(worst.b));
        if (!(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 64.0 * eps * scale) {
            frozen.push_back(worst);
            continue;
        }
        Panel<T> left = kronrod21<T>(f, worst.a, mid, evals);
        Panel<T> right = kronrod21<T>(f, mid, worst.b, evals);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.resabs + right.resabs - worst.resabs;
        heap.push(left);
        heap.push(right);
    }
    // re-sum from scratch to avoid drift in the running totals
    BasicQuadResult<T> out;
    out.value = total * 0.0;
    double err = 0.0;
    while (!heap.empty()) {
        out.value += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    for (const auto& p : frozen) {
        out.value += p.value;
        err += p.error;
    }
    out.error_estimate = err;
    out.evaluations = evals;
    return out;
}

template <class F>
using value_t = std::decay_t<std::invoke_result_t<F&, double>>;

inline void check_exponent(double s, const char* where) {
    if (!(s >= 0.0 && s < 1.0)) {
        std::ostringstream os;
        os << where << " singularity exponent must lie in [0,1), got " << s;
        throw InvalidConfig(os.str());
    }
}

/// Integral over [a, b] with a possible singularity at the left end only.
template <class F>
auto integrate_left(F& f, double a, double b, double s, std::vector<double> inner, const QuadConfig& cfg) {
    using T = value_t<F>;
    std::vector<double> pts;
    if (s > 0.0) {
        const double k = 1.0 / (1.0 - s);
        const double len = b - a;
        auto g = [&](double t) -> T {
            const double tk1 = std::pow(t, k - 1.0);
            return f(a + len * tk1 * t) * (k * len * tk1);
        };
        pts.push_back(0.0);
        for (double x : inner) pts.push_back(std::pow((x - a) / len, 1.0 / k));
        pts.push_back(1.0);
        return adaptive<T>(g, pts, cfg);
    }
    pts.push_back(a);
    pts.insert(pts.end(), inner.begin(), inner.end());
    pts.push_back(b);
    return adaptive<T>(f, pts, cfg);
}

template <class F>
auto integrate_right(F& f, double a, double b, double s, std::vector<double> inner, const QuadConfig& cfg) {
    using T = value_t<F>;
    if (s > 0.0) {
        // reflect: x = b - y, y in [0, b - a]
        auto g = [&](double y) -> T { return f(b - y); };
        std::vector<double> refl;
        for (auto it = inner.rbegin(); it != inner.rend(); ++it) refl.push_back(b - *it);
        return integrate_left(g, 0.0, b - a, s, refl, cfg);
    }
    return integrate_left(f, a, b, 0.0, std::move(inner), cfg);
}

template <class T>
void accumulate(BasicQuadResult<T>& acc, const BasicQuadResult<T>& r) {
    acc.value += r.value;
    acc.error_estimate += r.error_estimate;
    acc.evaluations += r.evaluations;
}

// ---------------------------------------------------------------------------
// epsilon algorithm

template <class S>
std::pair<S, double> wynn_scalar(const std::vector<S>& seq) {
    const std::size_t n = seq.size();
    if (n == 0) return {S{}, std::numeric_limits<double>::infinity()};
    if (n < 3) {
        const double e = n == 2 ? std::abs(seq[1] - seq[0]) : std::numeric_limits<double>::infinity();
        return {seq.back(), e};
    }
    const std::size_t m = std::min<std::size_t>(n, 30);
    std::vector<S> prev(m + 1, S{});  // column k-1 (starts as the zero column)
    std::vector<S> cur(seq.end() - static_cast<std::ptrdiff_t>(m), seq.end());
    // bottom entries of each even column: the most recent estimate of that order
    std::vector<S> bottoms{cur.back()};
    for (std::size_t k = 1; cur.size() > 1; ++k) {
        std::vector<S> next(cur.size() - 1);
        bool broke = false;
        for (std::size_t j = 0; j + 1 < cur.size(); ++j) {
            const S d = cur[j + 1] - cur[j];
            if (std::abs(d) <= 1e-300 + 4.0 * eps * std::max(std::abs(cur[j]), std::abs(cur[j + 1]))) {
                broke = true;
                break;
            }
            next[j] = prev[j + 1] + S(1.0) / d;
        }
        if (broke) break;
        prev = std::move(cur);
        cur = std::move(next);
        if (k % 2 == 0) bottoms.push_back(cur.back());
    }
    // pick the even column whose estimate is most stable against its neighbour
    S best = seq.back();
    double best_err = std::abs(seq[n - 1] - seq[n - 2]);
    if (best_err == 0.0) return {best, 0.0};
    for (std::size_t i = 1; i < bottoms.size(); ++i) {
        const double e = std::abs(bottoms[i] - bottoms[i - 1]);
        if (e < best_err) {
            best_err = e;
            best = bottoms[i];
        }
    }
    return {best, best_err};
}

inline std::pair<double, double> wynn(const std::vector<double>& s) { return wynn_scalar(s); }
inline std::pair<std::complex<double>, double> wynn(const std::vector<std::complex<double>>& s) {
    return wynn_scalar(s);
}
template <class T, std::size_t N>
std::pair<Vec<T, N>, double> wynn(const std::vector<Vec<T, N>>& s) {
    Vec<T, N> out;
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<T> comp;
        comp.reserve(s.size());
        for (const auto& v : s) comp.push_back(v[i]);
        auto [e, de] = wynn(comp);
        out[i] = e;
        err = std::max(err, de);
    }
    return {out, err};
}

}  // namespace detail

/// Epsilon-algorithm extrapolation of a sequence of partial sums; returns the
/// accelerated limit and an error estimate from the two most consistent orders.
template <class T>
std::pair<T, double> wynn_epsilon(const std::vector<T>& partial_sums) {
    return detail::wynn(partial_sums);
}

/// Adaptive quadrature of f over [a, b].
///
/// `breakpoints` are interior abscissae where the integrand is known to be
/// non-smooth; `sing` declares integrable endpoint singularities.
template <class F>
auto integrate(F&& f, double a, double b, const QuadConfig& cfg = {}, const EndpointSingularity& sing = {},
               std::span<const double> breakpoints = {}) -> BasicQuadResult<detail::value_t<F>> {
    using T = detail::value_t<F>;
    cfg.validate();
    if (!(std::isfinite(a) && std::isfinite(b)) || !(a < b)) {
        std::ostringstream os;
        os.precision(17);
        os << "need finite a < b, got [" << a << ", " << b << "]";
        throw InvalidInterval(os.str());
    }
    detail::check_exponent(sing.left, "left");
    detail::check_exponent(sing.right, "right");
    std::vector<double> inner;
    for (double x : breakpoints)
        if (x > a && x < b) inner.push_back(x);
    std::sort(inner.begin(), inner.end());
    inner.erase(std::unique(inner.begin(), inner.end()), inner.end());

    auto& fn = f;
    if (sing.left > 0.0 && sing.right > 0.0) {
        // split so that each piece carries one singular endpoint
        double mid = 0.5 * (a + b);
        if (!inner.empty()) {
            auto it = std::min_element(inner.begin(), inner.end(),
                                       [mid](double x, double y) { return std::abs(x - mid) < std::abs(y - mid); });
            mid = *it;
        }
        std::vector<double> lo, hi;
        for (double x : inner) {
            if (x < mid) lo.push_back(x);
            if (x > mid) hi.push_back(x);
        }
        BasicQuadResult<T> r = detail::integrate_left(fn, a, mid, sing.left, lo, cfg);
        detail::accumulate(r, detail::integrate_right(fn, mid, b, sing.right, hi, cfg));
        return r;
    }
    if (sing.right > 0.0) return detail::integrate_right(fn, a, b, sing.right, inner, cfg);
    return detail::integrate_left(fn, a, b, sing.left, inner, cfg);
}

namespace detail {

template <class F>
void audit_envelope(F& f, double a, const TailEnvelope& env, double abs_tol) {
    if (!env.audit) return;
    const double L = env.length_scale;
    const int probes = 32;
    std::vector<double> r(probes);
    for (int k = 0; k < probes; ++k) {
        const double d = L * std::ldexp(1.0, k);
        const double x = a + d;
        r[k] = magnitude(f(x)) * std::pow(1.0 + d / L, env.exponent);
    }
    double scale = env.scale;
    if (!std::isfinite(scale)) scale = *std::max_element(r.begin(), r.begin() + 4);
    const double limit = 16.0 * scale + abs_tol;
    for (int k = 4; k < probes; ++k) {
        if (r[k] > limit && r[k] > 1e-300) {
            std::ostringstream os;
            os << "|f| exceeds the declared envelope of exponent " << env.exponent << " at x = "
               << a + L * std::ldexp(1.0, k) << " (ratio " << r[k] / std::max(scale, 1e-300) << ")";
            throw EnvelopeViolated(os.str());
        }
    }
}

template <class F>
auto semi_infinite_plain(F& f, double a, const QuadConfig& cfg, const TailEnvelope& env, double left_sing) {
    using T = value_t<F>;
    if (!(env.exponent > 1.0)) throw InvalidConfig("plain half-line quadrature needs a decay exponent > 1");
    audit_envelope(f, a, env, cfg.abs_tol);
    const double L = env.length_scale;
    // t in (0, 1] maps to a + L t / (1 - t); y = 1 - t is the distance to the point at infinity.
    // Both halves are written in the variable that vanishes at their singular end so that
    // no rounding of 1 - t can send the abscissa to infinity.
    auto gt = [&](double t) -> T {
        const double u = 1.0 - t;
        return f(a + L * t / u) * (L / (u * u));
    };
    auto gy = [&](double y) -> T { return f(a + L * (1.0 - y) / y) * (L / (y * y)); };
    const double tail_sing = env.exponent < 2.0 ? 2.0 - env.exponent : 0.0;
    QuadConfig c = cfg;
    c.oscillation_mode = OscillationMode::plain;
    if (left_sing > 0.0) {
        auto r = integrate(gt, 0.0, 0.5, c, EndpointSingularity{left_sing, 0.0});
        accumulate(r, integrate(gy, 0.0, 0.5, c, EndpointSingularity{tail_sing, 0.0}));
        return r;
    }
    return integrate(gy, 0.0, 1.0, c, EndpointSingularity{tail_sing, 0.0});
}

template <class F>
auto semi_infinite_fourier(F& f, double a, const QuadConfig& cfg, const TailEnvelope& env, double left_sing) {
    using T = value_t<F>;
    const double hp = std::numbers::pi / cfg.frequency;
    QuadConfig c = cfg;
    c.oscillation_mode = OscillationMode::plain;
    BasicQuadResult<T> acc;
    acc.value = acc.value * 0.0;
    std::vector<T> partial;
    double panel_err = 0.0;
    double last_est_diff = std::numeric_limits<double>::infinity();
    T last_est{};
    bool have_est = false;
    const int max_panels = std::max(cfg.max_subdivisions, 8);
    for (int k = 0; k < max_panels; ++k) {
        const double x0 = a + k * hp;
        const double x1 = a + (k + 1) * hp;
        std::vector<double> br;
        if (hp > cfg.max_panel_width) {
            if (k == 0) {
                for (double w = cfg.max_panel_width / 16.0; a + w < x1; w *= 2.0) br.push_back(a + w);
            } else {
                const int pieces = std::min(64, static_cast<int>(std::ceil(hp / cfg.max_panel_width)));
                for (int j = 1; j < pieces; ++j) br.push_back(x0 + hp * j / pieces);
            }
        }
        EndpointSingularity s;
        if (k == 0) s.left = left_sing;
        auto r = integrate(f, x0, x1, c, s, br);
        acc.value += r.value;
        acc.evaluations += r.evaluations;
        panel_err += r.error_estimate;
        partial.push_back(acc.value);
        const double tol = std::max(cfg.abs_tol, cfg.rel_tol * magnitude(acc.value));
        if (env.remainder) {
            const double rem = env.remainder(x1);
            if (rem <= 0.1 * tol) {
                acc.error_estimate = panel_err + rem;
                return acc;
            }
            continue;
        }
        if (partial.size() >= 4) {
            auto [est, werr] = wynn_epsilon(partial);
            if (have_est) {
                const double diff = magnitude(est - last_est);
                if (werr <= tol && diff <= tol && last_est_diff <= tol) {
                    acc.value = est;
                    acc.error_estimate = panel_err + std::max(werr, diff);
                    return acc;
                }
                last_est_diff = diff;
            }
            last_est = est;
            have_est = true;
        }
    }
    std::ostringstream os;
    os << "oscillatory tail did not converge within " << max_panels << " half-period panels";
    throw NonConvergent(os.str());
}

}  // namespace detail

/// Integral of f over [a, infinity).
///
/// Plain mode maps the half-line onto [0, 1) via x = a + L t/(1 - t) and uses the
/// declared decay exponent p for the induced endpoint behaviour (1 - t)^{p - 2}.
/// Fourier-weighted mode sums half-period panels of the oscillation and
/// accelerates the partial sums; a `remainder` bound in the envelope, when
/// present, replaces extrapolation by a certified truncation.
template <class F>
auto integrate_semi_infinite(F&& f, double a, const QuadConfig& cfg = {}, const TailEnvelope& env = {},
                             double left_singularity = 0.0) -> BasicQuadResult<detail::value_t<F>> {
    cfg.validate();
    if (!std::isfinite(a)) throw InvalidInterval("lower limit must be finite");
    detail::check_exponent(left_singularity, "left");
    auto& fn = f;
    if (cfg.oscillation_mode == OscillationMode::fourier_weighted)
        return detail::semi_infinite_fourier(fn, a, cfg, env, left_singularity);
    return detail::semi_infinite_plain(fn, a, cfg, env, left_singularity);
}

template <class T>
struct OscillatoryResult {
    BasicQuadResult<T> cos_part;  ///< integral of g(t) cos(lambda t) over the real line
    BasicQuadResult<T> sin_part;  ///< integral of g(t) sin(lambda t) over the real line
};

/// Integral of g(t) e^{i lambda t} over the real line, returned as its cosine and
/// sine parts. For lambda != 0 the even and odd parts of g are integrated on the
/// half-line over half-periods of the oscillation.
template <class G>
auto integrate_oscillatory(G&& g, double lambda, const QuadConfig& cfg = {}, const TailEnvelope& env = {})
    -> OscillatoryResult<detail::value_t<G>> {
    using T = detail::value_t<G>;
    cfg.validate();
    if (!std::isfinite(lambda)) throw InvalidConfig("frequency must be finite");
    OscillatoryResult<T> out;
    QuadConfig c = cfg;
    if (lambda == 0.0) {
        c.oscillation_mode = OscillationMode::plain;
        auto gp = [&](double t) -> T { return g(t); };
        auto gm = [&](double t) -> T { return g(-t); };
        out.cos_part = integrate_semi_infinite(gp, 0.0, c, env);
        detail::accumulate(out.cos_part, integrate_semi_infinite(gm, 0.0, c, env));
        out.sin_part.value = out.cos_part.value * 0.0;
        out.sin_part.error_estimate = 0.0;
        out.sin_part.evaluations = out.cos_part.evaluations;
        return out;
    }
    const double w = std::abs(lambda);
    const double sgn = lambda > 0.0 ? 1.0 : -1.0;
    c.oscillation_mode = OscillationMode::fourier_weighted;
    c.frequency = w;
    using P = Vec<T, 2>;
    auto pair = [&](double t) -> P {
        const T gp = g(t);
        const T gm = g(-t);
        P p;
        p[0] = (gp + gm) * std::cos(w * t);
        p[1] = (gp - gm) * (sgn * std::sin(w * t));
        return p;
    };
    TailEnvelope e2 = env;
    if (e2.remainder) {
        auto rem = env.remainder;
        e2.remainder = [rem](double x) { return 2.0 * rem(x); };
    }
    auto r = integrate_semi_infinite(pair, 0.0, c, e2);
    out.cos_part.value = r.value[0];
    out.sin_part.value = r.value[1];
    out.cos_part.error_estimate = r.error_estimate;
    out.sin_part.error_estimate = r.error_estimate;
    out.cos_part.evaluations = r.evaluations;
    out.sin_part.evaluations = r.evaluations;
    return out;
}

}  // namespace stable_stein::quad
