#pragma once

// Monte Carlo rate experiments for normalized partial sums
//
//   S_n = (X_1 + ... + X_n - n E X_1) / (sigma n^{1/alpha})
//
// (or (X_1 + ... + X_n) / (sigma gamma_n) for the slowly varying law), with
// Wasserstein distances to the stable target and least-squares rate fits.

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "stable_stein/bounds.hpp"
#include "stable_stein/domains.hpp"
#include "stable_stein/errors.hpp"
#include "stable_stein/rng.hpp"
#include "stable_stein/stable.hpp"

namespace stable_stein {

inline constexpr int kReportFormatVersion = 1;

/// S = (sum - shift) / scale.
struct SumNormalization {
    double scale = 1.0;
    double shift = 0.0;
};

inline SumNormalization sum_normalization(const NormalAttractionLaw& law, std::uint64_t n, double mean) {
    return {law.sigma() * std::pow(static_cast<double>(n), 1.0 / law.alpha()), static_cast<double>(n) * mean};
}

inline SumNormalization sum_normalization(const SlowVaryLaw& law, std::uint64_t n) {
    return {law.sigma() * gamma_n_solve(law.alpha(), static_cast<double>(n)), 0.0};
}

/// One simulated sum with the leave-last-out statistics used by the conditional
/// tail estimator: the sum, maximum and minimum of the first n - 1 terms.
struct SumRecord {
    double s = 0.0;
    double rest = 0.0;
    double rest_max = -std::numeric_limits<double>::infinity();
    double rest_min = std::numeric_limits<double>::infinity();
};

/// Compensated running sum (exact rounding errors accumulated separately).
class CompensatedSum {
public:
    void add(double x) noexcept {
        // TwoSum: the exact rounding error of sum_ + x, without a branch on magnitudes
        const double t = sum_ + x;
        const double xp = t - sum_;
        comp_ += (sum_ - (t - xp)) + (x - xp);
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
};

template <class Law>
SumRecord simulate_record(const Law& law, std::uint64_t n, rng::Stream& s, const SumNormalization& nz) {
    SumRecord r;
    CompensatedSum acc;
    for (std::uint64_t i = 1; i < n; ++i) {
        const double x = law.draw(s);
        acc.add(x);
        r.rest_max = std::max(r.rest_max, x);
        r.rest_min = std::min(r.rest_min, x);
    }
    r.rest = acc.value();
    acc.add(law.draw(s));
    acc.add(-nz.shift);
    r.s = acc.value() / nz.scale;
    return r;
}

template <class Law>
double simulate_partial_sum(const Law& law, std::uint64_t n, rng::Stream& s, const SumNormalization& nz) {
    if (n == 0) throw InvalidParameter("n must be positive");
    return simulate_record(law, n, s, nz).s;
}

inline double simulate_partial_sum(const NormalAttractionLaw& law, std::uint64_t n, rng::Stream& s) {
    return simulate_partial_sum(law, n, s, sum_normalization(law, n, law.moments().mean));
}

inline double simulate_partial_sum(const SlowVaryLaw& law, std::uint64_t n, rng::Stream& s) {
    return simulate_partial_sum(law, n, s, sum_normalization(law, n));
}

// ---------------------------------------------------------------------------
// Wasserstein estimation

struct WassersteinEstimate {
    double estimate = 0.0;
    double tail_remainder_bound = 0.0;
};

namespace detail {

/// int_a^b |c - F| given F and G = int F at both ends; F is increasing.
inline double level_gap(const DensityTable& t, double a, double b, double c, double Fa, double Fb, double Ga, double Gb) {
    if (!(b > a)) return 0.0;
    if (Fa >= c) return std::max(0.0, (Gb - Ga) - c * (b - a));
    if (Fb <= c) return std::max(0.0, c * (b - a) - (Gb - Ga));
    const double x = std::clamp(t.quantile(c), a, b);
    const double Gx = t.lower_partial(x);
    return std::max(0.0, c * (x - a) - (Gx - Ga)) + std::max(0.0, (Gb - Gx) - c * (b - x));
}

}  // namespace detail

/// d_W between the empirical law of a sorted sample and the target: exact
/// piecewise integration of |F_n - F| between order statistics plus the target's
/// tail integrals beyond the extremes (also reported as the remainder).
inline WassersteinEstimate empirical_wasserstein(const std::vector<double>& sorted, const DensityTable& target) {
    if (sorted.empty()) throw EmptySample("empirical Wasserstein distance of an empty sample");
    if (!std::is_sorted(sorted.begin(), sorted.end())) throw InvalidParameter("sample must be sorted");
    const double n = static_cast<double>(sorted.size());
    WassersteinEstimate w;
    w.tail_remainder_bound = target.lower_partial(sorted.front()) + target.upper_partial(sorted.back());
    double a = sorted.front(), Fa = target.cdf(a), Ga = target.lower_partial(a);
    double total = 0.0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double b = sorted[i];
        if (b == a) continue;
        const double Fb = target.cdf(b), Gb = target.lower_partial(b);
        total += detail::level_gap(target, a, b, static_cast<double>(i) / n, Fa, Fb, Ga, Gb);
        a = b;
        Fa = Fb;
        Ga = Gb;
    }
    w.estimate = total + w.tail_remainder_bound;
    return w;
}

inline WassersteinEstimate empirical_wasserstein(const std::vector<double>& sorted, const DensityTable& target,
                                                 const StableParams& expected) {
    target.require(expected);
    return empirical_wasserstein(sorted, target);
}

struct EstimatorSettings {
    enum class Mode { pooled_conditional, empirical };
    Mode mode = Mode::pooled_conditional;
    double bulk_quantile = 0.02;  ///< pooled empirical CDF between the target's q and 1 - q quantiles
    double tail_ratio = 1.06;     ///< geometric step of the conditional tail grid
    double tail_span = 1e4;       ///< the tail grid extends to span * max(1, |bulk edge|) past the edge

    void validate() const {
        if (!(bulk_quantile > 0.0 && bulk_quantile < 0.5)) throw InvalidPlan("bulk_quantile must lie in (0, 1/2)");
        if (!(tail_ratio > 1.0 && tail_ratio <= 2.0)) throw InvalidPlan("tail_ratio must lie in (1, 2]");
        if (!(tail_span >= 10.0) || !std::isfinite(tail_span)) throw InvalidPlan("tail_span must be at least 10");
    }
};

inline const char* mode_name(EstimatorSettings::Mode m) {
    return m == EstimatorSettings::Mode::empirical ? "empirical" : "pooled_conditional";
}

/// Pooled estimate with a delete-one-replication jackknife standard error.
struct PooledEstimate {
    double estimate = 0.0;
    double stderr_jackknife = 0.0;
    double bulk = 0.0;
    double upper_tail = 0.0;
    double lower_tail = 0.0;
    double tail_remainder_bound = 0.0;
};

namespace detail {

/// Run fn(i) for i in [0, count) on `threads` workers; fn writes only its own slot.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct TailGrid {
    std::vector<double> y;  ///< abscissae, moving away from the bulk edge
    double h = 0.0;         ///< step in log w
    double shift = 0.0;     ///< w = |y - edge| + shift
};

inline TailGrid make_tail_grid(double edge, const EstimatorSettings& st) {
    TailGrid g;
    g.shift = std::max(1.0, std::abs(edge));
    g.h = std::log(st.tail_ratio);
    const std::size_t count = static_cast<std::size_t>(std::ceil(std::log(st.tail_span) / g.h)) + 1;
    for (std::size_t k = 0; k < count; ++k) g.y.push_back(g.shift * (std::exp(g.h * k) - 1.0));
    return g;
}

/// int over the grid of f dy, trapezoid in log w, plus the power-law remainder past the end.
inline std::pair<double, double> tail_integral(const TailGrid& g, const std::vector<double>& f, double alpha) {
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double w = g.shift + g.y[k];
        s += (k == 0 || k + 1 == f.size() ? 0.5 : 1.0) * f[k] * w;
    }
    const double rem = f.back() * (g.shift + g.y.back()) / (alpha - 1.0);
    return {s * g.h, rem};
}

}  // namespace detail

/// Pooled estimator over replications of sum records: the bulk between the
/// target quantiles q and 1 - q uses the pooled empirical CDF exactly; the tails
/// use the conditional (largest-term) estimator
///   P(S > y) = n E[P(X > max(M_{n-1}, scale y + shift - T_{n-1}))],
///   P(S <= y) = n E[P(X <= min(m_{n-1}, scale y + shift - T_{n-1}))],
/// on a geometric grid. Standard errors come from deleting one replication at a time.
template <class Law>
PooledEstimate pooled_conditional_wasserstein(const std::vector<std::vector<SumRecord>>& reps, const Law& law,
                                              std::uint64_t n, const SumNormalization& nz, const DensityTable& target,
                                              const EstimatorSettings& st, unsigned threads = 1) {
    st.validate();
    const std::size_t R = reps.size();
    if (R < 2) throw InvalidPlan("the pooled estimator needs at least two replications");
    std::vector<double> m(R);
    std::size_t N = 0;
    for (std::size_t r = 0; r < R; ++r) {
        if (reps[r].empty()) throw EmptySample("replication without sums");
        m[r] = static_cast<double>(reps[r].size());
        N += reps[r].size();
    }
    const double alpha = target.params().alpha();
    const double L = target.quantile(st.bulk_quantile), U = target.quantile(1.0 - st.bulk_quantile);

    // bulk: pooled sorted sums inside [L, U] with their replication tags
    std::vector<std::pair<double, std::uint32_t>> pts;
    std::vector<double> below(R, 0.0);
    for (std::size_t r = 0; r < R; ++r)
        for (const auto& rec : reps[r]) {
            if (rec.s < L)
                below[r] += 1.0;
            else if (rec.s < U)
                pts.emplace_back(rec.s, static_cast<std::uint32_t>(r));
        }
    std::sort(pts.begin(), pts.end());
    std::vector<double> F(pts.size()), G(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        F[i] = target.cdf(pts[i].first);
        G[i] = target.lower_partial(pts[i].first);
    }
    const double FL = target.cdf(L), GL = target.lower_partial(L), FU = target.cdf(U), GU = target.lower_partial(U);
    double below_all = 0.0;
    for (double b : below) below_all += b;
    auto bulk_without = [&](std::size_t skip) {
        const double total = static_cast<double>(N) - (skip < R ? m[skip] : 0.0);
        double count = below_all - (skip < R ? below[skip] : 0.0);
        double a = L, Fa = FL, Ga = GL, acc = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].second == skip) continue;
            acc += detail::level_gap(target, a, pts[i].first, count / total, Fa, F[i], Ga, G[i]);
            count += 1.0;
            a = pts[i].first;
            Fa = F[i];
            Ga = G[i];
        }
        return acc + detail::level_gap(target, a, U, count / total, Fa, FU, Ga, GU);
    };

    // tails: per-replication sums of the conditional probabilities on each grid point
    const auto gu = detail::make_tail_grid(U, st), gl = detail::make_tail_grid(L, st);
    const std::size_t K = gu.y.size();
    std::vector<double> up(R * K), lo(R * K);
    const double nn = static_cast<double>(n);
    detail::parallel_for(K, threads, [&](std::size_t k) {
        const double yu = U + gu.y[k], yl = L - gl.y[k];
        const double zu = nz.scale * yu + nz.shift, zl = nz.scale * yl + nz.shift;
        for (std::size_t r = 0; r < R; ++r) {
            double su = 0.0, sl = 0.0;
            for (const auto& rec : reps[r]) {
                su += law.tail_upper(std::max(rec.rest_max, zu - rec.rest));
                sl += law.tail_lower(std::min(rec.rest_min, zl - rec.rest));
            }
            up[r * K + k] = su;
            lo[r * K + k] = sl;
        }
    });
    std::vector<double> Fu_bar(K), Fl(K);
    for (std::size_t k = 0; k < K; ++k) {
        Fu_bar[k] = target.sf(U + gu.y[k]);
        Fl[k] = target.cdf(L - gl.y[k]);
    }
    struct Tails {
        double upper, lower, remainder;
    };
    auto tails_without = [&](std::size_t skip) {
        const double total = static_cast<double>(N) - (skip < R ? m[skip] : 0.0);
        std::vector<double> fu(K), fl(K);
        for (std::size_t k = 0; k < K; ++k) {
            double su = 0.0, sl = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                if (r == skip) continue;
                su += up[r * K + k];
                sl += lo[r * K + k];
            }
            fu[k] = std::abs(nn * su / total - Fu_bar[k]);
            fl[k] = std::abs(nn * sl / total - Fl[k]);
        }
        const auto [iu, ru] = detail::tail_integral(gu, fu, alpha);
        const auto [il, rl] = detail::tail_integral(gl, fl, alpha);
        return Tails{iu + ru, il + rl, ru + rl};
    };

    PooledEstimate out;
    out.bulk = bulk_without(R);
    const auto t = tails_without(R);
    out.upper_tail = t.upper;
    out.lower_tail = t.lower;
    out.tail_remainder_bound = t.remainder;
    out.estimate = out.bulk + out.upper_tail + out.lower_tail;

    std::vector<double> jack(R);
    detail::parallel_for(R, threads, [&](std::size_t r) {
        const auto tr = tails_without(r);
        jack[r] = bulk_without(r) + tr.upper + tr.lower;
    });
    double mean = 0.0;
    for (double v : jack) mean += v;
    mean /= static_cast<double>(R);
    double ss = 0.0;
    for (double v : jack) ss += (v - mean) * (v - mean);
    out.stderr_jackknife = std::sqrt(ss * (static_cast<double>(R) - 1.0) / static_cast<double>(R));
    return out;
}

// ---------------------------------------------------------------------------
// rate fitting

struct RatePoint {
    double n = 0.0;
    double dw = 0.0;
    double stderr_ = 0.0;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_ci_low = 0.0;
    double slope_ci_high = 0.0;
    double slope_stderr = 0.0;
    std::size_t points = 0;
};

/// Weighted least squares of log dW on log n with weights (dW / stderr)^2, the
/// inverse delta-method variances of log dW. The 95% slope interval uses the
/// residual variance and Student's t with k - 2 degrees of freedom.
inline RateFit fit_rate(const std::vector<RatePoint>& pts) {
    std::vector<double> ns;
    for (const auto& p : pts) ns.push_back(p.n);
    std::sort(ns.begin(), ns.end());
    if (std::unique(ns.begin(), ns.end()) - ns.begin() < 3) throw InsufficientPoints("rate fit needs at least 3 distinct n");
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (const auto& p : pts) {
        if (!(p.n > 0.0) || !(p.dw > 0.0) || !(p.stderr_ > 0.0))
            throw InvalidParameter("rate points need positive n, distance and standard error");
        const double w = (p.dw / p.stderr_) * (p.dw / p.stderr_);
        sw += w;
        sx += w * std::log(p.n);
        sy += w * std::log(p.dw);
    }
    const double xb = sx / sw, yb = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double w = (p.dw / p.stderr_) * (p.dw / p.stderr_);
        const double dx = std::log(p.n) - xb;
        sxx += w * dx * dx;
        sxy += w * dx * (std::log(p.dw) - yb);
    }
    RateFit f;
    f.points = pts.size();
    f.slope = sxy / sxx;
    f.intercept = yb - f.slope * xb;
    double rss = 0.0;
    for (const auto& p : pts) {
        const double w = (p.dw / p.stderr_) * (p.dw / p.stderr_);
        const double r = std::log(p.dw) - f.intercept - f.slope * std::log(p.n);
        rss += w * r * r;
    }
    const double df = static_cast<double>(pts.size()) - 2.0;
    f.slope_stderr = std::sqrt(rss / df / sxx);
    const double tq = boost::math::quantile(boost::math::students_t(df), 0.975);
    f.slope_ci_low = f.slope - tq * f.slope_stderr;
    f.slope_ci_high = f.slope + tq * f.slope_stderr;
    return f;
}

// ---------------------------------------------------------------------------
// experiments

struct ExperimentPlan {
    LawSpec law;
    std::vector<std::uint64_t> n_grid;
    std::uint64_t replications = 50;
    std::uint64_t batch_size = 10000;
    std::uint64_t seed = 1;
    EstimatorSettings estimator;
    std::optional<BoundVariant> bound_variant;  ///< default: monotone variant when the law allows it

    void validate() const {
        if (n_grid.empty()) throw InvalidPlan("n_grid is empty");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] == 0) throw InvalidPlan("n_grid entries must be positive");
            if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw InvalidPlan("n_grid must be strictly increasing");
        }
        if (replications < 2) throw InvalidPlan("replications must be at least 2");
        if (batch_size < 1) throw InvalidPlan("batch_size must be positive");
        if (law.family == "slowvary" && static_cast<double>(n_grid.front()) < std::exp(law.alpha))
            throw InvalidPlan("the slowly varying law needs n >= e^alpha");
        estimator.validate();
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["law"] = law.to_json();
        j["n_grid"] = n_grid;
        j["replications"] = replications;
        j["batch_size"] = batch_size;
        j["seed"] = seed;
        j["estimator"] = {{"mode", mode_name(estimator.mode)},
                          {"bulk_quantile", estimator.bulk_quantile},
                          {"tail_ratio", estimator.tail_ratio},
                          {"tail_span", estimator.tail_span}};
        if (bound_variant) j["bound_variant"] = *bound_variant == BoundVariant::thm13 ? "thm13" : "thm12";
        j["target"] = {{"alpha", law.alpha}, {"sigma", 1.0}, {"beta", law.family == "slowvary" ? 0.0 : law.beta}};
        return j;
    }

    static ExperimentPlan from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw InvalidPlan("plan must be a JSON object");
        ExperimentPlan p;
        try {
            for (const auto& [key, val] : j.items()) {
                if (key == "law") p.law = LawSpec::from_json(val);
                else if (key == "n_grid") p.n_grid = val.get<std::vector<std::uint64_t>>();
                else if (key == "replications") p.replications = val.get<std::uint64_t>();
                else if (key == "batch_size") p.batch_size = val.get<std::uint64_t>();
                else if (key == "seed") p.seed = val.get<std::uint64_t>();
                else if (key == "bound_variant") {
                    const auto v = val.get<std::string>();
                    if (v != "thm12" && v != "thm13") throw InvalidPlan("bound_variant must be thm12 or thm13");
                    p.bound_variant = v == "thm13" ? BoundVariant::thm13 : BoundVariant::thm12;
                } else if (key == "estimator") {
                    for (const auto& [k, v] : val.items()) {
                        if (k == "mode") {
                            const auto s = v.get<std::string>();
                            if (s == "empirical") p.estimator.mode = EstimatorSettings::Mode::empirical;
                            else if (s == "pooled_conditional") p.estimator.mode = EstimatorSettings::Mode::pooled_conditional;
                            else throw InvalidPlan("unknown estimator mode '" + s + "'");
                        } else if (k == "bulk_quantile") p.estimator.bulk_quantile = v.get<double>();
                        else if (k == "tail_ratio") p.estimator.tail_ratio = v.get<double>();
                        else if (k == "tail_span") p.estimator.tail_span = v.get<double>();
                        else throw InvalidPlan("unknown estimator field '" + k + "'");
                    }
                } else if (key == "target") {
                    // derived from the law; accepted for round trips
                } else
                    throw InvalidPlan("unknown plan field '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw InvalidPlan(std::string("malformed plan: ") + e.what());
        }
        return p;
    }
};

struct RateRow {
    std::uint64_t n = 0;
    double dw_mean = 0.0;
    double dw_stderr = 0.0;
    double tail_remainder = 0.0;
    std::optional<TheoreticalBound> bound;
};

struct RateReport {
    ExperimentPlan plan;
    std::vector<RateRow> rows;
    std::optional<RateFit> fit;
    bool fit_dropped_smallest_octave = false;
    bool complete = false;
    // regime metadata
    std::string family;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    std::optional<RateExponent> predicted;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = kReportFormatVersion;
        j["plan"] = plan.to_json();
        j["complete"] = complete;
        nlohmann::json regime{{"family", family}};
        if (std::isfinite(gamma)) regime["gamma"] = gamma;
        if (predicted) {
            regime["rate_exponent"] =
                predicted->data_dependent ? nlohmann::json(nullptr) : nlohmann::json(predicted->exponent);
            regime["log_factor"] = predicted->log_factor;
            regime["data_dependent"] = predicted->data_dependent;
        }
        j["regime"] = regime;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json row{{"n", r.n}, {"dw_mean", r.dw_mean}, {"dw_stderr", r.dw_stderr}, {"tail_remainder", r.tail_remainder}};
            if (r.bound && r.bound->applicable) {
                row["bound_total"] = r.bound->total;
                row["bound_components"] = {{"term_I", r.bound->term_I},
                                           {"term_II", r.bound->term_II},
                                           {"term_III_IV", r.bound->term_III_IV},
                                           {"regime", regime_name(r.bound->regime)}};
            } else {
                row["bound_total"] = nullptr;
                row["bound_components"] = nullptr;
                if (r.bound) row["bound_n_min"] = r.bound->n_min;
            }
            j["rows"].push_back(row);
        }
        if (fit)
            j["fit"] = {{"slope", fit->slope},
                        {"intercept", fit->intercept},
                        {"ci", {fit->slope_ci_low, fit->slope_ci_high}},
                        {"slope_stderr", fit->slope_stderr},
                        {"points", fit->points},
                        {"dropped_smallest_octave", fit_dropped_smallest_octave}};
        else
            j["fit"] = nullptr;
        j["warnings"] = warnings;
        return j;
    }

    void write_csv(std::ostream& os) const {
        std::ostringstream buf;
        buf.precision(17);
        buf << "n,dw_mean,dw_stderr,tail_remainder,bound_total,term_I,term_II,term_III_IV\n";
        for (const auto& r : rows) {
            buf << r.n << ',' << r.dw_mean << ',' << r.dw_stderr << ',' << r.tail_remainder << ',';
            if (r.bound && r.bound->applicable)
                buf << r.bound->total << ',' << r.bound->term_I << ',' << r.bound->term_II << ',' << r.bound->term_III_IV;
            else
                buf << ",,,";
            buf << '\n';
        }
        os << buf.str();
        if (!os) throw IoError("failed to write rate report CSV");
    }
};

struct RunOptions {
    unsigned threads = 0;                             ///< 0: STABLE_STEIN_THREADS, else hardware concurrency
    const std::atomic<bool>* cancel = nullptr;        ///< checked between grid points
    std::function<void(const RateReport&)> on_row;  ///< called with the partial report after each n
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("STABLE_STEIN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Stream key for one replication batch; independent of scheduling.
inline std::uint64_t batch_stream_key(std::uint64_t seed, std::uint64_t n, std::uint64_t rep) {
    return rng::stream_key(seed, {0xBE7C11ULL, n, rep});
}

namespace detail {

/// Measures one grid point; empty when cancelled midway.
template <class Law>
std::optional<RateRow> measure_row(const Law& law, std::uint64_t n, const SumNormalization& nz,
                                   const ExperimentPlan& plan, const DensityTable& target, unsigned threads,
                                   const std::atomic<bool>* cancel = nullptr) {
    const std::size_t R = plan.replications;
    std::vector<std::vector<SumRecord>> reps(R);
    auto cancelled = [cancel] { return cancel && cancel->load(std::memory_order_relaxed); };
    parallel_for(R, threads, [&](std::size_t r) {
        rng::Stream s(batch_stream_key(plan.seed, n, r));
        auto& v = reps[r];
        v.resize(plan.batch_size);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (cancelled()) return;
            v[i] = simulate_record(law, n, s, nz);
        }
    });
    if (cancelled()) return std::nullopt;
    RateRow row;
    row.n = n;
    if (plan.estimator.mode == EstimatorSettings::Mode::pooled_conditional) {
        const auto e = pooled_conditional_wasserstein(reps, law, n, nz, target, plan.estimator, threads);
        row.dw_mean = e.estimate;
        row.dw_stderr = e.stderr_jackknife;
        row.tail_remainder = e.tail_remainder_bound;
    } else {
        std::vector<WassersteinEstimate> est(R);
        parallel_for(R, threads, [&](std::size_t r) {
            std::vector<double> xs;
            xs.reserve(reps[r].size());
            for (const auto& rec : reps[r]) xs.push_back(rec.s);
            std::sort(xs.begin(), xs.end());
            est[r] = empirical_wasserstein(xs, target);
        });
        double mean = 0.0, rem = 0.0;
        for (const auto& e : est) {
            mean += e.estimate;
            rem += e.tail_remainder_bound;
        }
        mean /= static_cast<double>(R);
        double ss = 0.0;
        for (const auto& e : est) ss += (e.estimate - mean) * (e.estimate - mean);
        row.dw_mean = mean;
        row.dw_stderr = std::sqrt(ss / (static_cast<double>(R) - 1.0) / static_cast<double>(R));
        row.tail_remainder = rem / static_cast<double>(R);
    }
    return row;
}

}  // namespace detail

/// Fit over the report's rows, dropping the smallest octave when the predicted
/// rate carries a log factor.
inline void refit(RateReport& rep) {
    rep.fit.reset();
    rep.fit_dropped_smallest_octave = false;
    std::vector<RatePoint> pts;
    const double n0 = rep.rows.empty() ? 0.0 : static_cast<double>(rep.rows.front().n);
    const bool drop = rep.predicted && rep.predicted->log_factor;
    for (const auto& r : rep.rows) {
        if (drop && static_cast<double>(r.n) < 2.0 * n0) continue;
        if (r.dw_mean > 0.0 && r.dw_stderr > 0.0) pts.push_back({static_cast<double>(r.n), r.dw_mean, r.dw_stderr});
    }
    try {
        rep.fit = fit_rate(pts);
        rep.fit_dropped_smallest_octave = drop;
    } catch (const InsufficientPoints&) {
    }
}

inline RateReport run_rate_experiment(const ExperimentPlan& plan, const RunOptions& opts = {}) {
    plan.validate();
    const unsigned threads = resolve_threads(opts.threads);
    const EntryLaw law = make_example(plan.law);
    RateReport rep;
    rep.plan = plan;
    rep.family = plan.law.family;
    if (plan.n_grid.back() < 8 * plan.n_grid.front()) rep.warnings.push_back("n_grid spans fewer than 3 octaves");
    if (plan.replications < 30) rep.warnings.push_back("fewer than 30 replications");

    const bool slow = std::holds_alternative<SlowVaryLaw>(law);
    const StableParams target_params(plan.law.alpha, 1.0, slow ? 0.0 : plan.law.beta);
    const DensityTable target = DensityTable::build(target_params);

    std::optional<BoundInputs> base;
    BoundVariant variant = BoundVariant::thm12;
    double mean = 0.0;
    if (!slow) {
        const auto& L = std::get<NormalAttractionLaw>(law);
        base = BoundInputs::make(L, plan.n_grid.front(), eta(target_params), L.moments());
        mean = base->moments.mean;
        variant = plan.bound_variant.value_or(preferred_variant(L));
        rep.gamma = L.gamma();
        rep.predicted = rate_exponent(L.alpha(), L.gamma());
    }

    for (const auto n : plan.n_grid) {
        if (opts.cancel && opts.cancel->load()) break;
        std::optional<RateRow> measured = std::visit(
            [&](const auto& L) {
                using T = std::decay_t<decltype(L)>;
                SumNormalization nz;
                if constexpr (std::is_same_v<T, SlowVaryLaw>)
                    nz = sum_normalization(L, n);
                else
                    nz = sum_normalization(L, n, mean);
                return detail::measure_row(L, n, nz, plan, target, threads, opts.cancel);
            },
            law);
        if (!measured) break;
        RateRow row = *measured;
        if (base) row.bound = theorem_bound(base->at(n), variant);
        rep.rows.push_back(row);
        refit(rep);
        if (opts.on_row) opts.on_row(rep);
    }
    rep.complete = rep.rows.size() == plan.n_grid.size();
    return rep;
}

}  // namespace stable_stein
