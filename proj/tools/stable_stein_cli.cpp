// Command-line front end: density tables, Stein-identity diagnostics, bound
// tables and rate benchmarks. Every math parameter is handed to a library
// constructor or from_json, so validation and diagnostics come from one place.
//
// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or parameter error.

#include "CLI11.hpp"
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include "json.hpp"
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stable_stein/bench.hpp"
#include "stable_stein/bounds.hpp"
#include "stable_stein/stable.hpp"
#include "stable_stein/stein.hpp"

namespace ss = stable_stein;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted.store(true); }

json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw ss::IoError("cannot open config file '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ss::InvalidConfig("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ss::InvalidConfig("config file must contain a JSON object");
    return j;
}

void require_known_keys(const json& j, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* key : keys) ok = ok || k == key;
        if (!ok) throw ss::InvalidConfig("unknown config field '" + k + "'");
    }
}

double get_number(const json& j, const char* key) {
    if (!j.at(key).is_number()) throw ss::InvalidConfig(std::string("config field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

std::vector<double> get_numbers(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array()) throw ss::InvalidConfig(std::string("config field '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ss::InvalidConfig(std::string("config field '") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

/// Writes to a file via a temporary and rename, or to stdout for "-" / empty.
void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        if (!std::cout) throw ss::IoError("failed to write to standard output");
        return;
    }
    const std::string tmp = path + ".partial";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ss::IoError("cannot open '" + path + "' for writing");
        os << content;
        os.flush();
        if (!os) throw ss::IoError("failed to write '" + path + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ss::IoError("cannot move output into place at '" + path + "': " + ec.message());
}

std::string csv_preamble(const json& config) {
    return "# format_version: " + std::to_string(kFormatVersion) + "\n# config: " + config.dump() + "\n";
}

struct Grid {
    double lo, hi, step;
};

Grid parse_grid(const std::string& s) {
    Grid g{};
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> g.lo >> c1 >> g.hi >> c2 >> g.step) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
        throw ss::InvalidParameter("grid must have the form lo:hi:step, got '" + s + "'");
    if (!(g.step > 0.0) || !(g.hi >= g.lo) || !std::isfinite(g.lo) || !std::isfinite(g.hi))
        throw ss::InvalidParameter("grid needs lo <= hi and step > 0, got '" + s + "'");
    if ((g.hi - g.lo) / g.step > 1e7) throw ss::InvalidParameter("grid has more than 1e7 points");
    return g;
}

std::vector<std::uint64_t> doubling_grid(std::uint64_t nmin, std::uint64_t nmax) {
    std::vector<std::uint64_t> out;
    if (nmin == 0) throw ss::InvalidPlan("nmin must be positive");
    for (std::uint64_t n = nmin; n <= nmax; n *= 2) {
        out.push_back(n);
        if (n > nmax / 2) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Law flags shared by bench and bounds

struct LawFlags {
    std::optional<std::string> family;
    std::optional<double> alpha, beta, alpha_tilde, A_tilde, B, D;

    void add(CLI::App* app) {
        app->add_option("--law", family, "entry law: pareto, twopower, trig, logtail or slowvary");
        app->add_option("--alpha", alpha, "stability index of the entry law");
        app->add_option("--beta", beta, "skewness of the entry law");
        app->add_option("--alphatilde", alpha_tilde, "second tail index of the two-power law");
        app->add_option("--atilde", A_tilde, "weight of the second tail of the two-power law");
        app->add_option("--trig-b", B, "oscillation amplitude of the trig law");
        app->add_option("--log-d", D, "logarithmic amplitude of the logtail law");
    }

    /// Overlays the flags on a law block; a new family starts from that family's defaults.
    json apply(json law) const {
        if (!law.is_object()) law = json::object();
        if (family && (!law.contains("family") || law["family"] != *family)) {
            ss::LawSpec d;
            d.family = *family;
            if (law.contains("alpha")) d.alpha = get_number(law, "alpha");
            law = d.to_json();
        }
        if (alpha) law["alpha"] = *alpha;
        if (beta) law["beta"] = *beta;
        if (alpha_tilde) law["alpha_tilde"] = *alpha_tilde;
        if (A_tilde) law["A_tilde"] = *A_tilde;
        if (B) law["B"] = *B;
        if (D) law["D"] = *D;
        return law;
    }
};

struct NGridFlags {
    std::optional<std::uint64_t> nmin, nmax;
    std::vector<std::uint64_t> grid;

    void add(CLI::App* app) {
        app->add_option("--nmin", nmin, "smallest n of a doubling grid");
        app->add_option("--nmax", nmax, "largest n of a doubling grid");
        app->add_option("--grid", grid, "explicit n grid (comma separated)")->delimiter(',');
    }

    void apply(json& j) const {
        if (!grid.empty()) {
            j["n_grid"] = grid;
        } else if (nmin || nmax) {
            if (!nmin || !nmax) throw ss::InvalidPlan("--nmin and --nmax must be given together");
            j["n_grid"] = doubling_grid(*nmin, *nmax);
        }
    }
};

// ---------------------------------------------------------------------------
// density

struct DensityArgs {
    std::string config, out = "-", table_cache;
    std::optional<double> alpha, beta, sigma;
    std::optional<std::string> grid;
};

int cmd_density(const DensityArgs& a) {
    json cfg{{"alpha", 1.5}, {"beta", 0.0}, {"sigma", 1.0}, {"grid", "-10:10:0.01"}};
    const json file = read_config(a.config);
    require_known_keys(file, {"alpha", "beta", "sigma", "grid"});
    cfg.update(file);
    if (a.alpha) cfg["alpha"] = *a.alpha;
    if (a.beta) cfg["beta"] = *a.beta;
    if (a.sigma) cfg["sigma"] = *a.sigma;
    if (a.grid) cfg["grid"] = *a.grid;
    if (!cfg["grid"].is_string()) throw ss::InvalidConfig("config field 'grid' must be a string lo:hi:step");

    const ss::StableParams p(get_number(cfg, "alpha"), get_number(cfg, "sigma"), get_number(cfg, "beta"));
    const Grid g = parse_grid(cfg["grid"].get<std::string>());

    const ss::StableParams unit = p.standardized();
    std::optional<ss::DensityTable> table;
    if (!a.table_cache.empty() && std::filesystem::exists(a.table_cache)) {
        table = ss::DensityTable::load_csv_file(a.table_cache);
        table->require(unit);
    } else {
        table = ss::DensityTable::build(unit);
        if (!a.table_cache.empty()) table->save_csv_file(a.table_cache);
    }

    std::ostringstream os;
    os.precision(17);
    os << csv_preamble(cfg) << "x,pdf,pdf_deriv,cdf\n";
    const auto count = static_cast<std::size_t>(std::floor((g.hi - g.lo) / g.step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        const double x = g.lo + static_cast<double>(i) * g.step;
        os << x << ',' << ss::pdf(*table, p, x) << ',' << ss::pdf_deriv(*table, p, x) << ',' << ss::cdf(*table, p, x)
           << '\n';
    }
    write_output(a.out, os.str());
    return 0;
}

// ---------------------------------------------------------------------------
// stein-check

struct SteinArgs {
    std::string config, out = "-";
    std::vector<double> alpha, beta, lambda, x;
    std::optional<double> threshold;
};

int cmd_stein_check(const SteinArgs& a) {
    json cfg{{"alpha", {1.2, 1.5, 1.8}},
             {"beta", {-0.7, 0.0, 0.7}},
             {"lambda", {0.5, 1.0, 2.0}},
             {"x", {-3.0, 0.0, 3.0}},
             {"threshold", 1e-4}};
    const json file = read_config(a.config);
    require_known_keys(file, {"alpha", "beta", "lambda", "x", "threshold"});
    cfg.update(file);
    if (!a.alpha.empty()) cfg["alpha"] = a.alpha;
    if (!a.beta.empty()) cfg["beta"] = a.beta;
    if (!a.lambda.empty()) cfg["lambda"] = a.lambda;
    if (!a.x.empty()) cfg["x"] = a.x;
    if (a.threshold) cfg["threshold"] = *a.threshold;
    const double threshold = get_number(cfg, "threshold");
    if (!(threshold > 0.0)) throw ss::InvalidParameter("threshold must be positive");

    const auto alphas = get_numbers(cfg, "alpha"), betas = get_numbers(cfg, "beta");
    const auto lambdas = get_numbers(cfg, "lambda"), xs = get_numbers(cfg, "x");

    // construct every solution first so parameter errors surface before any work
    std::vector<ss::SteinSolutionHLambda> sols;
    for (double al : alphas)
        for (double be : betas)
            for (double la : lambdas) sols.emplace_back(la, ss::StableParams(al, 1.0, be));

    std::ostringstream os;
    os.precision(17);
    os << csv_preamble(cfg) << "alpha,beta,lambda,x,residual_re,residual_im,residual_abs\n";
    double worst = 0.0;
    std::size_t failures = 0;
    for (const auto& s : sols)
        for (double x : xs) {
            const auto r = ss::stein_residual(s, x);
            const double m = std::abs(r);
            worst = std::max(worst, m);
            if (!(m < threshold)) ++failures;
            os << s.params().alpha() << ',' << s.params().beta() << ',' << s.lambda() << ',' << x << ',' << r.real()
               << ',' << r.imag() << ',' << m << '\n';
        }
    write_output(a.out, os.str());
    std::cerr << "max residual " << worst << " over " << sols.size() * xs.size() << " cells; " << failures
              << " above threshold " << threshold << '\n';
    return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsArgs {
    std::string config, out = "-";
    LawFlags law;
    NGridFlags grid;
    std::optional<std::string> variant;
};

int cmd_bounds(const BoundsArgs& a) {
    json cfg{{"law", ss::LawSpec{}.to_json()}, {"n_grid", doubling_grid(256, 1u << 20)}, {"variant", "auto"}};
    const json file = read_config(a.config);
    require_known_keys(file, {"law", "n_grid", "variant"});
    cfg.update(file);
    cfg["law"] = a.law.apply(cfg["law"]);
    a.grid.apply(cfg);
    if (a.variant) cfg["variant"] = *a.variant;

    const ss::LawSpec spec = ss::LawSpec::from_json(cfg["law"]);
    const ss::EntryLaw law = ss::make_example(spec);
    if (!std::holds_alternative<ss::NormalAttractionLaw>(law))
        throw ss::InvalidParameter("no explicit bound is available for the slowly varying law");
    const auto& L = std::get<ss::NormalAttractionLaw>(law);

    std::vector<std::uint64_t> ns;
    try {
        ns = cfg["n_grid"].get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
        throw ss::InvalidConfig("config field 'n_grid' must be an array of positive integers");
    }
    if (ns.empty()) throw ss::InvalidParameter("n grid is empty");
    for (auto n : ns)
        if (n == 0) throw ss::InvalidParameter("n must be positive");

    const std::string v = cfg["variant"].is_string() ? cfg["variant"].get<std::string>() : "";
    ss::BoundVariant variant;
    if (v == "auto") variant = ss::preferred_variant(L);
    else if (v == "thm12") variant = ss::BoundVariant::thm12;
    else if (v == "thm13") variant = ss::BoundVariant::thm13;
    else throw ss::InvalidConfig("variant must be auto, thm12 or thm13");
    if (variant == ss::BoundVariant::thm13) (void)L.monotone_from();  // throws for laws without monotone tails

    std::ostringstream os;
    os << csv_preamble(cfg);
    ss::write_bound_csv(os, ss::bound_table(L, ns, variant));
    write_output(a.out, os.str());
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string config, out = "-", csv;
    LawFlags law;
    NGridFlags grid;
    std::optional<std::uint64_t> reps, batch, seed;
    std::optional<std::string> estimator, variant;
    unsigned threads = 0;
};

int cmd_bench(const BenchArgs& a) {
    json cfg = read_config(a.config);
    if (!cfg.contains("law")) cfg["law"] = ss::LawSpec{}.to_json();
    cfg["law"] = a.law.apply(cfg["law"]);
    if (!cfg.contains("n_grid")) cfg["n_grid"] = doubling_grid(256, 32768);
    a.grid.apply(cfg);
    if (a.reps) cfg["replications"] = *a.reps;
    if (a.batch) cfg["batch_size"] = *a.batch;
    if (a.seed) cfg["seed"] = *a.seed;
    if (a.estimator) cfg["estimator"]["mode"] = *a.estimator;
    if (a.variant) cfg["bound_variant"] = *a.variant;

    const ss::ExperimentPlan plan = ss::ExperimentPlan::from_json(cfg);
    plan.validate();

    auto emit = [&](const ss::RateReport& r) {
        write_output(a.out, r.to_json().dump(2) + "\n");
        if (!a.csv.empty()) {
            std::ostringstream os;
            os << csv_preamble(r.plan.to_json());
            r.write_csv(os);
            write_output(a.csv, os.str());
        }
    };

    ss::RunOptions opts;
    opts.threads = a.threads;
    opts.cancel = &g_interrupted;
    const bool to_file = !a.out.empty() && a.out != "-";
    if (to_file) opts.on_row = emit;  // partial results survive an interrupt

    std::signal(SIGINT, on_sigint);
    const ss::RateReport rep = ss::run_rate_experiment(plan, opts);
    std::signal(SIGINT, SIG_DFL);
    emit(rep);
    if (!rep.complete) {
        std::cerr << "interrupted after " << rep.rows.size() << " of " << plan.n_grid.size()
                  << " grid points; partial report written\n";
        return 1;
    }
    if (rep.fit)
        std::cerr << "slope " << rep.fit->slope << " [" << rep.fit->slope_ci_low << ", " << rep.fit->slope_ci_high
                  << "]\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stein's method for alpha-stable laws: densities, Stein diagnostics, bounds and rate benchmarks"};
    app.require_subcommand(1);

    DensityArgs da;
    auto* density = app.add_subcommand("density", "tabulate pdf, pdf' and cdf on a grid as CSV");
    density->add_option("--alpha", da.alpha, "stability index in (1, 2)");
    density->add_option("--beta", da.beta, "skewness in [-1, 1]");
    density->add_option("--sigma", da.sigma, "scale");
    density->add_option("--grid", da.grid, "lo:hi:step");
    density->add_option("--table-cache", da.table_cache, "load the density table from this CSV, or build and save it");
    density->add_option("--config", da.config, "JSON config file; flags take precedence");
    density->add_option("-o,--out", da.out, "output CSV path, - for stdout");

    SteinArgs sa;
    auto* stein = app.add_subcommand("stein-check", "Stein-identity residuals over a lambda/x/(alpha,beta) lattice");
    stein->add_option("--alpha", sa.alpha, "alpha values (comma separated)")->delimiter(',');
    stein->add_option("--beta", sa.beta, "beta values")->delimiter(',');
    stein->add_option("--lambda", sa.lambda, "nonzero frequencies")->delimiter(',');
    stein->add_option("--x", sa.x, "evaluation points")->delimiter(',');
    stein->add_option("--threshold", sa.threshold, "largest acceptable residual (default 1e-4)");
    stein->add_option("--config", sa.config, "JSON config file; flags take precedence");
    stein->add_option("-o,--out", sa.out, "output CSV path, - for stdout");

    BoundsArgs ba;
    auto* bounds = app.add_subcommand("bounds", "tabulate the explicit Wasserstein bound over an n grid as CSV");
    ba.law.add(bounds);
    ba.grid.add(bounds);
    bounds->add_option("--variant", ba.variant, "auto, thm12 (Taylor-type) or thm13 (monotone tails)");
    bounds->add_option("--config", ba.config, "JSON config file; flags take precedence");
    bounds->add_option("-o,--out", ba.out, "output CSV path, - for stdout");

    BenchArgs be;
    auto* bench = app.add_subcommand("bench", "Monte Carlo rate benchmark; writes a JSON report and optional CSV");
    be.law.add(bench);
    be.grid.add(bench);
    bench->add_option("--reps", be.reps, "replications per n");
    bench->add_option("--batch", be.batch, "sums per replication");
    bench->add_option("--seed", be.seed, "master seed");
    bench->add_option("--estimator", be.estimator, "pooled_conditional or empirical");
    bench->add_option("--variant", be.variant, "thm12 or thm13 for the bound column");
    bench->add_option("--threads", be.threads, "worker count (0: STABLE_STEIN_THREADS or all cores)");
    bench->add_option("--config", be.config, "JSON plan file; flags take precedence");
    bench->add_option("-o,--out", be.out, "report JSON path, - for stdout");
    bench->add_option("--csv", be.csv, "report CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*density) return cmd_density(da);
        if (*stein) return cmd_stein_check(sa);
        if (*bounds) return cmd_bounds(ba);
        if (*bench) return cmd_bench(be);
    } catch (const ss::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ss::ErrorKind::parameter ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
