#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stochdisp/duhamel.hpp"
#include "stochdisp/error.hpp"
#include "stochdisp/evolve.hpp"
#include "stochdisp/opnorm.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"
#include "stochdisp/seeding.hpp"

namespace stochdisp {

using json = nlohmann::ordered_json;

inline constexpr int record_schema_version = 1;

// ---------------------------------------------------------------------------
// Statistics

struct Summary {
    double mean = 0.0;
    double standard_error = 0.0;  // sample sd / sqrt(count); 0 for a single value
    std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        var /= static_cast<double>(values.size() - 1);
        s.standard_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return s;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t resamples = 0;
    double level = 0.95;
};

namespace detail {

/// Ordinary least squares on (u, w); returns {slope, intercept}, or nullopt for a degenerate design.
inline std::optional<std::pair<double, double>> least_squares(const std::vector<double>& u, const std::vector<double>& w) {
    const double n = static_cast<double>(u.size());
    double su = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        su += u[i];
        sw += w[i];
    }
    const double mu = su / n, mw = sw / n;
    double suu = 0.0, suw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        suw += (u[i] - mu) * (w[i] - mw);
    }
    if (!(suu > 1e-300)) return std::nullopt;
    const double slope = suw / suu;
    return std::make_pair(slope, mw - slope * mu);
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void check_positive(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        require(std::isfinite(x) && x > 0.0, ErrorKind::invalid_argument,
                std::string("fit_loglog_slope: ") + what + " must be positive and finite");
    }
}

}  // namespace detail

/**
 * Least squares of log(ys) on log(xs). The CI is a seeded studentized
 * residual bootstrap: leverage-corrected, centered residuals are resampled
 * onto the fitted line and the quantiles of (b* - b) / se* give
 * [b - t_hi se, b - t_lo se].
 */
inline SlopeFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys, std::uint64_t seed = 0,
                                 std::size_t resamples = 1000, double level = 0.95) {
    require(xs.size() == ys.size(), ErrorKind::invalid_argument, "fit_loglog_slope: xs and ys differ in length");
    require(xs.size() >= 3, ErrorKind::invalid_argument, "fit_loglog_slope: need at least three points");
    detail::check_positive(xs, "xs");
    detail::check_positive(ys, "ys");
    const std::size_t n = xs.size();
    std::vector<double> u, w;
    for (std::size_t i = 0; i < n; ++i) {
        u.push_back(std::log(xs[i]));
        w.push_back(std::log(ys[i]));
    }
    const auto base = detail::least_squares(u, w);
    require(base.has_value(), ErrorKind::invalid_argument, "fit_loglog_slope: xs must not all be equal");
    SlopeFit fit{base->first, base->second, base->first, base->first, resamples, level};
    if (resamples == 0) return fit;

    double mu = 0.0;
    for (double v : u) mu += v;
    mu /= static_cast<double>(n);
    double suu = 0.0;
    for (double v : u) suu += (v - mu) * (v - mu);
    auto standard_error = [&](const std::vector<double>& ww, double slope, double intercept) {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = ww[i] - intercept - slope * u[i];
            sse += e * e;
        }
        return std::sqrt(sse / static_cast<double>(n - 2) / suu);
    };
    const double se = standard_error(w, fit.slope, fit.intercept);
    if (!(se > 1e-14 * std::max(1.0, std::abs(fit.slope)))) return fit;

    std::vector<double> fitted(n), resid(n);
    double mean_resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fitted[i] = fit.intercept + fit.slope * u[i];
        const double leverage = 1.0 / static_cast<double>(n) + (u[i] - mu) * (u[i] - mu) / suu;
        resid[i] = (w[i] - fitted[i]) / std::sqrt(std::max(1.0 - leverage, 1e-12));
        mean_resid += resid[i];
    }
    mean_resid /= static_cast<double>(n);
    for (auto& r : resid) r -= mean_resid;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> pivots;
    pivots.reserve(resamples);
    std::vector<double> bw(n);
    while (pivots.size() < resamples) {
        for (std::size_t i = 0; i < n; ++i) bw[i] = fitted[i] + resid[pick(rng)];
        const auto r = detail::least_squares(u, bw);
        const double se_star = standard_error(bw, r->first, r->second);
        if (!(se_star > 0.0)) continue;
        pivots.push_back((r->first - fit.slope) / se_star);
    }
    fit.ci_low = fit.slope - detail::quantile(pivots, 0.5 * (1.0 + level)) * se;
    fit.ci_high = fit.slope - detail::quantile(pivots, 0.5 * (1.0 - level)) * se;
    return fit;
}

/**
 * Slope of log(mean of samples[i]) on log(xs[i]); the CI comes from a seeded
 * bootstrap that resamples trials independently within each x.
 */
inline SlopeFit fit_loglog_slope_of_means(const std::vector<double>& xs, const std::vector<std::vector<double>>& samples,
                                          std::uint64_t seed = 0, std::size_t resamples = 1000, double level = 0.95) {
    require(xs.size() == samples.size(), ErrorKind::invalid_argument, "fit_loglog_slope: xs and samples differ");
    std::vector<double> means;
    for (const auto& s : samples) {
        require(!s.empty(), ErrorKind::invalid_argument, "fit_loglog_slope: empty sample");
        means.push_back(summarize(s).mean);
    }
    SlopeFit fit = fit_loglog_slope(xs, means, seed, 0, level);
    fit.resamples = resamples;
    if (resamples == 0) return fit;
    std::vector<double> u;
    for (double x : xs) u.push_back(std::log(x));
    std::mt19937_64 rng(seed);
    std::vector<double> slopes;
    slopes.reserve(resamples);
    std::vector<double> w(xs.size());
    for (std::size_t r = 0; r < resamples; ++r) {
        bool ok = true;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(0, samples[i].size() - 1);
            double acc = 0.0;
            for (std::size_t k = 0; k < samples[i].size(); ++k) acc += samples[i][pick(rng)];
            const double mean = acc / static_cast<double>(samples[i].size());
            if (!(mean > 0.0)) ok = false;
            w[i] = ok ? std::log(mean) : 0.0;
        }
        if (!ok) continue;
        if (auto f = detail::least_squares(u, w)) slopes.push_back(f->first);
    }
    require(!slopes.empty(), ErrorKind::invalid_argument, "fit_loglog_slope: bootstrap means are not positive");
    fit.ci_low = detail::quantile(slopes, 0.5 * (1.0 - level));
    fit.ci_high = detail::quantile(slopes, 0.5 * (1.0 + level));
    return fit;
}

// ---------------------------------------------------------------------------
// Parallel trials

/**
 * Runs fn(0..count-1) on `threads` workers; results are stored by index, so
 * any reduction over the returned vector has a fixed order. The first
 * exception (lowest index) is rethrown after all workers finish.
 */
template <typename Fn>
auto run_trials(std::size_t count, std::size_t threads, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Result = decltype(fn(std::size_t{}));
    std::vector<std::optional<Result>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, count));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<Result> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Records

struct SeriesRow {
    std::string experiment;
    double alpha = 0.0;
    std::size_t trial = 0;
    std::string metric;
    double value = 0.0;
};

struct StatisticRow {
    double alpha = 0.0;
    std::string metric;
    Summary summary;
};

struct NamedFit {
    std::string name;
    SlopeFit fit;
};

struct ExperimentRecord {
    std::string experiment;
    std::string run_id;
    std::uint64_t master_seed = 0;
    json config = json::object();
    std::vector<SeriesRow> series;
    std::vector<StatisticRow> statistics;
    std::vector<NamedFit> fits;
    json checks = json::object();        // named boolean / scalar outcomes
    std::vector<std::string> warnings;  // numerical warnings (promoted to errors under --strict)
    json metadata = json::object();     // wall-clock fields, excluded from reproducibility comparisons

    void add(double alpha, std::size_t trial, const std::string& metric, double value) {
        series.push_back({experiment, alpha, trial, metric, value});
    }

    /// Values of `metric` at `alpha` in trial order.
    std::vector<double> values(const std::string& metric, double alpha) const {
        std::vector<std::pair<std::size_t, double>> hits;
        for (const auto& r : series) {
            if (r.metric == metric && r.alpha == alpha) hits.emplace_back(r.trial, r.value);
        }
        std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> out;
        for (const auto& h : hits) out.push_back(h.second);
        return out;
    }

    const StatisticRow* statistic(const std::string& metric, double alpha) const {
        for (const auto& s : statistics) {
            if (s.metric == metric && s.alpha == alpha) return &s;
        }
        return nullptr;
    }

    const SlopeFit* fit(const std::string& name) const {
        for (const auto& f : fits) {
            if (f.name == name) return &f.fit;
        }
        return nullptr;
    }

    /// Mean and standard error per (alpha, metric), in order of first appearance.
    void compute_statistics() {
        statistics.clear();
        std::vector<std::pair<double, std::string>> keys;
        for (const auto& r : series) {
            const auto key = std::make_pair(r.alpha, r.metric);
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
        }
        for (const auto& [alpha, metric] : keys) statistics.push_back({alpha, metric, summarize(values(metric, alpha))});
    }
};

/// 64-bit FNV-1a of the canonical config text and the seed, as 16 hex digits.
inline std::string make_run_id(const std::string& canonical_config, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (unsigned char c : canonical_config) feed(c);
    for (int i = 0; i < 8; ++i) feed(static_cast<unsigned char>((seed >> (8 * i)) & 0xffU));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline json fit_to_json(const SlopeFit& f) {
    return json{{"slope", f.slope},     {"intercept", f.intercept}, {"ci_low", f.ci_low},
                {"ci_high", f.ci_high}, {"resamples", f.resamples}, {"level", f.level}};
}

inline SlopeFit fit_from_json(const json& j) {
    SlopeFit f;
    f.slope = j.at("slope").get<double>();
    f.intercept = j.at("intercept").get<double>();
    f.ci_low = j.at("ci_low").get<double>();
    f.ci_high = j.at("ci_high").get<double>();
    f.resamples = j.at("resamples").get<std::size_t>();
    f.level = j.at("level").get<double>();
    return f;
}

namespace detail {

/// Non-finite doubles have no JSON literal; they are stored as strings.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double number_from(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline json record_to_json(const ExperimentRecord& rec, bool include_metadata = true) {
    json j;
    j["schema_version"] = record_schema_version;
    j["experiment"] = rec.experiment;
    j["run_id"] = rec.run_id;
    j["master_seed"] = rec.master_seed;
    j["config"] = rec.config;
    json trials = json::array();
    for (const auto& r : rec.series) {
        trials.push_back(json{{"alpha", r.alpha}, {"trial", r.trial}, {"metric", r.metric}, {"value", detail::number(r.value)}});
    }
    j["trials"] = std::move(trials);
    json stats = json::array();
    for (const auto& s : rec.statistics) {
        stats.push_back(json{{"alpha", s.alpha},
                             {"metric", s.metric},
                             {"mean", detail::number(s.summary.mean)},
                             {"standard_error", detail::number(s.summary.standard_error)},
                             {"count", s.summary.count}});
    }
    j["statistics"] = std::move(stats);
    json fits = json::array();
    for (const auto& f : rec.fits) {
        json e = fit_to_json(f.fit);
        e["name"] = f.name;
        fits.push_back(std::move(e));
    }
    j["fits"] = std::move(fits);
    j["checks"] = rec.checks;
    j["warnings"] = rec.warnings;
    if (include_metadata) j["metadata"] = rec.metadata;
    return j;
}

inline ExperimentRecord record_from_json(const json& j) {
    require(j.value("schema_version", 0) == record_schema_version, ErrorKind::io,
            "record schema version mismatch (expected " + std::to_string(record_schema_version) + ")");
    ExperimentRecord rec;
    rec.experiment = j.at("experiment").get<std::string>();
    rec.run_id = j.at("run_id").get<std::string>();
    rec.master_seed = j.at("master_seed").get<std::uint64_t>();
    rec.config = j.at("config");
    for (const auto& t : j.at("trials")) {
        rec.series.push_back({rec.experiment, t.at("alpha").get<double>(), t.at("trial").get<std::size_t>(),
                              t.at("metric").get<std::string>(), detail::number_from(t.at("value"))});
    }
    for (const auto& s : j.at("statistics")) {
        rec.statistics.push_back({s.at("alpha").get<double>(), s.at("metric").get<std::string>(),
                                  Summary{detail::number_from(s.at("mean")), detail::number_from(s.at("standard_error")),
                                          s.at("count").get<std::size_t>()}});
    }
    for (const auto& f : j.at("fits")) rec.fits.push_back({f.at("name").get<std::string>(), fit_from_json(f)});
    rec.checks = j.at("checks");
    rec.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("metadata")) rec.metadata = j.at("metadata");
    return rec;
}

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Writes <directory>/record.json and <directory>/series.csv; returns the directory.
inline std::filesystem::path write_record(const ExperimentRecord& rec, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    require(!ec, ErrorKind::io, "cannot create '" + directory.string() + "': " + ec.message());
    {
        std::ofstream out(directory / "record.json");
        require(static_cast<bool>(out), ErrorKind::io, "cannot write record.json in '" + directory.string() + "'");
        out << record_to_json(rec).dump(2) << '\n';
    }
    {
        std::ofstream out(directory / "series.csv");
        require(static_cast<bool>(out), ErrorKind::io, "cannot write series.csv in '" + directory.string() + "'");
        out << "experiment,alpha,trial,metric,value\n";
        for (const auto& r : rec.series) {
            out << r.experiment << ',' << format_double(r.alpha) << ',' << r.trial << ',' << r.metric << ','
                << format_double(r.value) << '\n';
        }
    }
    return directory;
}

inline ExperimentRecord read_record(const std::filesystem::path& file) {
    std::ifstream in(file);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, "'" + file.string() + "' is not valid JSON: " + e.what());
    }
    return record_from_json(j);
}

/// Stamps wall-clock metadata (ISO-8601 UTC start, elapsed seconds).
class WallClock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()), started_at_(std::time(nullptr)) {}

    json metadata(std::size_t threads) const {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        char buf[32];
        std::tm tm{};
        gmtime_r(&started_at_, &tm);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return json{{"started_at", buf}, {"wall_seconds", elapsed}, {"threads", threads}};
    }

private:
    std::chrono::steady_clock::time_point start_;
    std::time_t started_at_;
};

// ---------------------------------------------------------------------------
// Experiments

struct Probe {
    std::string name;
    ComplexField z0;
};

/// Ground state (when available), a Gaussian packet and a single high Fourier mode, all unit norm.
inline std::vector<Probe> probe_family(const Potential& pot, double packet_width, std::size_t mode) {
    const Grid& g = pot.grid();
    std::vector<Probe> out;
    try {
        out.push_back({"ground_state", ground_state(pot, 1e-9).phi});
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::no_bound_state) throw;
    }
    ComplexField packet = ComplexField::from_function(g, [&](const Vec& x) {
        return complex(std::exp(-dot(x, x) / (2.0 * packet_width * packet_width)), 0.0);
    });
    packet *= complex(1.0 / l2_norm(packet), 0.0);
    out.push_back({"gaussian", packet});
    const double k = g.frequency_step() * static_cast<double>(mode);
    ComplexField wave = ComplexField::from_function(g, [&](const Vec& x) { return std::polar(1.0, k * x[0]); });
    wave *= complex(1.0 / l2_norm(wave), 0.0);
    out.push_back({"mode", wave});
    return out;
}

struct AlphaSweepConfig {
    std::vector<double> alphas;
    std::size_t trials = 20;
    std::vector<Probe> probes;  // the recorded deviation is the max over probes
    double dt = 1e-2;
    double dt_scale = 0.0;  // > 0: per-alpha step min(dt, (dt_scale / alpha)^2)
    double horizon = 1.0;
    double series_constant = 1.0;  // C in the divergence threshold (4C)^{1/4} ||V||^{1/2}
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t resamples = 1000;
};

inline double sweep_step(const AlphaSweepConfig& cfg, double alpha) {
    if (cfg.dt_scale > 0.0 && alpha > 0.0) return std::min(cfg.dt, std::pow(cfg.dt_scale / alpha, 2.0));
    return cfg.dt;
}

/**
 * MC mean over Brownian paths of the Strichartz deviation
 * max(||Z - e^{it Delta}Z0||_{L^2_t L^{6,2}_x}, ||.||_{L^inf_t L^2_x}), per alpha,
 * and the log-log slope of the mean against alpha (trial bootstrap CI).
 * Path seeds: derive_seed(seed, alpha index, trial).
 */
inline ExperimentRecord alpha_sweep_strichartz(const Potential& pot, const AlphaSweepConfig& cfg) {
    require(!cfg.alphas.empty(), ErrorKind::invalid_argument, "alpha_sweep_strichartz: no alphas");
    require(cfg.trials >= 1, ErrorKind::invalid_argument, "alpha_sweep_strichartz: need at least one trial");
    require(!cfg.probes.empty(), ErrorKind::invalid_argument, "alpha_sweep_strichartz: no initial data");
    ExperimentRecord rec;
    rec.experiment = "sweep-alpha";
    rec.master_seed = cfg.seed;
    const double v_norm = pot.norms().l32_1;
    const double threshold = std::pow(4.0 * cfg.series_constant, 0.25) * std::sqrt(v_norm);
    const int dim = pot.grid().dim();

    std::vector<std::vector<double>> means_input;
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        const double alpha = cfg.alphas[a];
        const double dt = sweep_step(cfg, alpha);
        const auto steps = static_cast<std::size_t>(std::ceil(cfg.horizon / dt - 1e-9));
        struct TrialOut {
            std::vector<double> per_probe_dev;
            double deviation, l2t, linf, drift;
        };
        const auto results = run_trials(cfg.trials, cfg.threads, [&](std::size_t k) {
            const PathSample path = sample_brownian(derive_seed(cfg.seed, a, k), steps, cfg.horizon, dim);
            TrialOut t{{}, 0.0, 0.0, 0.0, 0.0};
            for (const auto& probe : cfg.probes) {
                const Trajectory traj = evolve(probe.z0, pot, path, alpha, dt, cfg.horizon);
                const StrichartzNorms s = strichartz_deviation(traj, probe.z0);
                t.per_probe_dev.push_back(s.intersection());
                if (s.intersection() >= t.deviation) {
                    t.deviation = s.intersection();
                    t.l2t = s.l2t_l62;
                    t.linf = s.linf_l2;
                }
                t.drift = std::max(t.drift, max_relative_mass_drift(traj));
            }
            return t;
        });
        std::vector<double> devs;
        for (std::size_t k = 0; k < results.size(); ++k) {
            const auto& t = results[k];
            rec.add(alpha, k, "strichartz_deviation", t.deviation);
            rec.add(alpha, k, "l2t_l62", t.l2t);
            rec.add(alpha, k, "linf_l2", t.linf);
            if (cfg.probes.size() > 1) {
                for (std::size_t p = 0; p < cfg.probes.size(); ++p) {
                    rec.add(alpha, k, "strichartz_deviation[" + cfg.probes[p].name + "]", t.per_probe_dev[p]);
                }
            }
            rec.add(alpha, k, "mass_drift", t.drift);
            rec.add(alpha, k, "below_threshold", v_norm > 0.0 && alpha <= threshold ? 1.0 : 0.0);
            devs.push_back(t.deviation);
            if (t.drift > 1e-9) {
                rec.warnings.push_back("mass drift " + format_double(t.drift) + " at alpha " + format_double(alpha));
            }
        }
        means_input.push_back(std::move(devs));
    }
    rec.compute_statistics();

    rec.checks["divergence_threshold"] = threshold;
    const double lo = *std::min_element(cfg.alphas.begin(), cfg.alphas.end());
    const double hi = *std::max_element(cfg.alphas.begin(), cfg.alphas.end());
    bool positive = true;
    for (const auto& s : means_input) positive = positive && summarize(s).mean > 0.0;
    if (cfg.alphas.size() >= 3 && lo > 0.0 && positive) {
        rec.fits.push_back({"strichartz_deviation_vs_alpha",
                            fit_loglog_slope_of_means(cfg.alphas, means_input, derive_seed(cfg.seed, 1u << 20, 0),
                                                      cfg.resamples)});
        if (hi < 10.0 * lo * (1.0 - 1e-12)) rec.warnings.push_back("alphas span less than one decade");
        if (cfg.trials < 20) rec.warnings.push_back("fewer than 20 trials per alpha");
    } else {
        rec.checks["fit_skipped"] = "need three positive alphas and positive means";
    }
    return rec;
}

struct PathClassConfig {
    std::vector<double> alphas;
    double horizon = 1.0;
    std::size_t steps = 128;
    std::size_t trials = 10;       // Brownian and fBM samples per alpha
    std::vector<double> hursts;    // fBM classes
    std::vector<Vec> linear_velocities{{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};  // fixed shape, scaled by alpha
    double baseline_alpha = 1.0;
    NormOptions norm{500, 1e-8};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/**
 * ||S(alpha gamma)|| on [0, horizon] for the zero path, a fixed
 * piecewise-linear shape, Brownian paths and fBM(H) paths, per alpha.
 * Metrics: norm_zero, norm_linear, norm_brownian, norm_fbm_H<h>.
 */
inline ExperimentRecord path_class_comparison(const Potential& pot, const PathClassConfig& cfg) {
    require(!cfg.alphas.empty(), ErrorKind::invalid_argument, "path_class_comparison: no alphas");
    require(!cfg.linear_velocities.empty(), ErrorKind::invalid_argument, "path_class_comparison: no linear shape");
    require(cfg.steps % cfg.linear_velocities.size() == 0, ErrorKind::invalid_argument,
            "path_class_comparison: steps must be divisible by the number of linear pieces");
    ExperimentRecord rec;
    rec.experiment = "compare-paths";
    rec.master_seed = cfg.seed;
    const int dim = pot.grid().dim();
    const PathSample zero = zero_path(cfg.steps, cfg.horizon, dim);
    const PathSample linear =
        make_piecewise_linear(cfg.linear_velocities, dim, cfg.steps / cfg.linear_velocities.size(), cfg.horizon);
    auto norm_of = [&](const PathSample& path, double alpha, std::uint64_t seed) {
        const SpaceTimeOperator op(pot, path, alpha, cfg.horizon, cfg.steps);
        const NormEstimate est = estimate_norm(op, seed, cfg.norm);
        return std::make_pair(est.value, est.converged);
    };
    std::vector<std::string> unconverged;
    auto note = [&](bool converged, const std::string& what) {
        if (!converged) unconverged.push_back(what);
    };

    std::vector<FbmSampler> fbm;
    for (double h : cfg.hursts) fbm.emplace_back(cfg.steps, cfg.horizon, h);
    auto hurst_label = [](double h) {
        std::ostringstream os;
        os << "norm_fbm_H" << std::fixed << std::setprecision(2) << h;
        return os.str();
    };

    const auto base = norm_of(linear, cfg.baseline_alpha, derive_seed(cfg.seed, 7, 0));
    note(base.second, "linear baseline");
    rec.checks["linear_baseline"] = base.first;

    std::vector<double> brownian_means;
    double linear_min_ratio = std::numeric_limits<double>::infinity();
    bool zero_constant = true;
    double zero_first = -1.0;
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        const double alpha = cfg.alphas[a];
        const auto z = norm_of(zero, alpha, derive_seed(cfg.seed, 7, 0));
        note(z.second, "zero path");
        rec.add(alpha, 0, "norm_zero", z.first);
        if (zero_first < 0.0) zero_first = z.first;
        zero_constant = zero_constant && z.first == zero_first;
        const auto l = norm_of(linear, alpha, derive_seed(cfg.seed, 7, 0));
        note(l.second, "linear path");
        rec.add(alpha, 0, "norm_linear", l.first);
        if (base.first > 0.0) linear_min_ratio = std::min(linear_min_ratio, l.first / base.first);

        const auto bro = run_trials(cfg.trials, cfg.threads, [&](std::size_t k) {
            const PathSample path = sample_brownian(derive_seed(cfg.seed, 100 + a, k), cfg.steps, cfg.horizon, dim);
            return norm_of(path, alpha, derive_seed(cfg.seed, 8, k));
        });
        std::vector<double> vals;
        for (std::size_t k = 0; k < bro.size(); ++k) {
            rec.add(alpha, k, "norm_brownian", bro[k].first);
            note(bro[k].second, "brownian path");
            vals.push_back(bro[k].first);
        }
        brownian_means.push_back(summarize(vals).mean);

        for (std::size_t hidx = 0; hidx < fbm.size(); ++hidx) {
            const auto fr = run_trials(cfg.trials, cfg.threads, [&](std::size_t k) {
                const PathSample path = fbm[hidx].sample(derive_seed(cfg.seed, 1000 + 100 * hidx + a, k), dim);
                return norm_of(path, alpha, derive_seed(cfg.seed, 9, k));
            });
            for (std::size_t k = 0; k < fr.size(); ++k) {
                rec.add(alpha, k, hurst_label(cfg.hursts[hidx]), fr[k].first);
                note(fr[k].second, "fbm path");
            }
        }
    }
    rec.compute_statistics();

    bool decreasing = true;
    for (std::size_t i = 1; i < brownian_means.size(); ++i) decreasing = decreasing && brownian_means[i] < brownian_means[i - 1];
    rec.checks["zero_norm_constant"] = zero_constant;
    rec.checks["brownian_strictly_decreasing"] = decreasing;
    rec.checks["linear_min_ratio_to_baseline"] = detail::number(linear_min_ratio);
    if (!unconverged.empty()) {
        rec.warnings.push_back("power iteration did not converge for " + std::to_string(unconverged.size()) +
                               " operator(s), first: " + unconverged.front());
    }
    return rec;
}

struct IonizationConfig {
    std::vector<double> alphas;
    std::size_t trials = 10;
    double dt = 1e-2;
    double horizon = 10.0;
    double epsilon = 0.0;  // <= 0: half the ground state's L^6 norm
    double ground_tolerance = 1e-10;
    std::size_t record_stride = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/**
 * Evolves the ground state under alpha B_t. Metrics per trial: rage, the
 * first time the overlap drops below 1/2 (horizon if never, with
 * overlap_decayed = 0), min_overlap, and low_l6_fraction, the fraction of
 * [0, T] on which ||Z(t)||_{L^6} < epsilon (left-node rule).
 */
inline ExperimentRecord ionization_experiment(const Potential& pot, const IonizationConfig& cfg) {
    require(!cfg.alphas.empty(), ErrorKind::invalid_argument, "ionization_experiment: no alphas");
    const GroundState gs = [&] {
        try {
            return ground_state(pot, cfg.ground_tolerance);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::no_bound_state) throw Error(ErrorKind::configuration, e.what());
            throw;
        }
    }();
    ExperimentRecord rec;
    rec.experiment = "ionize";
    rec.master_seed = cfg.seed;
    const double gs_l6 = lp_norm(gs.phi, 6.0);
    const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : 0.5 * gs_l6;
    rec.checks["ground_energy"] = gs.energy;
    rec.checks["ground_residual"] = gs.residual;
    rec.checks["ground_l6"] = gs_l6;
    rec.checks["epsilon"] = eps;
    if (!gs.converged) rec.warnings.push_back("ground state did not reach the requested tolerance");
    const int dim = pot.grid().dim();
    const auto steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));

    std::vector<Summary> rage_summary;
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        const double alpha = cfg.alphas[a];
        struct TrialOut {
            double rage, decay, decayed, min_overlap, low_fraction, drift;
        };
        const auto results = run_trials(cfg.trials, cfg.threads, [&](std::size_t k) {
            const PathSample path = sample_brownian(derive_seed(cfg.seed, a, k), steps, cfg.horizon, dim);
            EvolveOptions opts;
            opts.record_stride = cfg.record_stride;
            const Trajectory traj = evolve(gs.phi, pot, path, alpha, cfg.dt, cfg.horizon, opts);
            TrialOut t{rage_statistic(traj, traj.field.horizon()), traj.field.horizon(), 0.0, 1.0, 0.0,
                       max_relative_mass_drift(traj)};
            double low_time = 0.0;
            for (std::size_t m = 0; m < traj.size(); ++m) {
                const double ov = ground_overlap(traj, gs.phi, m);
                t.min_overlap = std::min(t.min_overlap, ov);
                if (t.decayed == 0.0 && ov < 0.5) {
                    t.decay = traj.time(m);
                    t.decayed = 1.0;
                }
                if (m + 1 < traj.size() && lp_norm(traj[m], 6.0) < eps) low_time += traj.field.dt;
            }
            t.low_fraction = low_time / traj.field.horizon();
            return t;
        });
        std::vector<double> rages;
        for (std::size_t k = 0; k < results.size(); ++k) {
            const auto& t = results[k];
            rec.add(alpha, k, "rage", t.rage);
            rec.add(alpha, k, "overlap_decay_time", t.decay);
            rec.add(alpha, k, "overlap_decayed", t.decayed);
            rec.add(alpha, k, "min_overlap", t.min_overlap);
            rec.add(alpha, k, "low_l6_fraction", t.low_fraction);
            rec.add(alpha, k, "mass_drift", t.drift);
            rages.push_back(t.rage);
            if (t.drift > 1e-9) {
                rec.warnings.push_back("mass drift " + format_double(t.drift) + " at alpha " + format_double(alpha));
            }
        }
        rage_summary.push_back(summarize(rages));
    }
    rec.compute_statistics();

    bool decreasing = true;
    for (std::size_t i = 1; i < rage_summary.size(); ++i) decreasing = decreasing && rage_summary[i].mean < rage_summary[i - 1].mean;
    rec.checks["rage_mean_decreasing"] = decreasing;
    if (rage_summary.size() >= 2) {
        const Summary& first = rage_summary.front();
        const Summary& last = rage_summary.back();
        rec.checks["rage_endpoints_separated"] =
            first.mean - first.standard_error > last.mean + last.standard_error;
    }
    return rec;
}

}  // namespace stochdisp
