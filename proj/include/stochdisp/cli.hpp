#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stochdisp/config.hpp"
#include "stochdisp/duhamel.hpp"
#include "stochdisp/evolve.hpp"
#include "stochdisp/experiments.hpp"
#include "stochdisp/opnorm.hpp"

namespace stochdisp::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_strict = 3;

inline constexpr const char* output_root_env = "STOCHDISP_OUTPUT_ROOT";

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"simulate", "opnorm",        "blocks", "concentration", "series",
                                                "sweep-alpha", "compare-paths", "ionize", "groundstate"};
    return names;
}

/// Outcome of one command before it is written to disk.
struct Outcome {
    ExperimentRecord record;
    std::string summary;
    std::function<void(const std::filesystem::path&)> extra_files;
};

namespace detail {

inline std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

/// "mean 95% CI [lo, hi]" from a normal approximation.
inline std::string mean_ci(const Summary& s) {
    const double half = 1.96 * s.standard_error;
    return fmt(s.mean) + " 95% CI [" + fmt(s.mean - half) + ", " + fmt(s.mean + half) + "]";
}

inline std::string metric_label(const std::string& base, double value) {
    std::ostringstream os;
    os << base << std::setprecision(6) << value;
    return os.str();
}

inline PathSample scaled(PathSample p, double alpha) {
    for (auto& x : p.positions) x = alpha * x;
    for (auto& v : p.velocities) v = alpha * v;
    p.alpha = alpha;
    return p;
}

/// Trials actually run: deterministic paths need only one.
inline std::size_t trial_count(const Settings& s) { return s.path_is_random() ? s.trials : 1; }

inline ExperimentRecord new_record(const std::string& experiment, const Settings& s) {
    ExperimentRecord rec;
    rec.experiment = experiment;
    rec.master_seed = s.seed;
    return rec;
}

inline Outcome run_simulate(const Settings& s) {
    const Potential pot = make_potential(s);
    const ComplexField z0 = make_initial(s, pot);
    ExperimentRecord rec = new_record("simulate", s);
    const std::size_t trials = trial_count(s);
    double worst_drift = 0.0;
    for (std::size_t a = 0; a < s.alphas.size(); ++a) {
        const double alpha = s.alphas[a];
        struct Row {
            StrichartzNorms dev;
            double drift, rage, energy_drift;
        };
        const auto rows = run_trials(trials, s.threads, [&](std::size_t k) {
            const Trajectory traj = evolve(z0, pot, s.path(a, k), alpha, s.dt, s.horizon);
            const double e_drift = s.path_kind == PathKind::zero || pot.is_zero() || alpha == 0.0
                                       ? max_energy_drift(traj)
                                       : std::numeric_limits<double>::quiet_NaN();
            return Row{strichartz_deviation(traj, z0), max_relative_mass_drift(traj), rage_statistic(traj, s.horizon),
                       e_drift};
        });
        for (std::size_t k = 0; k < rows.size(); ++k) {
            rec.add(alpha, k, "strichartz_deviation", rows[k].dev.intersection());
            rec.add(alpha, k, "l2t_l62", rows[k].dev.l2t_l62);
            rec.add(alpha, k, "linf_l2", rows[k].dev.linf_l2);
            rec.add(alpha, k, "mass_drift", rows[k].drift);
            rec.add(alpha, k, "rage", rows[k].rage);
            if (std::isfinite(rows[k].energy_drift)) rec.add(alpha, k, "energy_drift", rows[k].energy_drift);
            worst_drift = std::max(worst_drift, rows[k].drift);
        }
    }
    if (worst_drift > 1e-9) rec.warnings.push_back("relative mass drift " + fmt(worst_drift) + " exceeds 1e-9");
    rec.compute_statistics();
    const double a0 = s.alphas.front();
    const Summary dev = rec.statistic("strichartz_deviation", a0)->summary;
    return {rec,
            "alpha=" + fmt(a0) + " strichartz_deviation=" + mean_ci(dev) + " (trials=" + std::to_string(dev.count) + ")",
            nullptr};
}

inline NormOptions norm_options(const Settings& s) { return NormOptions{s.iterations, s.tolerance}; }

inline Outcome run_opnorm(const Settings& s) {
    const Potential pot = make_potential(s);
    ExperimentRecord rec = new_record("opnorm", s);
    const std::size_t trials = trial_count(s);
    std::size_t unconverged = 0;
    std::vector<NormSeriesRow> alpha_rows;
    for (std::size_t a = 0; a < s.alphas.size(); ++a) {
        const double alpha = s.alphas[a];
        const auto estimates = run_trials(trials, s.threads, [&](std::size_t k) {
            const SpaceTimeOperator op(pot, s.path(a, k), alpha, s.horizon, s.steps());
            return estimate_norm(op, derive_seed(s.seed, 50, k), norm_options(s));
        });
        double gap = 0.0;
        for (std::size_t k = 0; k < estimates.size(); ++k) {
            rec.add(alpha, k, "norm", estimates[k].value);
            rec.add(alpha, k, "convergence_gap", estimates[k].convergence_gap);
            gap = std::max(gap, estimates[k].convergence_gap);
            if (!estimates[k].converged) ++unconverged;
        }
        std::vector<double> values;
        for (const auto& e : estimates) values.push_back(e.value);
        alpha_rows.push_back({alpha, summarize(values).mean, gap});
    }
    std::vector<NormSeriesRow> restricted_rows;
    if (!s.restricted_horizons.empty()) {
        if (s.restricted_horizons.back() > s.horizon * (1.0 + 1e-12)) {
            ::stochdisp::detail::config_fail("opnorm.horizons", "must not exceed time.horizon");
        }
        const double alpha = s.alphas.front();
        const auto growth = restricted_norm_growth(pot, s.path(0, 0), alpha, s.restricted_horizons,
                                                   s.horizon / static_cast<double>(s.steps()),
                                                   derive_seed(s.seed, 51, 0), norm_options(s));
        json series = json::array();
        for (const auto& g : growth) {
            rec.add(alpha, 0, metric_label("restricted_norm_R", g.horizon), g.estimate.value);
            restricted_rows.push_back({g.horizon, g.estimate.value, g.estimate.convergence_gap});
            series.push_back(json{{"horizon", g.horizon}, {"norm", g.estimate.value}});
            if (!g.estimate.converged) ++unconverged;
        }
        rec.checks["restricted_growth"] = series;
    }
    if (unconverged > 0) {
        rec.warnings.push_back("power iteration did not converge for " + std::to_string(unconverged) + " operator(s)");
    }
    rec.compute_statistics();
    const double a0 = s.alphas.front();
    const Summary n0 = rec.statistic("norm", a0)->summary;
    return {rec, "alpha=" + fmt(a0) + " norm=" + mean_ci(n0) + " (trials=" + std::to_string(n0.count) + ")",
            [alpha_rows, restricted_rows](const std::filesystem::path& dir) {
                write_norm_series_csv(alpha_rows, (dir / "norms.csv").string());
                if (!restricted_rows.empty()) write_norm_series_csv(restricted_rows, (dir / "restricted.csv").string());
            }};
}

inline Outcome run_blocks(const Settings& s) {
    const Potential pot = make_potential(s);
    ExperimentRecord rec = new_record("blocks", s);
    for (double b : s.block_counts) {
        if (s.steps() % static_cast<std::size_t>(b) != 0) {
            ::stochdisp::detail::config_fail("blocks.n", "every entry must divide the path step count " +
                                                             std::to_string(s.steps()));
        }
    }
    std::size_t unconverged = 0;
    std::string summary;
    std::vector<NormSeriesRow> rows;
    for (std::size_t a = 0; a < s.alphas.size(); ++a) {
        const double alpha = s.alphas[a];
        const SpaceTimeOperator op(pot, s.path(a, 0), alpha, s.horizon, s.steps());
        json per_alpha = json::object();
        for (double b : s.block_counts) {
            const int n = static_cast<int>(b);
            std::vector<std::pair<int, int>> pairs;
            for (int j = 1; j <= n; ++j) {
                for (int k = 1; k <= j; ++k) pairs.emplace_back(j, k);
            }
            const auto est = run_trials(pairs.size(), s.threads, [&](std::size_t i) {
                return block_norm(op, n, pairs[i].first, pairs[i].second, derive_seed(s.seed, 60 + n, i),
                                  norm_options(s));
            });
            double max_diag = 0.0, max_off = 0.0, sum_sq = 0.0;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto [j, k] = pairs[i];
                rec.add(alpha, 0,
                        "block_n" + std::to_string(n) + "_j" + std::to_string(j) + "_k" + std::to_string(k),
                        est[i].value);
                (j == k ? max_diag : max_off) = std::max(j == k ? max_diag : max_off, est[i].value);
                sum_sq += est[i].value * est[i].value;
                if (!est[i].converged) ++unconverged;
            }
            rec.add(alpha, 0, "max_diagonal_n" + std::to_string(n), max_diag);
            per_alpha["n" + std::to_string(n)] = json{{"max_diagonal", max_diag},
                                                      {"max_off_diagonal", max_off},
                                                      {"sqrt_n_max_diagonal", std::sqrt(b) * max_diag},
                                                      {"block_square_sum_sqrt", std::sqrt(sum_sq)}};
            if (a == 0) {
                summary += (summary.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ": " + fmt(max_diag);
                rows.push_back({b, max_diag, 0.0});
            }
        }
        rec.checks["alpha=" + fmt(alpha)] = per_alpha;
    }
    if (unconverged > 0) {
        rec.warnings.push_back("power iteration did not converge for " + std::to_string(unconverged) + " block(s)");
    }
    rec.compute_statistics();
    return {rec, "alpha=" + fmt(s.alphas.front()) + " max diagonal block norm " + summary,
            [rows](const std::filesystem::path& dir) { write_norm_series_csv(rows, (dir / "blocks.csv").string()); }};
}

inline Outcome run_concentration(const Settings& s) {
    ExperimentRecord rec = new_record("concentration", s);
    const std::size_t trials = trial_count(s);
    const bool energy = s.horizon >= 1.0 - 1e-12;
    for (std::size_t a = 0; a < s.alphas.size(); ++a) {
        const double alpha = s.alphas[a];
        struct Row {
            std::vector<double> k;
            double energy;
        };
        const auto rows = run_trials(trials, s.threads, [&](std::size_t t) {
            const PathSample p = scaled(s.path(a, t), alpha);
            Row row{{}, energy ? local_time_energy(p, s.conc_beta) : 0.0};
            for (double r : s.conc_r) row.k.push_back(concentration_K(p, s.conc_epsilon, r));
            return row;
        });
        for (std::size_t t = 0; t < rows.size(); ++t) {
            for (std::size_t i = 0; i < s.conc_r.size(); ++i) rec.add(alpha, t, metric_label("K_r", s.conc_r[i]), rows[t].k[i]);
            if (energy) rec.add(alpha, t, "local_time_energy", rows[t].energy);
        }
    }
    if (!energy) rec.checks["local_time_energy_skipped"] = "needs time.horizon >= 1";
    rec.compute_statistics();
    const double a0 = s.alphas.front();
    const std::string metric = metric_label("K_r", s.conc_r.front());
    const Summary k0 = rec.statistic(metric, a0)->summary;
    return {rec,
            "alpha=" + fmt(a0) + " eps=" + fmt(s.conc_epsilon) + " " + metric + "=" + mean_ci(k0) +
                " (trials=" + std::to_string(k0.count) + ")",
            nullptr};
}

inline Outcome run_series(const Settings& s) {
    if (s.export_symbol && s.dimension != 1) {
        ::stochdisp::detail::config_fail("series.export_symbol", "symbols are computed for grid.dimension = 1 only");
    }
    const Potential pot = make_potential(s);
    const ComplexField z0 = make_initial(s, pot);
    ExperimentRecord rec = new_record("series", s);
    const std::size_t trials = trial_count(s);
    const double v_norm = pot.norms().l32_1;
    std::string summary;
    for (std::size_t a = 0; a < s.alphas.size(); ++a) {
        const double alpha = s.alphas[a];
        const auto born = run_trials(trials, s.threads, [&](std::size_t k) {
            const PathSample path = s.path(a, k);
            std::vector<double> norms;
            for (int n = 0; n <= s.series_order; ++n) {
                const SpaceTimeField b = born_term(n, z0, pot, path, alpha, s.dt, s.horizon);
                norms.push_back(l2_norm(b[b.size() - 1]));
            }
            return norms;
        });
        for (std::size_t k = 0; k < born.size(); ++k) {
            for (int n = 0; n <= s.series_order; ++n) {
                rec.add(alpha, k, "born_l2_order" + std::to_string(n), born[k][static_cast<std::size_t>(n)]);
            }
        }
        json entry = json::object();
        if (alpha > 0.0) {
            const SeriesMajorant maj = series_majorant(std::max(1, s.series_order), alpha, v_norm, s.series_constant);
            entry["majorant_ratio"] = ::stochdisp::detail::number(maj.ratio);
            entry["majorant_sum"] = ::stochdisp::detail::number(maj.sum);
            entry["threshold"] = ::stochdisp::detail::number(maj.threshold);
            entry["below_threshold"] = maj.divergent;
            const SeriesBoundEstimate mc =
                mc_series_bound(pot, alpha, z0, s.series_paths, s.dt, s.horizon, derive_seed(s.seed, 70, a));
            rec.add(alpha, 0, "interaction_mean", mc.estimate);
            rec.add(alpha, 0, "interaction_standard_error", mc.standard_error);
            rec.add(alpha, 0, "fitted_constant", mc.fitted_c);
            entry["fitted_constant"] = ::stochdisp::detail::number(mc.fitted_c);
            if (a == 0) {
                summary = "alpha=" + fmt(alpha) + " E||V1 Z||^2=" +
                          mean_ci(Summary{mc.estimate, mc.standard_error, s.series_paths}) +
                          " fitted C=" + fmt(mc.fitted_c);
            }
        }
        rec.checks["alpha=" + fmt(alpha)] = entry;
    }
    rec.compute_statistics();
    if (summary.empty()) {
        const Summary b1 = rec.statistic("born_l2_order" + std::to_string(std::min(1, s.series_order)),
                                         s.alphas.front())->summary;
        summary = "alpha=" + fmt(s.alphas.front()) + " born order-1 norm=" + mean_ci(b1);
    }
    std::function<void(const std::filesystem::path&)> extra;
    if (s.export_symbol) {
        extra = [w = w_symbol(pot, s.alphas.front(), s.t_cut)](const std::filesystem::path& dir) {
            write_symbol(w, (dir / "symbol.bin").string());
        };
        rec.checks["symbol_file"] = "symbol.bin";
    }
    return {rec, summary, extra};
}

inline Probe single_probe(const Settings& s, const Potential& pot) {
    static const std::map<InitialKind, std::string> names{
        {InitialKind::gaussian, "gaussian"}, {InitialKind::mode, "mode"}, {InitialKind::ground_state, "ground_state"}};
    return Probe{names.at(s.initial), make_initial(s, pot)};
}

inline Outcome run_sweep(const Settings& s) {
    if (s.path_kind != PathKind::brownian) {
        ::stochdisp::detail::config_fail("path.kind", "sweep-alpha drives with Brownian paths only");
    }
    const Potential pot = make_potential(s);
    AlphaSweepConfig cfg;
    cfg.alphas = s.alphas;
    cfg.trials = s.trials;
    cfg.probes = s.initial == InitialKind::family
                     ? probe_family(pot, s.initial_width, static_cast<std::size_t>(std::llabs(s.initial_mode)))
                     : std::vector<Probe>{single_probe(s, pot)};
    cfg.dt = s.dt;
    cfg.dt_scale = s.dt_scale;
    cfg.horizon = s.horizon;
    cfg.series_constant = s.series_constant;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    ExperimentRecord rec = alpha_sweep_strichartz(pot, cfg);
    std::string summary;
    if (const SlopeFit* f = rec.fit("strichartz_deviation_vs_alpha")) {
        summary = "slope=" + fmt(f->slope) + " 95% CI [" + fmt(f->ci_low) + ", " + fmt(f->ci_high) + "]";
    } else {
        const Summary d = rec.statistic("strichartz_deviation", s.alphas.front())->summary;
        summary = "alpha=" + fmt(s.alphas.front()) + " strichartz_deviation=" + mean_ci(d) + " (no slope fit)";
    }
    return {rec, summary, nullptr};
}

inline Outcome run_compare(const Settings& s) {
    const Potential pot = make_potential(s);
    PathClassConfig cfg;
    cfg.alphas = s.alphas;
    cfg.horizon = s.horizon;
    cfg.steps = s.steps();
    cfg.trials = s.trials;
    cfg.hursts = s.hursts;
    if (!s.velocities.empty()) cfg.linear_velocities = s.linear_velocities();
    cfg.baseline_alpha = s.alphas.front();
    cfg.norm = norm_options(s);
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    ExperimentRecord rec = path_class_comparison(pot, cfg);
    const Summary first = rec.statistic("norm_brownian", s.alphas.front())->summary;
    const Summary last = rec.statistic("norm_brownian", s.alphas.back())->summary;
    std::string summary = "brownian norm alpha=" + fmt(s.alphas.front()) + ": " + mean_ci(first) +
                          "; alpha=" + fmt(s.alphas.back()) + ": " + mean_ci(last);
    if (rec.checks.contains("linear_min_ratio_to_baseline")) {
        summary += "; linear min ratio " + fmt(::stochdisp::detail::number_from(rec.checks["linear_min_ratio_to_baseline"]));
    }
    return {rec, summary, nullptr};
}

inline Outcome run_ionize(const Settings& s) {
    const Potential pot = make_potential(s);
    IonizationConfig cfg;
    cfg.alphas = s.alphas;
    cfg.trials = s.trials;
    cfg.dt = s.dt;
    cfg.horizon = s.horizon;
    cfg.epsilon = s.ionize_epsilon;
    cfg.record_stride = s.record_stride;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    ExperimentRecord rec = ionization_experiment(pot, cfg);
    const Summary first = rec.statistic("rage", s.alphas.front())->summary;
    const Summary last = rec.statistic("rage", s.alphas.back())->summary;
    return {rec,
            "rage alpha=" + fmt(s.alphas.front()) + ": " + mean_ci(first) + "; alpha=" + fmt(s.alphas.back()) + ": " +
                mean_ci(last),
            nullptr};
}

inline Outcome run_groundstate(const Settings& s) {
    const Potential pot = make_potential(s);
    ExperimentRecord rec = new_record("groundstate", s);
    const GroundState gs = [&] {
        try {
            return ground_state(pot, 1e-10);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::no_bound_state) ::stochdisp::detail::config_fail("potential.depth", e.message());
            throw;
        }
    }();
    rec.add(0.0, 0, "energy", gs.energy);
    rec.add(0.0, 0, "residual", gs.residual);
    rec.add(0.0, 0, "l6_norm", lp_norm(gs.phi, 6.0));
    rec.add(0.0, 0, "iterations", static_cast<double>(gs.iterations));
    rec.checks["converged"] = gs.converged;
    if (!gs.converged) rec.warnings.push_back("ground-state refinement stopped at residual " + fmt(gs.residual));
    rec.compute_statistics();
    return {rec, "E0=" + fmt(gs.energy, 10) + " residual=" + fmt(gs.residual, 3), nullptr};
}

inline Outcome dispatch(const std::string& command, const Settings& s) {
    if (command == "simulate") return run_simulate(s);
    if (command == "opnorm") return run_opnorm(s);
    if (command == "blocks") return run_blocks(s);
    if (command == "concentration") return run_concentration(s);
    if (command == "series") return run_series(s);
    if (command == "sweep-alpha") return run_sweep(s);
    if (command == "compare-paths") return run_compare(s);
    if (command == "ionize") return run_ionize(s);
    if (command == "groundstate") return run_groundstate(s);
    throw Error(ErrorKind::configuration, "unknown command '" + command + "'");
}

/// Loads an INI config, or the embedded config of a record.json.
inline RunConfig load_config(const std::string& path) {
    if (std::filesystem::path(path).extension() != ".json") return RunConfig::from_file(path);
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::configuration, "cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::configuration, "'" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object() || !j["config"].contains("values")) {
        throw Error(ErrorKind::configuration, "'" + path + "' has no embedded config");
    }
    RunConfig cfg;
    for (const auto& [key, value] : j["config"]["values"].items()) {
        if (!value.is_string()) throw Error(ErrorKind::configuration, key + ": expected a string value in '" + path + "'");
        cfg.set(key, value.get<std::string>());
    }
    return cfg;
}

inline json config_snapshot(const std::string& command, const RunConfig& cfg) {
    json values = json::object();
    for (const auto& [k, v] : cfg.values()) {
        if (!config_key_is_operational(k)) values[k] = v;
    }
    return json{{"command", command}, {"values", values}};
}

inline std::filesystem::path output_root(const Settings& s) {
    if (!s.output_dir.empty()) return s.output_dir;
    if (const char* env = std::getenv(output_root_env); env != nullptr && *env != '\0') return env;
    return "results";
}

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::configuration:
        case ErrorKind::invalid_argument:
        case ErrorKind::unsupported_exponent:
        case ErrorKind::grid_mismatch:
        case ErrorKind::no_bound_state:
        case ErrorKind::resource:
            return exit_config;
        case ErrorKind::singular_time:
        case ErrorKind::io:
            return exit_failure;
    }
    return exit_failure;
}

}  // namespace detail

struct Options {
    std::string command;
    std::string config_path;
    std::vector<std::string> overrides;
    bool strict = false;
    bool quiet = false;
    std::size_t threads = 0;  // 0: keep run.threads
};

/// Runs one command end to end; returns the process exit code.
inline int execute(const Options& opts, std::ostream& out, std::ostream& err) {
    try {
        RunConfig cfg = opts.config_path.empty() ? RunConfig{} : detail::load_config(opts.config_path);
        for (const auto& o : opts.overrides) cfg.apply_override(o);
        if (opts.threads > 0) cfg.set("run.threads", std::to_string(opts.threads));
        const Settings settings(cfg);

        const WallClock clock;
        Outcome outcome = detail::dispatch(opts.command, settings);
        ExperimentRecord& rec = outcome.record;
        rec.run_id = make_run_id("command=" + opts.command + "\n" + cfg.canonical(), settings.seed);
        rec.master_seed = settings.seed;
        rec.config = detail::config_snapshot(opts.command, cfg);
        rec.metadata = clock.metadata(settings.threads);

        const std::filesystem::path dir = detail::output_root(settings) / rec.run_id;
        write_record(rec, dir);
        if (outcome.extra_files) outcome.extra_files(dir);

        for (const auto& w : rec.warnings) err << "warning: " << w << '\n';
        if (!opts.quiet) out << opts.command << ' ' << rec.run_id << ": " << outcome.summary << '\n';
        if (opts.strict && !rec.warnings.empty()) {
            err << "error: " << rec.warnings.size() << " numerical warning(s) under --strict\n";
            return exit_strict;
        }
        return exit_ok;
    } catch (const Error& e) {
        const int code = detail::exit_code_for(e.kind());
        err << (code == exit_config ? "config error: " : "error: ") << e.message() << '\n';
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

/// Parses argv and runs the selected command.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Stochastically driven Schrodinger experiments"};
    app.require_subcommand(1);
    Options opts;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->fallthrough();
        sub->callback([&opts, name] { opts.command = name; });
    }
    app.add_option("--config", opts.config_path, "INI config file, or a record.json to rerun its config");
    app.add_option("--set", opts.overrides, "override section.key=value (repeatable)");
    app.add_flag("--strict", opts.strict, "exit 3 when numerical warnings are raised");
    app.add_option("--threads", opts.threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", opts.quiet, "suppress the summary line");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    }
    return execute(opts, out, err);
}

}  // namespace stochdisp::cli
