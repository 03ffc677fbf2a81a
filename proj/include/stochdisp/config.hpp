#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"
#include "stochdisp/seeding.hpp"

namespace stochdisp {

/// Known keys and their defaults, flattened as section.key.
inline const std::map<std::string, std::string>& config_defaults() {
    static const std::map<std::string, std::string> defaults{
        {"grid.dimension", "1"},
        {"grid.n", "128"},
        {"grid.length", "32"},
        {"time.dt", "0.01"},
        {"time.horizon", "1"},
        {"alpha.values", "1"},
        {"path.kind", "brownian"},
        {"path.hurst", "0.5"},
        {"path.steps", "0"},
        {"path.pieces", "2"},
        {"path.velocities", ""},
        {"potential.kind", "gaussian_well"},
        {"potential.depth", "1"},
        {"potential.width", "1"},
        {"initial.kind", "gaussian"},
        {"initial.width", "1"},
        {"initial.mode", "4"},
        {"run.seed", "0"},
        {"run.trials", "20"},
        {"run.threads", "1"},
        {"run.output_dir", ""},
        {"opnorm.iterations", "500"},
        {"opnorm.tolerance", "1e-10"},
        {"opnorm.horizons", ""},
        {"blocks.n", "4,8,16"},
        {"concentration.epsilon", "0.1"},
        {"concentration.r", "0.01,0.5"},
        {"concentration.beta", "1"},
        {"series.order", "3"},
        {"series.t_cut", "1"},
        {"series.paths", "16"},
        {"series.constant", "1"},
        {"series.export_symbol", "false"},
        {"sweep.dt_scale", "0"},
        {"compare.hursts", "0.3,0.7"},
        {"ionize.epsilon", "0"},
        {"ionize.record_stride", "1"},
    };
    return defaults;
}

/// Keys that change where or how fast a run executes but not its results.
inline bool config_key_is_operational(const std::string& key) { return key == "run.output_dir" || key == "run.threads"; }

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] inline void config_fail(const std::string& key, const std::string& what) {
    throw Error(ErrorKind::configuration, key + ": " + what);
}

}  // namespace detail

/**
 * Flat key-value configuration. INI text uses [section] headers and
 * `key = value` lines; `#` and `;` start comments. Unknown keys are rejected.
 */
class RunConfig {
public:
    RunConfig() : values_(config_defaults()) {}

    static RunConfig from_ini(const std::string& text, const std::string& source = "<config>") {
        RunConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') {
                    throw Error(ErrorKind::configuration, source + ":" + std::to_string(lineno) + ": malformed section header");
                }
                section = detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw Error(ErrorKind::configuration, source + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = detail::trim(line.substr(0, eq));
            cfg.set(section.empty() ? key : section + "." + key, detail::trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::configuration, "cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return from_ini(ss.str(), path);
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) detail::config_fail(key, "unknown key");
        values_[key] = value;
    }

    /// Applies "section.key=value".
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::configuration, "override '" + assignment + "' is not of the form section.key=value");
        }
        set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
    }

    const std::string& raw(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) detail::config_fail(key, "unknown key");
        return it->second;
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    double real(const std::string& key) const {
        const std::string& s = raw(key);
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
            detail::config_fail(key, "expected a finite number, got '" + s + "'");
        }
        return v;
    }

    long long integer(const std::string& key) const {
        const std::string& s = raw(key);
        errno = 0;
        char* end = nullptr;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
            detail::config_fail(key, "expected an integer, got '" + s + "'");
        }
        return v;
    }

    std::uint64_t unsigned_integer(const std::string& key) const {
        const std::string& s = raw(key);
        errno = 0;
        char* end = nullptr;
        if (s.empty() || s.front() == '-') detail::config_fail(key, "expected a non-negative integer, got '" + s + "'");
        const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (end != s.c_str() + s.size() || errno == ERANGE) {
            detail::config_fail(key, "expected a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    bool boolean(const std::string& key) const {
        const std::string& s = raw(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        detail::config_fail(key, "expected true or false, got '" + s + "'");
    }

    std::vector<double> real_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(raw(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(item.c_str(), &end);
            if (item.empty() || end != item.c_str() + item.size() || errno == ERANGE || !std::isfinite(v)) {
                detail::config_fail(key, "expected a comma-separated list of numbers, got '" + raw(key) + "'");
            }
            out.push_back(v);
        }
        return out;
    }

    /// "key=value" lines in key order, excluding operational keys.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            if (!config_key_is_operational(k)) out += k + "=" + v + "\n";
        }
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

enum class InitialKind { gaussian, ground_state, mode, family };

inline InitialKind initial_kind_from_string(const std::string& s) {
    if (s == "gaussian") return InitialKind::gaussian;
    if (s == "ground_state") return InitialKind::ground_state;
    if (s == "mode") return InitialKind::mode;
    if (s == "family") return InitialKind::family;
    throw Error(ErrorKind::configuration, "initial.kind: expected gaussian, ground_state, mode or family, got '" + s + "'");
}

/// Typed, validated view of a RunConfig. Every field is checked on construction.
struct Settings {
    int dimension = 1;
    std::size_t n = 128;
    double length = 32.0;
    double dt = 0.01;
    double horizon = 1.0;
    std::vector<double> alphas;
    PathKind path_kind = PathKind::brownian;
    double hurst = 0.5;
    std::size_t path_steps = 0;
    std::size_t pieces = 2;
    std::vector<double> velocities;
    PotentialKind potential_kind = PotentialKind::gaussian_well;
    double depth = 1.0;
    double width = 1.0;
    InitialKind initial = InitialKind::gaussian;
    double initial_width = 1.0;
    long long initial_mode = 4;
    std::uint64_t seed = 0;
    std::size_t trials = 20;
    std::size_t threads = 1;
    std::string output_dir;
    std::size_t iterations = 500;
    double tolerance = 1e-10;
    std::vector<double> restricted_horizons;
    std::vector<double> block_counts;
    double conc_epsilon = 0.1;
    std::vector<double> conc_r;
    double conc_beta = 1.0;
    int series_order = 3;
    double t_cut = 1.0;
    std::size_t series_paths = 16;
    double series_constant = 1.0;
    bool export_symbol = false;
    double dt_scale = 0.0;
    std::vector<double> hursts;
    double ionize_epsilon = 0.0;
    std::size_t record_stride = 1;

    /// Path lattice steps: path.steps, or ceil(horizon / dt) when 0.
    std::size_t steps() const {
        return path_steps > 0 ? path_steps : static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    }

    Grid grid() const { return Grid(dimension, n, length); }

    explicit Settings(const RunConfig& c) {
        using detail::config_fail;
        const long long dim = c.integer("grid.dimension");
        if (dim < 1 || dim > 3) config_fail("grid.dimension", "must be 1, 2 or 3, got " + c.raw("grid.dimension"));
        dimension = static_cast<int>(dim);
        const long long nn = c.integer("grid.n");
        if (nn < 2 || (nn & (nn - 1)) != 0) config_fail("grid.n", "must be a power of two >= 2, got " + c.raw("grid.n"));
        const long long cap = dimension == 1 ? (1 << 16) : dimension == 2 ? 1024 : 128;
        if (nn > cap) config_fail("grid.n", "must be <= " + std::to_string(cap) + " in dimension " + std::to_string(dimension));
        n = static_cast<std::size_t>(nn);
        length = c.real("grid.length");
        if (!(length > 0.0)) config_fail("grid.length", "must be positive");

        dt = c.real("time.dt");
        if (!(dt > 0.0)) config_fail("time.dt", "must be positive");
        horizon = c.real("time.horizon");
        if (!(horizon > 0.0)) config_fail("time.horizon", "must be positive");
        if (dt > horizon) config_fail("time.dt", "must not exceed time.horizon");

        alphas = c.real_list("alpha.values");
        if (alphas.empty()) config_fail("alpha.values", "must list at least one value");
        for (double a : alphas) {
            if (a < 0.0) config_fail("alpha.values", "values must be non-negative");
        }

        try {
            path_kind = path_kind_from_string(c.raw("path.kind"));
        } catch (const Error&) {
            config_fail("path.kind", "expected zero, brownian, fbm or piecewise_linear, got '" + c.raw("path.kind") + "'");
        }
        hurst = c.real("path.hurst");
        if (!(hurst > 0.0 && hurst < 1.0)) config_fail("path.hurst", "must lie in (0, 1)");
        const long long ps = c.integer("path.steps");
        if (ps < 0) config_fail("path.steps", "must be >= 0 (0 derives it from time.dt)");
        path_steps = static_cast<std::size_t>(ps);
        const long long pc = c.integer("path.pieces");
        if (pc < 1) config_fail("path.pieces", "must be >= 1");
        pieces = static_cast<std::size_t>(pc);
        velocities = c.raw("path.velocities").empty() ? std::vector<double>{} : c.real_list("path.velocities");
        if (path_kind == PathKind::fbm && steps() > 4096) config_fail("path.steps", "fbm paths support at most 4096 steps");
        if (path_kind == PathKind::piecewise_linear) {
            const std::size_t count = velocities.empty() ? pieces : velocities.size();
            if (steps() % count != 0) config_fail("path.steps", "must be divisible by the number of linear pieces");
        }

        try {
            potential_kind = potential_kind_from_string(c.raw("potential.kind"));
        } catch (const Error&) {
            config_fail("potential.kind", "expected zero, gaussian_well, compact_bump or sech2_well, got '" +
                                              c.raw("potential.kind") + "'");
        }
        if (potential_kind == PotentialKind::custom) config_fail("potential.kind", "custom fields cannot be configured");
        depth = c.real("potential.depth");
        width = c.real("potential.width");
        if (!(width > 0.0)) config_fail("potential.width", "must be positive");

        initial = initial_kind_from_string(c.raw("initial.kind"));
        initial_width = c.real("initial.width");
        if (!(initial_width > 0.0)) config_fail("initial.width", "must be positive");
        initial_mode = c.integer("initial.mode");
        if (std::llabs(initial_mode) >= static_cast<long long>(n / 2)) config_fail("initial.mode", "must satisfy |mode| < grid.n / 2");

        seed = c.unsigned_integer("run.seed");
        const long long tr = c.integer("run.trials");
        if (tr < 1) config_fail("run.trials", "must be >= 1");
        trials = static_cast<std::size_t>(tr);
        const long long th = c.integer("run.threads");
        if (th < 1) config_fail("run.threads", "must be >= 1");
        threads = static_cast<std::size_t>(th);
        output_dir = c.raw("run.output_dir");

        const long long it = c.integer("opnorm.iterations");
        if (it < 10) config_fail("opnorm.iterations", "must be >= 10");
        iterations = static_cast<std::size_t>(it);
        tolerance = c.real("opnorm.tolerance");
        if (!(tolerance > 0.0)) config_fail("opnorm.tolerance", "must be positive");
        restricted_horizons = c.raw("opnorm.horizons").empty() ? std::vector<double>{} : c.real_list("opnorm.horizons");
        for (std::size_t i = 0; i < restricted_horizons.size(); ++i) {
            if (!(restricted_horizons[i] > 0.0) || (i > 0 && restricted_horizons[i] <= restricted_horizons[i - 1])) {
                config_fail("opnorm.horizons", "must be positive and strictly increasing");
            }
        }

        block_counts = c.real_list("blocks.n");
        for (double b : block_counts) {
            if (b < 1.0 || b != std::floor(b)) config_fail("blocks.n", "entries must be positive integers");
        }

        conc_epsilon = c.real("concentration.epsilon");
        if (!(conc_epsilon > 0.0 && conc_epsilon <= horizon)) config_fail("concentration.epsilon", "must lie in (0, time.horizon]");
        conc_r = c.real_list("concentration.r");
        if (conc_r.empty()) config_fail("concentration.r", "must list at least one radius");
        for (double r : conc_r) {
            if (!(r > 0.0)) config_fail("concentration.r", "radii must be positive");
        }
        conc_beta = c.real("concentration.beta");
        if (!(conc_beta > 0.0)) config_fail("concentration.beta", "must be positive");

        const long long so = c.integer("series.order");
        if (so < 0 || so > 4) config_fail("series.order", "must lie in 0..4");
        series_order = static_cast<int>(so);
        t_cut = c.real("series.t_cut");
        if (!(t_cut > 0.0)) config_fail("series.t_cut", "must be positive");
        const long long sp = c.integer("series.paths");
        if (sp < 2) config_fail("series.paths", "must be >= 2");
        series_paths = static_cast<std::size_t>(sp);
        series_constant = c.real("series.constant");
        if (!(series_constant > 0.0)) config_fail("series.constant", "must be positive");
        export_symbol = c.boolean("series.export_symbol");

        dt_scale = c.real("sweep.dt_scale");
        if (dt_scale < 0.0) config_fail("sweep.dt_scale", "must be >= 0");
        hursts = c.raw("compare.hursts").empty() ? std::vector<double>{} : c.real_list("compare.hursts");
        for (double h : hursts) {
            if (!(h > 0.0 && h < 1.0)) config_fail("compare.hursts", "entries must lie in (0, 1)");
        }
        ionize_epsilon = c.real("ionize.epsilon");
        if (ionize_epsilon < 0.0) config_fail("ionize.epsilon", "must be >= 0 (0 selects half the ground-state L^6 norm)");
        const long long rs = c.integer("ionize.record_stride");
        if (rs < 1) config_fail("ionize.record_stride", "must be >= 1");
        record_stride = static_cast<std::size_t>(rs);
    }

    /// Linear-path velocities along the first axis: path.velocities, else the separated family of path.pieces.
    std::vector<Vec> linear_velocities() const {
        if (velocities.empty()) return separated_velocities(pieces);
        std::vector<Vec> out;
        for (double v : velocities) out.push_back(Vec{v, 0.0, 0.0});
        return out;
    }

    /// Unit-scale path for trial `index` (alpha is applied at use sites).
    PathSample path(std::uint64_t stream, std::size_t index) const {
        const std::uint64_t s = derive_seed(seed, stream, index);
        switch (path_kind) {
            case PathKind::zero:
                return zero_path(steps(), horizon, dimension);
            case PathKind::brownian:
                return sample_brownian(s, steps(), horizon, dimension);
            case PathKind::fbm:
                return sample_fbm(s, steps(), horizon, dimension, hurst);
            case PathKind::piecewise_linear: {
                const auto v = linear_velocities();
                return make_piecewise_linear(v, dimension, steps() / v.size(), horizon);
            }
        }
        return zero_path(steps(), horizon, dimension);
    }

    bool path_is_random() const { return path_kind == PathKind::brownian || path_kind == PathKind::fbm; }
};

/// Potential described by the potential.* keys; a support that does not fit raises configuration.
inline Potential make_potential(const Settings& s) {
    try {
        return make_potential(s.potential_kind, s.depth, s.width, s.grid());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::configuration) detail::config_fail("potential.width", e.message());
        throw;
    }
}

/// Unit-norm initial datum for initial.kind in {gaussian, mode, ground_state}.
inline ComplexField make_initial(const Settings& s, const Potential& pot) {
    const Grid& g = pot.grid();
    ComplexField z(g);
    switch (s.initial) {
        case InitialKind::ground_state:
            try {
                return ground_state(pot, 1e-10).phi;
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::no_bound_state) detail::config_fail("initial.kind", e.message());
                throw;
            }
        case InitialKind::mode: {
            const double k = g.frequency_step() * static_cast<double>(s.initial_mode);
            z = ComplexField::from_function(g, [&](const Vec& x) { return std::polar(1.0, k * x[0]); });
            break;
        }
        case InitialKind::gaussian:
        case InitialKind::family: {
            const double w = s.initial_width;
            z = ComplexField::from_function(g, [&](const Vec& x) { return complex(std::exp(-dot(x, x) / (2.0 * w * w)), 0.0); });
            break;
        }
    }
    z *= complex(1.0 / l2_norm(z), 0.0);
    return z;
}

}  // namespace stochdisp
