// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat "key = value" file with dotted sections, or a JSON
// object flattened to the same keys. Later sources (defaults, file,
// overrides) replace earlier ones key by key.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sfcl/control.hpp"
#include "sfcl/errors.hpp"
#include "sfcl/model.hpp"
#include "sfcl/spde_solver.hpp"
#include "sfcl/torus_field.hpp"
#include "sfcl/wiener.hpp"

namespace sfcl {

class RunConfig {
public:
    struct Entry {
        std::string value;
        std::string origin;  ///< "file:line", "--override" or "default"
    };

    /// Every key the tool understands.
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys{
            "command", "seed", "output_dir",
            "grid.dim", "grid.n",
            "model.flux", "model.flux.clamp", "model.flux.width", "model.flux.speed", "model.flux.direction",
            "model.diffusion", "model.diffusion.a", "model.diffusion.theta",
            "model.noise", "model.noise.K", "model.noise.q", "model.noise.a", "model.noise.b",
            "model.linearize",
            "solver.dt", "solver.t_end", "solver.eta", "solver.gamma", "solver.eps", "solver.lambda_eps",
            "solver.flux_scheme", "solver.cfl_safety", "solver.snapshots",
            "initial.kind", "initial.value", "initial.amplitude", "initial.mode", "initial.file",
            "control.kind", "control.file", "control.intervals", "control.scale", "control.seed",
            "target.kind", "target.file", "target.mode", "target.offset", "target.cos", "target.sin",
            "skeleton.linear",
            "oracle.kind", "oracle.modes",
            "rate.method", "rate.control_intervals", "rate.output_intervals", "rate.max_outer_iterations",
            "rate.max_inner_iterations", "rate.penalty", "rate.residual_tolerance",
            "experiment.name", "experiment.samples", "experiment.eps", "experiment.pairs",
            "experiment.pair_amplitude", "experiment.tol", "experiment.ladder", "experiment.regularization",
            "experiment.a", "experiment.level", "experiment.delta", "experiment.variance_modes",
            "experiment.tightness_factor",
        };
        return keys;
    }

    void set(const std::string& key, std::string value, std::string origin) {
        if (!known_keys().count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
        entries_[key] = {std::move(value), std::move(origin)};
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    const std::map<std::string, Entry>& entries() const { return entries_; }

    /// "key = value" lines; '#' starts a comment; blank lines are ignored.
    void merge_text(std::istream& is, const std::string& source) {
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const std::string where = source + ":" + std::to_string(lineno);
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (value.empty()) throw ConfigError(where + ": key '" + key + "' has no value");
            set(key, value, where);
        }
    }

    /// Nested JSON objects become dotted keys; arrays become comma lists.
    void merge_json(const nlohmann::json& j, const std::string& source, const std::string& prefix = "") {
        if (!j.is_object()) throw ConfigError(source + ": JSON configuration must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            const auto& v = it.value();
            if (v.is_object()) {
                // {"flux": {"name": "linear", "speed": 2}} sets model.flux and model.flux.speed
                if (v.contains("name")) {
                    set(key, scalar(v["name"], source, key), source);
                    nlohmann::json rest = v;
                    rest.erase("name");
                    merge_json(rest, source, key);
                } else {
                    merge_json(v, source, key);
                }
            } else if (v.is_array()) {
                std::string joined;
                for (const auto& x : v) joined += (joined.empty() ? "" : ",") + scalar(x, source, key);
                set(key, joined, source);
            } else {
                set(key, scalar(v, source, key), source);
            }
        }
    }

    void merge_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(path + ": " + e.what());
            }
            merge_json(j, path);
        } else {
            std::istringstream is(text);
            merge_text(is, path);
        }
    }

    /// "key=value" from the command line.
    void merge_override(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--override expects key=value, got '" + kv + "'");
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "--override " + kv);
    }

    // ----- typed access -------------------------------------------------

    const Entry& entry(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }

    std::string str(const std::string& key) const { return entry(key).value; }
    std::string str(const std::string& key, const std::string& fallback) const {
        return has(key) ? str(key) : fallback;
    }

    double real(const std::string& key) const {
        const auto& e = entry(key);
        return parse_real(e.value, key, e.origin);
    }
    double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

    long long integer(const std::string& key) const {
        const auto& e = entry(key);
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(e.value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != e.value.size() || e.value.empty()) {
            throw ConfigError(e.origin + ": key '" + key + "' expects an integer, got '" + e.value + "'");
        }
        return v;
    }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& e = entry(key);
        if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
        if (e.value == "false" || e.value == "0" || e.value == "no") return false;
        throw ConfigError(e.origin + ": key '" + key + "' expects true/false, got '" + e.value + "'");
    }

    std::vector<double> reals(const std::string& key) const {
        const auto& e = entry(key);
        std::vector<double> out;
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_real(trim(item), key, e.origin));
        if (out.empty()) throw ConfigError(e.origin + ": key '" + key + "' expects a comma-separated list");
        return out;
    }

    /// Error anchored at the origin of `key`.
    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        const std::string where = has(key) ? entry(key).origin + ": " : std::string();
        throw ConfigError(where + "key '" + key + "': " + message);
    }

    /// Canonical text (sorted keys, no output location) and its hash; independent of key order.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, e] : entries_) {
            if (k == "output_dir") continue;
            out += k + "=" + e.value + "\n";
        }
        return out;
    }

    std::string hash() const {
        const auto text = canonical();
        Fnv1a h;
        h.update(text.data(), text.size());
        std::ostringstream hex;
        hex << std::hex << std::setw(16) << std::setfill('0') << h.digest();
        return hex.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, e] : entries_) {
            if (k != "output_dir") j[k] = e.value;
        }
        return j;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double parse_real(const std::string& text, const std::string& key, const std::string& origin) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != text.size() || text.empty() || !std::isfinite(v)) {
            throw ConfigError(origin + ": key '" + key + "' expects a number, got '" + text + "'");
        }
        return v;
    }

    static std::string scalar(const nlohmann::json& v, const std::string& source, const std::string& key) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) {
            std::ostringstream os;
            os.precision(17);
            os << v.get<double>();
            return os.str();
        }
        throw ConfigError(source + ": key '" + key + "' has an unsupported JSON value");
    }

    std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline GridSpec build_grid(const RunConfig& c) {
    const auto dim = c.integer("grid.dim", 1);
    const auto n = c.integer("grid.n", 128);
    if (dim != 1 && dim != 2) c.fail("grid.dim", "must be 1 or 2");
    if (n < 4 || n % 2 != 0) c.fail("grid.n", "must be even and at least 4");
    return GridSpec(static_cast<int>(dim), static_cast<int>(n));
}

/// The model block has no defaults: flux, diffusion (with theta) and noise must be named.
inline ModelSpec build_model(const RunConfig& c) {
    ModelSpec m;
    const auto flux = c.str("model.flux");
    try {
        if (flux == "burgers_clamped") {
            m.flux = FluxSpec::burgers_clamped(c.real("model.flux.clamp", 4.0));
        } else if (flux == "burgers_smooth") {
            m.flux = FluxSpec::burgers_smooth(c.real("model.flux.clamp", 4.0), c.real("model.flux.width", 1.0));
        } else if (flux == "linear") {
            m.flux = FluxSpec::linear(c.real("model.flux.speed", 1.0));
        } else {
            c.fail("model.flux", "unknown flux '" + flux + "' (burgers_clamped, burgers_smooth, linear)");
        }
    } catch (const ParameterError& e) {
        c.fail("model.flux", e.what());
    }
    if (c.has("model.flux.direction")) {
        const auto d = c.reals("model.flux.direction");
        if (d.size() != 2) c.fail("model.flux.direction", "expects two components");
        m.flux.direction = {d[0], d[1]};
    }
    const auto diff = c.str("model.diffusion");
    const double theta = c.real("model.diffusion.theta");
    try {
        check_theta(theta);
    } catch (const ParameterError& e) {
        c.fail("model.diffusion.theta", e.what());
    }
    const double a = c.real("model.diffusion.a", 1.0);
    if (a < 0.0) c.fail("model.diffusion.a", "must be nonnegative");
    if (diff == "linear") {
        m.diffusion = DiffusionSpec::linear(a, theta);
    } else if (diff == "saturating") {
        m.diffusion = DiffusionSpec::saturating(a, theta);
    } else if (diff == "zero") {
        m.diffusion = DiffusionSpec::zero(theta);
    } else {
        c.fail("model.diffusion", "unknown diffusion '" + diff + "' (linear, saturating, zero)");
    }
    const auto noise = c.str("model.noise");
    const auto K = c.integer("model.noise.K", 16);
    if (K < 1) c.fail("model.noise.K", "must be positive");
    try {
        if (noise == "diagonal_decay") {
            m.noise = NoiseSpec::diagonal_decay(static_cast<int>(K), c.real("model.noise.q", 1.0),
                                                c.real("model.noise.a", 1.0), c.real("model.noise.b", 0.5));
        } else if (noise == "additive") {
            m.noise = NoiseSpec::additive(static_cast<int>(K), c.real("model.noise.q", 1.0), c.real("model.noise.a", 1.0));
        } else {
            c.fail("model.noise", "unknown noise '" + noise + "' (diagonal_decay, additive)");
        }
    } catch (const ParameterError& e) {
        c.fail("model.noise.q", e.what());
    }
    if (c.boolean("model.linearize", false)) m = linearize_at(m, 1.0);
    return m;
}

inline SolverConfig build_solver(const RunConfig& c) {
    SolverConfig s;
    s.dt = c.real("solver.dt", s.dt);
    s.t_end = c.real("solver.t_end", s.t_end);
    s.eta = c.real("solver.eta", 0.0);
    s.gamma = c.real("solver.gamma", 0.0);
    s.eps = c.real("solver.eps", 0.0);
    if (c.has("solver.lambda_eps")) s.lambda_eps = c.real("solver.lambda_eps");
    const auto scheme = c.str("solver.flux_scheme", "rusanov");
    if (scheme == "rusanov") {
        s.flux_scheme = FluxScheme::rusanov;
    } else if (scheme == "spectral") {
        s.flux_scheme = FluxScheme::spectral;
    } else {
        c.fail("solver.flux_scheme", "expects rusanov or spectral");
    }
    s.cfl_safety = c.real("solver.cfl_safety", s.cfl_safety);
    s.snapshot_intervals = static_cast<int>(c.integer("solver.snapshots", s.snapshot_intervals));
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("solver block: ") + e.what());
    }
    return s;
}

/// initial.kind: constant (value), sine (value + amplitude sin(2 pi mode x)), file (snapshot).
inline SpectralField build_initial(const RunConfig& c, const GridSpec& g) {
    const auto kind = c.str("initial.kind", "constant");
    const double value = c.real("initial.value", 1.0);
    if (kind == "constant") return SpectralField::constant(g, value);
    if (kind == "sine") {
        const double amp = c.real("initial.amplitude", 0.3);
        const auto k = c.integer("initial.mode", 1);
        return SpectralField::from_function(g, [=](Point x) { return value + amp * std::sin(kTwoPi * k * x[0]); });
    }
    if (kind == "file") {
        std::ifstream in(c.str("initial.file"), std::ios::binary);
        if (!in) c.fail("initial.file", "cannot open");
        auto f = read_snapshot(in);
        if (!(f.grid() == g)) c.fail("initial.file", "snapshot grid differs from grid block");
        return f;
    }
    c.fail("initial.kind", "expects constant, sine or file");
}

/// control.kind: zero, random (N(0, scale^2) entries on `intervals` equal pieces), file (CSV).
inline Control build_control(const RunConfig& c, double horizon, int K, std::uint64_t seed) {
    const auto kind = c.str("control.kind", "random");
    if (kind == "file") {
        std::ifstream in(c.str("control.file"));
        if (!in) c.fail("control.file", "cannot open");
        auto ctl = Control::read_csv(in);
        if (ctl.truncation() != K) c.fail("control.file", "control truncation differs from model.noise.K");
        return ctl;
    }
    const auto m = c.integer("control.intervals", 10);
    if (m < 1) c.fail("control.intervals", "must be positive");
    if (kind == "zero") return Control::uniform(horizon, static_cast<int>(m), std::vector<double>(m * K, 0.0), K);
    if (kind != "random") c.fail("control.kind", "expects zero, random or file");
    const double scale = c.real("control.scale", 1.0);
    std::seed_seq seq{static_cast<std::uint32_t>(c.integer("control.seed", static_cast<long long>(seed))), 0xc0u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> nd(0.0, scale);
    std::vector<double> coeffs(static_cast<std::size_t>(m * K));
    for (auto& x : coeffs) x = nd(rng);
    return Control::uniform(horizon, static_cast<int>(m), coeffs, K);
}

/// target.kind: mode (offset + cos cos(2 pi k x) + sin sin(2 pi k x)) or file (snapshot).
inline SpectralField build_target(const RunConfig& c, const GridSpec& g) {
    const auto kind = c.str("target.kind", "mode");
    if (kind == "file") {
        std::ifstream in(c.str("target.file"), std::ios::binary);
        if (!in) c.fail("target.file", "cannot open");
        auto f = read_snapshot(in);
        if (!(f.grid() == g)) c.fail("target.file", "snapshot grid differs from grid block");
        return f;
    }
    if (kind != "mode") c.fail("target.kind", "expects mode or file");
    const auto k = c.integer("target.mode", 1);
    const double off = c.real("target.offset", 0.0), cs = c.real("target.cos", 0.0), sn = c.real("target.sin", 0.1);
    return SpectralField::from_function(g, [=](Point x) {
        return off + cs * std::cos(kTwoPi * k * x[0]) + sn * std::sin(kTwoPi * k * x[0]);
    });
}

}  // namespace sfcl
