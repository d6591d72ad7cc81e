#pragma once

// Device configuration files: flat `key=value` lines with dotted section
// prefixes. `#` starts a comment. Frequencies carry a `_ghz` suffix.
//
//   resonator.omega1_ghz=4.603
//   resonator.alphas=1,0.994,1,1
//   qubit.E_c_ghz=0.426            (or qubit.C_c_ff + qubit.C_J_ff)
//   qubit.E_J_ghz=36.3
//   qubit.d=0.01
//   qubit.n_dc=0
//   coupling.g0_ghz=0.897          (or coupling.zpf_impedance_ohm)
//   truncation.n_max=20
//   truncation.n_q=5
//   truncation.photons=6,4,3,3
//   linewidth_ghz=0.0042

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "cpb.hpp"
#include "multimode.hpp"

namespace musc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Capacitances {
    double C_c_ff = 0.0;
    double C_J_ff = 0.0;
    bool operator==(const Capacitances&) const = default;
};

struct DeviceConfig {
    double omega1_ghz = 0.0;
    std::vector<double> alphas;
    std::optional<double> E_c_ghz;
    std::optional<Capacitances> capacitances;
    double E_J_ghz = 0.0;
    double d = 0.01;
    double n_dc = 0.0;
    std::optional<double> g0_ghz;
    std::optional<double> zpf_impedance_ohm;
    int n_max = 20;
    int n_q = 5;
    std::vector<int> photons;
    std::size_t max_dim = kDefaultMaxDim;
    double linewidth_ghz = 0.0042;

    bool operator==(const DeviceConfig&) const = default;

    double charging_energy() const {
        if (E_c_ghz) return *E_c_ghz;
        return energies_from_capacitances(capacitances->C_c_ff, capacitances->C_J_ff).E_c;
    }

    Device device() const {
        if (E_c_ghz.has_value() == capacitances.has_value())
            throw ConfigError("config: provide exactly one of qubit.E_c_ghz or the pair qubit.C_c_ff/qubit.C_J_ff");
        if (g0_ghz.has_value() == zpf_impedance_ohm.has_value())
            throw ConfigError("config: provide exactly one of coupling.g0_ghz or coupling.zpf_impedance_ohm");
        if (zpf_impedance_ohm && !capacitances)
            throw ConfigError("config: coupling.zpf_impedance_ohm needs the capacitance pair qubit.C_c_ff/qubit.C_J_ff");

        Device dev;
        dev.resonator = {omega1_ghz, alphas};
        dev.qubit = {0.0, E_J_ghz, d, n_dc, 0.0};
        if (capacitances) {
            const auto ce = energies_from_capacitances(capacitances->C_c_ff, capacitances->C_J_ff);
            dev.qubit.E_c = ce.E_c;
            dev.coupling.beta = ce.beta;
        } else {
            dev.qubit.E_c = *E_c_ghz;
        }
        if (g0_ghz) {
            dev.coupling.normalization = CouplingNormalization::calibrated_g0;
            dev.coupling.g1_at_zero_flux = *g0_ghz;
        } else {
            dev.coupling.normalization = CouplingNormalization::zpf_model;
            dev.coupling.zpf_impedance_ohm = *zpf_impedance_ohm;
        }
        dev.truncation = {n_max, n_q, photons, max_dim};
        dev.linewidth = linewidth_ghz;
        dev.validate();
        return dev;
    }

    void validate() const {
        try {
            (void)device();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError(std::string("config: ") + ex.what());
        }
        if (!(linewidth_ghz > 0.0) || !std::isfinite(linewidth_ghz)) throw ConfigError("config: linewidth_ghz must be > 0");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string format_g(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace detail

/// Parses a configuration stream. `source` names the input in messages.
inline DeviceConfig parse_config(std::istream& in, const std::string& source = "<config>") {
    DeviceConfig cfg;
    std::map<std::string, int> seen;
    std::optional<double> C_c, C_J;

    auto fail = [&](int line, const std::string& msg) -> ConfigError {
        return ConfigError(source + ":" + std::to_string(line) + ": " + msg);
    };

    using Setter = std::function<bool(std::string_view)>;
    auto real = [](double& dst) -> Setter {
        return [&dst](std::string_view v) {
            auto x = detail::parse_double(v);
            if (x) dst = *x;
            return x.has_value();
        };
    };
    auto opt_real = [](std::optional<double>& dst) -> Setter {
        return [&dst](std::string_view v) {
            auto x = detail::parse_double(v);
            if (x) dst = *x;
            return x.has_value();
        };
    };
    auto integer = [](int& dst) -> Setter {
        return [&dst](std::string_view v) {
            auto x = detail::parse_int(v);
            if (!x || *x < 0 || *x > 1000000) return false;
            dst = static_cast<int>(*x);
            return true;
        };
    };

    std::map<std::string, Setter, std::less<>> setters{
        {"resonator.omega1_ghz", real(cfg.omega1_ghz)},
        {"resonator.alphas",
         [&](std::string_view v) {
             cfg.alphas.clear();
             for (auto p : detail::split(v, ',')) {
                 auto x = detail::parse_double(p);
                 if (!x) return false;
                 cfg.alphas.push_back(*x);
             }
             return true;
         }},
        {"qubit.E_c_ghz", opt_real(cfg.E_c_ghz)},
        {"qubit.C_c_ff", opt_real(C_c)},
        {"qubit.C_J_ff", opt_real(C_J)},
        {"qubit.E_J_ghz", real(cfg.E_J_ghz)},
        {"qubit.d", real(cfg.d)},
        {"qubit.n_dc", real(cfg.n_dc)},
        {"coupling.g0_ghz", opt_real(cfg.g0_ghz)},
        {"coupling.zpf_impedance_ohm", opt_real(cfg.zpf_impedance_ohm)},
        {"truncation.n_max", integer(cfg.n_max)},
        {"truncation.n_q", integer(cfg.n_q)},
        {"truncation.photons",
         [&](std::string_view v) {
             cfg.photons.clear();
             for (auto p : detail::split(v, ',')) {
                 auto x = detail::parse_int(p);
                 if (!x || *x < 0 || *x > 1000000) return false;
                 cfg.photons.push_back(static_cast<int>(*x));
             }
             return true;
         }},
        {"truncation.max_dim",
         [&](std::string_view v) {
             auto x = detail::parse_int(v);
             if (!x || *x < 1) return false;
             cfg.max_dim = static_cast<std::size_t>(*x);
             return true;
         }},
        {"linewidth_ghz", real(cfg.linewidth_ghz)},
    };

    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw fail(line, "expected key=value");
        const std::string key(detail::trim(s.substr(0, eq)));
        const auto value = detail::trim(s.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) throw fail(line, "unknown key '" + key + "'");
        if (auto prev = seen.find(key); prev != seen.end())
            throw fail(line, "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) + ")");
        seen[key] = line;
        if (!it->second(value)) throw fail(line, "invalid value for '" + key + "': '" + std::string(value) + "'");
    }

    for (const char* required : {"resonator.omega1_ghz", "resonator.alphas", "qubit.E_J_ghz", "truncation.photons"})
        if (!seen.count(required)) throw ConfigError(source + ": missing required key '" + required + "'");
    if (C_c.has_value() != C_J.has_value())
        throw ConfigError(source + ": qubit.C_c_ff and qubit.C_J_ff must be given together");
    if (C_c) cfg.capacitances = Capacitances{*C_c, *C_J};

    try {
        cfg.validate();
    } catch (const ConfigError& ex) {
        throw ConfigError(source + ": " + ex.what());
    }
    return cfg;
}

inline DeviceConfig parse_config_string(const std::string& text, const std::string& source = "<config>") {
    std::istringstream in(text);
    return parse_config(in, source);
}

inline DeviceConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    return parse_config(in, path);
}

/// Writes every field at full precision so that parsing the output yields an
/// identical configuration.
inline void write_config(std::ostream& out, const DeviceConfig& c) {
    auto num = [](double v) { return detail::format_g(v, 17); };
    out << "resonator.omega1_ghz=" << num(c.omega1_ghz) << '\n';
    out << "resonator.alphas=";
    for (std::size_t i = 0; i < c.alphas.size(); ++i) out << (i ? "," : "") << num(c.alphas[i]);
    out << '\n';
    if (c.E_c_ghz) out << "qubit.E_c_ghz=" << num(*c.E_c_ghz) << '\n';
    if (c.capacitances) {
        out << "qubit.C_c_ff=" << num(c.capacitances->C_c_ff) << '\n';
        out << "qubit.C_J_ff=" << num(c.capacitances->C_J_ff) << '\n';
    }
    out << "qubit.E_J_ghz=" << num(c.E_J_ghz) << '\n';
    out << "qubit.d=" << num(c.d) << '\n';
    out << "qubit.n_dc=" << num(c.n_dc) << '\n';
    if (c.g0_ghz) out << "coupling.g0_ghz=" << num(*c.g0_ghz) << '\n';
    if (c.zpf_impedance_ohm) out << "coupling.zpf_impedance_ohm=" << num(*c.zpf_impedance_ohm) << '\n';
    out << "truncation.n_max=" << c.n_max << '\n';
    out << "truncation.n_q=" << c.n_q << '\n';
    out << "truncation.photons=";
    for (std::size_t i = 0; i < c.photons.size(); ++i) out << (i ? "," : "") << c.photons[i];
    out << '\n';
    out << "truncation.max_dim=" << c.max_dim << '\n';
    out << "linewidth_ghz=" << num(c.linewidth_ghz) << '\n';
}

inline std::string config_to_string(const DeviceConfig& c) {
    std::ostringstream out;
    write_config(out, c);
    return out.str();
}

}  // namespace musc
