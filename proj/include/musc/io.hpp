#pragma once

// Dataset ingestion and export of sweeps and fit results. Numbers are
// written with 9 significant digits so output is byte-stable.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "fitter.hpp"
#include "spectrum.hpp"

namespace musc {

inline constexpr const char* kDatasetHeader = "flux,frequency_ghz,branch,weight";
inline constexpr const char* kSweepHeader = "flux,label,frequency_ghz,overlap";
inline constexpr const char* kResidualHeader = "row,flux,branch,frequency_ghz,model_ghz,weight,residual_ghz,flagged";

inline std::string fmt9(double v) { return detail::format_g(v, 9); }

/// All schema violations found in a file, one message per offending line.
class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s;
        for (const auto& m : p) s += (s.empty() ? "" : "\n") + m;
        return s;
    }
    std::vector<std::string> problems_;
};

inline FluxDataset read_dataset(std::istream& in, const std::string& source = "<dataset>", double linewidth = 0.0042) {
    FluxDataset ds;
    ds.linewidth = linewidth;
    std::vector<std::string> problems;
    std::string raw;
    int line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line;
        auto s = detail::trim(raw);
        if (s.empty() || s.front() == '#') continue;
        const std::string where = source + ":" + std::to_string(line) + ": ";
        if (!header) {
            if (s != kDatasetHeader) {
                problems.push_back(where + "expected header '" + kDatasetHeader + "'");
                break;
            }
            header = true;
            continue;
        }
        const auto f = detail::split(s, ',');
        if (f.size() != 4) {
            problems.push_back(where + "expected 4 fields, found " + std::to_string(f.size()));
            continue;
        }
        DataRow r;
        bool ok = true;
        auto flux = detail::parse_double(f[0]);
        auto freq = detail::parse_double(f[1]);
        auto label = Label::parse(std::string(f[2]));
        auto w = detail::parse_double(f[3]);
        if (!flux) problems.push_back(where + "invalid flux '" + std::string(f[0]) + "'"), ok = false;
        if (!freq || !(*freq > 0.0))
            problems.push_back(where + "frequency must be positive, got '" + std::string(f[1]) + "'"), ok = false;
        if (!label || (label->kind == Branch::cavity && label->mode < 1))
            problems.push_back(where + "unknown branch '" + std::string(f[2]) + "'"), ok = false;
        if (!w || !(*w >= 0.0)) problems.push_back(where + "weight must be >= 0, got '" + std::string(f[3]) + "'"), ok = false;
        if (!ok) continue;
        ds.rows.push_back({*flux, *freq, *label, *w});
    }
    if (!header && problems.empty()) problems.push_back(source + ": missing header '" + kDatasetHeader + "'");
    if (!problems.empty()) throw DatasetError(std::move(problems));
    ds.validate();
    return ds;
}

inline FluxDataset load_dataset(const std::string& path, double linewidth = 0.0042) {
    std::ifstream in(path);
    if (!in) throw DatasetError({path + ": cannot open"});
    return read_dataset(in, path, linewidth);
}

inline void write_dataset(std::ostream& out, const FluxDataset& ds) {
    out << kDatasetHeader << '\n';
    for (const auto& r : ds.rows)
        out << fmt9(r.flux) << ',' << fmt9(r.frequency) << ',' << r.branch.to_string() << ',' << fmt9(r.weight) << '\n';
}

/// Sweep table in grid order, labels in request order within a point.
/// Failed points contribute no rows.
inline void write_sweep(std::ostream& out, const std::vector<SpectrumPoint>& sweep) {
    out << kSweepHeader << '\n';
    for (const auto& p : sweep)
        for (const auto& t : p.transitions)
            out << fmt9(p.flux) << ',' << t.label.to_string() << ',' << fmt9(t.frequency) << ',' << fmt9(t.overlap) << '\n';
}

/// Reads a sweep table back; used by tests and downstream tooling.
inline std::vector<SpectrumPoint> read_sweep(std::istream& in) {
    std::vector<SpectrumPoint> out;
    std::string raw;
    bool header = false;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto s = detail::trim(raw);
        if (s.empty()) continue;
        if (!header) {
            if (s != kSweepHeader) throw std::runtime_error("sweep: missing header");
            header = true;
            continue;
        }
        const auto f = detail::split(s, ',');
        auto flux = f.size() == 4 ? detail::parse_double(f[0]) : std::nullopt;
        auto label = f.size() == 4 ? Label::parse(std::string(f[1])) : std::nullopt;
        auto freq = f.size() == 4 ? detail::parse_double(f[2]) : std::nullopt;
        auto ov = f.size() == 4 ? detail::parse_double(f[3]) : std::nullopt;
        if (!flux || !label || !freq || !ov) throw std::runtime_error("sweep: bad row at line " + std::to_string(line));
        if (out.empty() || out.back().flux != *flux) out.push_back(SpectrumPoint{*flux, {}, {}});
        out.back().transitions.push_back({*label, *freq, *ov});
    }
    if (!header) throw std::runtime_error("sweep: missing header");
    return out;
}

/// Fit document: flat dotted keys, then the per-row residual table after a
/// `[residuals]` marker.
inline void write_fit_document(std::ostream& out, const FitResult& r, const FluxDataset& ds, const Device& base) {
    const auto p = r.params.as_array();
    const auto ce = energies_from_capacitances(r.params.C_c, r.params.C_J);
    out << "fit.converged=" << (r.converged ? "true" : "false") << '\n';
    out << "fit.iterations=" << r.iterations << '\n';
    out << "fit.evaluations=" << r.evaluations << '\n';
    out << "fit.objective_ghz2=" << fmt9(r.objective) << '\n';
    out << "fit.rms_ghz=" << fmt9(r.rms) << '\n';
    out << "fit.rows=" << ds.rows.size() << '\n';
    out << "fit.flagged=" << r.residuals.n_flagged << '\n';
    for (std::size_t i = 0; i < kFitParamCount; ++i) {
        if (!r.free[i]) continue;
        out << "params." << kFitParamNames[i] << '=' << fmt9(p[i]) << '\n';
        out << "sigma." << kFitParamNames[i] << '=' << fmt9(r.sigma[i]) << '\n';
    }
    out << "derived.E_c_ghz=" << fmt9(ce.E_c) << '\n';
    out << "derived.beta=" << fmt9(ce.beta) << '\n';
    out << "fixed.omega1_ghz=" << fmt9(base.resonator.omega1) << '\n';
    if (!r.free[kAsym]) out << "fixed.d=" << fmt9(r.params.d) << '\n';
    out << "fixed.alphas=";
    for (std::size_t m = 0; m < base.resonator.alphas.size(); ++m) out << (m ? "," : "") << fmt9(base.resonator.alphas[m]);
    out << '\n';
    out << "fixed.zpf_impedance_ohm=" << fmt9(base.coupling.zpf_impedance_ohm) << '\n';
    out << "fixed.linewidth_ghz=" << fmt9(ds.linewidth) << '\n';
    out << "[residuals]\n" << kResidualHeader << '\n';
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& row = ds.rows[i];
        out << i + 1 << ',' << fmt9(row.flux) << ',' << row.branch.to_string() << ',' << fmt9(row.frequency) << ','
            << (r.residuals.flagged[i] ? std::string("nan") : fmt9(r.residuals.model[i])) << ',' << fmt9(row.weight)
            << ',' << fmt9(r.residuals.residuals[i]) << ',' << (r.residuals.flagged[i] ? 1 : 0) << '\n';
    }
}

/// Key/value section of a fit document.
inline std::map<std::string, std::string> read_fit_document(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string raw;
    while (std::getline(in, raw)) {
        auto s = detail::trim(raw);
        if (s == "[residuals]") break;
        if (s.empty() || s.front() == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw std::runtime_error("fit document: expected key=value");
        kv.emplace(std::string(s.substr(0, eq)), std::string(s.substr(eq + 1)));
    }
    return kv;
}

/// Parameters stored in a fit document; keys missing there keep `fallback`.
inline FitParams fit_params_from_document(const std::map<std::string, std::string>& kv, FitParams fallback) {
    auto x = fallback.as_array();
    for (std::size_t i = 0; i < kFitParamCount; ++i) {
        auto it = kv.find(std::string("params.") + kFitParamNames[i]);
        if (it == kv.end()) continue;
        auto v = detail::parse_double(it->second);
        if (!v) throw std::runtime_error(std::string("fit document: bad value for params.") + kFitParamNames[i]);
        x[i] = *v;
    }
    if (auto it = kv.find("fixed.d"); it != kv.end())
        if (auto v = detail::parse_double(it->second)) x[kAsym] = *v;
    return FitParams::from_array(x);
}

}  // namespace musc
