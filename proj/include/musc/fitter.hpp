#pragma once

// Least-squares calibration of circuit parameters against spectroscopy
// peaks, flux-axis calibration from a raw current scan, and truncation
// convergence checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "multimode.hpp"
#include "optimize.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"

namespace musc {

struct DataRow {
    double flux = 0.0;       // Phi / Phi_0
    double frequency = 0.0;  // GHz
    Label branch;
    double weight = 1.0;
};

struct FluxDataset {
    std::vector<DataRow> rows;
    double linewidth = 0.0042;  // GHz

    void validate() const {
        if (!(linewidth > 0.0) || !std::isfinite(linewidth)) throw std::invalid_argument("dataset: linewidth must be > 0");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            const std::string where = "dataset row " + std::to_string(i + 1) + ": ";
            if (!std::isfinite(r.flux)) throw std::invalid_argument(where + "flux must be finite");
            if (!(r.frequency > 0.0) || !std::isfinite(r.frequency))
                throw std::invalid_argument(where + "frequency must be positive and finite");
            if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
                throw std::invalid_argument(where + "weight must be finite and >= 0");
            if (r.branch.kind == Branch::cavity && r.branch.mode < 1)
                throw std::invalid_argument(where + "cavity branch needs a mode index >= 1");
        }
    }
};

// Free parameters, in optimizer order.
enum FitParam : std::size_t { kCc = 0, kCJ, kNdc, kEJ, kAsym, kFitParamCount };

inline constexpr std::array<const char*, kFitParamCount> kFitParamNames = {"C_c_ff", "C_J_ff", "n_dc", "E_J_ghz", "d"};

using FitVector = std::array<double, kFitParamCount>;

struct FitParams {
    double C_c = 0.0;   // fF
    double C_J = 0.0;   // fF
    double n_dc = 0.0;
    double E_J = 0.0;   // GHz
    double d = 0.01;

    FitVector as_array() const { return {C_c, C_J, n_dc, E_J, d}; }
    static FitParams from_array(const FitVector& v) { return {v[kCc], v[kCJ], v[kNdc], v[kEJ], v[kAsym]}; }
};

struct FitBounds {
    FitParams lo{1.0, 0.0, 0.0, 1.0, 0.0};
    FitParams hi{200.0, 200.0, 0.5, 200.0, 0.5};

    bool contains(const FitParams& p) const {
        const auto l = lo.as_array(), h = hi.as_array(), v = p.as_array();
        for (std::size_t i = 0; i < kFitParamCount; ++i)
            if (!(v[i] >= l[i] && v[i] <= h[i])) return false;
        return true;
    }
    void validate() const {
        const auto l = lo.as_array(), h = hi.as_array();
        for (std::size_t i = 0; i < kFitParamCount; ++i)
            if (!(l[i] < h[i])) throw std::invalid_argument(std::string("fit bounds: empty interval for ") + kFitParamNames[i]);
        if (!(lo.C_c > 0.0)) throw std::invalid_argument("fit bounds: C_c lower bound must be > 0");
        if (!(lo.C_J >= 0.0)) throw std::invalid_argument("fit bounds: C_J lower bound must be >= 0");
    }
};

/// Model device for a parameter set: charging energy and participation ratio
/// from the capacitances, coupling from the resonator's zero-point voltage.
inline Device device_for_params(const Device& base, const FitParams& p) {
    Device dev = base;
    const auto ce = energies_from_capacitances(p.C_c, p.C_J);
    dev.qubit.E_c = ce.E_c;
    dev.qubit.E_J = p.E_J;
    dev.qubit.n_dc = p.n_dc;
    dev.qubit.d = p.d;
    dev.coupling.normalization = CouplingNormalization::zpf_model;
    dev.coupling.beta = ce.beta;
    return dev;
}

struct ResidualReport {
    std::vector<double> residuals;  // GHz, weighted
    std::vector<double> model;      // GHz; NaN where the branch was missing
    std::vector<bool> flagged;      // penalty applied
    std::vector<std::string> notes;
    double objective = 0.0;         // sum of squares, row order
    double rms = 0.0;
    std::size_t n_flagged = 0;
};

// Residual assigned to a row whose branch the model cannot produce.
inline constexpr double kPenaltyLinewidths = 10.0;

/// Weighted residuals of a device model against a dataset. Diagonalizations
/// are shared between rows at identical flux and fanned out over workers;
/// results are assembled in row order, so the output does not depend on the
/// worker count.
inline ResidualReport model_residuals(const Device& dev, const FluxDataset& ds, unsigned workers = 1) {
    ds.validate();
    dev.validate();
    const double G = coupling_prefactor(dev);

    std::vector<double> fluxes;
    for (const auto& r : ds.rows) fluxes.push_back(r.flux);
    std::sort(fluxes.begin(), fluxes.end());
    fluxes.erase(std::unique(fluxes.begin(), fluxes.end()), fluxes.end());

    std::vector<std::vector<Label>> wanted(fluxes.size());
    for (const auto& r : ds.rows) {
        const auto k = static_cast<std::size_t>(std::lower_bound(fluxes.begin(), fluxes.end(), r.flux) - fluxes.begin());
        if (std::find(wanted[k].begin(), wanted[k].end(), r.branch) == wanted[k].end()) wanted[k].push_back(r.branch);
    }
    for (auto& w : wanted) std::sort(w.begin(), w.end());

    std::vector<SpectrumPoint> points(fluxes.size());
    parallel_for(fluxes.size(), workers, [&](std::size_t k) {
        try {
            points[k] = transition_table(dev, fluxes[k], false, wanted[k], G);
        } catch (const std::exception& ex) {
            points[k] = SpectrumPoint{fluxes[k], {}, ex.what()};
        }
    });

    ResidualReport rep;
    const std::size_t n = ds.rows.size();
    rep.residuals.resize(n);
    rep.model.assign(n, std::numeric_limits<double>::quiet_NaN());
    rep.flagged.assign(n, false);
    rep.notes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = ds.rows[i];
        const auto k = static_cast<std::size_t>(std::lower_bound(fluxes.begin(), fluxes.end(), r.flux) - fluxes.begin());
        const auto& pt = points[k];
        const auto f = pt.error.empty() ? pt.frequency(r.branch) : std::nullopt;
        if (f) {
            rep.model[i] = *f;
            rep.residuals[i] = r.weight * (*f - r.frequency);
        } else {
            rep.flagged[i] = true;
            ++rep.n_flagged;
            rep.residuals[i] = r.weight * kPenaltyLinewidths * ds.linewidth;
            rep.notes[i] = pt.error.empty() ? "branch " + r.branch.to_string() + " not labelable" : pt.error;
        }
        rep.objective += rep.residuals[i] * rep.residuals[i];
    }
    rep.rms = n ? std::sqrt(rep.objective / static_cast<double>(n)) : 0.0;
    return rep;
}

inline ResidualReport residuals(const FitParams& p, const FluxDataset& ds, const Device& base, unsigned workers = 1) {
    return model_residuals(device_for_params(base, p), ds, workers);
}

struct FitOptions {
    unsigned workers = 1;
    int restarts = 3;
    std::uint64_t seed = 1;
    int max_iterations = 400;  // per simplex run
    double xtol = 1e-7;        // in the unbounded (logit) coordinates
    double ftol = 1e-10;
    double initial_step = 0.4;
    double restart_spread = 0.3;
    bool fit_asymmetry = false;
};

struct FitResult {
    FitParams params;
    FitVector sigma{};              // one-sigma, curvature based; infinite when undetermined
    std::array<bool, kFitParamCount> free{};
    double objective = 0.0;
    double rms = 0.0;               // GHz
    ResidualReport residuals;
    int iterations = 0;             // summed over simplex runs
    int evaluations = 0;
    bool converged = false;
    std::vector<double> trace;      // best objective after each iteration
};

namespace detail {

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Maps an unbounded coordinate into (lo, hi) and back.
inline double to_bounded(double u, double lo, double hi) { return lo + (hi - lo) * logistic(u); }

inline double to_unbounded(double x, double lo, double hi) {
    const double eps = 1e-9;
    double t = (x - lo) / (hi - lo);
    t = std::clamp(t, eps, 1.0 - eps);
    return std::log(t / (1.0 - t));
}

// Solves (J^T J) cov = I; returns nullopt when numerically singular.
inline std::optional<std::vector<std::vector<double>>> invert_spd(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i][i]));
    if (!(scale > 0.0)) return std::nullopt;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (std::abs(a[piv][c]) <= 1e-13 * scale) return std::nullopt;
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const double d = a[c][c];
        for (std::size_t j = 0; j < n; ++j) {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    return inv;
}

}  // namespace detail

/// One-sigma estimates from the Gauss-Newton curvature J^T J of the
/// residuals at p, scaled by the reduced chi-square. Parameters not marked
/// free get sigma 0; a singular curvature yields infinite sigmas.
inline FitVector parameter_sigmas(const FitParams& p, const FluxDataset& ds, const Device& base, const FitBounds& bounds,
                                  const std::array<bool, kFitParamCount>& free, unsigned workers = 1) {
    const auto x = p.as_array(), lo = bounds.lo.as_array(), hi = bounds.hi.as_array();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < kFitParamCount; ++i)
        if (free[i]) idx.push_back(i);
    FitVector sigma{};
    if (idx.empty()) return sigma;

    const auto base_rep = residuals(p, ds, base, workers);
    const std::size_t n = ds.rows.size();
    std::vector<std::vector<double>> jac(idx.size(), std::vector<double>(n));
    for (std::size_t a = 0; a < idx.size(); ++a) {
        const std::size_t i = idx[a];
        const double h = 1e-5 * std::max(std::abs(x[i]), 1e-3 * (hi[i] - lo[i]));
        double up = std::min(x[i] + h, hi[i]), dn = std::max(x[i] - h, lo[i]);
        FitVector xu = x, xd = x;
        xu[i] = up;
        xd[i] = dn;
        const auto ru = residuals(FitParams::from_array(xu), ds, base, workers).residuals;
        const auto rd = residuals(FitParams::from_array(xd), ds, base, workers).residuals;
        for (std::size_t k = 0; k < n; ++k) jac[a][k] = (ru[k] - rd[k]) / (up - dn);
    }

    std::vector<std::vector<double>> jtj(idx.size(), std::vector<double>(idx.size(), 0.0));
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
            for (std::size_t k = 0; k < n; ++k) jtj[a][b] += jac[a][k] * jac[b][k];

    std::size_t n_eff = 0;
    for (const auto& r : ds.rows)
        if (r.weight > 0.0) ++n_eff;
    const double dof = n_eff > idx.size() ? static_cast<double>(n_eff - idx.size()) : 1.0;
    const double s2 = base_rep.objective / dof;

    const auto inv = detail::invert_spd(jtj);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        const std::size_t i = idx[a];
        if (!inv || !((*inv)[a][a] >= 0.0)) {
            sigma[i] = std::numeric_limits<double>::infinity();
        } else {
            sigma[i] = std::sqrt(s2 * (*inv)[a][a]);
        }
    }
    return sigma;
}

/// Bounded least-squares fit of C_c, C_J, n_DC, E_J (and optionally d) by
/// Nelder-Mead in logit coordinates, followed by seeded restarts around the
/// incumbent. Resonator, truncation and impedance come from `base`.
inline FitResult fit(const FluxDataset& ds, const Device& base, const FitParams& guess, const FitBounds& bounds = {},
                     const FitOptions& opt = {}) {
    if (ds.rows.empty()) throw std::invalid_argument("fit: empty dataset");
    ds.validate();
    bounds.validate();
    if (!bounds.contains(guess)) throw std::invalid_argument("fit: initial guess outside bounds");
    if (opt.restarts < 0 || opt.max_iterations < 1) throw std::invalid_argument("fit: bad options");

    FitResult res;
    res.free = {true, true, true, true, opt.fit_asymmetry};
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < kFitParamCount; ++i)
        if (res.free[i]) idx.push_back(i);

    const auto lo = bounds.lo.as_array(), hi = bounds.hi.as_array();
    const FitVector fixed = guess.as_array();
    auto decode = [&](const std::vector<double>& u) {
        FitVector x = fixed;
        for (std::size_t a = 0; a < idx.size(); ++a) x[idx[a]] = detail::to_bounded(u[a], lo[idx[a]], hi[idx[a]]);
        return FitParams::from_array(x);
    };
    auto objective = [&](const std::vector<double>& u) {
        try {
            return residuals(decode(u), ds, base, opt.workers).objective;
        } catch (const std::invalid_argument&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<double> u0(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) u0[a] = detail::to_unbounded(fixed[idx[a]], lo[idx[a]], hi[idx[a]]);

    NelderMeadOptions nm;
    nm.max_iterations = opt.max_iterations;
    nm.xtol = opt.xtol;
    nm.ftol = opt.ftol;

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> best_u = u0;
    double best_f = std::numeric_limits<double>::infinity();
    bool best_converged = false;
    for (int run = 0; run <= opt.restarts; ++run) {
        std::vector<double> start = best_u;
        if (run > 0)
            for (auto& v : start) v += opt.restart_spread * normal(rng);
        const double step = run == 0 ? opt.initial_step : opt.initial_step / 2.0;
        const auto r = nelder_mead(objective, start, std::vector<double>(idx.size(), step), nm);
        res.iterations += r.iterations;
        res.evaluations += r.evaluations;
        for (double f : r.best_trace) res.trace.push_back(std::min(f, best_f));
        if (r.f < best_f) {
            best_f = r.f;
            best_u = r.x;
            best_converged = r.converged;
        } else if (r.f == best_f) {
            best_converged = best_converged || r.converged;
        }
    }

    res.params = decode(best_u);
    res.residuals = residuals(res.params, ds, base, opt.workers);
    res.objective = res.residuals.objective;
    res.rms = res.residuals.rms;
    res.converged = best_converged && std::isfinite(res.objective);
    res.sigma = parameter_sigmas(res.params, ds, base, bounds, res.free, opt.workers);
    return res;
}

struct AlphaAdjustment {
    std::vector<double> alphas;
    std::vector<bool> adjusted;  // per mode; false where no data was available
    bool any_adjusted = false;
};

inline constexpr double kAlphaSearchLo = 0.9;
inline constexpr double kAlphaSearchHi = 1.1;

/// Re-fits each higher-mode alpha_m (m >= 2) in turn against the cavity_m
/// rows only, other alphas held at their current values.
inline AlphaAdjustment adjust_alphas(const FluxDataset& ds, const Device& dev, unsigned workers = 1,
                                     double tol = 1e-7) {
    ds.validate();
    dev.validate();
    AlphaAdjustment out;
    out.alphas = dev.resonator.alphas;
    out.adjusted.assign(out.alphas.size(), false);
    Device work = dev;
    for (std::size_t m = 1; m < out.alphas.size(); ++m) {
        FluxDataset sub;
        sub.linewidth = ds.linewidth;
        for (const auto& r : ds.rows)
            if (r.branch == Label::cavity(static_cast<int>(m + 1))) sub.rows.push_back(r);
        if (sub.rows.empty()) continue;
        const auto best = golden_section(
            [&](double a) {
                Device trial = work;
                trial.resonator.alphas[m] = a;
                return model_residuals(trial, sub, workers).objective;
            },
            kAlphaSearchLo, kAlphaSearchHi, tol);
        work.resonator.alphas[m] = best.x;
        out.alphas[m] = best.x;
        out.adjusted[m] = true;
        out.any_adjusted = true;
    }
    return out;
}

struct KnobReport {
    std::string knob;        // e.g. "n_max", "n_q", "photons[1]", "n_modes"
    double max_change = 0.0; // GHz over tracked transitions and fluxes
    bool passed = false;
    std::string error;       // non-empty when the incremented build failed
};

struct ConvergenceReport {
    std::vector<KnobReport> knobs;
    double threshold = 0.0;  // GHz
    bool passed = false;
    std::string worst_knob;
    double worst_change = 0.0;
};

inline const std::vector<double>& convergence_fluxes() {
    static const std::vector<double> f{0.0, 0.125, 0.25, 0.375, 0.5};
    return f;
}

/// Increments each truncation knob by one and measures the largest shift of
/// any transition tracked in the base model. Passes iff every shift is below
/// linewidth / 10.
inline ConvergenceReport convergence_check(const Device& dev, double linewidth, unsigned workers = 1) {
    dev.validate();
    if (!(linewidth > 0.0)) throw std::invalid_argument("convergence_check: linewidth must be > 0");

    std::vector<std::pair<std::string, Device>> variants;
    {
        Device v = dev;
        v.truncation.n_max += 1;
        variants.emplace_back("n_max", v);
    }
    {
        Device v = dev;
        v.truncation.n_q += 1;
        variants.emplace_back("n_q", v);
    }
    for (std::size_t m = 0; m < dev.truncation.n_modes(); ++m) {
        Device v = dev;
        v.truncation.photon_levels[m] += 1;
        variants.emplace_back("photons[" + std::to_string(m + 1) + "]", v);
    }
    {
        Device v = dev;
        // The added mode needs at least one photon to couple at all.
        v.truncation.photon_levels.push_back(std::max(2, dev.truncation.photon_levels.back()));
        v.resonator.alphas.push_back(1.0);
        variants.emplace_back("n_modes", v);
    }

    const auto& fluxes = convergence_fluxes();
    const auto labels = default_labels(dev);
    const std::size_t nf = fluxes.size();
    const std::size_t nv = variants.size();

    // Slot 0 holds the base model; slots 1..nv the incremented ones.
    std::vector<SpectrumPoint> table((nv + 1) * nf);
    std::vector<std::string> build_error(nv + 1);
    std::vector<std::optional<double>> prefactors(nv + 1);
    for (std::size_t v = 0; v <= nv; ++v) {
        const Device& d = v == 0 ? dev : variants[v - 1].second;
        try {
            d.validate();
            prefactors[v] = coupling_prefactor(d);
        } catch (const std::exception& ex) {
            build_error[v] = ex.what();
        }
    }
    if (!build_error[0].empty()) throw std::invalid_argument("convergence_check: " + build_error[0]);

    parallel_for(table.size(), workers, [&](std::size_t k) {
        const std::size_t v = k / nf, j = k % nf;
        if (!build_error[v].empty()) return;
        const Device& d = v == 0 ? dev : variants[v - 1].second;
        try {
            table[k] = transition_table(d, fluxes[j], false, labels, prefactors[v]);
        } catch (const std::exception& ex) {
            table[k] = SpectrumPoint{fluxes[j], {}, ex.what()};
        }
    });

    ConvergenceReport rep;
    rep.threshold = linewidth / 10.0;
    rep.passed = true;
    for (std::size_t j = 0; j < nf; ++j)
        if (!table[j].error.empty()) throw std::runtime_error("convergence_check: base model failed: " + table[j].error);

    for (std::size_t v = 1; v <= nv; ++v) {
        KnobReport kr;
        kr.knob = variants[v - 1].first;
        kr.error = build_error[v];
        for (std::size_t j = 0; j < nf && kr.error.empty(); ++j) {
            const auto& base_pt = table[j];
            const auto& pt = table[v * nf + j];
            if (!pt.error.empty()) {
                kr.error = pt.error;
                break;
            }
            for (const auto& t : base_pt.transitions) {
                const auto f = pt.frequency(t.label);
                if (!f) {
                    kr.error = "branch " + t.label.to_string() + " lost at flux " + std::to_string(fluxes[j]);
                    break;
                }
                kr.max_change = std::max(kr.max_change, std::abs(*f - t.frequency));
            }
        }
        kr.passed = kr.error.empty() && kr.max_change < rep.threshold;
        if (!kr.passed) rep.passed = false;
        const double severity = kr.error.empty() ? kr.max_change : std::numeric_limits<double>::infinity();
        if (rep.worst_knob.empty() || severity > rep.worst_change) {
            rep.worst_knob = kr.knob;
            rep.worst_change = severity;
        }
        rep.knobs.push_back(std::move(kr));
    }
    return rep;
}

struct CurrentSample {
    double current = 0.0;    // A (any consistent unit)
    double frequency = 0.0;  // GHz, dressed cavity
};

struct FluxCalibration {
    double period = 0.0;
    double offset = 0.0;  // current at Phi = 0, reduced to [-period/2, period/2)

    double flux(double current) const { return (current - offset) / period; }
};

/// Flux axis from a dressed-cavity current scan. The period is the first
/// lag at which the signal matches its own translate (mean squared
/// difference minimum); Phi = 0 is placed at the mirror-symmetry centre with
/// the lower cavity frequency, where the qubit sits highest above the cavity
/// and pulls it down the most.
inline FluxCalibration calibrate_flux(std::vector<CurrentSample> scan) {
    if (scan.size() < 8) throw std::invalid_argument("calibrate_flux: need at least 8 samples");
    for (const auto& s : scan)
        if (!std::isfinite(s.current) || !std::isfinite(s.frequency))
            throw std::invalid_argument("calibrate_flux: non-finite sample");
    std::sort(scan.begin(), scan.end(), [](const auto& a, const auto& b) { return a.current < b.current; });
    const double i0 = scan.front().current, i1 = scan.back().current;
    if (!(i1 > i0)) throw std::runtime_error("calibrate_flux: no detectable periodicity (zero current span)");
    const double span = i1 - i0;

    // Cubic Lagrange interpolation through the four nearest samples.
    auto value = [&](double x) {
        auto it = std::upper_bound(scan.begin(), scan.end(), x,
                                   [](double v, const CurrentSample& s) { return v < s.current; });
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(scan.size());
        const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(it - scan.begin() - 2, 0, n - 4);
        double sum = 0.0;
        for (std::ptrdiff_t a = j; a < j + 4; ++a) {
            double w = 1.0;
            for (std::ptrdiff_t b = j; b < j + 4; ++b) {
                if (b == a) continue;
                const double den = scan[a].current - scan[b].current;
                if (den == 0.0) return scan[a].frequency;
                w *= (x - scan[b].current) / den;
            }
            sum += w * scan[a].frequency;
        }
        return sum;
    };

    const std::size_t m = std::max<std::size_t>(512, 4 * scan.size());
    const double step = span / static_cast<double>(m - 1);
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += value(i0 + step * static_cast<double>(j));
    mean /= static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double d = value(i0 + step * static_cast<double>(j)) - mean;
        var += d * d;
    }
    var /= static_cast<double>(m);
    double peak = 0.0;
    for (const auto& s : scan) peak = std::max(peak, std::abs(s.frequency));
    if (!(var > 1e-20 * std::max(1.0, peak * peak)))
        throw std::runtime_error("calibrate_flux: no detectable periodicity (flat signal)");

    // Normalized mean squared difference between the signal and its translate.
    const int probes = 512;
    auto msd = [&](double lag) {
        const double reach = span - lag;
        if (!(reach > 0.0)) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (int k = 0; k < probes; ++k) {
            const double x = i0 + reach * (k + 0.5) / probes;
            const double d = value(x + lag) - value(x);
            s += d * d;
        }
        return s / probes / (2.0 * var);
    };
    const std::size_t last = m - m / 8;
    std::vector<double> dn(last, 0.0);
    for (std::size_t lag = 1; lag < last; ++lag) dn[lag] = msd(step * static_cast<double>(lag));
    std::size_t leave = 0;  // first lag clearly outside the zero-lag basin
    for (std::size_t lag = 1; lag < last; ++lag)
        if (dn[lag] > 0.5) {
            leave = lag;
            break;
        }
    if (leave == 0) throw std::runtime_error("calibrate_flux: no detectable periodicity (scan shorter than one period)");
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t lag = leave; lag < last; ++lag) floor = std::min(floor, dn[lag]);
    if (!(floor < 0.3)) throw std::runtime_error("calibrate_flux: no detectable periodicity (scan shorter than one period)");
    const double accept = std::max(2.0 * floor, floor + 0.05);
    std::size_t best = 0;
    for (std::size_t lag = leave + 1; lag + 1 < last; ++lag)
        if (dn[lag] <= dn[lag - 1] && dn[lag] <= dn[lag + 1] && dn[lag] <= accept) {
            best = lag;
            break;
        }
    if (best == 0) throw std::runtime_error("calibrate_flux: no detectable periodicity");
    FluxCalibration cal;
    cal.period = golden_section(msd, step * static_cast<double>(best - 1), step * static_cast<double>(best + 1),
                                1e-9 * span)
                     .x;

    // Mirror mismatch around candidate centres.
    const double half = cal.period / 2.0;
    const double min_reach = cal.period / 8.0;
    const int mirror_probes = 64;
    auto mismatch = [&](double c) {
        const double reach = std::min({half, c - i0, i1 - c});
        if (reach < min_reach) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (int k = 1; k <= mirror_probes; ++k) {
            const double dx = reach * k / mirror_probes;
            const double d = value(c + dx) - value(c - dx);
            s += d * d;
        }
        return s / mirror_probes;
    };
    const double lo = i0 + min_reach, hi = i1 - min_reach;
    const int grid = 2000;
    const double dc = (hi - lo) / grid;
    std::vector<double> mm(grid + 1);
    for (int k = 0; k <= grid; ++k) mm[k] = mismatch(lo + dc * k);

    struct Centre {
        double c, level;
    };
    std::vector<Centre> centres;
    for (int k = 1; k < grid; ++k) {
        if (!(mm[k] <= mm[k - 1] && mm[k] <= mm[k + 1])) continue;
        const auto r = golden_section(mismatch, lo + dc * (k - 1), lo + dc * (k + 1), 1e-9 * cal.period);
        centres.push_back({r.x, r.f});
    }
    if (centres.empty()) throw std::runtime_error("calibrate_flux: no symmetry centre found");
    // Keep only genuine symmetry points: mismatch far below the signal variance.
    double best_level = std::numeric_limits<double>::infinity();
    for (const auto& c : centres) best_level = std::min(best_level, c.level);
    const double accept_level = std::max(10.0 * best_level, 1e-3 * var);
    std::optional<Centre> chosen;
    double chosen_value = 0.0;
    for (const auto& c : centres) {
        if (c.level > accept_level) continue;
        const double v = value(c.c);
        if (!chosen || v < chosen_value) {
            chosen = c;
            chosen_value = v;
        }
    }
    double off = chosen->c;
    off -= cal.period * std::floor(off / cal.period + 0.5);
    if (off >= half) off -= cal.period;
    cal.offset = off;
    return cal;
}

}  // namespace musc
