#pragma once

// Dressed transitions of the composite system: state labeling by bare-state
// overlap, flux sweeps, vacuum Rabi splittings and Bloch-Siegert shifts.

#include <algorithm>
#include <cmath>
#include <compare>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "linalg.hpp"
#include "multimode.hpp"
#include "optimize.hpp"
#include "parallel.hpp"

namespace musc {

enum class Branch { cavity, qubit_ge, qubit_gf, qubit_ef, two_photon_gf };

/// Transition label: cavity_<m> (1-based mode) or one of the qubit branches.
struct Label {
    Branch kind = Branch::cavity;
    int mode = 1;

    static Label cavity(int m) { return {Branch::cavity, m}; }
    static Label qubit_ge() { return {Branch::qubit_ge, 0}; }
    static Label qubit_gf() { return {Branch::qubit_gf, 0}; }
    static Label qubit_ef() { return {Branch::qubit_ef, 0}; }
    static Label two_photon_gf() { return {Branch::two_photon_gf, 0}; }

    std::string to_string() const {
        switch (kind) {
            case Branch::cavity: return "cavity_" + std::to_string(mode);
            case Branch::qubit_ge: return "qubit_ge";
            case Branch::qubit_gf: return "qubit_gf";
            case Branch::qubit_ef: return "qubit_ef";
            case Branch::two_photon_gf: return "two_photon_gf";
        }
        return "?";
    }

    static std::optional<Label> parse(const std::string& s) {
        if (s == "qubit_ge") return qubit_ge();
        if (s == "qubit_gf") return qubit_gf();
        if (s == "qubit_ef") return qubit_ef();
        if (s == "two_photon_gf") return two_photon_gf();
        const std::string prefix = "cavity_";
        if (s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0) {
            const std::string digits = s.substr(prefix.size());
            if (digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 4) return std::nullopt;
            const int m = std::stoi(digits);
            if (m >= 1) return cavity(m);
        }
        return std::nullopt;
    }

    friend auto operator<=>(const Label&, const Label&) = default;
};

inline constexpr double kOverlapFloor = 0.25;

struct StateLabel {
    bool labeled = false;
    std::vector<int> photons;
    int qubit = 0;
    double overlap = 0.0;  // |<bare|state>|
};

/// Assigns each eigenvector the bare product state of maximum overlap,
/// injectively and greedily by descending overlap. Overlaps below `floor`
/// leave the state unlabeled.
inline std::vector<StateLabel> label_states(const EigenSystem& es, const BasisIndexer& basis,
                                            double floor = kOverlapFloor) {
    const std::size_t n_states = es.values.size();
    const std::size_t dim = es.vectors.rows();
    if (dim != basis.dim()) throw std::invalid_argument("label_states: eigenvector size does not match basis");

    struct Candidate {
        double overlap;
        std::size_t state;
        std::size_t bare;
    };
    std::vector<Candidate> cands;
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t i = 0; i < dim; ++i) {
            const double a = std::abs(es.vectors(i, s));
            if (a >= floor) cands.push_back({a, s, i});
        }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        if (x.overlap != y.overlap) return x.overlap > y.overlap;
        if (x.state != y.state) return x.state < y.state;
        return x.bare < y.bare;
    });

    std::vector<StateLabel> out(n_states);
    std::vector<char> bare_used(dim, 0);
    for (const auto& c : cands) {
        if (out[c.state].labeled || bare_used[c.bare]) continue;
        auto& l = out[c.state];
        l.labeled = true;
        l.overlap = c.overlap;
        l.qubit = basis.qubit(c.bare);
        l.photons.resize(basis.n_modes());
        for (std::size_t m = 0; m < basis.n_modes(); ++m) l.photons[m] = basis.photons(c.bare, m);
        bare_used[c.bare] = 1;
    }
    return out;
}

inline std::vector<StateLabel> label_states(const EigenSystem& es, const Truncation& t, double floor = kOverlapFloor) {
    return label_states(es, BasisIndexer(t.photon_levels, t.n_q), floor);
}

struct Transition {
    Label label;
    double frequency = 0.0;  // GHz
    double overlap = 0.0;
};

struct SpectrumPoint {
    double flux = 0.0;
    std::vector<Transition> transitions;
    std::string error;  // non-empty when the point failed

    std::optional<Transition> find(const Label& l) const {
        for (const auto& t : transitions)
            if (t.label == l) return t;
        return std::nullopt;
    }
    std::optional<double> frequency(const Label& l) const {
        if (auto t = find(l)) return t->frequency;
        return std::nullopt;
    }
};

/// cavity_1..cavity_M, qubit_ge and, with at least three qubit levels, the
/// g-f family.
inline std::vector<Label> default_labels(const Device& dev) {
    std::vector<Label> out;
    for (std::size_t m = 1; m <= dev.truncation.n_modes(); ++m) out.push_back(Label::cavity(static_cast<int>(m)));
    if (dev.truncation.n_q >= 2) out.push_back(Label::qubit_ge());
    if (dev.truncation.n_q >= 3) {
        out.push_back(Label::qubit_gf());
        out.push_back(Label::qubit_ef());
        out.push_back(Label::two_photon_gf());
    }
    return out;
}

namespace detail {

inline bool is_bare(const StateLabel& s, int mode_index, int qubit) {
    if (!s.labeled || s.qubit != qubit) return false;
    for (std::size_t m = 0; m < s.photons.size(); ++m)
        if (s.photons[m] != (static_cast<int>(m) == mode_index ? 1 : 0)) return false;
    return true;
}

// Number of low-lying dressed states needed to reach every requested branch.
inline std::size_t states_needed(const CpbEigensystem& cpb, const std::vector<double>& omegas, double g_max,
                                 const BasisIndexer& basis, const std::vector<Label>& labels) {
    double target = 0.0;
    for (const auto& l : labels) {
        switch (l.kind) {
            case Branch::cavity:
                if (l.mode >= 1 && static_cast<std::size_t>(l.mode) <= omegas.size())
                    target = std::max(target, omegas[l.mode - 1]);
                break;
            case Branch::qubit_ge:
                if (cpb.size() > 1) target = std::max(target, cpb.levels[1]);
                break;
            default:
                if (cpb.size() > 2) target = std::max(target, cpb.levels[2]);
                break;
        }
    }
    const double cut = target + 2.0 + 2.0 * g_max;
    std::size_t count = 0;
    for (std::size_t s = 0; s < basis.dim(); ++s) {
        double e = cpb.levels[basis.qubit(s)];
        for (std::size_t m = 0; m < basis.n_modes(); ++m) e += omegas[m] * basis.photons(s, m);
        if (e <= cut) ++count;
    }
    return std::clamp<std::size_t>(count + 4, 2, basis.dim());
}

}  // namespace detail

/// Dressed transition frequencies at one flux value. Branches that cannot be
/// labeled are absent from the result.
inline SpectrumPoint transition_table(const Device& dev, double flux, bool rwa, const std::vector<Label>& labels,
                                      std::optional<double> prefactor = std::nullopt) {
    dev.validate();
    const double G = prefactor ? *prefactor : coupling_prefactor(dev);
    const auto cpb = device_cpb(dev, flux);
    const auto h = build_composite(cpb, dev.resonator, G, dev.truncation, rwa);
    const BasisIndexer basis(dev.truncation.photon_levels, dev.truncation.n_q);
    const auto omegas = mode_frequencies(dev.resonator);

    double nmax = 0.0;
    for (const auto& z : cpb.charge_elements.data()) nmax = std::max(nmax, std::abs(z));
    const double g_max = G * std::sqrt(2.0 * static_cast<double>(omegas.size()) - 1.0) * nmax;
    const auto es = eigh_lowest(h, detail::states_needed(cpb, omegas, g_max, basis, labels));
    const auto states = label_states(es, basis);
    const double e0 = es.values[0];

    auto find_state = [&](int mode_index, int qubit) -> std::optional<std::size_t> {
        for (std::size_t s = 0; s < states.size(); ++s)
            if (detail::is_bare(states[s], mode_index, qubit)) return s;
        return std::nullopt;
    };
    auto qubit_level = [&](int j) -> std::optional<Transition> {
        if (j >= dev.truncation.n_q) return std::nullopt;
        auto s = find_state(-1, j);
        if (!s) return std::nullopt;
        return Transition{{}, es.values[*s] - e0, states[*s].overlap};
    };

    SpectrumPoint pt;
    pt.flux = flux;
    for (const auto& l : labels) {
        std::optional<Transition> t;
        switch (l.kind) {
            case Branch::cavity:
                if (l.mode >= 1 && static_cast<std::size_t>(l.mode) <= basis.n_modes() &&
                    basis.levels(static_cast<std::size_t>(l.mode - 1)) > 1) {
                    if (auto s = find_state(l.mode - 1, 0))
                        t = Transition{{}, es.values[*s] - e0, states[*s].overlap};
                }
                break;
            case Branch::qubit_ge: t = qubit_level(1); break;
            case Branch::qubit_gf: t = qubit_level(2); break;
            case Branch::qubit_ef: {
                auto ge = qubit_level(1), gf = qubit_level(2);
                if (ge && gf) t = Transition{{}, gf->frequency - ge->frequency, std::min(ge->overlap, gf->overlap)};
                break;
            }
            case Branch::two_photon_gf:
                if (auto gf = qubit_level(2)) t = Transition{{}, gf->frequency / 2.0, gf->overlap};
                break;
        }
        if (t) {
            t->label = l;
            pt.transitions.push_back(*t);
        }
    }
    return pt;
}

inline SpectrumPoint transition_table(const Device& dev, double flux, bool rwa) {
    return transition_table(dev, flux, rwa, default_labels(dev));
}

/// One point per grid value, in grid order. A failing point carries its
/// error message and the sweep continues.
inline std::vector<SpectrumPoint> flux_sweep(const Device& dev, const std::vector<double>& grid, bool rwa,
                                             const std::vector<Label>& labels, unsigned workers = 1) {
    if (grid.empty()) throw std::invalid_argument("flux_sweep: empty flux grid");
    dev.validate();
    const double G = coupling_prefactor(dev);
    std::vector<SpectrumPoint> out(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        try {
            out[i] = transition_table(dev, grid[i], rwa, labels, G);
        } catch (const std::exception& ex) {
            out[i] = SpectrumPoint{grid[i], {}, ex.what()};
        }
    });
    return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

class SplittingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SplittingResult {
    double delta = 0.0;        // GHz
    double flux_at_min = 0.0;  // Phi / Phi_0
    double g_estimate = 0.0;   // delta / 2
};

using GapFunction = std::function<std::optional<double>(double flux)>;

inline constexpr double kSplittingFluxTolerance = 1e-4;

/// Minimum gap between two branches along a sweep. The grid minimum must be
/// interior; with `refine`, it is polished by golden-section search on flux.
inline SplittingResult vacuum_rabi_splitting(const std::vector<SpectrumPoint>& sweep, const Label& a, const Label& b,
                                             const GapFunction& refine = nullptr) {
    std::vector<std::pair<double, double>> gaps;  // (flux, gap)
    for (const auto& p : sweep) {
        auto fa = p.frequency(a), fb = p.frequency(b);
        if (fa && fb) gaps.emplace_back(p.flux, std::abs(*fa - *fb));
    }
    if (gaps.size() < 3) throw SplittingError("vacuum_rabi_splitting: branches present at fewer than 3 flux points");
    std::sort(gaps.begin(), gaps.end());
    std::size_t imin = 0;
    for (std::size_t i = 1; i < gaps.size(); ++i)
        if (gaps[i].second < gaps[imin].second) imin = i;
    if (imin == 0 || imin + 1 == gaps.size())
        throw SplittingError("vacuum_rabi_splitting: no interior minimum of the " + a.to_string() + "/" +
                             b.to_string() + " gap within the sweep");

    SplittingResult r{gaps[imin].second, gaps[imin].first, 0.0};
    if (refine) {
        const auto best = golden_section(
            [&](double x) {
                auto g = refine(x);
                return g ? *g : std::numeric_limits<double>::infinity();
            },
            gaps[imin - 1].first, gaps[imin + 1].first, kSplittingFluxTolerance);
        if (best.f < r.delta) {
            r.delta = best.f;
            r.flux_at_min = best.x;
        }
    }
    r.g_estimate = r.delta / 2.0;
    return r;
}

/// Gap function for golden-section refinement from a device model.
inline GapFunction model_gap(const Device& dev, const Label& a, const Label& b, bool rwa = false) {
    const double G = coupling_prefactor(dev);
    return [dev, a, b, rwa, G](double flux) -> std::optional<double> {
        const auto p = transition_table(dev, flux, rwa, {a, b}, G);
        auto fa = p.frequency(a), fb = p.frequency(b);
        if (!fa || !fb) return std::nullopt;
        return std::abs(*fa - *fb);
    };
}

struct BlochSiegertShift {
    double full = 0.0;   // GHz, with counter-rotating terms
    double rwa = 0.0;    // GHz
    double shift = 0.0;  // full - rwa, GHz
};

inline BlochSiegertShift bloch_siegert_shift(const Device& dev, double flux, const Label& label) {
    const double G = coupling_prefactor(dev);
    const auto full = transition_table(dev, flux, false, {label}, G).frequency(label);
    const auto rwa = transition_table(dev, flux, true, {label}, G).frequency(label);
    if (!full) throw std::runtime_error("bloch_siegert_shift: " + label.to_string() + " not labelable (full model)");
    if (!rwa) throw std::runtime_error("bloch_siegert_shift: " + label.to_string() + " not labelable (RWA model)");
    return {*full, *rwa, *full - *rwa};
}

struct CouplingLimit {
    double margin = 0.0;  // sqrt(w1 wa) - 2g, GHz
    bool satisfied = false;
    bool at_boundary = false;
};

/// Single-mode bound 2g < sqrt(w1 wa). Diagnostic only.
inline CouplingLimit coupling_limit_check(double g, double omega1, double omega_a) {
    if (!(omega1 > 0.0) || !(omega_a > 0.0))
        throw std::invalid_argument("coupling_limit_check: frequencies must be positive");
    const double bound = std::sqrt(omega1 * omega_a);
    CouplingLimit c;
    c.margin = bound - 2.0 * g;
    c.at_boundary = std::abs(c.margin) <= 1e-12 * bound;
    c.satisfied = c.margin > 0.0 && !c.at_boundary;
    return c;
}

}  // namespace musc
