#pragma once

// Qubit coupled to the odd-harmonic ladder of a quarter-wave resonator.
//
//   H = sum_m w_m a_m^dag a_m + sum_j E_j |j><j|
//       + sum_m G sqrt(2m-1) (a_m + a_m^dag) (x) N
//
// N is the projected charge operator of the qubit. Basis states are packed
// little-endian: mode 1 varies fastest, the qubit index slowest,
//   index = k_1 + N_1 (k_2 + N_2 (... + N_M q)).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpb.hpp"
#include "linalg.hpp"
#include "units.hpp"

namespace musc {

struct ResonatorSpec {
    double omega1 = 0.0;         // GHz, bare fundamental
    std::vector<double> alphas;  // harmonic deviation per mode, alphas[0] == 1

    std::size_t n_modes() const { return alphas.size(); }

    void validate() const {
        if (!(omega1 > 0.0) || !std::isfinite(omega1)) throw std::invalid_argument("resonator: omega1 must be > 0");
        if (alphas.empty()) throw std::invalid_argument("resonator: at least one mode required");
        for (double a : alphas)
            if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("resonator: alphas must be > 0");
        if (alphas[0] != 1.0) throw std::invalid_argument("resonator: alphas[0] must equal 1");
    }
};

enum class CouplingNormalization { calibrated_g0, zpf_model };

struct CouplingSpec {
    CouplingNormalization normalization = CouplingNormalization::calibrated_g0;
    double g1_at_zero_flux = 0.0;     // GHz, used by calibrated_g0
    double zpf_impedance_ohm = 50.0;  // used by zpf_model
    double beta = 0.0;                // C_c / C_sigma, used by zpf_model

    void validate() const {
        if (normalization == CouplingNormalization::calibrated_g0) {
            if (!(g1_at_zero_flux >= 0.0) || !std::isfinite(g1_at_zero_flux))
                throw std::invalid_argument("coupling: g1_at_zero_flux must be >= 0");
        } else {
            if (!(zpf_impedance_ohm > 0.0)) throw std::invalid_argument("coupling: impedance must be > 0");
            if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("coupling: beta must lie in [0, 1]");
        }
    }
};

inline constexpr std::size_t kDefaultMaxDim = 20000;

struct Truncation {
    int n_max = 20;
    int n_q = 5;
    std::vector<int> photon_levels;
    std::size_t max_dim = kDefaultMaxDim;

    std::size_t n_modes() const { return photon_levels.size(); }

    std::size_t composite_dim() const {
        std::size_t d = static_cast<std::size_t>(n_q);
        for (int n : photon_levels) d *= static_cast<std::size_t>(n);
        return d;
    }

    void validate() const {
        if (n_max < 1) throw std::invalid_argument("truncation: n_max must be >= 1");
        if (n_q < 1 || n_q > 2 * n_max + 1) throw std::invalid_argument("truncation: need 1 <= n_q <= 2*n_max+1");
        if (photon_levels.empty()) throw std::invalid_argument("truncation: photon_levels must be non-empty");
        for (int n : photon_levels)
            if (n < 1) throw std::invalid_argument("truncation: photon levels must be >= 1");
        if (composite_dim() > max_dim)
            throw std::invalid_argument("truncation: composite dimension " + std::to_string(composite_dim()) +
                                        " exceeds ceiling " + std::to_string(max_dim));
    }
};

/// Everything needed to build the composite Hamiltonian at any flux.
struct Device {
    ResonatorSpec resonator;
    CpbParams qubit;  // flux field ignored; supplied per point
    CouplingSpec coupling;
    Truncation truncation;
    double linewidth = 0.0042;  // GHz

    void validate() const {
        resonator.validate();
        CpbParams q = qubit;
        q.flux = 0.0;
        q.validate();
        coupling.validate();
        truncation.validate();
        if (resonator.n_modes() != truncation.n_modes())
            throw std::invalid_argument("device: number of alphas and photon levels differ");
    }
};

/// w_m = alpha_m (2m - 1) w_1, m = 1..M.
inline std::vector<double> mode_frequencies(const ResonatorSpec& r) {
    r.validate();
    std::vector<double> w(r.n_modes());
    for (std::size_t m = 0; m < w.size(); ++m) w[m] = r.alphas[m] * static_cast<double>(2 * m + 1) * r.omega1;
    return w;
}

/// g_m = sqrt(2m - 1) g_1.
inline std::vector<double> mode_couplings(double g1, std::size_t n_modes) {
    if (n_modes < 1) throw std::invalid_argument("mode_couplings: n_modes must be >= 1");
    std::vector<double> g(n_modes);
    for (std::size_t m = 0; m < n_modes; ++m) g[m] = std::sqrt(static_cast<double>(2 * m + 1)) * g1;
    return g;
}

inline std::vector<double> mode_couplings(const CouplingSpec& c, std::size_t n_modes) {
    return mode_couplings(c.g1_at_zero_flux, n_modes);
}

/// Voltage zero-point fluctuation of a quarter-wave resonator's fundamental,
/// lumped as C = pi / (4 w Z): V = w sqrt(2 hbar Z / pi), in volts.
inline double quarter_wave_vzpf(double omega1_ghz, double impedance_ohm) {
    const double w = 2.0 * std::numbers::pi * omega1_ghz * 1e9;
    return w * std::sqrt(2.0 * units::hbar * impedance_ohm / std::numbers::pi);
}

/// Coupling per Cooper pair of charge-matrix element, GHz.
inline double coupling_prefactor(const CouplingSpec& c, double omega1, const CpbEigensystem& cpb_at_zero_flux) {
    c.validate();
    if (c.normalization == CouplingNormalization::zpf_model)
        return 2.0 * units::e * c.beta * quarter_wave_vzpf(omega1, c.zpf_impedance_ohm) / units::h * 1e-9;
    if (c.g1_at_zero_flux == 0.0) return 0.0;
    const double n01 = cpb_at_zero_flux.n01();
    if (!(n01 > 0.0)) throw std::runtime_error("coupling_prefactor: vanishing |n01| at zero flux");
    return c.g1_at_zero_flux / n01;
}

inline double coupling_prefactor(const Device& dev) {
    CpbParams q = dev.qubit;
    q.flux = 0.0;
    const auto cpb0 = cpb_eigensystem(q, dev.truncation.n_max, std::max(2, dev.truncation.n_q));
    return coupling_prefactor(dev.coupling, dev.resonator.omega1, cpb0);
}

/// Packs and unpacks composite basis indices.
class BasisIndexer {
public:
    BasisIndexer(std::vector<int> photon_levels, int n_q) : levels_(std::move(photon_levels)), n_q_(n_q) {
        strides_.resize(levels_.size() + 1);
        std::size_t s = 1;
        for (std::size_t m = 0; m < levels_.size(); ++m) {
            strides_[m] = s;
            s *= static_cast<std::size_t>(levels_[m]);
        }
        strides_.back() = s;
        dim_ = s * static_cast<std::size_t>(n_q_);
    }

    std::size_t dim() const { return dim_; }
    std::size_t n_modes() const { return levels_.size(); }
    int levels(std::size_t m) const { return levels_[m]; }
    int n_q() const { return n_q_; }

    std::size_t index(const std::vector<int>& photons, int qubit) const {
        std::size_t i = static_cast<std::size_t>(qubit) * strides_.back();
        for (std::size_t m = 0; m < levels_.size(); ++m) i += static_cast<std::size_t>(photons[m]) * strides_[m];
        return i;
    }
    int photons(std::size_t index, std::size_t m) const {
        return static_cast<int>((index / strides_[m]) % static_cast<std::size_t>(levels_[m]));
    }
    int qubit(std::size_t index) const { return static_cast<int>(index / strides_.back()); }
    std::size_t stride(std::size_t m) const { return strides_[m]; }

private:
    std::vector<int> levels_;
    int n_q_;
    std::vector<std::size_t> strides_;
    std::size_t dim_ = 0;
};

/// Composite Hamiltonian for a given qubit eigensystem and prefactor G.
///
/// With rwa, only a_m^dag (x) |k-1><k| and its adjoint survive: photon
/// creation paired with a one-step qubit lowering, the terms that conserve
/// sum_m a_m^dag a_m + sum_j j |j><j|. Multi-step and qubit-diagonal coupling
/// terms are dropped.
inline HermitianMatrix build_composite(const CpbEigensystem& cpb, const ResonatorSpec& r, double G,
                                       const Truncation& t, bool rwa) {
    t.validate();
    if (r.n_modes() != t.n_modes()) throw std::invalid_argument("build_composite: mode count mismatch");
    if (static_cast<int>(cpb.size()) < t.n_q)
        throw std::invalid_argument("build_composite: qubit eigensystem has fewer than n_q levels");

    const BasisIndexer basis(t.photon_levels, t.n_q);
    const std::size_t dim = basis.dim();
    const auto omegas = mode_frequencies(r);
    const auto gs = mode_couplings(G, r.n_modes());
    const int nq = t.n_q;

    CMatrix h(dim, dim);
    for (std::size_t s = 0; s < dim; ++s) {
        const int q = basis.qubit(s);
        double e = cpb.levels[q];
        for (std::size_t m = 0; m < basis.n_modes(); ++m) e += omegas[m] * basis.photons(s, m);
        h(s, s) = e;
    }
    for (std::size_t s = 0; s < dim; ++s) {
        const int q = basis.qubit(s);
        const std::size_t s_no_qubit = s - static_cast<std::size_t>(q) * basis.stride(basis.n_modes());
        for (std::size_t m = 0; m < basis.n_modes(); ++m) {
            const int k = basis.photons(s, m);
            if (k + 1 >= basis.levels(m)) continue;
            const double amp = gs[m] * std::sqrt(static_cast<double>(k + 1));
            const std::size_t raised = s_no_qubit + basis.stride(m);
            for (int qp = 0; qp < nq; ++qp) {
                if (rwa && qp != q - 1) continue;
                const std::size_t target = raised + static_cast<std::size_t>(qp) * basis.stride(basis.n_modes());
                const cplx v = amp * cpb.charge_elements(qp, q);
                h(target, s) += v;
                h(s, target) += std::conj(v);
            }
        }
    }
    return HermitianMatrix(std::move(h));
}

inline CpbEigensystem device_cpb(const Device& dev, double flux) {
    CpbParams q = dev.qubit;
    q.flux = flux;
    return cpb_eigensystem(q, dev.truncation.n_max, dev.truncation.n_q);
}

inline HermitianMatrix build_composite(const Device& dev, double flux, bool rwa) {
    dev.validate();
    return build_composite(device_cpb(dev, flux), dev.resonator, coupling_prefactor(dev), dev.truncation, rwa);
}

}  // namespace musc
