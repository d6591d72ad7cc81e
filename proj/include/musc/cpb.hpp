#pragma once

// Flux-biased, charge-offset Cooper-pair box in the charge basis.
//
//   H = sum_n 4 E_c (n - n_DC)^2 |n><n|
//       - (E_J/2) sum_n [ (cos(pi Phi) - i d sin(pi Phi)) |n+1><n| + h.c. ]
//
// All energies are frequency equivalents E/h in GHz.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "units.hpp"

namespace musc {

struct CpbParams {
    double E_c = 0.0;   // GHz
    double E_J = 0.0;   // GHz, E_J1 + E_J2
    double d = 0.0;     // junction asymmetry, [0, 1)
    double n_dc = 0.0;  // offset charge, Cooper pairs
    double flux = 0.0;  // Phi / Phi_0

    void validate() const {
        if (!(E_c > 0.0) || !std::isfinite(E_c)) throw std::invalid_argument("CpbParams: E_c must be > 0");
        if (!(E_J >= 0.0) || !std::isfinite(E_J)) throw std::invalid_argument("CpbParams: E_J must be >= 0");
        if (!(d >= 0.0 && d < 1.0)) throw std::invalid_argument("CpbParams: d must lie in [0, 1)");
        if (!std::isfinite(n_dc) || !std::isfinite(flux))
            throw std::invalid_argument("CpbParams: n_dc and flux must be finite");
    }
};

/// Reduces x modulo 1 into [0, 1).
inline double wrap_unit(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

/// Reduces x modulo 1 into [-0.5, 0.5).
inline double wrap_centered(double x) {
    double r = x - std::floor(x + 0.5);
    return r >= 0.5 ? r - 1.0 : r;
}

inline double effective_josephson(double E_J, double d, double flux) {
    const double arg = std::numbers::pi * flux;
    const double c = std::cos(arg), s = std::sin(arg);
    return E_J * std::sqrt(c * c + d * d * s * s);
}

/// Charge-basis Hamiltonian over n in [-n_max, n_max]; index i <-> n = i - n_max.
/// Flux and offset charge are taken modulo 1.
inline HermitianMatrix build_cpb_hamiltonian(const CpbParams& p, int n_max) {
    p.validate();
    if (n_max < 1) throw std::invalid_argument("build_cpb_hamiltonian: n_max must be >= 1");
    const std::size_t dim = static_cast<std::size_t>(2 * n_max + 1);
    const double flux = wrap_unit(p.flux);
    const double n_dc = wrap_centered(p.n_dc);
    const double arg = std::numbers::pi * flux;
    const cplx hop = -0.5 * p.E_J * cplx(std::cos(arg), -p.d * std::sin(arg));

    CMatrix h(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double n = static_cast<double>(static_cast<int>(i) - n_max);
        h(i, i) = 4.0 * p.E_c * (n - n_dc) * (n - n_dc);
        if (i + 1 < dim) {
            h(i + 1, i) = hop;
            h(i, i + 1) = std::conj(hop);
        }
    }
    return HermitianMatrix(std::move(h));
}

struct CpbEigensystem {
    std::vector<double> levels;  // ascending, levels[0] == 0
    CMatrix charge_elements;     // <j| n - n_DC |k>
    CpbParams params;
    int n_max_used = 0;

    std::size_t size() const { return levels.size(); }
    double n01() const { return levels.size() > 1 ? std::abs(charge_elements(0, 1)) : 0.0; }
};

/// Lowest n_q levels and the charge operator (n - n_DC) in that eigenbasis.
///
/// Eigenvector phases are fixed so the largest-magnitude charge component of
/// each vector is real and positive (first index on ties). Between exactly
/// degenerate levels the charge elements depend on the solver's basis choice.
inline CpbEigensystem cpb_eigensystem(const CpbParams& p, int n_max, int n_q) {
    if (n_q < 1) throw std::invalid_argument("cpb_eigensystem: n_q must be >= 1");
    if (n_max >= 1 && n_q > 2 * n_max + 1)
        throw std::invalid_argument("cpb_eigensystem: n_q = " + std::to_string(n_q) +
                                    " exceeds charge-basis dimension 2*n_max+1 = " +
                                    std::to_string(2 * n_max + 1));
    const auto h = build_cpb_hamiltonian(p, n_max);
    const std::size_t dim = h.dim();
    auto es = eigh_lowest(h, static_cast<std::size_t>(n_q));

    const double n_dc = wrap_centered(p.n_dc);
    for (int k = 0; k < n_q; ++k) {
        std::size_t imax = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double a = std::abs(es.vectors(i, k));
            if (a > best * (1.0 + 1e-12)) {
                best = a;
                imax = i;
            }
        }
        const cplx ph = std::conj(es.vectors(imax, k)) / std::abs(es.vectors(imax, k));
        for (std::size_t i = 0; i < dim; ++i) es.vectors(i, k) *= ph;
        es.vectors(imax, k) = std::abs(es.vectors(imax, k));
    }

    CpbEigensystem out;
    out.params = p;
    out.n_max_used = n_max;
    out.levels.resize(n_q);
    const double e0 = es.values[0];
    for (int k = 0; k < n_q; ++k) out.levels[k] = es.values[k] - e0;
    out.levels[0] = 0.0;

    out.charge_elements = CMatrix(n_q, n_q);
    for (int j = 0; j < n_q; ++j)
        for (int k = j; k < n_q; ++k) {
            cplx s = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double n = static_cast<double>(static_cast<int>(i) - n_max) - n_dc;
                s += std::conj(es.vectors(i, j)) * n * es.vectors(i, k);
            }
            if (j == k) s = s.real();
            out.charge_elements(j, k) = s;
            out.charge_elements(k, j) = std::conj(s);
        }
    return out;
}

struct TransmonEstimate {
    double frequency = 0.0;  // GHz
    bool in_transmon_regime = false;
};

/// Lowest transition in the transmon limit, sqrt(8 E_c E_J) - E_c.
inline TransmonEstimate transmon_approx_frequency(double E_c, double E_J) {
    if (!(E_c > 0.0)) throw std::invalid_argument("transmon_approx_frequency: E_c must be > 0");
    TransmonEstimate t;
    t.frequency = std::sqrt(8.0 * E_c * std::max(E_J, 0.0)) - E_c;
    t.in_transmon_regime = E_J / E_c >= kTransmonRegimeRatio;
    return t;
}

struct ChargingEnergies {
    double E_c = 0.0;   // GHz
    double beta = 0.0;  // C_c / C_sigma
};

/// E_c = e^2 / (2 C_sigma h) with C_sigma = C_c + C_J (both in fF).
inline ChargingEnergies energies_from_capacitances(double C_c_fF, double C_J_fF) {
    if (!(C_c_fF > 0.0) || !(C_J_fF >= 0.0))
        throw std::invalid_argument("energies_from_capacitances: need C_c > 0 and C_J >= 0");
    const double c_sigma = (C_c_fF + C_J_fF) * 1e-15;
    ChargingEnergies out;
    out.E_c = units::e * units::e / (2.0 * c_sigma * units::h) * 1e-9;
    out.beta = C_c_fF / (C_c_fF + C_J_fF);
    return out;
}

}  // namespace musc
