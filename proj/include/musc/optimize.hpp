#pragma once

// Derivative-free minimizers: Nelder-Mead simplex and golden-section search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace musc {

using Objective = std::function<double(const std::vector<double>&)>;

struct NelderMeadOptions {
    int max_iterations = 1000;
    double xtol = 1e-8;   // simplex diameter
    double ftol = 1e-12;  // relative spread of objective values
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> best_trace;  // best objective after each iteration
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) started from x0 with per-coordinate initial steps.
inline NelderMeadResult nelder_mead(const Objective& f, const std::vector<double>& x0, const std::vector<double>& steps,
                                    const NelderMeadOptions& opt = {}) {
    const std::size_t n = x0.size();
    if (n == 0 || steps.size() != n) throw std::invalid_argument("nelder_mead: bad dimensions");

    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += steps[i];
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    auto sort_simplex = [&]() {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> f2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s2[i] = std::move(simplex[order[i]]);
            f2[i] = fv[order[i]];
        }
        simplex.swap(s2);
        fv.swap(f2);
    };
    auto converged = [&]() {
        double diam = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(simplex[i][j] - simplex[0][j]));
        const double spread = std::abs(fv[n] - fv[0]);
        return diam <= opt.xtol && spread <= opt.ftol * std::max(std::abs(fv[0]), 1e-300) + 1e-300;
    };

    sort_simplex();
    while (true) {
        if (converged()) {
            res.converged = true;
            break;
        }
        if (res.iterations >= opt.max_iterations) break;
        ++res.iterations;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

        for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - simplex[n][j]);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - simplex[n][j]);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            const bool outside = fr < fv[n];
            for (std::size_t j = 0; j < n; ++j)
                xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j])
                                : centroid[j] + 0.5 * (simplex[n][j] - centroid[j]);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[n])) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    fv[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
        res.best_trace.push_back(fv[0]);
    }
    res.x = simplex[0];
    res.f = fv[0];
    return res;
}

struct ScalarMinimum {
    double x = 0.0;
    double f = std::numeric_limits<double>::infinity();
    int evaluations = 0;
};

/// Golden-section search for a minimum of a unimodal function on [lo, hi].
inline ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
    constexpr double inv_phi = 0.6180339887498949;
    ScalarMinimum out;
    auto eval = [&](double x) {
        ++out.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = eval(x1), f2 = eval(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2);
        }
    }
    if (f1 < f2) {
        out.x = x1;
        out.f = f1;
    } else {
        out.x = x2;
        out.f = f2;
    }
    return out;
}

}  // namespace musc
