#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <musc/fitter.hpp>

using namespace musc;

namespace {

const FitParams kTruth{18.9, 8.73, 0.15, 37.4, 0.01};

// Light device used as the fit base: one transmon, two modes.
Device toy_base() {
    Device d;
    d.resonator = {4.268, {1.0, 0.983}};
    d.qubit = {0.7, 37.4, 0.01, 0.15, 0.0};
    d.coupling.normalization = CouplingNormalization::zpf_model;
    d.coupling.zpf_impedance_ohm = 50.0;
    d.truncation = {12, 3, {3, 2}};
    return d;
}

FluxDataset synthesize(const Device& dev, const std::vector<double>& fluxes, const std::vector<Label>& labels,
                       double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    FluxDataset ds;
    for (double f : fluxes) {
        const auto p = transition_table(dev, f, false, labels);
        for (const auto& l : labels) {
            const double z = nd(rng);
            if (auto v = p.frequency(l)) ds.rows.push_back({f, *v + noise * z, l, 1.0});
        }
    }
    return ds;
}

FluxDataset toy_dataset(double noise = 0.0021, std::uint64_t seed = 5) {
    return synthesize(device_for_params(toy_base(), kTruth), linspace(0.0, 0.5, 16),
                      {Label::cavity(1), Label::cavity(2), Label::qubit_ge()}, noise, seed);
}

FitParams perturbed() { return {kTruth.C_c * 1.2, kTruth.C_J * 0.8, 0.12, kTruth.E_J * 0.8, kTruth.d}; }

}  // namespace

TEST(Dataset, Validation) {
    FluxDataset ds;
    ds.rows.push_back({0.1, -1.0, Label::qubit_ge(), 1.0});
    EXPECT_THROW(ds.validate(), std::invalid_argument);
    ds.rows[0] = {0.1, 5.0, Label::qubit_ge(), -1.0};
    EXPECT_THROW(ds.validate(), std::invalid_argument);
    ds.rows[0] = {0.1, 5.0, Label::cavity(0), 1.0};
    EXPECT_THROW(ds.validate(), std::invalid_argument);
    ds.rows[0] = {0.1, 5.0, Label::cavity(1), 1.0};
    EXPECT_NO_THROW(ds.validate());
}

TEST(DeviceForParams, UsesCapacitancesAndZpfCoupling) {
    const auto d = device_for_params(toy_base(), kTruth);
    const auto ce = energies_from_capacitances(18.9, 8.73);
    EXPECT_EQ(d.qubit.E_c, ce.E_c);
    EXPECT_EQ(d.coupling.beta, ce.beta);
    EXPECT_EQ(d.coupling.normalization, CouplingNormalization::zpf_model);
    EXPECT_EQ(d.qubit.E_J, 37.4);
    EXPECT_EQ(d.qubit.n_dc, 0.15);
}

TEST(Residuals, SelfConsistentDatasetIsZero) {
    const auto ds = toy_dataset(0.0);
    ASSERT_GT(ds.rows.size(), 30u);
    const auto r = residuals(kTruth, ds, toy_base());
    for (double v : r.residuals) EXPECT_NEAR(v, 0.0, 1e-9);
    EXPECT_EQ(r.n_flagged, 0u);
}

TEST(Residuals, ZeroWeightContributesNothing) {
    auto ds = toy_dataset(0.0);
    ds.rows[3].frequency += 5.0;
    ds.rows[3].weight = 0.0;
    const auto r = residuals(kTruth, ds, toy_base());
    EXPECT_EQ(r.residuals[3], 0.0);
    EXPECT_NEAR(r.objective, 0.0, 1e-15);
}

TEST(Residuals, MissingBranchGetsFlaggedPenalty) {
    auto ds = toy_dataset(0.0);
    ds.rows.push_back({0.2, 30.0, Label::cavity(4), 2.0});
    const auto r = residuals(kTruth, ds, toy_base());
    EXPECT_TRUE(r.flagged.back());
    EXPECT_EQ(r.n_flagged, 1u);
    EXPECT_DOUBLE_EQ(r.residuals.back(), 2.0 * 10.0 * ds.linewidth);
    EXPECT_TRUE(std::isnan(r.model.back()));
    EXPECT_FALSE(r.notes.back().empty());
}

TEST(Residuals, WorkerCountIsBitwiseIrrelevant) {
    const auto ds = toy_dataset();
    const auto a = residuals(perturbed(), ds, toy_base(), 1);
    const auto b = residuals(perturbed(), ds, toy_base(), 4);
    EXPECT_EQ(a.residuals, b.residuals);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(Fit, EmptyDatasetRejected) {
    EXPECT_THROW(fit(FluxDataset{}, toy_base(), kTruth), std::invalid_argument);
}

TEST(Fit, GuessOutsideBoundsRejected) {
    FitParams g = kTruth;
    g.n_dc = 0.7;
    EXPECT_THROW(fit(toy_dataset(), toy_base(), g), std::invalid_argument);
}

TEST(Fit, IterationCapReportsNonConvergence) {
    FitOptions opt;
    opt.max_iterations = 2;
    opt.restarts = 0;
    const auto r = fit(toy_dataset(), toy_base(), perturbed(), {}, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_TRUE(std::isfinite(r.rms));
    EXPECT_TRUE(FitBounds{}.contains(r.params));
}

TEST(Fit, RoundTripFromPerturbedGuess) {
    const auto ds = toy_dataset();
    const auto r = fit(ds, toy_base(), perturbed());
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.params.E_J, kTruth.E_J, 0.01 * kTruth.E_J);
    EXPECT_NEAR(r.params.C_c, kTruth.C_c, 0.05 * kTruth.C_c);
    EXPECT_NEAR(r.params.C_J, kTruth.C_J, 0.05 * kTruth.C_J);
    EXPECT_NEAR(r.params.n_dc, kTruth.n_dc, 0.02);
    EXPECT_LT(r.rms, ds.linewidth);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(std::isfinite(r.sigma[i]) && r.sigma[i] > 0.0);
    EXPECT_EQ(r.sigma[kAsym], 0.0);

    // Accepted iterations never raise the best objective.
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);

    // Refit from the converged point stays put.
    FitOptions tight;
    tight.xtol = 1e-9;
    tight.ftol = 1e-14;
    const auto again = fit(ds, toy_base(), r.params, {}, tight);
    const auto a = r.params.as_array(), b = again.params.as_array();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(b[i], a[i], 1e-6 * std::abs(a[i])) << kFitParamNames[i];
}

TEST(Fit, Deterministic) {
    FitOptions opt;
    opt.max_iterations = 60;
    const auto ds = toy_dataset();
    const auto a = fit(ds, toy_base(), perturbed(), {}, opt);
    opt.workers = 3;
    const auto b = fit(ds, toy_base(), perturbed(), {}, opt);
    EXPECT_EQ(a.params.as_array(), b.params.as_array());
    EXPECT_EQ(a.trace, b.trace);
}

TEST(Fit, WeightScaleLeavesArgminUnchanged) {
    const auto ds = toy_dataset();
    auto scaled = ds;
    for (auto& r : scaled.rows) r.weight *= 7.0;
    const auto a = fit(ds, toy_base(), perturbed());
    const auto b = fit(scaled, toy_base(), perturbed());
    const auto x = a.params.as_array(), y = b.params.as_array();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], x[i], 1e-4 * std::abs(x[i])) << kFitParamNames[i];
}

TEST(Fit, AnharmonicityDataLiftsChargingJosephsonDegeneracy) {
    const Device truth = device_for_params(toy_base(), kTruth);
    const auto fluxes = linspace(0.0, 0.3, 12);
    const auto ge = synthesize(truth, fluxes, {Label::qubit_ge()}, 0.0021, 17);
    const auto both = synthesize(truth, fluxes, {Label::qubit_ge(), Label::qubit_ef()}, 0.0021, 17);
    const auto a = fit(ge, toy_base(), perturbed());
    const auto b = fit(both, toy_base(), perturbed());
    EXPECT_GT(a.sigma[kEJ], 5.0 * b.sigma[kEJ]) << a.sigma[kEJ] << " vs " << b.sigma[kEJ];
}

TEST(Fit, SingularCurvatureGivesInfiniteSigma) {
    // Data that do not depend on the qubit at all: cavity rows with zero weight.
    auto ds = toy_dataset(0.0);
    for (auto& r : ds.rows) r.weight = 0.0;
    const auto s = parameter_sigmas(kTruth, ds, toy_base(), {}, {true, true, true, true, false});
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(std::isinf(s[i]));
}

TEST(AdjustAlphas, RecoversSecondMode) {
    Device truth = device_for_params(toy_base(), kTruth);
    const auto ds = synthesize(truth, linspace(0.0, 0.5, 8), {Label::cavity(2)}, 0.0, 1);
    Device start = truth;
    start.resonator.alphas[1] = 1.0;
    const auto r = adjust_alphas(ds, start);
    EXPECT_TRUE(r.any_adjusted);
    EXPECT_TRUE(r.adjusted[1]);
    EXPECT_FALSE(r.adjusted[0]);
    EXPECT_NEAR(r.alphas[1], 0.983, 0.001 * 0.983);
    EXPECT_EQ(r.alphas[0], 1.0);
}

TEST(AdjustAlphas, NoHigherModeDataLeavesAlphasUnchanged) {
    const Device truth = device_for_params(toy_base(), kTruth);
    const auto ds = synthesize(truth, {0.0, 0.2}, {Label::cavity(1), Label::qubit_ge()}, 0.0, 1);
    Device start = truth;
    start.resonator.alphas[1] = 1.0;
    const auto r = adjust_alphas(ds, start);
    EXPECT_FALSE(r.any_adjusted);
    EXPECT_EQ(r.alphas, start.resonator.alphas);
}

TEST(AdjustAlphas, DeviceAPattern) {
    Device a;
    a.resonator = {4.603, {1.0, 0.994, 1.0, 1.0}};
    a.qubit = {0.426, 36.3, 0.01, 0.0, 0.0};
    a.coupling.g1_at_zero_flux = 0.897;
    a.truncation = {20, 3, {2, 2, 2, 2}};
    const auto ds =
        synthesize(a, {0.0, 0.2, 0.45}, {Label::cavity(2), Label::cavity(3), Label::cavity(4)}, 0.0, 1);
    Device start = a;
    start.resonator.alphas = {1.0, 1.0, 1.0, 1.0};
    const auto r = adjust_alphas(ds, start);
    const double expected[] = {1.0, 0.994, 1.0, 1.0};
    for (int m = 0; m < 4; ++m) EXPECT_NEAR(r.alphas[m], expected[m], 1e-4);
}

TEST(Convergence, DecoupledPassesAtMinimalTruncation) {
    Device d = toy_base();
    d.coupling.normalization = CouplingNormalization::calibrated_g0;
    d.coupling.g1_at_zero_flux = 0.0;
    d.truncation = {10, 3, {2, 2}};
    const auto rep = convergence_check(d, 0.0042);
    EXPECT_TRUE(rep.passed);
    for (const auto& k : rep.knobs) EXPECT_LT(k.max_change, 1e-9) << k.knob;
}

TEST(Convergence, UnderTruncatedFailsOnFundamental) {
    Device d;
    d.resonator = {4.603, {1.0, 0.994, 1.0, 1.0}};
    d.qubit = {0.426, 36.3, 0.01, 0.0, 0.0};
    d.coupling.g1_at_zero_flux = 0.897;
    d.truncation = {20, 5, {2, 1, 1, 1}};
    const auto rep = convergence_check(d, 0.0042);
    EXPECT_FALSE(rep.passed);
    EXPECT_EQ(rep.worst_knob, "photons[1]");
    ASSERT_EQ(rep.knobs.size(), 7u);
    EXPECT_EQ(rep.knobs[0].knob, "n_max");
    EXPECT_EQ(rep.knobs.back().knob, "n_modes");
}

TEST(Convergence, CeilingReportedPerKnob) {
    Device d = toy_base();
    d.truncation.max_dim = d.truncation.composite_dim();
    const auto rep = convergence_check(d, 0.0042);
    EXPECT_FALSE(rep.passed);
    for (const auto& k : rep.knobs) {
        if (k.knob == "n_max") {
            EXPECT_TRUE(k.error.empty());
        } else {
            EXPECT_NE(k.error.find("ceiling"), std::string::npos) << k.knob;
        }
    }
}

TEST(CalibrateFlux, SyntheticCosine) {
    std::vector<CurrentSample> scan;
    for (double i : linspace(-13.0, 24.0, 300))
        scan.push_back({i, 5.0 - 0.3 * std::cos(2.0 * std::numbers::pi * (i - 2.0) / 10.0)});
    const auto cal = calibrate_flux(scan);
    EXPECT_NEAR(cal.period, 10.0, 0.005 * 10.0);
    EXPECT_NEAR(cal.offset, 2.0, 0.005 * 2.0);
    EXPECT_NEAR(cal.flux(12.0), 1.0, 1e-2);
}

TEST(CalibrateFlux, FlatSignalHasNoPeriod) {
    std::vector<CurrentSample> scan;
    for (double i : linspace(0.0, 10.0, 50)) scan.push_back({i, 4.6});
    EXPECT_THROW(calibrate_flux(scan), std::runtime_error);
}

TEST(CalibrateFlux, ShortScanRejected) {
    std::vector<CurrentSample> scan;
    for (double i : linspace(0.0, 3.0, 50)) scan.push_back({i, std::cos(i / 10.0)});
    EXPECT_THROW(calibrate_flux(scan), std::runtime_error);
}

TEST(CalibrateFlux, TranslationInvariantSplittingFlux) {
    Device a;
    a.resonator = {4.603, {1.0}};
    a.qubit = {0.426, 36.3, 0.01, 0.0, 0.0};
    a.coupling.g1_at_zero_flux = 0.897;
    a.truncation = {20, 3, {4}};
    const auto sweep = flux_sweep(a, linspace(0.3, 0.45, 31), false, {Label::cavity(1), Label::qubit_ge()});
    const auto vrs = vacuum_rabi_splitting(sweep, Label::cavity(1), Label::qubit_ge(),
                                           model_gap(a, Label::cavity(1), Label::qubit_ge()));

    const double period = 7.3;
    for (double offset : {0.7, -3.1, 2.9}) {
        std::vector<CurrentSample> scan;
        for (double i : linspace(-9.0, 9.0, 361)) {
            const double flux = (i - offset) / period;
            const auto f = transition_table(a, flux, false, {Label::cavity(1)}).frequency(Label::cavity(1));
            if (f) scan.push_back({i, *f});
        }
        const auto cal = calibrate_flux(scan);
        EXPECT_NEAR(cal.period, period, 0.005 * period);
        const double current_at_min = offset + period * vrs.flux_at_min;
        EXPECT_NEAR(wrap_unit(cal.flux(current_at_min)), vrs.flux_at_min, 2e-3) << "offset " << offset;
    }
}
