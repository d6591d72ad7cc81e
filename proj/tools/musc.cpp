// musc: spectra, Bloch-Siegert shifts, convergence checks and parameter
// fits for a qubit coupled to a multimode quarter-wave resonator.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <musc/musc.hpp>

namespace {

using namespace musc;

struct Globals {
    std::string config;
    unsigned workers = 0;
    std::string output;
    bool rwa = false;

    unsigned worker_count() const { return workers ? workers : default_workers(); }
};

// Writes to --output when given, otherwise stdout. The output file is only
// created once the content is complete.
void emit(const Globals& g, const std::string& text) {
    if (g.output.empty() || g.output == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(g.output, std::ios::binary);
    if (!out) throw std::runtime_error(g.output + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(g.output + ": write failed");
}

// Human-readable summaries go to stdout when the payload goes to a file,
// else to stderr so the payload stays clean.
std::ostream& summary(const Globals& g) { return g.output.empty() || g.output == "-" ? std::cerr : std::cout; }

DeviceConfig require_config(const Globals& g) {
    if (g.config.empty()) throw std::runtime_error("--config is required");
    return load_config(g.config);
}

std::vector<Label> parse_labels(const std::string& csv) {
    std::vector<Label> out;
    for (auto part : detail::split(csv, ',')) {
        auto l = Label::parse(std::string(part));
        if (!l) throw std::runtime_error("unknown branch '" + std::string(part) + "'");
        out.push_back(*l);
    }
    return out;
}

Label parse_label(const std::string& s) {
    auto l = Label::parse(s);
    if (!l) throw std::runtime_error("unknown branch '" + s + "'");
    return *l;
}

int cmd_spectrum(const Globals& g, double lo, double hi, std::size_t points, const std::string& labels_csv) {
    const auto cfg = require_config(g);
    const auto dev = cfg.device();
    if (points < 1) throw std::runtime_error("--points must be >= 1");
    const auto labels = labels_csv.empty() ? default_labels(dev) : parse_labels(labels_csv);
    const auto sweep = flux_sweep(dev, linspace(lo, hi, points), g.rwa, labels, g.worker_count());

    std::ostringstream text;
    write_sweep(text, sweep);
    emit(g, text.str());

    std::size_t failed = 0, rows = 0;
    for (const auto& p : sweep) {
        rows += p.transitions.size();
        if (!p.error.empty()) {
            ++failed;
            std::cerr << "error at flux " << fmt9(p.flux) << ": " << p.error << '\n';
        }
    }
    auto& s = summary(g);
    s << "points=" << sweep.size() << " branches=" << labels.size() << " rows=" << rows << " flux=[" << fmt9(sweep.front().flux)
      << ", " << fmt9(sweep.back().flux) << "] rwa=" << (g.rwa ? "true" : "false") << '\n';
    return failed ? 1 : 0;
}

int cmd_splitting(const Globals& g, double lo, double hi, std::size_t points, const std::string& a,
                  const std::string& b) {
    const auto dev = require_config(g).device();
    const Label la = parse_label(a), lb = parse_label(b);
    const auto sweep = flux_sweep(dev, linspace(lo, hi, points), g.rwa, {la, lb}, g.worker_count());
    for (const auto& p : sweep)
        if (!p.error.empty()) std::cerr << "error at flux " << fmt9(p.flux) << ": " << p.error << '\n';
    const auto r = vacuum_rabi_splitting(sweep, la, lb, model_gap(dev, la, lb, g.rwa));
    std::ostringstream text;
    text << "splitting.branches=" << la.to_string() << ',' << lb.to_string() << '\n';
    text << "splitting.delta_ghz=" << fmt9(r.delta) << '\n';
    text << "splitting.flux=" << fmt9(r.flux_at_min) << '\n';
    text << "splitting.g_ghz=" << fmt9(r.g_estimate) << '\n';
    emit(g, text.str());
    return 0;
}

int cmd_bloch_siegert(const Globals& g, double flux, const std::string& branch, double scale) {
    auto dev = require_config(g).device();
    if (!(scale >= 0.0)) throw std::runtime_error("--coupling-scale must be >= 0");
    if (dev.coupling.normalization == CouplingNormalization::calibrated_g0)
        dev.coupling.g1_at_zero_flux *= scale;
    else
        dev.coupling.beta *= scale;
    const Label l = parse_label(branch);
    const auto bs = bloch_siegert_shift(dev, flux, l);
    std::ostringstream text;
    text << "bloch_siegert.branch=" << l.to_string() << '\n';
    text << "bloch_siegert.flux=" << fmt9(flux) << '\n';
    text << "bloch_siegert.full_ghz=" << fmt9(bs.full) << '\n';
    text << "bloch_siegert.rwa_ghz=" << fmt9(bs.rwa) << '\n';
    text << "bloch_siegert.shift_mhz=" << fmt9(bs.shift * 1e3) << '\n';
    emit(g, text.str());
    return 0;
}

int cmd_converge(const Globals& g, double linewidth) {
    const auto cfg = require_config(g);
    const auto dev = cfg.device();
    const double lw = linewidth > 0.0 ? linewidth : cfg.linewidth_ghz;
    const auto rep = convergence_check(dev, lw, g.worker_count());
    std::ostringstream text;
    text << "converge.threshold_ghz=" << fmt9(rep.threshold) << '\n';
    for (const auto& k : rep.knobs) {
        text << "knob." << k.knob << ".max_change_ghz=" << fmt9(k.max_change) << '\n';
        text << "knob." << k.knob << ".passed=" << (k.passed ? "true" : "false") << '\n';
        if (!k.error.empty()) text << "knob." << k.knob << ".error=" << k.error << '\n';
    }
    text << "converge.worst_knob=" << rep.worst_knob << '\n';
    text << "converge.passed=" << (rep.passed ? "true" : "false") << '\n';
    emit(g, text.str());
    if (!rep.passed) std::cerr << "not converged; worst knob: " << rep.worst_knob << '\n';
    return rep.passed ? 0 : 1;
}

FitParams initial_guess(const DeviceConfig& cfg, const std::string& guess_from, const std::vector<std::string>& guesses) {
    FitParams p;
    p.E_J = cfg.E_J_ghz;
    p.n_dc = cfg.n_dc;
    p.d = cfg.d;
    if (cfg.capacitances) {
        p.C_c = cfg.capacitances->C_c_ff;
        p.C_J = cfg.capacitances->C_J_ff;
    }
    if (!guess_from.empty()) {
        std::ifstream in(guess_from);
        if (!in) throw std::runtime_error(guess_from + ": cannot open");
        p = fit_params_from_document(read_fit_document(in), p);
    }
    auto x = p.as_array();
    for (const auto& kv : guesses) {
        const auto eq = kv.find('=');
        bool done = false;
        if (eq != std::string::npos) {
            const auto key = kv.substr(0, eq);
            const auto v = detail::parse_double(kv.substr(eq + 1));
            for (std::size_t i = 0; i < kFitParamCount && v; ++i)
                if (key == kFitParamNames[i]) {
                    x[i] = *v;
                    done = true;
                }
        }
        if (!done) throw std::runtime_error("bad --guess '" + kv + "' (expected NAME=VALUE, NAME one of C_c_ff, C_J_ff, n_dc, E_J_ghz, d)");
    }
    p = FitParams::from_array(x);
    if (!(p.C_c > 0.0)) throw std::runtime_error("fit needs a capacitance guess: set qubit.C_c_ff/qubit.C_J_ff or --guess");
    return p;
}

int cmd_fit(const Globals& g, const std::string& data, const std::string& guess_from,
            const std::vector<std::string>& guesses, FitOptions opt, bool adjust) {
    const auto cfg = require_config(g);
    auto base = cfg.device();
    if (!cfg.zpf_impedance_ohm)
        throw std::runtime_error("fit needs coupling.zpf_impedance_ohm: the coupling follows the fitted capacitances");
    const auto ds = load_dataset(data, cfg.linewidth_ghz);
    const auto guess = initial_guess(cfg, guess_from, guesses);
    opt.workers = g.worker_count();
    const auto r = fit(ds, base, guess, FitBounds{}, opt);

    AlphaAdjustment alphas;
    if (adjust) {
        alphas = adjust_alphas(ds, device_for_params(base, r.params), opt.workers);
        base.resonator.alphas = alphas.alphas;
    }

    std::ostringstream text;
    write_fit_document(text, r, ds, base);
    emit(g, text.str());

    auto& s = summary(g);
    const auto x = r.params.as_array();
    for (std::size_t i = 0; i < kFitParamCount; ++i)
        if (r.free[i]) s << kFitParamNames[i] << ": " << fmt9(x[i]) << " +/- " << fmt9(r.sigma[i]) << '\n';
    s << "rms_ghz: " << fmt9(r.rms) << '\n';
    s << "converged: " << (r.converged ? "true" : "false") << '\n';
    if (adjust && !alphas.any_adjusted) s << "alphas: no higher-mode data, left unchanged\n";
    if (r.residuals.n_flagged) std::cerr << r.residuals.n_flagged << " row(s) hit the missing-branch penalty\n";
    return r.converged ? 0 : 1;
}

int cmd_synthesize(const Globals& g, double lo, double hi, std::size_t points, const std::string& branches,
                   double noise, std::uint64_t seed) {
    const auto cfg = require_config(g);
    const auto dev = cfg.device();
    const auto labels = parse_labels(branches);
    const auto sweep = flux_sweep(dev, linspace(lo, hi, points), false, labels, g.worker_count());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FluxDataset ds;
    ds.linewidth = cfg.linewidth_ghz;
    int status = 0;
    for (const auto& p : sweep) {
        if (!p.error.empty()) {
            std::cerr << "error at flux " << fmt9(p.flux) << ": " << p.error << '\n';
            status = 1;
            continue;
        }
        for (const auto& l : labels) {
            const double z = normal(rng);
            if (auto f = p.frequency(l)) ds.rows.push_back({p.flux, *f + noise * z, l, 1.0});
        }
    }
    std::ostringstream text;
    write_dataset(text, ds);
    emit(g, text.str());
    summary(g) << "rows=" << ds.rows.size() << " noise_ghz=" << fmt9(noise) << " seed=" << seed << '\n';
    return status;
}

int cmd_calibrate(const Globals& g, const std::string& scan_path) {
    std::ifstream in(scan_path);
    if (!in) throw std::runtime_error(scan_path + ": cannot open");
    std::vector<CurrentSample> scan;
    std::string raw;
    int line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line;
        auto s = detail::trim(raw);
        if (s.empty() || s.front() == '#') continue;
        if (!header) {
            if (s != "current,frequency_ghz") throw std::runtime_error(scan_path + ": expected header 'current,frequency_ghz'");
            header = true;
            continue;
        }
        const auto f = detail::split(s, ',');
        auto c = f.size() == 2 ? detail::parse_double(f[0]) : std::nullopt;
        auto v = f.size() == 2 ? detail::parse_double(f[1]) : std::nullopt;
        if (!c || !v) throw std::runtime_error(scan_path + ":" + std::to_string(line) + ": bad row");
        scan.push_back({*c, *v});
    }
    const auto cal = calibrate_flux(scan);
    std::ostringstream text;
    text << "calibration.period=" << fmt9(cal.period) << '\n';
    text << "calibration.offset=" << fmt9(cal.offset) << '\n';
    emit(g, text.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimode circuit QED spectra and parameter fits"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Device configuration file");
    app.add_option("--workers", g.workers, std::string("Worker threads (default: $") + kWorkersEnv + " or core count)")
        ->check(CLI::PositiveNumber);
    app.add_option("--output,-o", g.output, "Output file (default: stdout)");
    app.add_flag("--rwa", g.rwa, "Drop counter-rotating terms");

    int status = 0;
    std::function<int()> run;

    double lo = 0.0, hi = 0.5;
    std::size_t points = 101;
    std::string labels;
    auto* spectrum = app.add_subcommand("spectrum", "Dressed transition frequencies over a flux sweep");
    spectrum->add_option("--flux-min", lo, "First flux point (Phi/Phi0)");
    spectrum->add_option("--flux-max", hi, "Last flux point (Phi/Phi0)");
    spectrum->add_option("--points", points, "Number of flux points")->check(CLI::PositiveNumber);
    spectrum->add_option("--branches", labels, "Comma-separated branch labels (default: all)");
    spectrum->callback([&] { run = [&] { return cmd_spectrum(g, lo, hi, points, labels); }; });

    std::string branch_a = "cavity_1", branch_b = "qubit_ge";
    auto* splitting = app.add_subcommand("splitting", "Minimum gap between two branches");
    splitting->add_option("--flux-min", lo)->required();
    splitting->add_option("--flux-max", hi)->required();
    splitting->add_option("--points", points)->check(CLI::PositiveNumber);
    splitting->add_option("--a", branch_a, "First branch");
    splitting->add_option("--b", branch_b, "Second branch");
    splitting->callback([&] { run = [&] { return cmd_splitting(g, lo, hi, points, branch_a, branch_b); }; });

    double bs_flux = 0.0, scale = 1.0;
    std::string branch = "cavity_1";
    auto* bloch = app.add_subcommand("bloch-siegert", "Full minus RWA frequency of one branch");
    bloch->add_option("--flux", bs_flux, "Flux point (Phi/Phi0)");
    bloch->add_option("--branch", branch, "Branch label");
    bloch->add_option("--coupling-scale", scale, "Multiply the coupling by this factor");
    bloch->callback([&] { run = [&] { return cmd_bloch_siegert(g, bs_flux, branch, scale); }; });

    double linewidth = 0.0;
    auto* converge = app.add_subcommand("converge", "Truncation convergence check");
    converge->add_option("--linewidth", linewidth, "Linewidth in GHz (default: from config)");
    converge->callback([&] { run = [&] { return cmd_converge(g, linewidth); }; });

    std::string data, guess_from;
    std::vector<std::string> guesses;
    FitOptions fit_opt;
    bool adjust = false;
    auto* fit = app.add_subcommand("fit", "Least-squares fit of C_c, C_J, n_DC, E_J");
    fit->add_option("--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--guess", guesses, "Initial value override, NAME=VALUE");
    fit->add_option("--guess-from", guess_from, "Start from a previous fit document")->check(CLI::ExistingFile);
    fit->add_option("--restarts", fit_opt.restarts, "Seeded restarts after the first run");
    fit->add_option("--seed", fit_opt.seed, "Restart seed");
    fit->add_option("--max-iterations", fit_opt.max_iterations, "Iterations per simplex run");
    fit->add_flag("--fit-d", fit_opt.fit_asymmetry, "Also fit the junction asymmetry d");
    fit->add_flag("--adjust-alphas", adjust, "Re-fit higher-mode alphas after the main fit");
    fit->callback([&] { run = [&] { return cmd_fit(g, data, guess_from, guesses, fit_opt, adjust); }; });

    double noise = 0.0;
    std::uint64_t seed = 1;
    std::string branches = "cavity_1,cavity_2,qubit_ge";
    auto* synth = app.add_subcommand("synthesize", "Generate a dataset from the model");
    synth->add_option("--flux-min", lo);
    synth->add_option("--flux-max", hi);
    synth->add_option("--points", points)->check(CLI::PositiveNumber);
    synth->add_option("--branches", branches, "Comma-separated branch labels");
    synth->add_option("--noise-ghz", noise, "Gaussian noise standard deviation")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", seed, "Noise seed");
    synth->callback([&] { run = [&] { return cmd_synthesize(g, lo, hi, points, branches, noise, seed); }; });

    std::string scan;
    auto* calibrate = app.add_subcommand("calibrate", "Flux period and offset from a current scan");
    calibrate->add_option("--scan", scan, "CSV with header current,frequency_ghz")->required()->check(CLI::ExistingFile);
    calibrate->callback([&] { run = [&] { return cmd_calibrate(g, scan); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        status = run();
    } catch (const DatasetError& e) {
        for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return status;
}
