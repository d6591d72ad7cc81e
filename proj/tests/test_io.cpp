#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <musc/io.hpp>

using namespace musc;

namespace {

std::string data_path(const char* name) { return std::string(MUSC_DATA_DIR) + "/" + name; }

const char* kMinimal =
    "resonator.omega1_ghz=4.0\n"
    "resonator.alphas=1,1\n"
    "qubit.E_J_ghz=20\n"
    "truncation.photons=3,2\n";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

std::string message_of(const std::string& text) {
    try {
        parse_config_string(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, DeviceAFixture) {
    const auto c = load_config(data_path("deviceA.cfg"));
    EXPECT_EQ(c.omega1_ghz, 4.603);
    EXPECT_EQ(*c.E_c_ghz, 0.426);
    EXPECT_EQ(c.E_J_ghz, 36.3);
    EXPECT_EQ(*c.g0_ghz, 0.897);
    EXPECT_EQ(c.photons, (std::vector<int>{6, 4, 3, 3}));
    EXPECT_EQ(c.device().truncation.composite_dim(), 1080u);
}

TEST(Config, DeviceBFixture) {
    const auto c = load_config(data_path("deviceB.cfg"));
    EXPECT_EQ(c.omega1_ghz, 4.268);
    EXPECT_EQ(c.alphas, (std::vector<double>{1.0, 0.983, 0.983, 1.0}));
    EXPECT_EQ(c.photons, (std::vector<int>{5, 3, 2, 2}));
}

TEST(Config, FitFixtureUsesCapacitances) {
    const auto c = load_config(data_path("deviceB_fit.cfg"));
    ASSERT_TRUE(c.capacitances);
    EXPECT_EQ(c.capacitances->C_c_ff, 18.9);
    const auto d = c.device();
    EXPECT_EQ(d.coupling.normalization, CouplingNormalization::zpf_model);
    EXPECT_NEAR(d.coupling.beta, 0.684, 1e-3);
}

TEST(Config, ChargingEnergyExclusive) {
    EXPECT_NE(message_of(with("qubit.E_c_ghz=0.4\nqubit.C_c_ff=10\nqubit.C_J_ff=5\ncoupling.g0_ghz=0.5\n")), "");
    EXPECT_NE(message_of(with("coupling.g0_ghz=0.5\n")), "");
    EXPECT_EQ(message_of(with("qubit.E_c_ghz=0.4\ncoupling.g0_ghz=0.5\n")), "");
}

TEST(Config, CouplingExclusive) {
    EXPECT_NE(message_of(with("qubit.C_c_ff=10\nqubit.C_J_ff=5\ncoupling.g0_ghz=0.5\ncoupling.zpf_impedance_ohm=50\n")), "");
    EXPECT_NE(message_of(with("qubit.E_c_ghz=0.4\n")), "");
    EXPECT_NE(message_of(with("qubit.E_c_ghz=0.4\ncoupling.zpf_impedance_ohm=50\n")), "");
    EXPECT_EQ(message_of(with("qubit.C_c_ff=10\nqubit.C_J_ff=5\ncoupling.zpf_impedance_ohm=50\n")), "");
}

TEST(Config, CapacitancePairMustBeComplete) {
    EXPECT_NE(message_of(with("qubit.C_c_ff=10\ncoupling.g0_ghz=0.5\n")), "");
}

TEST(Config, UnknownKeyCitesLine) {
    const auto msg = message_of(with("qubit.E_c_ghz=0.4\ncoupling.g0_ghz=0.5\nqubit.Ej_ghz=3\n"));
    EXPECT_NE(msg.find("cfg:7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("qubit.Ej_ghz"), std::string::npos) << msg;
}

TEST(Config, ParseErrorCitesLine) {
    auto msg = message_of("# comment\nresonator.omega1_ghz=abc\n");
    EXPECT_NE(msg.find("cfg:2"), std::string::npos) << msg;
    msg = message_of("resonator.omega1_ghz 4\n");
    EXPECT_NE(msg.find("cfg:1"), std::string::npos) << msg;
    msg = message_of(with("truncation.photons=3,x\n"));
    EXPECT_NE(msg.find("cfg:5"), std::string::npos) << msg;
}

TEST(Config, DuplicateKeyRejected) {
    const auto msg = message_of(with("qubit.E_c_ghz=0.4\nqubit.E_c_ghz=0.5\ncoupling.g0_ghz=0.5\n"));
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(Config, InvariantViolationNamesProblem) {
    auto msg = message_of(with("qubit.E_c_ghz=-0.4\ncoupling.g0_ghz=0.5\n"));
    EXPECT_NE(msg.find("E_c"), std::string::npos) << msg;
    msg = message_of(with("qubit.E_c_ghz=0.4\ncoupling.g0_ghz=0.5\nresonator.alphas=1\n"));
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
    msg = message_of(
        "resonator.omega1_ghz=4.0\nresonator.alphas=1\nqubit.E_J_ghz=20\ntruncation.photons=3,2\n"
        "qubit.E_c_ghz=0.4\ncoupling.g0_ghz=0.5\n");
    EXPECT_NE(msg.find("alphas"), std::string::npos) << msg;
    msg = message_of(with("qubit.E_c_ghz=0.4\ncoupling.g0_ghz=0.5\ntruncation.max_dim=5\n"));
    EXPECT_NE(msg.find("ceiling"), std::string::npos) << msg;
}

TEST(Config, MissingRequiredKey) {
    const auto msg = message_of("resonator.omega1_ghz=4\n");
    EXPECT_NE(msg.find("missing"), std::string::npos) << msg;
}

TEST(Config, RoundTripRandomConfigs) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        DeviceConfig c;
        c.omega1_ghz = 1.0 + 9.0 * u(rng);
        const int m = 1 + trial % 4;
        c.alphas.assign(m, 1.0);
        for (int k = 1; k < m; ++k) c.alphas[k] = 0.9 + 0.2 * u(rng);
        if (trial % 2)
            c.E_c_ghz = 0.1 + u(rng);
        else
            c.capacitances = Capacitances{1.0 + 50.0 * u(rng), 50.0 * u(rng)};
        c.E_J_ghz = 50.0 * u(rng);
        c.d = 0.5 * u(rng);
        c.n_dc = u(rng) - 0.5;
        if (trial % 3 == 0 && c.capacitances)
            c.zpf_impedance_ohm = 20.0 + 60.0 * u(rng);
        else
            c.g0_ghz = u(rng);
        c.n_max = 5 + trial % 20;
        c.n_q = 2 + trial % 4;
        c.photons.assign(m, 1 + trial % 3);
        c.linewidth_ghz = 1e-3 + 1e-2 * u(rng);
        const auto text = config_to_string(c);
        EXPECT_EQ(parse_config_string(text), c) << text;
    }
}

TEST(Dataset, ParsesFixture) {
    const auto ds = load_dataset(data_path("synthetic_deviceB.csv"));
    EXPECT_EQ(ds.rows.size(), 120u);
    EXPECT_EQ(ds.rows[0].branch, Label::cavity(1));
}

TEST(Dataset, HeaderMandatory) {
    std::istringstream in("0.1,5.0,cavity_1,1\n");
    EXPECT_THROW(read_dataset(in), DatasetError);
    std::istringstream empty("");
    EXPECT_THROW(read_dataset(empty), DatasetError);
}

TEST(Dataset, AllProblemsListed) {
    std::istringstream in(
        "flux,frequency_ghz,branch,weight\n"
        "0.1,5.0,cavity_1,1\n"
        "0.2,5.0,cavity_one,1\n"
        "0.3,-5,qubit_ge,1\n"
        "0.4,5.0,qubit_ge\n"
        "x,5.0,qubit_ge,-2\n");
    try {
        read_dataset(in, "d.csv");
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        const auto& p = e.problems();
        ASSERT_EQ(p.size(), 5u);
        EXPECT_NE(p[0].find("d.csv:3"), std::string::npos);
        EXPECT_NE(p[0].find("cavity_one"), std::string::npos);
        EXPECT_NE(p[1].find("d.csv:4"), std::string::npos);
        EXPECT_NE(p[2].find("d.csv:5"), std::string::npos);
        EXPECT_NE(p[3].find("d.csv:6"), std::string::npos);
        EXPECT_NE(p[4].find("d.csv:6"), std::string::npos);
    }
}

TEST(Dataset, WriteReadRoundTrip) {
    FluxDataset ds;
    ds.rows = {{0.125, 4.21456871, Label::cavity(1), 1.0}, {0.5, 13.1, Label::qubit_ef(), 0.25}};
    std::stringstream s;
    write_dataset(s, ds);
    const auto back = read_dataset(s);
    ASSERT_EQ(back.rows.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.rows[i].flux, ds.rows[i].flux);
        EXPECT_EQ(back.rows[i].frequency, ds.rows[i].frequency);
        EXPECT_EQ(back.rows[i].branch, ds.rows[i].branch);
        EXPECT_EQ(back.rows[i].weight, ds.rows[i].weight);
    }
}

TEST(Sweep, FormatAndRoundTrip) {
    std::vector<SpectrumPoint> sweep{{0.1, {{Label::cavity(1), 4.123456789123, 0.99}, {Label::qubit_ge(), 10.5, 0.8}}, {}},
                                     {0.2, {}, "failed"},
                                     {0.3, {{Label::cavity(1), 4.2, 0.98}}, {}}};
    std::stringstream s;
    write_sweep(s, sweep);
    EXPECT_EQ(s.str(),
              "flux,label,frequency_ghz,overlap\n"
              "0.1,cavity_1,4.12345679,0.99\n"
              "0.1,qubit_ge,10.5,0.8\n"
              "0.3,cavity_1,4.2,0.98\n");
    const auto back = read_sweep(s);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].transitions.size(), 2u);
    EXPECT_EQ(back[1].flux, 0.3);
}

TEST(FitDocument, ParametersRoundTrip) {
    FitResult r;
    r.params = {18.91234567, 8.7, 0.151, 37.39, 0.01};
    r.free = {true, true, true, true, false};
    r.sigma = {0.1, 0.2, 0.01, 0.05, 0.0};
    r.converged = true;
    FluxDataset ds;
    ds.rows = {{0.1, 5.0, Label::cavity(1), 1.0}, {0.2, 5.1, Label::cavity(2), 1.0}};
    r.residuals.residuals = {0.001, 0.042};
    r.residuals.model = {5.001, std::nan("")};
    r.residuals.flagged = {false, true};
    r.residuals.n_flagged = 1;
    Device base;
    base.resonator = {4.268, {1.0, 0.983}};
    std::stringstream s;
    write_fit_document(s, r, ds, base);
    const std::string text = s.str();
    EXPECT_NE(text.find("params.C_c_ff=18.9123457\n"), std::string::npos) << text;
    EXPECT_NE(text.find("fixed.d=0.01\n"), std::string::npos);
    EXPECT_NE(text.find("fixed.alphas=1,0.983\n"), std::string::npos);
    EXPECT_NE(text.find("[residuals]\n" + std::string(kResidualHeader) + "\n"), std::string::npos);
    EXPECT_NE(text.find("2,0.2,cavity_2,5.1,nan,1,0.042,1\n"), std::string::npos) << text;
    const auto kv = read_fit_document(s);
    EXPECT_EQ(kv.at("fit.converged"), "true");
    const auto p = fit_params_from_document(kv, FitParams{});
    EXPECT_NEAR(p.C_c, 18.91234567, 1e-7);
    EXPECT_EQ(p.E_J, 37.39);
    EXPECT_EQ(p.d, 0.01);
}
