#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <musc/linalg.hpp>

using namespace musc;

namespace {

HermitianMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = nd(rng);
        for (std::size_t j = i + 1; j < n; ++j) {
            m(i, j) = cplx(nd(rng), nd(rng));
            m(j, i) = std::conj(m(i, j));
        }
    }
    return HermitianMatrix(std::move(m));
}

struct Quality {
    double residual = 0.0;      // max_k ||H v - l v|| / ||H||_F
    double orthonormal = 0.0;   // max |V^H V - I|
    double trace = 0.0;         // |sum l - tr H| / ||H||_F
};

Quality check(const HermitianMatrix& h, const EigenSystem& es) {
    const auto& a = h.matrix();
    const double fro = a.frobenius_norm();
    const std::size_t n = h.dim();
    const std::size_t k = es.values.size();
    Quality q;
    for (std::size_t c = 0; c < k; ++c) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cplx s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a(i, j) * es.vectors(j, c);
            s -= es.values[c] * es.vectors(i, c);
            r2 += std::norm(s);
        }
        q.residual = std::max(q.residual, std::sqrt(r2) / fro);
    }
    const auto g = es.vectors.adjoint() * es.vectors;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            q.orthonormal = std::max(q.orthonormal, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    if (k == n) {
        double s = 0.0;
        for (double v : es.values) s += v;
        q.trace = std::abs(s - a.trace().real()) / fro;
    }
    return q;
}

}  // namespace

TEST(Annihilation, SingleLevelIsZero) {
    const auto a = annihilation(1);
    ASSERT_EQ(a.rows(), 1u);
    EXPECT_EQ(a(0, 0), cplx(0.0));
}

TEST(Annihilation, SuperdiagonalIsSqrtK) {
    const auto a = annihilation(3);
    EXPECT_DOUBLE_EQ(a(0, 1).real(), 1.0);
    EXPECT_DOUBLE_EQ(a(1, 2).real(), std::sqrt(2.0));
    EXPECT_EQ(a(0, 2), cplx(0.0));
    EXPECT_EQ(a(1, 0), cplx(0.0));
}

TEST(Annihilation, NumberOperatorDiagonal) {
    const auto a = annihilation(4);
    const auto n = a.adjoint() * a;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(n(i, j) - (i == j ? double(i) : 0.0)), 0.0, 1e-15);
}

TEST(Annihilation, RejectsZeroLevels) { EXPECT_THROW(annihilation(0), std::invalid_argument); }

TEST(Kron, IdentityTimesIdentity) { EXPECT_TRUE(kron(CMatrix::identity(2), CMatrix::identity(3)) == CMatrix::identity(6)); }

TEST(Kron, IndexConvention) {
    CMatrix a(2, 2), b(3, 3);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) a(i, j) = cplx(1.0 + i, 2.0 * j);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) b(k, l) = cplx(0.5 * k - l, 1.0 + k * l);
    const auto c = kron(a, b);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 3; ++k)
                for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(c(i * 3 + k, j * 3 + l), a(i, j) * b(k, l));
}

TEST(Kron, HermitianOperandsGiveHermitian) {
    std::mt19937_64 rng(3);
    const auto a = random_hermitian(3, rng), b = random_hermitian(4, rng);
    const auto c = kron(a, b);
    EXPECT_LE(hermiticity_defect(c.matrix()), 1e-15);
    EXPECT_LE(hermiticity_defect((c + kron(b, a)).matrix()), 1e-15);
}

TEST(Kron, SpectrumOfKronWithIdentity) {
    std::mt19937_64 rng(5);
    const auto a = random_hermitian(2, rng);
    const auto va = eigvalsh(a);
    const auto vk = eigvalsh(kron(a, HermitianMatrix(CMatrix::identity(3))));
    ASSERT_EQ(vk.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(vk[i], va[i / 3], 1e-12);
}

TEST(HermitianMatrixType, RejectsNonHermitian) {
    CMatrix m(2, 2);
    m(0, 1) = 1.0;
    EXPECT_THROW(HermitianMatrix{m}, std::invalid_argument);
}

TEST(HermitianMatrixType, RejectsNonFinite) {
    CMatrix m(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(HermitianMatrix{m}, std::invalid_argument);
    m(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(HermitianMatrix{m}, std::invalid_argument);
}

TEST(HermitianMatrixType, RejectsNonSquare) { EXPECT_THROW(HermitianMatrix{CMatrix(2, 3)}, std::invalid_argument); }

TEST(Eigh, AlreadyDiagonal) {
    const std::vector<double> d{3.0, 1.0, 2.0};
    const auto es = eigh(HermitianMatrix(CMatrix::diagonal(d)));
    EXPECT_EQ(es.values, (std::vector<double>{1.0, 2.0, 3.0}));
    const std::size_t expected_row[] = {1, 2, 0};
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_NEAR(std::abs(es.vectors(expected_row[c], c)), 1.0, 1e-15);
    }
}

TEST(Eigh, PauliX) {
    const double g = 0.37;
    CMatrix m(2, 2);
    m(0, 1) = g;
    m(1, 0) = g;
    const auto v = eigvalsh(HermitianMatrix(m));
    EXPECT_NEAR(v[0], -g, 1e-15);
    EXPECT_NEAR(v[1], g, 1e-15);
}

TEST(Eigh, OneByOne) {
    CMatrix m(1, 1);
    m(0, 0) = 2.5;
    const auto es = eigh(HermitianMatrix(m));
    EXPECT_EQ(es.values[0], 2.5);
    EXPECT_EQ(std::abs(es.vectors(0, 0)), 1.0);
}

TEST(Eigh, RandomSmallMatricesResidualOrthonormalTrace) {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> dim(2, 64);
    double worst_res = 0.0, worst_orth = 0.0, worst_tr = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto h = random_hermitian(dim(rng), rng);
        const auto q = check(h, eigh(h));
        worst_res = std::max(worst_res, q.residual);
        worst_orth = std::max(worst_orth, q.orthonormal);
        worst_tr = std::max(worst_tr, q.trace);
    }
    EXPECT_LE(worst_res, 1e-9);
    EXPECT_LE(worst_orth, 1e-10);
    EXPECT_LE(worst_tr, 1e-9);
}

TEST(Eigh, ValuesAscendingAndReal) {
    std::mt19937_64 rng(8);
    const auto es = eigh(random_hermitian(40, rng));
    EXPECT_TRUE(std::is_sorted(es.values.begin(), es.values.end()));
}

TEST(Eigh, Dimension1080) {
    std::mt19937_64 rng(1080);
    const auto h = random_hermitian(1080, rng);
    const auto q = check(h, eigh(h));
    EXPECT_LE(q.residual, 1e-9);
    EXPECT_LE(q.orthonormal, 1e-10);
    EXPECT_LE(q.trace, 1e-9);
}

TEST(Eigh, Reconstruction300) {
    std::mt19937_64 rng(300);
    const auto h = random_hermitian(300, rng);
    const auto es = eigh(h);
    std::vector<double> v = es.values;
    CMatrix vl = es.vectors;
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t c = 0; c < 300; ++c) vl(i, c) *= v[c];
    const auto r = vl * es.vectors.adjoint() - h.matrix();
    EXPECT_LE(r.frobenius_norm() / h.matrix().frobenius_norm(), 1e-9);
}

TEST(Eigh, DegenerateSpectrum) {
    // Highly degenerate: identity plus rank-one.
    const std::size_t n = 30;
    CMatrix m = CMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) += cplx(1.0 / n, 0.0);
    const HermitianMatrix h(m);
    const auto q = check(h, eigh(h));
    EXPECT_LE(q.residual, 1e-12);
    EXPECT_LE(q.orthonormal, 1e-12);
}

TEST(Eigh, Deterministic) {
    std::mt19937_64 rng(77);
    const auto h = random_hermitian(50, rng);
    const auto a = eigh(h), b = eigh(h);
    EXPECT_EQ(a.values, b.values);
    EXPECT_TRUE(a.vectors == b.vectors);
}

TEST(EighLowest, MatchesFullSolver) {
    std::mt19937_64 rng(99);
    for (std::size_t n : {5u, 33u, 120u}) {
        const auto h = random_hermitian(n, rng);
        const auto full = eigh(h);
        const std::size_t k = std::min<std::size_t>(n, 12);
        const auto part = eigh_lowest(h, k);
        ASSERT_EQ(part.values.size(), k);
        for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(part.values[i], full.values[i], 1e-10);
        const auto q = check(h, part);
        EXPECT_LE(q.residual, 1e-9);
        EXPECT_LE(q.orthonormal, 1e-10);
    }
}

TEST(EighLowest, ClusteredEigenvaluesStayOrthonormal) {
    const std::size_t n = 40;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<double>(i / 4);  // quadruplets
    CMatrix m = CMatrix::diagonal(d);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = cplx(1e-13, 1e-13);
        m(i + 1, i) = std::conj(m(i, i + 1));
    }
    const HermitianMatrix h(m);
    const auto q = check(h, eigh_lowest(h, 10));
    EXPECT_LE(q.residual, 1e-9);
    EXPECT_LE(q.orthonormal, 1e-10);
}

TEST(SumsAndProducts, PreserveHermiticity) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_hermitian(4, rng), b = random_hermitian(4, rng);
        EXPECT_NO_THROW({ HermitianMatrix s = a + b; (void)s; });
        EXPECT_NO_THROW({ HermitianMatrix k = kron(a, b); (void)k; });
    }
}
