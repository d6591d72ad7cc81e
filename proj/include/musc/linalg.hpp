#pragma once

// Dense complex linear algebra: ladder operators, Kronecker products and a
// Hermitian eigensolver (Householder tridiagonalization, implicit QL,
// inverse iteration for partial spectra).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace musc {

using cplx = std::complex<double>;

/// Failure of an iterative numerical kernel.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, int iterations)
        : std::runtime_error(what), iterations_(iterations) {}
    int iterations() const { return iterations_; }

private:
    int iterations_;
};

/// Dense row-major complex matrix.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static CMatrix diagonal(std::span<const double> d) {
        CMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<cplx> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const cplx> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    CMatrix adjoint() const {
        CMatrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
        return out;
    }

    std::vector<cplx> column(std::size_t j) const {
        std::vector<cplx> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::abs(z));
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& z : data_) s += std::norm(z);
        return std::sqrt(s);
    }

    cplx trace() const {
        cplx t = 0.0;
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }

    CMatrix& operator+=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    CMatrix& operator-=(const CMatrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    CMatrix& operator*=(cplx s) {
        for (auto& z : data_) z *= s;
        return *this;
    }

    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
    friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

    friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("matrix product: inner dimensions differ");
        CMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            auto orow = out.row(i);
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                auto brow = b.row(k);
                for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
            }
        }
        return out;
    }

    friend std::vector<cplx> operator*(const CMatrix& a, std::span<const cplx> x) {
        if (a.cols_ != x.size()) throw std::invalid_argument("matrix-vector product: dimension mismatch");
        std::vector<cplx> y(a.rows_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx s = 0.0;
            auto r = a.row(i);
            for (std::size_t j = 0; j < a.cols_; ++j) s += r[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    void check_same_shape(const CMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("matrix shapes differ");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

inline CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

/// Largest deviation from Hermitian symmetry, relative to the largest entry.
inline double hermiticity_defect(const CMatrix& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    const double scale = m.max_abs();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j)
            worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
    return worst / scale;
}

/// Square complex matrix whose constructor enforces Hermitian symmetry.
class HermitianMatrix {
public:
    static constexpr double symmetry_tolerance = 1e-12;

    explicit HermitianMatrix(CMatrix m) : m_(std::move(m)) {
        if (m_.rows() == 0 || m_.rows() != m_.cols())
            throw std::invalid_argument("HermitianMatrix: matrix must be square with dim >= 1");
        for (const auto& z : m_.data())
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw std::invalid_argument("HermitianMatrix: non-finite entry");
        if (hermiticity_defect(m_) > symmetry_tolerance)
            throw std::invalid_argument("HermitianMatrix: matrix is not Hermitian");
    }

    std::size_t dim() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

    friend HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b) {
        return HermitianMatrix(a.m_ + b.m_);
    }

private:
    CMatrix m_;
};

/// Eigenvalues ascending; column k of `vectors` belongs to values[k].
struct EigenSystem {
    std::vector<double> values;
    CMatrix vectors;
};

/// Truncated Fock-space annihilation operator, <k-1|a|k> = sqrt(k).
inline CMatrix annihilation(std::size_t n_levels) {
    if (n_levels == 0) throw std::invalid_argument("annihilation: n_levels must be >= 1");
    CMatrix a(n_levels, n_levels);
    for (std::size_t k = 1; k < n_levels; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("kron: empty operand");
    const std::size_t br = b.rows(), bc = b.cols();
    CMatrix out(a.rows() * br, a.cols() * bc);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const cplx aij = a(i, j);
            if (aij == cplx{}) continue;
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l) out(i * br + k, j * bc + l) = aij * b(k, l);
        }
    return out;
}

inline HermitianMatrix kron(const HermitianMatrix& a, const HermitianMatrix& b) {
    return HermitianMatrix(kron(a.matrix(), b.matrix()));
}

namespace detail {

// Real symmetric tridiagonal matrix plus the Householder reflectors Q with
// A = Q T Q^H.
struct Tridiagonal {
    std::vector<double> diag;
    std::vector<double> offdiag;  // offdiag[i] couples i and i+1
    std::vector<cplx> taus;       // one per reflector, reflector i acts on rows i+1..n-1
    std::vector<std::vector<cplx>> reflectors;

    std::size_t n() const { return diag.size(); }
};

struct Reflector {
    std::vector<cplx> v;  // v[0] == 1; empty when the reflector is the identity
    cplx tau = 0.0;
    double beta = 0.0;  // resulting real subdiagonal entry
};

// Householder reflector H = I - tau v v^H with H^H x = beta e_1, beta real.
inline Reflector make_reflector(std::span<const cplx> x) {
    Reflector r;
    const cplx alpha = x[0];
    double xnorm2 = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) xnorm2 += std::norm(x[i]);
    if (xnorm2 == 0.0 && alpha.imag() == 0.0) {
        r.beta = alpha.real();
        return r;
    }
    r.beta = -std::copysign(std::sqrt(std::norm(alpha) + xnorm2), alpha.real());
    r.tau = (r.beta - alpha) / r.beta;
    const cplx scale = 1.0 / (alpha - r.beta);
    r.v.resize(x.size());
    r.v[0] = 1.0;
    for (std::size_t i = 1; i < x.size(); ++i) r.v[i] = x[i] * scale;
    return r;
}

// Reflector for column k below the diagonal, read from row k (Hermitian).
inline Reflector column_reflector(const CMatrix& a, std::size_t k) {
    const std::size_t n = a.rows();
    std::vector<cplx> x(n - k - 1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::conj(a(k, k + 1 + i));
    return make_reflector(x);
}

// sum_j row[j] * x[j], interleaved real arithmetic
inline cplx dot_row(const cplx* row, const cplx* x, std::size_t m) {
    const double* r = reinterpret_cast<const double*>(row);
    const double* xv = reinterpret_cast<const double*>(x);
    double sr = 0.0, si = 0.0;
#pragma omp simd reduction(+ : sr, si)
    for (std::size_t j = 0; j < m; ++j) {
        const double ar = r[2 * j], ai = r[2 * j + 1];
        const double xr = xv[2 * j], xi = xv[2 * j + 1];
        sr += ar * xr - ai * xi;
        si += ar * xi + ai * xr;
    }
    return {sr, si};
}

// row[j] -= vi conj(w_j) + wi conj(v_j)
inline void rank2_row(cplx* row, cplx vi, cplx wi, const cplx* v, const cplx* w, std::size_t m) {
    double* r = reinterpret_cast<double*>(row);
    const double* vv = reinterpret_cast<const double*>(v);
    const double* wv = reinterpret_cast<const double*>(w);
    const double vr = vi.real(), vim = vi.imag(), wr = wi.real(), wim = wi.imag();
    for (std::size_t j = 0; j < m; ++j) {
        const double cwr = wv[2 * j], cwi = -wv[2 * j + 1];
        const double cvr = vv[2 * j], cvi = -vv[2 * j + 1];
        r[2 * j] -= vr * cwr - vim * cwi + wr * cvr - wim * cvi;
        r[2 * j + 1] -= vr * cwi + vim * cwr + wr * cvi + wim * cvr;
    }
}

// Reduces A to real tridiagonal form. Each step applies the rank-2 update to
// the trailing block and, in the same pass over its rows, forms the
// matrix-vector product needed by the next reflector.
inline Tridiagonal tridiagonalize(CMatrix a) {
    const std::size_t n = a.rows();
    Tridiagonal t;
    t.diag.resize(n);
    t.offdiag.assign(n > 0 ? n - 1 : 0, 0.0);
    if (n == 0) return t;
    t.taus.reserve(n - 1);
    t.reflectors.reserve(n - 1);

    std::vector<cplx> p, w, p_next;
    Reflector cur;
    if (n >= 2) {
        cur = column_reflector(a, 0);
        if (!cur.v.empty()) {
            p.resize(n - 1);
            for (std::size_t i = 1; i < n; ++i) p[i - 1] = dot_row(&a(i, 1), cur.v.data(), n - 1);
        }
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const std::size_t lo = k + 1;
        const std::size_t m = n - lo;
        t.diag[k] = a(k, k).real();
        t.offdiag[k] = cur.beta;

        Reflector next;
        if (cur.v.empty()) {
            if (lo + 1 < n) {
                next = column_reflector(a, lo);
                if (!next.v.empty()) {
                    p_next.resize(m - 1);
                    for (std::size_t i = lo + 1; i < n; ++i)
                        p_next[i - lo - 1] = dot_row(&a(i, lo + 1), next.v.data(), m - 1);
                }
            }
        } else {
            // p = tau A22 v ; w = p - (tau/2)(p^H v) v ; A22 -= v w^H + w v^H
            const cplx tau = cur.tau;
            for (auto& z : p) z *= tau;
            cplx pv = 0.0;
            for (std::size_t i = 0; i < m; ++i) pv += std::conj(p[i]) * cur.v[i];
            const cplx coef = -0.5 * tau * pv;
            w.resize(m);
            for (std::size_t i = 0; i < m; ++i) w[i] = p[i] + coef * cur.v[i];

            rank2_row(&a(lo, lo), cur.v[0], w[0], cur.v.data(), w.data(), m);
            if (lo + 1 < n) {
                next = column_reflector(a, lo);
                if (!next.v.empty()) p_next.resize(m - 1);
            }
            for (std::size_t i = 1; i < m; ++i) {
                cplx* row = &a(lo + i, lo);
                rank2_row(row, cur.v[i], w[i], cur.v.data(), w.data(), m);
                if (!next.v.empty()) p_next[i - 1] = dot_row(row + 1, next.v.data(), m - 1);
            }
        }
        t.taus.push_back(cur.tau);
        t.reflectors.push_back(std::move(cur.v));
        cur = std::move(next);
        std::swap(p, p_next);
    }
    t.diag[n - 1] = a(n - 1, n - 1).real();
    return t;
}

// y <- Q y with Q = H_0 H_1 ... ; H_k = I - tau_k v_k v_k^H acting on rows k+1..
inline void apply_q(const Tridiagonal& t, std::span<cplx> y) {
    for (std::size_t kk = t.reflectors.size(); kk-- > 0;) {
        const auto& v = t.reflectors[kk];
        const cplx tau = t.taus[kk];
        if (v.empty() || tau == cplx{}) continue;
        const std::size_t off = kk + 1;
        cplx s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += std::conj(v[i]) * y[off + i];
        s *= tau;
        for (std::size_t i = 0; i < v.size(); ++i) y[off + i] -= s * v[i];
    }
}

// Implicit-shift QL on a symmetric tridiagonal matrix. When `z` is non-null it
// holds n rows; rotations mix rows so that row k ends as eigenvector k.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double> e, std::vector<double>* z) {
    const std::size_t n = d.size();
    if (n <= 1) return;
    e.push_back(0.0);
    constexpr int max_iter = 60;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (iter++ == max_iter)
                    throw NumericalError("eigh: implicit QL failed to converge", iter);
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                std::size_t i = m;
                bool underflow = false;
                while (i-- > l) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if (z) {
                        double* zi = z->data() + i * n;
                        double* zi1 = z->data() + (i + 1) * n;
                        for (std::size_t k = 0; k < n; ++k) {
                            f = zi1[k];
                            zi1[k] = s * zi[k] + c * f;
                            zi[k] = c * zi[k] - s * f;
                        }
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

// Solves (T - shift) x = b in place with a pivoted LU of the tridiagonal.
class ShiftedTridiagonalLU {
public:
    ShiftedTridiagonalLU(const std::vector<double>& d, const std::vector<double>& e, double shift, double tiny)
        : n_(d.size()), dl_(n_), dd_(n_), du_(n_), du2_(n_), piv_(n_, false) {
        for (std::size_t i = 0; i < n_; ++i) dd_[i] = d[i] - shift;
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            dl_[i] = e[i];
            du_[i] = e[i];
        }
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (std::abs(dd_[i]) >= std::abs(dl_[i])) {
                if (dd_[i] == 0.0) dd_[i] = tiny;
                const double fact = dl_[i] / dd_[i];
                dl_[i] = fact;
                dd_[i + 1] -= fact * du_[i];
                du2_[i] = 0.0;
            } else {
                const double fact = dd_[i] / dl_[i];
                dd_[i] = dl_[i];
                dl_[i] = fact;
                const double temp = du_[i];
                du_[i] = dd_[i + 1];
                dd_[i + 1] = temp - fact * dd_[i + 1];
                if (i + 2 < n_) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -fact * du_[i + 1];
                } else {
                    du2_[i] = 0.0;
                }
                piv_[i] = true;
            }
        }
        for (auto& x : dd_)
            if (std::abs(x) < tiny) x = std::copysign(tiny, x == 0.0 ? 1.0 : x);
    }

    void solve(std::vector<double>& b) const {
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (piv_[i]) {
                const double temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl_[i] * b[i];
            } else {
                b[i + 1] -= dl_[i] * b[i];
            }
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = b[i];
            if (i + 1 < n_) s -= du_[i] * b[i + 1];
            if (i + 2 < n_) s -= du2_[i] * b[i + 2];
            b[i] = s / dd_[i];
        }
    }

private:
    std::size_t n_;
    std::vector<double> dl_, dd_, du_, du2_;
    std::vector<bool> piv_;
};

inline double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Eigenvectors of T for the sorted eigenvalues `w` (all selected), by inverse
// iteration with Gram-Schmidt inside clusters. Rows of the result are vectors.
inline std::vector<std::vector<double>> tridiagonal_inverse_iteration(const std::vector<double>& d,
                                                                      const std::vector<double>& e,
                                                                      const std::vector<double>& w) {
    const std::size_t n = d.size();
    double tnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = std::abs(d[i]);
        if (i > 0) s += std::abs(e[i - 1]);
        if (i + 1 < n) s += std::abs(e[i]);
        tnorm = std::max(tnorm, s);
    }
    if (tnorm == 0.0) tnorm = 1.0;
    const double eps = std::numeric_limits<double>::epsilon();
    const double ortol = 1e-3 * tnorm;
    const double pertol = 10.0 * eps * tnorm;
    const double tiny = eps * tnorm;

    std::vector<std::vector<double>> out;
    out.reserve(w.size());
    std::size_t cluster_start = 0;
    double prev_shift = 0.0;
    std::uint64_t state = 0x9E3779B97F4A7C15ULL;
    auto next_uniform = [&state]() {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0) - 0.5;
    };

    for (std::size_t j = 0; j < w.size(); ++j) {
        double shift = w[j];
        if (j > 0) {
            if (w[j] - w[j - 1] > ortol) cluster_start = j;
            if (shift - prev_shift < pertol) shift = prev_shift + pertol;
        }
        prev_shift = shift;

        ShiftedTridiagonalLU lu(d, e, shift, tiny);
        std::vector<double> x(n);
        for (auto& v : x) v = next_uniform();
        for (int it = 0; it < 4; ++it) {
            const double xn = norm2(x);
            for (auto& v : x) v /= xn;
            lu.solve(x);
            for (std::size_t c = cluster_start; c < j; ++c) {
                const auto& q = out[c];
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += q[i] * x[i];
                for (std::size_t i = 0; i < n; ++i) x[i] -= dot * q[i];
            }
        }
        const double xn = norm2(x);
        if (!(xn > 0.0) || !std::isfinite(xn)) throw NumericalError("eigh: inverse iteration broke down", 4);
        for (auto& v : x) v /= xn;
        // Sign convention: largest component positive.
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(x[i]) > std::abs(x[imax])) imax = i;
        if (x[imax] < 0.0)
            for (auto& v : x) v = -v;
        out.push_back(std::move(x));
    }
    return out;
}

inline void check_finite(const HermitianMatrix& h) {
    for (const auto& z : h.matrix().data())
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw std::invalid_argument("eigh: non-finite matrix entry");
}

}  // namespace detail

/// All eigenvalues, ascending.
inline std::vector<double> eigvalsh(const HermitianMatrix& h) {
    detail::check_finite(h);
    auto t = detail::tridiagonalize(h.matrix());
    detail::tridiagonal_ql(t.diag, t.offdiag, nullptr);
    std::sort(t.diag.begin(), t.diag.end());
    return t.diag;
}

/// Full eigendecomposition.
inline EigenSystem eigh(const HermitianMatrix& h) {
    detail::check_finite(h);
    const std::size_t n = h.dim();
    auto t = detail::tridiagonalize(h.matrix());
    std::vector<double> z(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
    std::vector<double> d = t.diag;
    detail::tridiagonal_ql(d, t.offdiag, &z);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

    EigenSystem es;
    es.values.resize(n);
    es.vectors = CMatrix(n, n);
    std::vector<cplx> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        es.values[k] = d[src];
        for (std::size_t i = 0; i < n; ++i) y[i] = z[src * n + i];
        detail::apply_q(t, y);
        for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) = y[i];
    }
    return es;
}

/// The `count` lowest eigenpairs (all eigenvalues are computed, vectors only
/// for the requested ones).
inline EigenSystem eigh_lowest(const HermitianMatrix& h, std::size_t count) {
    detail::check_finite(h);
    const std::size_t n = h.dim();
    count = std::min(count, n);
    auto t = detail::tridiagonalize(h.matrix());
    std::vector<double> w = t.diag;
    detail::tridiagonal_ql(w, t.offdiag, nullptr);
    std::sort(w.begin(), w.end());
    w.resize(count);

    const auto zs = detail::tridiagonal_inverse_iteration(t.diag, t.offdiag, w);
    EigenSystem es;
    es.values = w;
    es.vectors = CMatrix(n, count);
    std::vector<cplx> y(n);
    for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t i = 0; i < n; ++i) y[i] = zs[k][i];
        detail::apply_q(t, y);
        for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) = y[i];
    }
    return es;
}

}  // namespace musc
