#pragma once

// Small dense matrix/vector kernels sized for observer design work
// (n_z <= 10 or so): Lyapunov solve via the Kronecker linear system,
// cyclic Jacobi eigendecomposition, certified spectral-norm bounds and
// the Gamma(P) residual-amplification factor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kkl/errors.hpp"

namespace kkl {

using Vec = std::vector<double>;

inline double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// y += a*x
inline void axpy(double a, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(Vec& x, double a) {
    for (double& v : x) v *= a;
}

inline Vec operator-(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
    return r;
}

inline Vec operator+(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
    return r;
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

// Row-major dense matrix.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    Vec a;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static DenseMatrix diag(const Vec& d) {
        DenseMatrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (int i = 0; i < m.rows; ++i) m(i, i) = d[i];
        return m;
    }

    Vec diagonal() const {
        Vec d(std::min(rows, cols));
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(static_cast<int>(i), static_cast<int>(i));
        return d;
    }
};

inline Vec matvec(const DenseMatrix& m, const Vec& x) {
    Vec y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = &m.a[static_cast<std::size_t>(i) * m.cols];
        for (int j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

inline double frobenius_norm(const DenseMatrix& m) { return norm2(m.a); }

// max column absolute sum
inline double norm_1(const DenseMatrix& m) {
    double best = 0.0;
    for (int j = 0; j < m.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.rows; ++i) s += std::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

// max row absolute sum
inline double norm_inf(const DenseMatrix& m) {
    double best = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += std::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

inline bool is_symmetric(const DenseMatrix& m, double tol = 1e-12) {
    if (m.rows != m.cols) return false;
    const double scale = std::max(1.0, frobenius_norm(m));
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

// Solve the dense square system a*x = b by Gaussian elimination with
// partial pivoting. Throws numeric_error on a (numerically) singular system.
inline Vec gauss_solve(DenseMatrix a, Vec b) {
    const int n = a.rows;
    if (a.cols != n || static_cast<int>(b.size()) != n)
        throw config_error("gauss_solve: dimension mismatch");
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a(k, k));
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                piv = i;
            }
        }
        if (best < 1e-300) throw numeric_error("gauss_solve: singular system");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

// Solve P*A + A^T*P = -Q for symmetric P, posed as the n^2 x n^2 Kronecker
// system (I (x) A^T + A^T (x) I) vec(P) = -vec(Q). Throws when the spectrum
// of A makes the pairing lambda_i + lambda_j singular (A not Hurwitz etc.).
inline DenseMatrix solve_lyapunov(const DenseMatrix& a, const DenseMatrix& q) {
    const int n = a.rows;
    if (a.cols != n || q.rows != n || q.cols != n)
        throw config_error("solve_lyapunov: dimension mismatch");
    const int nn = n * n;
    DenseMatrix sys(nn, nn);
    // Row-major vec(P): entry (i,j) -> index i*n+j.
    // (P*A)_{ij} = sum_k P_{ik} A_{kj};  (A^T*P)_{ij} = sum_k A_{ki} P_{kj}.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int r = i * n + j;
            for (int k = 0; k < n; ++k) {
                sys(r, i * n + k) += a(k, j);
                sys(r, k * n + j) += a(k, i);
            }
        }
    Vec rhs(nn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) rhs[i * n + j] = -q(i, j);
    Vec p;
    try {
        p = gauss_solve(sys, rhs);
    } catch (const numeric_error&) {
        throw numeric_error("solve_lyapunov: no solution (A not Hurwitz or eigenvalue pairing singular)");
    }
    DenseMatrix result(n, n);
    result.a = p;
    // symmetrize roundoff
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            const double v = 0.5 * (result(i, j) + result(j, i));
            result(i, j) = result(j, i) = v;
        }
    return result;
}

struct EigenDecomposition {
    Vec values;          // ascending
    DenseMatrix vectors; // columns match values
};

// Cyclic Jacobi rotations for a symmetric matrix, iterated until the
// off-diagonal Frobenius norm drops below 1e-12 * ||M||_F.
inline EigenDecomposition jacobi_eigen(DenseMatrix m) {
    if (!is_symmetric(m, 1e-10))
        throw config_error("jacobi_eigen: matrix not symmetric");
    const int n = m.rows;
    DenseMatrix v = DenseMatrix::identity(n);
    const double total = std::max(frobenius_norm(m), 1e-300);
    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += m(i, j) * m(i, j);
        return std::sqrt(s);
    };
    for (int sweep = 0; sweep < 100 && off_norm() > 1e-12 * total; ++sweep) {
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(m(p, q)) < 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    EigenDecomposition ed;
    ed.values = m.diagonal();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return ed.values[i] < ed.values[j]; });
    Vec sorted(n);
    DenseMatrix sorted_v(n, n);
    for (int j = 0; j < n; ++j) {
        sorted[j] = ed.values[order[j]];
        for (int i = 0; i < n; ++i) sorted_v(i, j) = v(i, order[j]);
    }
    ed.values = std::move(sorted);
    ed.vectors = std::move(sorted_v);
    return ed;
}

inline Vec sym_eigenvalues(const DenseMatrix& m) { return jacobi_eigen(m).values; }

struct SpectralNormBound {
    double upper = 0.0;    // certified: sqrt(||M||_1 * ||M||_inf) >= ||M||_2
    double witness = 0.0;  // power-iteration lower estimate
};

// Certified upper bound on the operator 2-norm plus a sampled lower witness.
// The witness comes from 50 power iterations on M^T M from a fixed
// pseudo-random start, so the pair brackets ||M||_2 deterministically.
inline SpectralNormBound spectral_norm_upper(const DenseMatrix& m) {
    SpectralNormBound out;
    out.upper = std::sqrt(norm_1(m) * norm_inf(m));
    Vec x(m.cols);
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    for (double& v : x) {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        v = static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0) - 0.5;
    }
    if (norm2(x) == 0.0) x.assign(m.cols, 1.0);
    const DenseMatrix mt = transpose(m);
    for (int it = 0; it < 50; ++it) {
        Vec y = matvec(mt, matvec(m, x));
        const double ny = norm2(y);
        if (ny == 0.0) return out;  // M x = 0; witness 0 is valid
        scale(y, 1.0 / ny);
        x = std::move(y);
    }
    out.witness = norm2(matvec(m, x));
    return out;
}

// Exact operator 2-norm of a small fixed matrix via the Gram matrix spectrum.
// Used for the design constants ||Q^{-1/2}P|| style factors where the
// sqrt(norm1*norminf) over-bound would needlessly inflate the certificate.
inline double norm2_exact(const DenseMatrix& m) {
    const DenseMatrix mt = transpose(m);
    const DenseMatrix gram = (m.rows <= m.cols) ? matmul(m, mt) : matmul(mt, m);
    const Vec ev = sym_eigenvalues(gram);
    return std::sqrt(std::max(0.0, ev.back()));
}

// Observer-coordinate design: Hurwitz diagonal A, input matrix B, and a
// Lyapunov pair (P, Q) with P A + A^T P = -Q. gamma caches Gamma(P); when
// the design was built with the optimal choice P = cI it equals
// 1 / lambda_min(A)^2.
struct ObserverDesign {
    DenseMatrix A;
    DenseMatrix B;
    DenseMatrix P;
    DenseMatrix Q;
    double gamma = 0.0;
    bool optimized_gamma = true;

    int nz() const { return A.rows; }
    int ny() const { return B.cols; }

    // smallest |Re lambda| of the diagonal A
    double lambda_min_abs() const {
        double m = std::abs(A(0, 0));
        for (int i = 1; i < A.rows; ++i) m = std::min(m, std::abs(A(i, i)));
        return m;
    }
};

inline void validate_design(const ObserverDesign& d) {
    if (d.A.rows != d.A.cols) throw config_error("design: A must be square");
    if (d.B.rows != d.A.rows) throw config_error("design: B row count must match A");
    for (int i = 0; i < d.A.rows; ++i)
        for (int j = 0; j < d.A.cols; ++j) {
            if (i == j && d.A(i, i) >= 0.0)
                throw config_error("design: A diagonal entries must be strictly negative");
            if (i != j && d.A(i, j) != 0.0)
                throw config_error("design: A must be diagonal");
        }
    // Lyapunov residual || P A + A^T P + Q ||_F <= 1e-10 ||Q||_F
    DenseMatrix res = matmul(d.P, d.A);
    const DenseMatrix atp = matmul(transpose(d.A), d.P);
    for (std::size_t i = 0; i < res.a.size(); ++i) res.a[i] += atp.a[i] + d.Q.a[i];
    if (frobenius_norm(res) > 1e-10 * frobenius_norm(d.Q))
        throw config_error("design: Lyapunov residual too large");
}

// Build the default design for diagonal A: P = I (the Remark-level optimal
// P = cI with c = 1), hence Q = -(A + A^T) = -2A.
inline ObserverDesign make_design(const Vec& a_diag, const DenseMatrix& b) {
    ObserverDesign d;
    d.A = DenseMatrix::diag(a_diag);
    d.B = b;
    d.P = DenseMatrix::identity(d.A.rows);
    d.Q = DenseMatrix::diag([&] {
        Vec q(a_diag.size());
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = -2.0 * a_diag[i];
        return q;
    }());
    d.optimized_gamma = true;
    const double lm = d.lambda_min_abs();
    d.gamma = 1.0 / (lm * lm);
    validate_design(d);
    return d;
}

// Design with a caller-chosen Q; P from the Lyapunov solve. Exposes the raw
// (non-optimal) Gamma(P).
inline ObserverDesign make_design_with_q(const Vec& a_diag, const DenseMatrix& b,
                                         const DenseMatrix& q) {
    ObserverDesign d;
    d.A = DenseMatrix::diag(a_diag);
    d.B = b;
    d.Q = q;
    d.P = solve_lyapunov(d.A, q);
    d.optimized_gamma = false;
    d.gamma = 0.0;  // filled below
    validate_design(d);
    return d;
}

// Q^{-1/2} via the spectral decomposition of Q.
inline DenseMatrix inverse_sqrt(const DenseMatrix& q) {
    const EigenDecomposition ed = jacobi_eigen(q);
    if (ed.values.front() <= 0.0)
        throw numeric_error("inverse_sqrt: matrix not positive definite");
    const int n = q.rows;
    DenseMatrix scaled(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            scaled(i, j) = ed.vectors(i, j) / std::sqrt(ed.values[j]);
    return matmul(scaled, transpose(ed.vectors));
}

// Gamma(P) = 4 lambda_max(P) / (lambda_min(Q) lambda_min(P)) * ||Q^{-1/2}P||^2
// evaluated for the stored pair, with the certified norm bound.
inline double gamma_raw(const ObserverDesign& d) {
    const Vec ep = sym_eigenvalues(d.P);
    const Vec eq = sym_eigenvalues(d.Q);
    const double nqp = spectral_norm_upper(matmul(inverse_sqrt(d.Q), d.P)).upper;
    return 4.0 * ep.back() / (eq.front() * ep.front()) * nqp * nqp;
}

// Residual-amplification factor used in the bounds: the optimal
// 1/lambda_min(A)^2 for designs built with P = cI, the raw evaluation
// otherwise.
inline double gamma_factor(const ObserverDesign& d) {
    if (d.optimized_gamma) {
        const double lm = d.lambda_min_abs();
        return 1.0 / (lm * lm);
    }
    return gamma_raw(d);
}

}  // namespace kkl
