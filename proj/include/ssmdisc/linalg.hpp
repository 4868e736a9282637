#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ssmdisc/errors.hpp"
#include "ssmdisc/matrix.hpp"

namespace ssmdisc {

/// Largest supported phi order: HOH caps at n = 7, which needs phi_8.
inline constexpr std::size_t kMaxPhiOrder = 8;

namespace detail {

inline void require_square_finite(const DenseMatrix& m, const char* who) {
    if (!m.square())
        throw std::invalid_argument(std::string(who) + ": matrix must be square");
    if (!m.all_finite())
        throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

}  // namespace detail

/// LU factorization with partial pivoting. Factor once, solve many right-hand
/// sides; solves are polished with iterative refinement using long-double
/// residual accumulation.
class LinearSolver {
public:
    explicit LinearSolver(const DenseMatrix& m) : lu_(m), piv_(m.rows()) {
        detail::require_square_finite(m, "LinearSolver");
        const std::size_t n = m.rows();
        original_ = m;
        const double pivot_tol = 1e-13 * inf_norm(m);
        for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                const double v = std::abs(lu_(i, k));
                if (v > best) { best = v; p = i; }
            }
            if (best < pivot_tol || best == 0.0)
                throw SingularMatrixError("LinearSolver: matrix singular to tolerance");
            if (p != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
                std::swap(piv_[k], piv_[p]);
            }
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double l = lu_(i, k) * inv;
                lu_(i, k) = l;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
            }
        }
    }

    std::size_t dim() const { return lu_.rows(); }

    DenseMatrix solve(const DenseMatrix& rhs) const {
        if (rhs.rows() != dim())
            throw std::invalid_argument("LinearSolver::solve: RHS row count mismatch");
        DenseMatrix x = solve_raw(rhs);
        refine(rhs, x);
        return x;
    }

private:
    DenseMatrix solve_raw(const DenseMatrix& rhs) const {
        const std::size_t n = dim(), m = rhs.cols();
        DenseMatrix x(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) x(i, j) = rhs(piv_[i], j);
        for (std::size_t k = 0; k < n; ++k)           // forward, unit lower
            for (std::size_t i = k + 1; i < n; ++i) {
                const double l = lu_(i, k);
                if (l == 0.0) continue;
                for (std::size_t j = 0; j < m; ++j) x(i, j) -= l * x(k, j);
            }
        for (std::size_t k = n; k-- > 0;) {           // backward, upper
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t j = 0; j < m; ++j) x(k, j) *= inv;
            for (std::size_t i = 0; i < k; ++i) {
                const double u = lu_(i, k);
                if (u == 0.0) continue;
                for (std::size_t j = 0; j < m; ++j) x(i, j) -= u * x(k, j);
            }
        }
        return x;
    }

    void refine(const DenseMatrix& rhs, DenseMatrix& x) const {
        const std::size_t n = dim(), m = rhs.cols();
        const double target = 0.5e-10 * std::max(inf_norm(rhs),
                                                 std::numeric_limits<double>::min());
        double prev = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 3; ++iter) {
            DenseMatrix r(n, m);
            double rnorm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double row_abs = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    long double acc = rhs(i, j);
                    for (std::size_t k = 0; k < n; ++k)
                        acc -= static_cast<long double>(original_(i, k)) * x(k, j);
                    r(i, j) = static_cast<double>(acc);
                    row_abs += std::abs(r(i, j));
                }
                rnorm = std::max(rnorm, row_abs);
            }
            if (rnorm <= target || rnorm >= prev) break;
            prev = rnorm;
            x += solve_raw(r);
        }
    }

    DenseMatrix lu_;
    DenseMatrix original_;
    std::vector<std::size_t> piv_;
};

/// X with M·X = RHS via partially pivoted LU.
inline DenseMatrix linear_solve(const DenseMatrix& m, const DenseMatrix& rhs) {
    return LinearSolver(m).solve(rhs);
}

/// e^M by scaling-and-squaring with the degree-13 Pade approximant; the input
/// is scaled so the 1-norm drops to <= 0.5 before the rational evaluation.
inline DenseMatrix mat_exp(const DenseMatrix& m) {
    detail::require_square_finite(m, "mat_exp");
    const std::size_t n = m.rows();
    const DenseMatrix eye = DenseMatrix::identity(n);

    int s = 0;
    const double nrm = one_norm(m);
    if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    DenseMatrix a = m * std::ldexp(1.0, -s);

    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};

    const DenseMatrix a2 = a * a;
    const DenseMatrix a4 = a2 * a2;
    const DenseMatrix a6 = a2 * a4;
    const DenseMatrix u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
             b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye);
    const DenseMatrix v =
        a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
        b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye;

    DenseMatrix f = LinearSolver(v - u).solve(v + u);
    for (int i = 0; i < s; ++i) f = f * f;
    return f;
}

/// phi_0(M) .. phi_k(M) from a single exponential of the augmented block
/// matrix [[M, I, 0, ...], [0, 0, I, ...], ...]: block (0, j) of its
/// exponential is phi_j(M). Defined for singular M; no inverses involved.
inline std::vector<DenseMatrix> phi_family(std::size_t k, const DenseMatrix& m) {
    detail::require_square_finite(m, "phi_family");
    if (k > kMaxPhiOrder)
        throw std::invalid_argument("phi_family: order exceeds supported maximum");
    const std::size_t n = m.rows();
    if (k == 0) return {mat_exp(m)};

    DenseMatrix w((k + 1) * n, (k + 1) * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w(i, j) = m(i, j);
    for (std::size_t blk = 0; blk < k; ++blk)
        for (std::size_t i = 0; i < n; ++i) w(blk * n + i, (blk + 1) * n + i) = 1.0;

    const DenseMatrix e = mat_exp(w);
    std::vector<DenseMatrix> out;
    out.reserve(k + 1);
    for (std::size_t blk = 0; blk <= k; ++blk) {
        DenseMatrix p(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p(i, j) = e(i, blk * n + j);
        out.push_back(std::move(p));
    }
    return out;
}

/// phi_k(M) = sum_{j>=0} M^j / (j+k)!.
inline DenseMatrix phi(std::size_t k, const DenseMatrix& m) {
    return phi_family(k, m).back();
}

namespace detail {

// Householder reduction to upper Hessenberg form, in place.
inline void hessenberg(DenseMatrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    std::vector<double> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm += a(i, k) * a(i, k);
        xnorm = std::sqrt(xnorm);
        if (xnorm == 0.0) continue;
        const double x0 = a(k + 1, k);
        const double alpha = (x0 >= 0.0) ? -xnorm : xnorm;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = a(i, k);
            if (i == k + 1) v[i] -= alpha;
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        const double scale = 2.0 / vnorm2;
        // left: A <- (I - s v v^T) A over rows k+1..n-1
        for (std::size_t j = k; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) dot += v[i] * a(i, j);
            dot *= scale;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= dot * v[i];
        }
        // right: A <- A (I - s v v^T) over cols k+1..n-1
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) dot += a(i, j) * v[j];
            dot *= scale;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= dot * v[j];
        }
        a(k + 1, k) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix; returns eigenvalues
// as (re, im) pairs. Destroys its input. Classic hqr structure with
// exceptional shifts and a fixed per-eigenvalue sweep budget.
inline std::vector<std::pair<double, double>> hessenberg_qr(DenseMatrix& a) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows());
    std::vector<std::pair<double, double>> eig(n);
    auto A = [&a](std::ptrdiff_t i, std::ptrdiff_t j) -> double& {
        return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };

    double anorm = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i)
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(i - 1, 0); j < n; ++j)
            anorm += std::abs(A(i, j));

    std::ptrdiff_t nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        std::ptrdiff_t l;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(A(l, l - 1)) <= eps * s) {
                    A(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 0) l = 0;
            double x = A(nn, nn);
            if (l == nn) {
                eig[nn] = {x + t, 0.0};
                --nn;
            } else {
                double y = A(nn - 1, nn - 1);
                double w = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    double p = 0.5 * (y - x);
                    double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + (p >= 0.0 ? z : -z);
                        eig[nn - 1] = {x + z, 0.0};
                        eig[nn] = (z != 0.0) ? std::pair{x - w / z, 0.0}
                                             : std::pair{x + z, 0.0};
                    } else {
                        eig[nn - 1] = {x + p, z};
                        eig[nn] = {x + p, -z};
                    }
                    nn -= 2;
                } else {
                    if (its == 30)
                        throw ConvergenceError(
                            "spectral_radius: QR iteration exceeded sweep budget");
                    if (its == 10 || its == 20) {
                        t += x;
                        for (std::ptrdiff_t i = 0; i <= nn; ++i) A(i, i) -= x;
                        double s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    std::ptrdiff_t m;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (m = nn - 2; m >= l; --m) {
                        z = A(m, m);
                        double rr = x - z;
                        double ss = y - z;
                        p = (rr * ss - w) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - rr - ss;
                        r = A(m + 2, m + 1);
                        double scale = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= scale; q /= scale; r /= scale;
                        if (m == l) break;
                        const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(A(m - 1, m - 1)) +
                                                        std::abs(z) + std::abs(A(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (std::ptrdiff_t i = m + 2; i <= nn; ++i) {
                        A(i, i - 2) = 0.0;
                        if (i != m + 2) A(i, i - 3) = 0.0;
                    }
                    for (std::ptrdiff_t k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = (k + 1 != nn) ? A(k + 2, k - 1) : 0.0;
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) { p /= x; q /= x; r /= x; }
                        }
                        double s = std::sqrt(p * p + q * q + r * r);
                        if (p < 0.0) s = -s;
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) A(k, k - 1) = -A(k, k - 1);
                        } else {
                            A(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        double yy = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (std::ptrdiff_t j = k; j <= nn; ++j) {
                            double pp = A(k, j) + q * A(k + 1, j);
                            if (k + 1 != nn) {
                                pp += r * A(k + 2, j);
                                A(k + 2, j) -= pp * z;
                            }
                            A(k + 1, j) -= pp * yy;
                            A(k, j) -= pp * x;
                        }
                        const std::ptrdiff_t mmin = std::min(nn, k + 3);
                        for (std::ptrdiff_t i = l; i <= mmin; ++i) {
                            double pp = x * A(i, k) + yy * A(i, k + 1);
                            if (k + 1 != nn) {
                                pp += z * A(i, k + 2);
                                A(i, k + 2) -= pp * r;
                            }
                            A(i, k + 1) -= pp * q;
                            A(i, k) -= pp;
                        }
                    }
                }
            }
        } while (nn >= 0 && l < nn - 1);
    }
    return eig;
}

}  // namespace detail

/// All eigenvalues (possibly complex) via Hessenberg reduction + shifted QR.
inline std::vector<std::pair<double, double>> eigenvalues(const DenseMatrix& m) {
    detail::require_square_finite(m, "eigenvalues");
    const std::size_t n = m.rows();
    if (n == 1) return {{m(0, 0), 0.0}};
    DenseMatrix h = m;
    detail::hessenberg(h);
    return detail::hessenberg_qr(h);
}

/// Max |lambda| over the spectrum.
inline double spectral_radius(const DenseMatrix& m) {
    double best = 0.0;
    for (const auto& [re, im] : eigenvalues(m)) best = std::max(best, std::hypot(re, im));
    return best;
}

/// Scalar phi family: phi_0(z) .. phi_k(z) for one real argument. Fills the
/// row [e^w, t^j phi_j(w t)] of the augmented flow at t = 2^-s by series
/// (all terms then shrink geometrically) and squares the upper-triangular
/// flow matrix back up; every entry is positive, so no cancellation occurs.
inline std::array<double, kMaxPhiOrder + 1> phi_family_scalar(std::size_t k, double z) {
    if (k > kMaxPhiOrder)
        throw std::invalid_argument("phi_family_scalar: order exceeds supported maximum");
    if (!std::isfinite(z))
        throw std::invalid_argument("phi_family_scalar: non-finite argument");

    std::array<double, kMaxPhiOrder + 1> out{};
    int s = 0;
    if (std::abs(z) > 0.5) s = static_cast<int>(std::ceil(std::log2(std::abs(z) / 0.5)));
    const double t = std::ldexp(1.0, -s);
    const double w = z * t;

    const std::size_t dim = k + 1;
    std::array<std::array<double, kMaxPhiOrder + 1>, kMaxPhiOrder + 1> e{};
    e[0][0] = std::exp(w);
    double tpow = 1.0;
    for (std::size_t j = 1; j <= k; ++j) {
        tpow *= t;
        double term = 1.0, sum = 0.0, fac = 1.0;
        for (std::size_t i = 1; i <= j; ++i) fac *= static_cast<double>(i);
        term = 1.0 / fac;
        for (int m = 0;; ++m) {
            sum += term;
            term *= w / static_cast<double>(m + 1 + j);
            if (std::abs(term) < 1e-20 * std::abs(sum) || m > 60) break;
        }
        e[0][j] = tpow * sum;
    }
    for (std::size_t i = 1; i < dim; ++i) {
        double f = 1.0, tp = 1.0;
        for (std::size_t j = i; j < dim; ++j) {
            e[i][j] = tp / f;
            tp *= t;
            f *= static_cast<double>(j - i + 1);
        }
    }
    for (int step = 0; step < s; ++step) {
        std::array<std::array<double, kMaxPhiOrder + 1>, kMaxPhiOrder + 1> sq{};
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i; j < dim; ++j) {
                double acc = 0.0;
                for (std::size_t l = i; l <= j; ++l) acc += e[i][l] * e[l][j];
                sq[i][j] = acc;
            }
        e = sq;
    }
    for (std::size_t j = 0; j <= k; ++j) out[j] = e[0][j];
    return out;
}

/// phi_1(z) = (e^z - 1)/z, accurate for all z via expm1.
inline double phi1_scalar(double z) {
    return (z == 0.0) ? 1.0 : std::expm1(z) / z;
}

}  // namespace ssmdisc
