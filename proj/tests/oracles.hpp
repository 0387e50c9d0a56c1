// oracles.hpp - Independent reference implementations used only by the tests
//
// Each oracle reaches its answer by a different route than the library: dense
// Kronecker-product generators, the free-space Green tensor, sphere quadrature,
// transfer matrices and index-loop partial transposes.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ote/constants.hpp"
#include "ote/master.hpp"
#include "ote/slab_optics.hpp"

namespace oracle {

using ote::cplx;
using ote::DenseMatrix;
inline constexpr cplx I{0.0, 1.0};

// sigma^- on qubit i of N (qubit i is bit N-1-i, 1 = excited).
inline DenseMatrix lowering(std::size_t n, std::size_t i) {
    const std::size_t d = std::size_t{1} << n;
    const std::size_t bit = std::size_t{1} << (n - 1 - i);
    DenseMatrix s = DenseMatrix::Zero(Eigen::Index(d), Eigen::Index(d));
    for (std::size_t b = 0; b < d; ++b) {
        if (b & bit) {
            s(Eigen::Index(b & ~bit), Eigen::Index(b)) = 1.0;
        }
    }
    return s;
}

inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return k;
}

// Dense 4^N generator of
//   d rho/dt = -i [H, rho] + sum G+_ij (s-_j rho s+_i - {s+_i s-_j, rho}/2)
//            + sum G-_ij (s+_j rho s-_i - {s-_i s+_j, rho}/2),
//   H = w0 sum s+_i s-_i + sum_{i != j} L_ij s+_i s-_j,
// acting on column-major vec(rho), using vec(A X B) = (B^T kron A) vec(X).
inline DenseMatrix lindblad_generator(const ote::RateSet& r, double omega0, std::size_t n) {
    const auto d = Eigen::Index(std::size_t{1} << n);
    const DenseMatrix id = DenseMatrix::Identity(d, d);
    std::vector<DenseMatrix> sm(n);
    std::vector<DenseMatrix> sp(n);
    for (std::size_t i = 0; i < n; ++i) {
        sm[i] = lowering(n, i);
        sp[i] = sm[i].adjoint();
    }
    DenseMatrix h = DenseMatrix::Zero(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        h += omega0 * sp[i] * sm[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                h += r.lambda(Eigen::Index(i), Eigen::Index(j)) * sp[i] * sm[j];
            }
        }
    }
    DenseMatrix l = -I * (kron(id, h) - kron(h.transpose(), id));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const cplx gp = r.gamma_plus(Eigen::Index(i), Eigen::Index(j));
            const cplx gm = r.gamma_minus(Eigen::Index(i), Eigen::Index(j));
            const DenseMatrix up = sp[i] * sm[j];
            const DenseMatrix dn = sm[i] * sp[j];
            l += gp * (kron(sp[i].transpose(), sm[j]) - 0.5 * kron(id, up) - 0.5 * kron(up.transpose(), id));
            l += gm * (kron(sm[i].transpose(), sp[j]) - 0.5 * kron(id, dn) - 0.5 * kron(dn.transpose(), id));
        }
    }
    return l;
}

inline DenseMatrix apply_generator(const DenseMatrix& l, const DenseMatrix& rho) {
    const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho.data(), rho.size());
    const Eigen::VectorXcd out = l * v;
    return Eigen::Map<const DenseMatrix>(out.data(), rho.rows(), rho.cols());
}

// Free-space dyadic Green tensor (SI, without the mu0 omega^2 prefactor):
// G(R) = e^{ikR}/(4 pi R) [(1 + i/kR - 1/(kR)^2) I + (-1 - 3i/kR + 3/(kR)^2) R^R^].
inline Eigen::Matrix3cd green_tensor(const Eigen::Vector3d& r, double k) {
    const double dist = r.norm();
    const double x = k * dist;
    const Eigen::Vector3d u = r / dist;
    const cplx pre = std::exp(I * x) / (4.0 * ote::constants::pi * dist);
    const cplx a = 1.0 + I / x - 1.0 / (x * x);
    const cplx b = -1.0 - 3.0 * I / x + 3.0 / (x * x);
    return pre * (a * Eigen::Matrix3cd::Identity() + b * (u * u.transpose()).cast<cplx>());
}

// Free-space response function (6 pi / k) Im(d_i^* . G . d_j), real dipoles.
inline double free_alpha_green(const Eigen::Vector3d& r, double k, const Eigen::Vector3d& di,
                               const Eigen::Vector3d& dj) {
    const cplx v = di.cast<cplx>().dot(green_tensor(r, k) * dj.cast<cplx>());
    return 6.0 * ote::constants::pi / k * v.imag();
}

// Free-space coherent coupling -(3 pi / k) sqrt(G0_i G0_j) Re(d_i . G . d_j), real dipoles.
inline double free_lambda_green(const Eigen::Vector3d& r, double k, const Eigen::Vector3d& di,
                                const Eigen::Vector3d& dj, double gamma0) {
    const cplx v = di.cast<cplx>().dot(green_tensor(r, k) * dj.cast<cplx>());
    return -3.0 * ote::constants::pi / k * gamma0 * v.real();
}

// Free-space response by direct 2D quadrature over outgoing directions:
// (3 / 8 pi) int dOmega [d_i^*.d_j - (d_i^*.n)(n.d_j)] e^{i k n.R}.
inline cplx free_alpha_sphere(const Eigen::Vector3d& r, double k, const Eigen::Vector3cd& di,
                              const Eigen::Vector3cd& dj) {
    using boost::math::quadrature::gauss;
    constexpr double pi = ote::constants::pi;
    // Panels keep the oscillation e^{i k n.R} resolved in both angles.
    const std::size_t panels = 8 + std::size_t(k * r.norm());
    auto inner = [&](double theta) {
        auto f = [&](double phi) {
            const Eigen::Vector3d n(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
            const cplx ang = di.dot(dj) - di.dot(n.cast<cplx>()) * n.cast<cplx>().dot(dj);
            const cplx v = ang * std::exp(I * k * n.dot(r));
            return v;
        };
        auto re = [&](double phi) { return f(phi).real(); };
        auto im = [&](double phi) { return f(phi).imag(); };
        cplx sum = 0.0;
        for (std::size_t p = 0; p < panels; ++p) {
            const double a = 2.0 * pi * double(p) / double(panels);
            const double b = 2.0 * pi * double(p + 1) / double(panels);
            sum += cplx(gauss<double, 30>::integrate(re, a, b), gauss<double, 30>::integrate(im, a, b));
        }
        return sum;
    };
    cplx total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double a = pi * double(p) / double(panels);
        const double b = pi * double(p + 1) / double(panels);
        auto re = [&](double t) { return (inner(t) * std::sin(t)).real(); };
        auto im = [&](double t) { return (inner(t) * std::sin(t)).imag(); };
        total += cplx(gauss<double, 30>::integrate(re, a, b), gauss<double, 30>::integrate(im, a, b));
    }
    return 3.0 / (8.0 * pi) * total;
}

struct SlabOracle {
    cplx rho;
    cplx tau;
};

// Slab of thickness d between vacuum half-spaces by direct solution of the four
// interface conditions. Field amplitudes refer to absolute z: vacuum e^{ik0 z} + r e^{-ik0 z}
// for z < 0, t e^{ik0 z} for z > d. TE matches psi and psi'; TM matches psi and psi'/eps.
inline SlabOracle slab_transfer(double omega, double k, ote::Polarization p, double d, cplx eps) {
    const double q0 = omega / ote::constants::c;
    const cplx k0 = std::sqrt(cplx(q0 * q0 - k * k));
    cplx k0b = k0.imag() < 0.0 ? -k0 : k0;
    cplx k1 = std::sqrt(eps * q0 * q0 - k * k);
    if (k1.imag() < 0.0 || (k1.imag() == 0.0 && k1.real() < 0.0)) {
        k1 = -k1;
    }
    const cplx f = p == ote::Polarization::TE ? cplx(1.0) : eps;
    const cplx p0 = k0b;
    const cplx p1 = k1 / f;
    const cplx e1 = std::exp(I * k1 * d);
    const cplx e1m = std::exp(-I * k1 * d);
    const cplx e0 = std::exp(I * k0b * d);
    Eigen::Matrix4cd m;
    m << -1.0, 1.0, 1.0, 0.0, p0, p1, -p1, 0.0, 0.0, e1, e1m, -e0, 0.0, p1 * e1, -p1 * e1m, -p0 * e0;
    Eigen::Vector4cd rhs(1.0, p0, 0.0, 0.0);
    const Eigen::Vector4cd x = m.fullPivLu().solve(rhs);
    return {x[0], x[3]};
}

// rho^{T_A} by explicit index loops over bit strings.
inline DenseMatrix partial_transpose_loop(const DenseMatrix& rho, std::size_t n, const std::vector<std::size_t>& a) {
    const std::size_t d = std::size_t{1} << n;
    std::size_t mask = 0;
    for (std::size_t q : a) {
        mask |= std::size_t{1} << (n - 1 - q);
    }
    DenseMatrix out(rho.rows(), rho.cols());
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            // swap the A bits of row and column
            const std::size_t r2 = (r & ~mask) | (c & mask);
            const std::size_t c2 = (c & ~mask) | (r & mask);
            out(Eigen::Index(r2), Eigen::Index(c2)) = rho(Eigen::Index(r), Eigen::Index(c));
        }
    }
    return out;
}

inline double negativity_brute(const DenseMatrix& rho, std::size_t n, const std::vector<std::size_t>& a) {
    const DenseMatrix pt = partial_transpose_loop(rho, n, a);
    Eigen::ComplexEigenSolver<DenseMatrix> es(pt);
    double s = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        s += std::abs(es.eigenvalues()[k]) - es.eigenvalues()[k].real();
    }
    return s; // sum |l| - l = -2 sum of negative eigenvalues
}

// Wootters concurrence from an ensemble decomposition rho = sum_k |w_k><w_k|: the
// lambda_i are the Takagi values of the symmetric matrix tau_kl = w_k^T (sy sy) w_l.
inline double concurrence_brute(const DenseMatrix& rho) {
    DenseMatrix yy = DenseMatrix::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(3, 0) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    Eigen::ComplexEigenSolver<DenseMatrix> es(rho);
    DenseMatrix w(4, 4);
    for (Eigen::Index k = 0; k < 4; ++k) {
        w.col(k) = es.eigenvectors().col(k).normalized() * std::sqrt(std::max(0.0, es.eigenvalues()[k].real()));
    }
    const DenseMatrix tau = w.transpose() * yy * w;
    Eigen::BDCSVD<DenseMatrix> svd(tau);
    std::vector<double> l(svd.singularValues().data(), svd.singularValues().data() + 4);
    std::sort(l.rbegin(), l.rend());
    return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

inline DenseMatrix random_density(std::size_t d, std::mt19937& rng, std::size_t rank = 0) {
    std::normal_distribution<double> g;
    const auto k = Eigen::Index(rank == 0 ? d : rank);
    DenseMatrix a(Eigen::Index(d), k);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            a(i, j) = cplx(g(rng), g(rng));
        }
    }
    DenseMatrix rho = a * a.adjoint();
    return rho / rho.trace();
}

// Random valid rates: Gamma+- = B B^dag (positive semidefinite), Lambda Hermitian with
// zero diagonal. `scale` sets the size of the entries.
inline ote::RateSet random_rates(std::size_t n, std::mt19937& rng, double scale = 1.0, bool real = false) {
    std::normal_distribution<double> g;
    auto rnd = [&]() { return real ? cplx(g(rng), 0.0) : cplx(g(rng), g(rng)); };
    auto psd = [&]() {
        DenseMatrix b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < b.rows(); ++i) {
            for (Eigen::Index j = 0; j < b.cols(); ++j) {
                b(i, j) = rnd();
            }
        }
        return DenseMatrix(scale * b * b.adjoint() / double(n));
    };
    ote::RateSet r;
    r.gamma_plus = psd();
    r.gamma_minus = 0.5 * psd();
    r.lambda = DenseMatrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx v = scale * rnd();
            r.lambda(Eigen::Index(i), Eigen::Index(j)) = v;
            r.lambda(Eigen::Index(j), Eigen::Index(i)) = std::conj(v);
        }
    }
    r.gamma0 = Eigen::VectorXd::Constant(Eigen::Index(n), scale);
    return r;
}

// Product of single-qubit thermal states with excited population p = n / (1 + 2n).
inline DenseMatrix product_thermal(std::size_t qubits, double n_bar) {
    const double p = n_bar / (1.0 + 2.0 * n_bar);
    DenseMatrix one = DenseMatrix::Zero(2, 2);
    one(0, 0) = 1.0 - p;
    one(1, 1) = p;
    DenseMatrix rho = one;
    for (std::size_t k = 1; k < qubits; ++k) {
        rho = kron(rho, one);
    }
    return rho;
}

} // namespace oracle
