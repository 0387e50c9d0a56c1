#include "ote/master.hpp"

#include <cmath>
#include <string>

#include "ote/collective.hpp"
#include "ote/constants.hpp"
#include "ote/errors.hpp"
#include "ote/quadrature.hpp"

namespace ote {

namespace {

constexpr cplx I{0.0, 1.0};

using RowMajorMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_hermitian(const DenseMatrix& m, const char* name) {
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw InvalidDissipator(std::string(name) + " is not Hermitian");
    }
}

void check_psd(const DenseMatrix& m, const char* name) {
    const DenseMatrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double largest = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -psd_tolerance * largest) {
        throw InvalidDissipator(std::string(name) + " is not positive semidefinite (eigenvalue " +
                                std::to_string(ev.minCoeff()) + " vs largest " + std::to_string(largest) + ")");
    }
}

} // namespace

double bose_n(double omega, double temperature) {
    if (!(omega > 0.0) || temperature < 0.0) {
        throw DomainError("bose_n: need omega > 0 and T >= 0");
    }
    if (temperature == 0.0) {
        return 0.0;
    }
    const double x = constants::hbar * omega / (constants::k_B * temperature);
    return 1.0 / std::expm1(x);
}

void RateSet::validate() const {
    const auto n = gamma_plus.rows();
    if (gamma_plus.cols() != n || gamma_minus.rows() != n || gamma_minus.cols() != n || lambda.rows() != n ||
        lambda.cols() != n || gamma0.size() != n) {
        throw InvalidDissipator("rate matrices have inconsistent shapes");
    }
    check_hermitian(gamma_plus, "Gamma+");
    check_hermitian(gamma_minus, "Gamma-");
    check_hermitian(lambda, "Lambda");
    const double lscale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    if (lambda.diagonal().cwiseAbs().maxCoeff() > 1e-14 * lscale) {
        throw InvalidDissipator("Lambda must have a zero diagonal");
    }
    check_psd(gamma_plus, "Gamma+");
    check_psd(gamma_minus, "Gamma-");
}

RateSet build_rates(const AlphaMatrices& alpha, double wall_temperature, double slab_temperature,
                    const Eigen::VectorXd& gamma0, double omega) {
    const auto n = gamma0.size();
    if (alpha.wall.rows() != n || alpha.wall.cols() != n || alpha.slab.rows() != n || alpha.slab.cols() != n) {
        throw DomainError("build_rates: response matrices must be N x N");
    }
    const double n_w = bose_n(omega, wall_temperature);
    const double n_m = bose_n(omega, slab_temperature);
    RateSet r;
    r.gamma0 = gamma0;
    r.gamma_plus.resize(n, n);
    r.gamma_minus.resize(n, n);
    r.lambda = DenseMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = std::sqrt(gamma0[i] * gamma0[j]);
            r.gamma_plus(i, j) = s * ((1.0 + n_w) * alpha.wall(i, j) + (1.0 + n_m) * alpha.slab(i, j));
            r.gamma_minus(i, j) = s * (n_w * std::conj(alpha.wall(i, j)) + n_m * std::conj(alpha.slab(i, j)));
        }
    }
    r.validate();
    r.gamma_plus = 0.5 * (r.gamma_plus + r.gamma_plus.adjoint()).eval();
    r.gamma_minus = 0.5 * (r.gamma_minus + r.gamma_minus.adjoint()).eval();
    return r;
}

cplx vacuum_dipole_coupling(const EmitterArray& emitters, std::size_t i, std::size_t j, double omega) {
    if (i == j) {
        return 0.0;
    }
    const Eigen::Vector3d sep = emitters.positions[i] - emitters.positions[j];
    const double dist = sep.norm();
    if (!(dist > 0.0)) {
        throw DomainError("vacuum_dipole_coupling: coincident emitters");
    }
    const Eigen::Vector3cd u = (sep / dist).cast<cplx>();
    const Eigen::Vector3cd& di = emitters.dipoles[i];
    const Eigen::Vector3cd& dj = emitters.dipoles[j];
    const cplx dd = di.dot(dj); // conj(d_i) . d_j
    const cplx du = di.dot(u) * u.dot(dj);
    const double x = omega * dist / constants::c;
    const double far = -std::cos(x) / x;
    const double near = std::sin(x) / (x * x) + std::cos(x) / (x * x * x);
    const double g = std::sqrt(emitters.vacuum_rate(i, omega) * emitters.vacuum_rate(j, omega));
    return 0.75 * g * ((dd - du) * far + (dd - 3.0 * du) * near);
}

DenseMatrix lambda_pv_quadrature(const EmitterArray& emitters, const SlabSpec& slab, const QuadratureSpec& quad,
                                 double omega, double window_fraction, double rel_tol) {
    if (!(window_fraction > 0.0 && window_fraction < 1.0)) {
        throw DomainError("pv window fraction must lie in (0, 1)");
    }
    emitters.validate();
    const double z = emitters.common_height();
    const std::size_t n = emitters.size();
    const double window = window_fraction * omega;
    DenseMatrix lambda = DenseMatrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Eigen::Vector2d sep = (emitters.positions[i] - emitters.positions[j]).head<2>();
            auto response = [&](double w) {
                const AlphaSectors s = alpha_sectors(sep, z, w, slab, quad);
                const AlphaTensor total = s.wall + s.slab_propagative + s.slab_evanescent;
                return w * w * w * alpha_contract(total, emitters.dipoles[i], emitters.dipoles[j]);
            };
            quad::Integrand<1> f = [&](double s) {
                return std::array<cplx, 1>{(response(omega - s) - response(omega + s)) / s};
            };
            quad::Result<1> res;
            try {
                res = quad::integrate<1>(f, {0.0, window}, {rel_tol, 1e-300, 4000});
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("pv-quadrature for pair (" + std::to_string(i) + "," + std::to_string(j) +
                                           ") did not converge under the configured cutoff",
                                       e.residual);
            }
            const double g = std::sqrt(emitters.vacuum_rate(i, omega) * emitters.vacuum_rate(j, omega));
            lambda(i, j) = g / (omega * omega * omega) * res.value[0] / (2.0 * constants::pi);
            lambda(j, i) = std::conj(lambda(i, j));
        }
    }
    return lambda;
}

DenseMatrix build_lambda(const EmitterArray& emitters, const SlabSpec& slab, const QuadratureSpec& quad,
                         double omega, const LambdaOptions& options) {
    const std::size_t n = emitters.size();
    switch (options.strategy) {
    case LambdaStrategy::user_supplied:
        if (!options.user || options.user->rows() != Eigen::Index(n) || options.user->cols() != Eigen::Index(n)) {
            throw DomainError("user-supplied Lambda must be an N x N matrix");
        }
        return *options.user;
    case LambdaStrategy::pv_quadrature:
        return lambda_pv_quadrature(emitters, slab, quad, omega, options.pv_window_fraction, options.pv_rel_tol);
    case LambdaStrategy::vacuum_analytic:
        break;
    }
    emitters.validate();
    DenseMatrix lambda = DenseMatrix::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            lambda(i, j) = vacuum_dipole_coupling(emitters, i, j, omega);
        }
    }
    return lambda;
}

Liouvillian::Liouvillian(RateSet rates, double omega0, std::size_t qubits, std::size_t max_qubits)
    : rates_(std::move(rates)), omega0_(omega0) {
    if (qubits > max_qubits) {
        throw ResourceError("Liouvillian: " + std::to_string(qubits) + " qubits exceeds the configured maximum " +
                            std::to_string(max_qubits));
    }
    if (rates_.size() != qubits) {
        throw DomainError("Liouvillian: rate matrices do not match the qubit count");
    }
    rates_.validate();
    const EffectiveHamiltonian h = build_heff(rates_, omega0_, qubits, max_qubits);
    blocks_ = h.blocks;
    heff_ = h.sectors;

    block_offsets_.assign(blocks_.sector_count() + 1, 0);
    double hnorm = 0.0;
    for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
        block_offsets_[n + 1] = block_offsets_[n] + blocks_.dim(n) * blocks_.dim(n);
        hnorm = std::max(hnorm, heff_[n].cwiseAbs().rowwise().sum().maxCoeff());
    }
    scale_ = 2.0 * hnorm + rates_.gamma_plus.cwiseAbs().sum() + rates_.gamma_minus.cwiseAbs().sum();
    if (!(scale_ > 0.0)) {
        scale_ = 1.0;
    }
}

DenseMatrix Liouvillian::apply(const DenseMatrix& rho) const {
    const std::size_t dim = hilbert_dim();
    const std::size_t nq = qubits();
    if (std::size_t(rho.rows()) != dim || std::size_t(rho.cols()) != dim) {
        throw DomainError("Liouvillian::apply: density matrix has the wrong dimension");
    }
    DenseMatrix out = DenseMatrix::Zero(dim, dim);
    // Coherent/anticommutator part, sector by sector: i (rho H - H^dag rho).
    for (std::size_t m = 0; m < blocks_.sector_count(); ++m) {
        const auto& sm = blocks_.states[m];
        for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
            const auto& sn = blocks_.states[n];
            DenseMatrix block(sm.size(), sn.size());
            for (std::size_t a = 0; a < sm.size(); ++a) {
                for (std::size_t b = 0; b < sn.size(); ++b) {
                    block(a, b) = rho(sm[a], sn[b]);
                }
            }
            const DenseMatrix d = I * (block * heff_[n] - heff_[m].adjoint() * block);
            for (std::size_t a = 0; a < sm.size(); ++a) {
                for (std::size_t b = 0; b < sn.size(); ++b) {
                    out(sm[a], sn[b]) += d(a, b);
                }
            }
        }
    }
    // Jumps: Gamma+_ij s-_j rho s+_i and Gamma-_ij s+_j rho s-_i.
    const auto& gp = rates_.gamma_plus;
    const auto& gm = rates_.gamma_minus;
    for (std::size_t b = 0; b < dim; ++b) {
        for (std::size_t a = 0; a < dim; ++a) {
            cplx acc = 0.0;
            for (std::size_t j = 0; j < nq; ++j) {
                const BasisIndex mj = qubit_mask(nq, j);
                for (std::size_t i = 0; i < nq; ++i) {
                    const BasisIndex mi = qubit_mask(nq, i);
                    if (!(a & mj) && !(b & mi)) {
                        acc += gp(i, j) * rho(a | mj, b | mi);
                    } else if ((a & mj) && (b & mi)) {
                        acc += gm(i, j) * rho(a ^ mj, b ^ mi);
                    }
                }
            }
            out(a, b) += acc;
        }
    }
    return out;
}

SparseMatrix Liouvillian::sparse() const {
    const std::size_t nq = qubits();
    if (nq > max_sparse_qubits) {
        throw ResourceError("Liouvillian: sparse materialisation limited to " + std::to_string(max_sparse_qubits) +
                            " qubits");
    }
    const std::size_t dim = hilbert_dim();
    auto idx = [dim](std::size_t a, std::size_t b) { return Eigen::Index(a + dim * b); };
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
        const auto& sn = blocks_.states[n];
        const DenseMatrix& h = heff_[n];
        for (std::size_t c = 0; c < sn.size(); ++c) {
            for (std::size_t b = 0; b < sn.size(); ++b) {
                const cplx hcb = h(c, b);
                if (hcb == cplx(0.0)) {
                    continue;
                }
                // i rho H: (a, sn[b]) <- (a, sn[c]) with H_cb, for every row a.
                // -i H^dag rho: (sn[b], col) <- (sn[c], col) with conj(H_cb), for every column.
                for (std::size_t a = 0; a < dim; ++a) {
                    trip.emplace_back(idx(a, sn[b]), idx(a, sn[c]), I * hcb);
                    trip.emplace_back(idx(sn[b], a), idx(sn[c], a), -I * std::conj(hcb));
                }
            }
        }
    }
    const auto& gp = rates_.gamma_plus;
    const auto& gm = rates_.gamma_minus;
    for (std::size_t b = 0; b < dim; ++b) {
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t j = 0; j < nq; ++j) {
                const BasisIndex mj = qubit_mask(nq, j);
                for (std::size_t i = 0; i < nq; ++i) {
                    const BasisIndex mi = qubit_mask(nq, i);
                    if (!(a & mj) && !(b & mi) && gp(i, j) != cplx(0.0)) {
                        trip.emplace_back(idx(a, b), idx(a | mj, b | mi), gp(i, j));
                    } else if ((a & mj) && (b & mi) && gm(i, j) != cplx(0.0)) {
                        trip.emplace_back(idx(a, b), idx(a ^ mj, b ^ mi), gm(i, j));
                    }
                }
            }
        }
    }
    SparseMatrix l(Eigen::Index(dim * dim), Eigen::Index(dim * dim));
    l.setFromTriplets(trip.begin(), trip.end());
    return l;
}

DenseMatrix Liouvillian::dense() const {
    if (qubits() > max_dense_qubits) {
        throw ResourceError("Liouvillian: dense materialisation limited to " + std::to_string(max_dense_qubits) +
                            " qubits");
    }
    return DenseMatrix(sparse());
}

Eigen::VectorXcd Liouvillian::apply_blocks(const Eigen::VectorXcd& x) const {
    if (std::size_t(x.size()) != block_unknowns()) {
        throw DomainError("apply_blocks: wrong vector length");
    }
    const std::size_t nq = qubits();
    const auto& gp = rates_.gamma_plus;
    const auto& gm = rates_.gamma_minus;
    Eigen::VectorXcd y(x.size());
    for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
        const Eigen::Index d = Eigen::Index(blocks_.dim(n));
        Eigen::Map<const RowMajorMatrix> xn(x.data() + block_offsets_[n], d, d);
        Eigen::Map<RowMajorMatrix> yn(y.data() + block_offsets_[n], d, d);
        yn.noalias() = I * (xn * heff_[n]);
        yn.noalias() -= I * (heff_[n].adjoint() * xn);

        const auto& sn = blocks_.states[n];
        if (n + 1 < blocks_.sector_count()) {
            const Eigen::Index du = Eigen::Index(blocks_.dim(n + 1));
            Eigen::Map<const RowMajorMatrix> xu(x.data() + block_offsets_[n + 1], du, du);
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) {
                    cplx acc = 0.0;
                    for (std::size_t j = 0; j < nq; ++j) {
                        const BasisIndex mj = qubit_mask(nq, j);
                        if (sn[a] & mj) {
                            continue;
                        }
                        const auto ra = Eigen::Index(blocks_.local[sn[a] | mj]);
                        for (std::size_t i = 0; i < nq; ++i) {
                            const BasisIndex mi = qubit_mask(nq, i);
                            if (!(sn[b] & mi)) {
                                acc += gp(i, j) * xu(ra, Eigen::Index(blocks_.local[sn[b] | mi]));
                            }
                        }
                    }
                    yn(a, b) += acc;
                }
            }
        }
        if (n > 0) {
            const Eigen::Index dl = Eigen::Index(blocks_.dim(n - 1));
            Eigen::Map<const RowMajorMatrix> xl(x.data() + block_offsets_[n - 1], dl, dl);
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) {
                    cplx acc = 0.0;
                    for (std::size_t j = 0; j < nq; ++j) {
                        const BasisIndex mj = qubit_mask(nq, j);
                        if (!(sn[a] & mj)) {
                            continue;
                        }
                        const auto ra = Eigen::Index(blocks_.local[sn[a] ^ mj]);
                        for (std::size_t i = 0; i < nq; ++i) {
                            const BasisIndex mi = qubit_mask(nq, i);
                            if (sn[b] & mi) {
                                acc += gm(i, j) * xl(ra, Eigen::Index(blocks_.local[sn[b] ^ mi]));
                            }
                        }
                    }
                    yn(a, b) += acc;
                }
            }
        }
    }
    return y;
}

SparseMatrix Liouvillian::block_matrix() const {
    const std::size_t nq = qubits();
    const auto& gp = rates_.gamma_plus;
    const auto& gm = rates_.gamma_minus;
    std::vector<Eigen::Triplet<cplx>> trip;
    auto idx = [&](std::size_t n, std::size_t a, std::size_t b) {
        return Eigen::Index(block_offsets_[n] + a * blocks_.dim(n) + b);
    };
    for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
        const std::size_t d = blocks_.dim(n);
        const auto& sn = blocks_.states[n];
        const DenseMatrix& h = heff_[n];
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                const auto row = idx(n, a, b);
                for (std::size_t c = 0; c < d; ++c) {
                    if (h(c, b) != cplx(0.0)) {
                        trip.emplace_back(row, idx(n, a, c), I * h(c, b));
                    }
                    if (h(c, a) != cplx(0.0)) {
                        trip.emplace_back(row, idx(n, c, b), -I * std::conj(h(c, a)));
                    }
                }
                for (std::size_t j = 0; j < nq; ++j) {
                    const BasisIndex mj = qubit_mask(nq, j);
                    for (std::size_t i = 0; i < nq; ++i) {
                        const BasisIndex mi = qubit_mask(nq, i);
                        if (!(sn[a] & mj) && !(sn[b] & mi) && gp(i, j) != cplx(0.0)) {
                            trip.emplace_back(row, idx(n + 1, blocks_.local[sn[a] | mj], blocks_.local[sn[b] | mi]),
                                              gp(i, j));
                        } else if ((sn[a] & mj) && (sn[b] & mi) && gm(i, j) != cplx(0.0)) {
                            trip.emplace_back(row, idx(n - 1, blocks_.local[sn[a] ^ mj], blocks_.local[sn[b] ^ mi]),
                                              gm(i, j));
                        }
                    }
                }
            }
        }
    }
    const auto nb = Eigen::Index(block_unknowns());
    SparseMatrix l(nb, nb);
    l.setFromTriplets(trip.begin(), trip.end());
    return l;
}

std::vector<DenseMatrix> Liouvillian::split_blocks(const Eigen::VectorXcd& x) const {
    std::vector<DenseMatrix> out;
    for (std::size_t n = 0; n < blocks_.sector_count(); ++n) {
        const Eigen::Index d = Eigen::Index(blocks_.dim(n));
        out.emplace_back(Eigen::Map<const RowMajorMatrix>(x.data() + block_offsets_[n], d, d));
    }
    return out;
}

DenseMatrix Liouvillian::blocks_to_full(const Eigen::VectorXcd& x) const {
    const std::size_t dim = hilbert_dim();
    DenseMatrix rho = DenseMatrix::Zero(dim, dim);
    const auto parts = split_blocks(x);
    for (std::size_t n = 0; n < parts.size(); ++n) {
        const auto& sn = blocks_.states[n];
        for (std::size_t a = 0; a < sn.size(); ++a) {
            for (std::size_t b = 0; b < sn.size(); ++b) {
                rho(sn[a], sn[b]) = parts[n](a, b);
            }
        }
    }
    return rho;
}

} // namespace ote
