#include "ote/collective.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ote/errors.hpp"

namespace ote {

namespace {

constexpr cplx I{0.0, 1.0};

DenseMatrix extract_block(const DenseMatrix& rho, const ExcitationBlocks& blocks, std::size_t m, std::size_t n) {
    const auto& sm = blocks.states[m];
    const auto& sn = blocks.states[n];
    DenseMatrix out(sm.size(), sn.size());
    for (std::size_t a = 0; a < sm.size(); ++a) {
        for (std::size_t b = 0; b < sn.size(); ++b) {
            out(a, b) = rho(sm[a], sn[b]);
        }
    }
    return out;
}

// Row-major vectorisation of a block.
Eigen::VectorXcd vec_rows(const DenseMatrix& m) {
    Eigen::VectorXcd v(m.size());
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        for (Eigen::Index b = 0; b < m.cols(); ++b) {
            v[a * m.cols() + b] = m(a, b);
        }
    }
    return v;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

} // namespace

EffectiveHamiltonian build_heff(const RateSet& rates, double omega0, std::size_t qubits, std::size_t max_qubits) {
    if (rates.size() != qubits) {
        throw DomainError("build_heff: rate matrices do not match the qubit count");
    }
    EffectiveHamiltonian h;
    h.blocks = excitation_blocks(qubits, max_qubits);
    const auto& gp = rates.gamma_plus;
    const auto& gm = rates.gamma_minus;
    for (std::size_t n = 0; n < h.blocks.sector_count(); ++n) {
        const auto& sn = h.blocks.states[n];
        DenseMatrix hn = DenseMatrix::Zero(sn.size(), sn.size());
        for (std::size_t col = 0; col < sn.size(); ++col) {
            const BasisIndex b = sn[col];
            for (std::size_t i = 0; i < qubits; ++i) {
                const BasisIndex mi = qubit_mask(qubits, i);
                for (std::size_t j = 0; j < qubits; ++j) {
                    const BasisIndex mj = qubit_mask(qubits, j);
                    // s+_i s-_j |b>
                    if ((b & mj) && !((b ^ mj) & mi)) {
                        const cplx c = (i == j) ? cplx(omega0, 0.5 * gp(i, i).real())
                                                : rates.lambda(i, j) + 0.5 * I * gp(i, j);
                        hn(h.blocks.local[(b ^ mj) | mi], col) += c;
                    }
                    // s-_i s+_j |b>
                    if (!(b & mj) && ((b | mj) & mi)) {
                        hn(h.blocks.local[(b | mj) ^ mi], col) += 0.5 * I * gm(i, j);
                    }
                }
            }
        }
        h.sectors.push_back(std::move(hn));
    }
    return h;
}

SparseMatrix EffectiveHamiltonian::full() const {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
        const auto& sn = blocks.states[n];
        for (std::size_t a = 0; a < sn.size(); ++a) {
            for (std::size_t b = 0; b < sn.size(); ++b) {
                if (sectors[n](a, b) != cplx(0.0)) {
                    trip.emplace_back(sn[a], sn[b], sectors[n](a, b));
                }
            }
        }
    }
    const auto dim = Eigen::Index(blocks.hilbert_dim());
    SparseMatrix m(dim, dim);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

CollectiveSpectrum spectral(const EffectiveHamiltonian& heff) {
    CollectiveSpectrum out;
    out.blocks = heff.blocks;
    for (std::size_t n = 0; n < heff.sectors.size(); ++n) {
        const DenseMatrix& h = heff.sectors[n];
        const auto d = h.rows();
        Eigen::ComplexEigenSolver<DenseMatrix> es(h, true);
        if (es.info() != Eigen::Success) {
            throw NonDiagonalizable("eigen-decomposition failed in sector " + std::to_string(n));
        }
        std::vector<Eigen::Index> order(d);
        std::iota(order.begin(), order.end(), 0);
        const auto& ev = es.eigenvalues();
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return std::make_tuple(ev[a].real(), ev[a].imag()) < std::make_tuple(ev[b].real(), ev[b].imag());
        });

        SectorSpectrum s;
        s.eigenvalues.resize(d);
        s.vectors.resize(d, d);
        for (Eigen::Index k = 0; k < d; ++k) {
            s.eigenvalues[k] = ev[order[k]];
            s.vectors.col(k) = es.eigenvectors().col(order[k]);
        }
        const double scale = std::max(s.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
        s.group.resize(d);
        for (Eigen::Index a = 0; a < d; ++a) {
            s.group[a] = a;
            for (Eigen::Index b = 0; b < a; ++b) {
                if (std::abs(s.eigenvalues[a] - s.eigenvalues[b]) <= exact_degeneracy_tolerance * scale) {
                    s.group[a] = s.group[b];
                    break;
                }
            }
        }
        // Orthonormalise within exactly degenerate groups, in order.
        for (Eigen::Index a = 0; a < d; ++a) {
            Eigen::VectorXcd v = s.vectors.col(a);
            for (Eigen::Index b = 0; b < a; ++b) {
                if (s.group[b] == s.group[a]) {
                    v -= s.vectors.col(b).dot(v) * s.vectors.col(b);
                }
            }
            const double norm = v.norm();
            if (!(norm > 1e-8)) {
                throw NonDiagonalizable("defective degenerate eigenspace in sector " + std::to_string(n));
            }
            v /= norm;
            Eigen::Index lead = 0;
            while (lead < d && std::abs(v[lead]) <= 1e-8) {
                ++lead;
            }
            v *= std::polar(1.0, -std::arg(v[lead]));
            v[lead] = std::abs(v[lead]);
            s.vectors.col(a) = v;
        }
        Eigen::BDCSVD<DenseMatrix> svd(s.vectors);
        const auto& sv = svd.singularValues();
        const double cond = sv[0] / sv[sv.size() - 1];
        if (!(cond <= max_eigenvector_condition)) {
            throw NonDiagonalizable("eigenvector matrix of sector " + std::to_string(n) + " has condition number " +
                                    std::to_string(cond));
        }
        s.inverse = s.vectors.partialPivLu().inverse();
        out.sectors.push_back(std::move(s));
    }
    return out;
}

DenseMatrix sector_lowering(const ExcitationBlocks& blocks, std::size_t n, std::size_t i) {
    if (n == 0 || n >= blocks.sector_count()) {
        throw DomainError("sector_lowering: sector out of range");
    }
    const std::size_t nq = blocks.qubits;
    DenseMatrix s = DenseMatrix::Zero(blocks.dim(n - 1), blocks.dim(n));
    for (std::size_t col = 0; col < blocks.dim(n); ++col) {
        const BasisIndex b = blocks.states[n][col];
        if (b & qubit_mask(nq, i)) {
            s(blocks.local[b ^ qubit_mask(nq, i)], col) = 1.0;
        }
    }
    return s;
}

DenseMatrix sector_raising(const ExcitationBlocks& blocks, std::size_t n, std::size_t i) {
    if (n + 1 >= blocks.sector_count()) {
        throw DomainError("sector_raising: sector out of range");
    }
    const std::size_t nq = blocks.qubits;
    DenseMatrix s = DenseMatrix::Zero(blocks.dim(n + 1), blocks.dim(n));
    for (std::size_t col = 0; col < blocks.dim(n); ++col) {
        const BasisIndex b = blocks.states[n][col];
        if (!(b & qubit_mask(nq, i))) {
            s(blocks.local[b | qubit_mask(nq, i)], col) = 1.0;
        }
    }
    return s;
}

LadderMaps ladder_maps(const CollectiveSpectrum& spectrum) {
    const auto& blocks = spectrum.blocks;
    const std::size_t nq = blocks.qubits;
    const std::size_t sectors = blocks.sector_count();
    LadderMaps maps;
    maps.lower.resize(sectors);
    maps.raise.resize(sectors);
    for (std::size_t n = 0; n < sectors; ++n) {
        const auto& sp = spectrum.sectors[n];
        for (std::size_t i = 0; i < nq; ++i) {
            if (n > 0) {
                const DenseMatrix x = spectrum.sectors[n - 1].inverse * sector_lowering(blocks, n, i) * sp.vectors;
                maps.lower[n].push_back(x.transpose());
            }
            if (n + 1 < sectors) {
                const DenseMatrix x = spectrum.sectors[n + 1].inverse * sector_raising(blocks, n, i) * sp.vectors;
                maps.raise[n].push_back(x.transpose());
            }
        }
    }
    return maps;
}

ProjectedGenerator::ProjectedGenerator(const CollectiveSpectrum& spectrum, const RateSet& rates)
    : spectrum_(spectrum) {
    const std::size_t nq = spectrum.blocks.qubits;
    if (nq > max_qubits) {
        throw ResourceError("projected generator limited to " + std::to_string(max_qubits) + " qubits");
    }
    if (rates.size() != nq) {
        throw DomainError("projected generator: rate matrices do not match the qubit count");
    }
    const std::size_t sectors = spectrum.blocks.sector_count();
    const LadderMaps maps = ladder_maps(spectrum);
    p_.assign(sectors, std::vector<DenseMatrix>(sectors));
    m_.assign(sectors, std::vector<DenseMatrix>(sectors));
    for (std::size_t m = 0; m < sectors; ++m) {
        for (std::size_t n = 0; n < sectors; ++n) {
            const auto dm = Eigen::Index(spectrum.blocks.dim(m));
            const auto dn = Eigen::Index(spectrum.blocks.dim(n));
            if (m + 1 < sectors && n + 1 < sectors) {
                const auto du = Eigen::Index(spectrum.blocks.dim(m + 1) * spectrum.blocks.dim(n + 1));
                DenseMatrix p = DenseMatrix::Zero(dm * dn, du);
                for (std::size_t i = 0; i < nq; ++i) {
                    for (std::size_t j = 0; j < nq; ++j) {
                        const cplx g = rates.gamma_plus(i, j);
                        if (g != cplx(0.0)) {
                            p += g * kron(maps.raise[m][j].conjugate(), maps.raise[n][i]);
                        }
                    }
                }
                p_[m][n] = std::move(p);
            }
            if (m > 0 && n > 0) {
                const auto dl = Eigen::Index(spectrum.blocks.dim(m - 1) * spectrum.blocks.dim(n - 1));
                DenseMatrix q = DenseMatrix::Zero(dm * dn, dl);
                for (std::size_t i = 0; i < nq; ++i) {
                    for (std::size_t j = 0; j < nq; ++j) {
                        const cplx g = rates.gamma_minus(i, j);
                        if (g != cplx(0.0)) {
                            q += g * kron(maps.lower[m][j].conjugate(), maps.lower[n][i]);
                        }
                    }
                }
                m_[m][n] = std::move(q);
            }
        }
    }
    offsets_.assign(sectors + 1, 0);
    for (std::size_t n = 0; n < sectors; ++n) {
        offsets_[n + 1] = offsets_[n] + spectrum.blocks.dim(n);
    }
}

DenseMatrix ProjectedGenerator::apply(const DenseMatrix& projected) const {
    const std::size_t sectors = spectrum_.blocks.sector_count();
    const auto dim = Eigen::Index(offsets_.back());
    if (projected.rows() != dim || projected.cols() != dim) {
        throw DomainError("ProjectedGenerator::apply: wrong dimension");
    }
    DenseMatrix out = DenseMatrix::Zero(dim, dim);
    auto block = [&](std::size_t m, std::size_t n) {
        return projected.block(Eigen::Index(offsets_[m]), Eigen::Index(offsets_[n]),
                               Eigen::Index(spectrum_.blocks.dim(m)), Eigen::Index(spectrum_.blocks.dim(n)));
    };
    for (std::size_t m = 0; m < sectors; ++m) {
        for (std::size_t n = 0; n < sectors; ++n) {
            const auto dm = Eigen::Index(spectrum_.blocks.dim(m));
            const auto dn = Eigen::Index(spectrum_.blocks.dim(n));
            const auto& wm = spectrum_.sectors[m].eigenvalues;
            const auto& wn = spectrum_.sectors[n].eigenvalues;
            DenseMatrix y(dm, dn);
            const DenseMatrix r = block(m, n);
            for (Eigen::Index b = 0; b < dm; ++b) {
                for (Eigen::Index a = 0; a < dn; ++a) {
                    y(b, a) = -I * (std::conj(wm[b]) - wn[a]) * r(b, a);
                }
            }
            Eigen::VectorXcd src = Eigen::VectorXcd::Zero(dm * dn);
            if (p_[m][n].size() > 0) {
                src += p_[m][n] * vec_rows(block(m + 1, n + 1));
            }
            if (m_[m][n].size() > 0) {
                src += m_[m][n] * vec_rows(block(m - 1, n - 1));
            }
            for (Eigen::Index b = 0; b < dm; ++b) {
                for (Eigen::Index a = 0; a < dn; ++a) {
                    y(b, a) += src[b * dn + a];
                }
            }
            out.block(Eigen::Index(offsets_[m]), Eigen::Index(offsets_[n]), dm, dn) = y;
        }
    }
    return out;
}

DenseMatrix ProjectedGenerator::to_projected(const DenseMatrix& rho) const {
    const std::size_t sectors = spectrum_.blocks.sector_count();
    const auto dim = Eigen::Index(offsets_.back());
    DenseMatrix out(dim, dim);
    for (std::size_t m = 0; m < sectors; ++m) {
        for (std::size_t n = 0; n < sectors; ++n) {
            const DenseMatrix r = spectrum_.sectors[m].vectors.adjoint() * extract_block(rho, spectrum_.blocks, m, n) *
                                  spectrum_.sectors[n].vectors;
            out.block(Eigen::Index(offsets_[m]), Eigen::Index(offsets_[n]), r.rows(), r.cols()) = r;
        }
    }
    return out;
}

DenseMatrix ProjectedGenerator::from_projected(const DenseMatrix& projected) const {
    const std::size_t sectors = spectrum_.blocks.sector_count();
    const auto dim = Eigen::Index(spectrum_.blocks.hilbert_dim());
    DenseMatrix rho(dim, dim);
    for (std::size_t m = 0; m < sectors; ++m) {
        for (std::size_t n = 0; n < sectors; ++n) {
            const auto dm = Eigen::Index(spectrum_.blocks.dim(m));
            const auto dn = Eigen::Index(spectrum_.blocks.dim(n));
            const DenseMatrix b = spectrum_.sectors[m].inverse.adjoint() *
                                  projected.block(Eigen::Index(offsets_[m]), Eigen::Index(offsets_[n]), dm, dn) *
                                  spectrum_.sectors[n].inverse;
            const auto& sm = spectrum_.blocks.states[m];
            const auto& sn = spectrum_.blocks.states[n];
            for (Eigen::Index a = 0; a < dm; ++a) {
                for (Eigen::Index c = 0; c < dn; ++c) {
                    rho(sm[a], sn[c]) = b(a, c);
                }
            }
        }
    }
    return rho;
}

ProjectedGenerator project_master(const CollectiveSpectrum& spectrum, const RateSet& rates) {
    return ProjectedGenerator(spectrum, rates);
}

SecularGenerator secular_reduce(const ProjectedGenerator& projected, double gap_threshold) {
    const auto& spec = projected.spectrum();
    const std::size_t sectors = spec.blocks.sector_count();
    SecularGenerator out;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Eigen::Index> index;
    for (std::size_t n = 0; n < sectors; ++n) {
        const auto& s = spec.sectors[n];
        const std::size_t d = spec.blocks.dim(n);
        const double threshold =
            gap_threshold > 0.0 ? gap_threshold : 1e-6 * std::max(s.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
        for (std::size_t b = 0; b < d; ++b) {
            for (std::size_t a = 0; a < d; ++a) {
                if (s.group[a] == s.group[b]) {
                    index[{n, b, a}] = Eigen::Index(out.kept.size());
                    out.kept.push_back({n, b, a});
                } else if (a > b && std::abs(s.eigenvalues[a] - s.eigenvalues[b]) < threshold) {
                    std::ostringstream msg;
                    msg << "sector " << n << ": eigenvalues " << b << " and " << a << " differ by "
                        << std::abs(s.eigenvalues[a] - s.eigenvalues[b])
                        << ", below the gap threshold; their coherence is dropped";
                    out.warnings.push_back(msg.str());
                }
            }
        }
    }
    const auto k = Eigen::Index(out.kept.size());
    out.generator = DenseMatrix::Zero(k, k);
    for (Eigen::Index row = 0; row < k; ++row) {
        const auto [n, b, a] = out.kept[row];
        const auto& w = spec.sectors[n].eigenvalues;
        out.generator(row, row) += -I * (std::conj(w[b]) - w[a]);
        const std::size_t dn = spec.blocks.dim(n);
        if (n + 1 < sectors) {
            const DenseMatrix& p = projected.P(n, n);
            const std::size_t du = spec.blocks.dim(n + 1);
            for (std::size_t bb = 0; bb < du; ++bb) {
                for (std::size_t aa = 0; aa < du; ++aa) {
                    auto it = index.find({n + 1, bb, aa});
                    if (it != index.end()) {
                        out.generator(row, it->second) += p(Eigen::Index(b * dn + a), Eigen::Index(bb * du + aa));
                    }
                }
            }
        }
        if (n > 0) {
            const DenseMatrix& q = projected.M(n, n);
            const std::size_t dl = spec.blocks.dim(n - 1);
            for (std::size_t bb = 0; bb < dl; ++bb) {
                for (std::size_t aa = 0; aa < dl; ++aa) {
                    auto it = index.find({n - 1, bb, aa});
                    if (it != index.end()) {
                        out.generator(row, it->second) += q(Eigen::Index(b * dn + a), Eigen::Index(bb * dl + aa));
                    }
                }
            }
        }
    }
    return out;
}

DenseMatrix secular_steady_state(const ProjectedGenerator& projected, const SecularGenerator& reduced) {
    const auto k = reduced.generator.rows();
    Eigen::BDCSVD<DenseMatrix> svd(reduced.generator, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = std::max(sv[0], 1e-300);
    if (k > 1 && sv[k - 2] < 1e-10 * smax) {
        throw DegeneracyError("secular generator has a degenerate null space", 2);
    }
    const Eigen::VectorXcd null = svd.matrixV().col(k - 1);
    const auto& spec = projected.spectrum();
    const auto dim = Eigen::Index(spec.blocks.hilbert_dim());
    DenseMatrix r = DenseMatrix::Zero(dim, dim);
    for (Eigen::Index idx = 0; idx < k; ++idx) {
        const auto& e = reduced.kept[idx];
        r(Eigen::Index(projected.sector_offset(e.sector) + e.row),
          Eigen::Index(projected.sector_offset(e.sector) + e.col)) = null[idx];
    }
    DenseMatrix rho = projected.from_projected(r);
    rho /= rho.trace();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return rho;
}

std::vector<Eigen::VectorXd> collective_populations(const CollectiveSpectrum& spectrum, const DenseMatrix& rho) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t n = 0; n < spectrum.blocks.sector_count(); ++n) {
        const DenseMatrix& v = spectrum.sectors[n].vectors;
        const DenseMatrix block = extract_block(rho, spectrum.blocks, n, n);
        Eigen::VectorXd pops(v.cols());
        for (Eigen::Index a = 0; a < v.cols(); ++a) {
            pops[a] = v.col(a).dot(block * v.col(a)).real();
        }
        out.push_back(pops);
    }
    return out;
}

} // namespace ote
