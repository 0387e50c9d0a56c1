// collective.hpp - Non-Hermitian effective Hamiltonian, collective basis and projected dynamics
//
// H_eff = sum_i [(w + i G+_ii/2) s+_i s-_i + i G-_ii/2 s-_i s+_i]
//       + sum_{i!=j} [(L_ij + i G+_ij/2) s+_i s-_j + i G-_ij/2 s-_i s+_j]      (units of hbar)
//
// H_eff conserves the excitation number, so it is stored per sector W^n. Its right
// eigenvectors |lambda_a^(n)> form the collective basis. For a density matrix rho the
// projected elements are R^(m,n)_{ba} = <lambda_b^(m)| rho |lambda_a^(n)>, and
//
//   dR^(m,n)_{ba}/dt = -i (conj(W_b^(m)) - W_a^(n)) R_{ba}
//                    + sum P^(m,n)[(b,a),(b',a')] R^(m+1,n+1)_{b'a'}
//                    + sum M^(m,n)[(b,a),(b',a')] R^(m-1,n-1)_{b'a'}
//
// which is an exact rewrite of the master equation.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ote/master.hpp"

namespace ote {

struct EffectiveHamiltonian {
    ExcitationBlocks blocks;
    std::vector<DenseMatrix> sectors; // d_n x d_n, local sector indices, rad/s

    std::size_t qubits() const { return blocks.qubits; }
    SparseMatrix full() const;        // 2^N x 2^N in basis-index order
};

EffectiveHamiltonian build_heff(const RateSet& rates, double omega0, std::size_t qubits,
                                std::size_t max_qubits = kMaxQubits);

struct SectorSpectrum {
    Eigen::VectorXcd eigenvalues;  // Omega = G + i F, rad/s
    DenseMatrix vectors;           // columns: unit-norm right eigenvectors in the sector basis
    DenseMatrix inverse;           // vectors^{-1}
    // group[a]: index of the first eigenvalue exactly degenerate with a.
    std::vector<std::size_t> group;

    // Change-of-basis matrix with rows = eigenvectors: |lambda_a> = sum_b C(a, b) |k_b>.
    DenseMatrix change_of_basis() const { return vectors.transpose(); }
};

struct CollectiveSpectrum {
    ExcitationBlocks blocks;
    std::vector<SectorSpectrum> sectors;

    // Decay constant 2 Im Omega of eigenstate a in sector n.
    double decay_constant(std::size_t n, std::size_t a) const { return 2.0 * sectors[n].eigenvalues[a].imag(); }
};

// Relative tolerance on |Omega_a - Omega_b| / max|Omega| for exact degeneracy.
inline constexpr double exact_degeneracy_tolerance = 1e-12;
// Largest accepted condition number of an eigenvector matrix.
inline constexpr double max_eigenvector_condition = 1e12;

// Right eigenpairs per sector, sorted by (Re, Im), unit norm with the first
// significant component real positive; exactly degenerate eigenvectors are
// orthonormalised in order. Throws NonDiagonalizable.
CollectiveSpectrum spectral(const EffectiveHamiltonian& heff);

// s-_i |lambda_a^(n)> = sum_a' lower[n][i](a, a') |lambda_a'^(n-1)>
// s+_i |lambda_a^(n)> = sum_a' raise[n][i](a, a') |lambda_a'^(n+1)>
// lower[0] and raise[N] are empty (the actions vanish).
struct LadderMaps {
    std::vector<std::vector<DenseMatrix>> lower;
    std::vector<std::vector<DenseMatrix>> raise;
};

LadderMaps ladder_maps(const CollectiveSpectrum& spectrum);

// Sector-restricted ladder operators in the decoupled basis:
// lowering(blocks, n, i) maps W^n -> W^(n-1) (d_{n-1} x d_n), raising maps W^n -> W^(n+1).
DenseMatrix sector_lowering(const ExcitationBlocks& blocks, std::size_t n, std::size_t i);
DenseMatrix sector_raising(const ExcitationBlocks& blocks, std::size_t n, std::size_t i);

class ProjectedGenerator {
public:
    static constexpr std::size_t max_qubits = 5;

    ProjectedGenerator(const CollectiveSpectrum& spectrum, const RateSet& rates);

    std::size_t qubits() const { return spectrum_.blocks.qubits; }
    const CollectiveSpectrum& spectrum() const { return spectrum_; }

    // Coefficient tables acting on row-major vec(R^(m+1,n+1)) and vec(R^(m-1,n-1)).
    // P(m, n) is empty when m or n equals N; M(m, n) is empty when m or n is 0.
    const DenseMatrix& P(std::size_t m, std::size_t n) const { return p_[m][n]; }
    const DenseMatrix& M(std::size_t m, std::size_t n) const { return m_[m][n]; }

    // Projected time derivative. R is the full 2^N x 2^N matrix in sector order
    // (sectors 0..N concatenated, collective indices within each).
    DenseMatrix apply(const DenseMatrix& projected) const;

    // Decoupled-basis rho (basis-index order) <-> projected R (sector order).
    DenseMatrix to_projected(const DenseMatrix& rho) const;
    DenseMatrix from_projected(const DenseMatrix& projected) const;

    std::size_t sector_offset(std::size_t n) const { return offsets_[n]; }

private:
    CollectiveSpectrum spectrum_;
    std::vector<std::vector<DenseMatrix>> p_;
    std::vector<std::vector<DenseMatrix>> m_;
    std::vector<std::size_t> offsets_;
};

ProjectedGenerator project_master(const CollectiveSpectrum& spectrum, const RateSet& rates);

// Secular reduction: only populations and coherences between exactly degenerate
// eigenstates of the same sector are kept.
struct SecularGenerator {
    struct Element {
        std::size_t sector;
        std::size_t row;
        std::size_t col;
    };
    std::vector<Element> kept;
    DenseMatrix generator;               // acting on the kept elements, in order
    std::vector<std::string> warnings;   // near-degeneracies inside the gap threshold
};

// gap_threshold <= 0 selects 1e-6 * max|Omega| per sector.
SecularGenerator secular_reduce(const ProjectedGenerator& projected, double gap_threshold = -1.0);

// Steady state of the reduced generator, returned as a decoupled-basis density matrix.
DenseMatrix secular_steady_state(const ProjectedGenerator& projected, const SecularGenerator& reduced);

// <lambda_a^(n)| rho |lambda_a^(n)> for every collective state.
std::vector<Eigen::VectorXd> collective_populations(const CollectiveSpectrum& spectrum, const DenseMatrix& rho);

} // namespace ote
