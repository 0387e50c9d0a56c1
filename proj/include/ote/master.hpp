// master.hpp - Master-equation coefficients and the Liouvillian generator
//
//   d rho/dt = -i [H_S, rho] - i sum_{i!=j} Lambda_ij [s+_i s-_j, rho]
//            + sum_ij Gamma+_ij (s-_j rho s+_i - {s+_i s-_j, rho}/2)
//            + sum_ij Gamma-_ij (s+_j rho s-_i - {s-_i s+_j, rho}/2)
//
// with H_S = omega0 sum_i s+_i s-_i. Level shifts are not modelled: all supported
// configurations have identical emitters at a common height, where they are equal
// and drop out of the dynamics. All rates in rad/s.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ote/alpha_kernel.hpp"
#include "ote/excitation.hpp"

namespace ote {

using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

// Mean thermal photon number; exactly 0 at T = 0.
double bose_n(double omega, double temperature);

struct RateSet {
    DenseMatrix gamma_plus;   // emission
    DenseMatrix gamma_minus;  // absorption
    DenseMatrix lambda;       // coherent exchange, zero diagonal
    Eigen::VectorXd gamma0;   // vacuum rates per emitter

    std::size_t size() const { return static_cast<std::size_t>(gamma_plus.rows()); }

    // Hermitian symmetry, zero Lambda diagonal and positive semidefinite Gamma+-.
    // Throws InvalidDissipator.
    void validate() const;
};

// Smallest eigenvalue must be >= -psd_tolerance * largest.
inline constexpr double psd_tolerance = 1e-10;

// Gamma+- from contracted response functions. Lambda is left at zero.
RateSet build_rates(const AlphaMatrices& alpha, double wall_temperature, double slab_temperature,
                    const Eigen::VectorXd& gamma0, double omega);

enum class LambdaStrategy { vacuum_analytic, pv_quadrature, user_supplied };

struct LambdaOptions {
    LambdaStrategy strategy{LambdaStrategy::vacuum_analytic};
    std::optional<DenseMatrix> user;   // user_supplied
    double pv_window_fraction{0.5};    // pv_quadrature integrates omega' in omega (1 -+ f), f < 1
    double pv_rel_tol{1e-6};
};

// Free-space dipole-dipole coupling of emitters i != j at frequency omega.
cplx vacuum_dipole_coupling(const EmitterArray& emitters, std::size_t i, std::size_t j, double omega);

// Principal-value frequency integral of the response functions over a finite window,
// singularity removed by symmetric subtraction. Experimental: the window cutoff is a
// modelling choice and the result depends on it.
DenseMatrix lambda_pv_quadrature(const EmitterArray& emitters, const SlabSpec& slab, const QuadratureSpec& quad,
                                 double omega, double window_fraction, double rel_tol);

DenseMatrix build_lambda(const EmitterArray& emitters, const SlabSpec& slab, const QuadratureSpec& quad,
                         double omega, const LambdaOptions& options);

// Generator of the master equation above. Built once, immutable afterwards.
// Vectorisation for the materialised forms is column-major: index a + D b for rho(a, b).
class Liouvillian {
public:
    Liouvillian(RateSet rates, double omega0, std::size_t qubits, std::size_t max_qubits = kMaxQubits);

    std::size_t qubits() const { return blocks_.qubits; }
    std::size_t hilbert_dim() const { return blocks_.hilbert_dim(); }
    std::size_t dimension() const { return hilbert_dim() * hilbert_dim(); }
    double omega0() const { return omega0_; }
    const RateSet& rates() const { return rates_; }
    const ExcitationBlocks& blocks() const { return blocks_; }
    // Sector blocks of the non-Hermitian effective Hamiltonian (rad/s).
    const std::vector<DenseMatrix>& heff_blocks() const { return heff_; }

    // Rough operator-norm scale used for relative residuals.
    double scale() const { return scale_; }

    DenseMatrix apply(const DenseMatrix& rho) const;

    // Materialised generator; dense for N <= 4 and sparse up to N = 7.
    DenseMatrix dense() const;
    SparseMatrix sparse() const;
    static constexpr std::size_t max_dense_qubits = 5;
    static constexpr std::size_t max_sparse_qubits = 7;

    // Block-diagonal (equal excitation number) part. The block vector stacks sectors
    // n = 0..N, each d_n x d_n block in row-major order.
    std::size_t block_offset(std::size_t n) const { return block_offsets_[n]; }
    std::size_t block_unknowns() const { return block_offsets_.back(); }
    Eigen::VectorXcd apply_blocks(const Eigen::VectorXcd& x) const;
    SparseMatrix block_matrix() const;

    std::vector<DenseMatrix> split_blocks(const Eigen::VectorXcd& x) const;
    DenseMatrix blocks_to_full(const Eigen::VectorXcd& x) const;

private:
    RateSet rates_;
    double omega0_;
    ExcitationBlocks blocks_;
    std::vector<DenseMatrix> heff_;
    std::vector<std::size_t> block_offsets_;
    double scale_{1.0};
};

} // namespace ote
