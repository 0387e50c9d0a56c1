// steady_state.hpp - Time evolution and stationary states of the Liouvillian
//
// The stationary solvers exploit the excitation-number structure: the only block of
// coupled equations that can support a non-zero steady state contains the populations
// and the coherences between states with equal excitation number.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ote/collective.hpp"
#include "ote/master.hpp"

namespace ote {

enum class SteadyMethod { automatic, dense_nullspace, blocked_linear, long_time };

std::string to_string(SteadyMethod m);
SteadyMethod parse_steady_method(const std::string& name); // throws ConfigError

struct SteadyOptions {
    SteadyMethod method{SteadyMethod::automatic};
    double residual_tol{1e-10};      // ||L rho|| / (scale ||rho||)
    double positivity_tol{1e-10};
    double nullspace_threshold{1e-12}; // singular values below this * sigma_max span the null space
    std::size_t dense_block_limit{1000}; // blocked-linear uses dense LU up to this many unknowns
    std::size_t gmres_restart{40};
    std::size_t gmres_max_iterations{4000};
    double gmres_tol{1e-13};
    // Coarse space of the iterative solver: collective-basis elements whose eigenvalue
    // pair lies within coarse_gap_factor * (|Gamma+| + |Gamma-|) of each other.
    double coarse_gap_factor{10.0};
    std::size_t max_coarse_unknowns{6000};
    double long_time_tol{1e-11};     // trace-distance change between successive chunks
    double long_time_max{1e9};       // in units of the slowest decay time
};

struct SteadyResult {
    DenseMatrix rho;
    double residual{0.0};
    std::size_t iterations{0};
    SteadyMethod method{SteadyMethod::automatic};
};

// Method used for 'automatic': dense null space up to 4 qubits, blocked linear above.
SteadyMethod default_method(std::size_t qubits);

SteadyResult steady_state(const Liouvillian& l, const SteadyOptions& options = {});

// ||L rho||_F / (scale ||rho||_F).
double relative_residual(const Liouvillian& l, const DenseMatrix& rho);

struct EvolveOptions {
    double rel_tol{1e-10};
    double abs_tol{1e-12};
    double trace_drift_tol{1e-10};  // per accepted step
    double min_step_fraction{1e-14}; // underflow threshold relative to the time span
    std::size_t max_steps{20000000};
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DenseMatrix> states;
    double max_trace_drift{0.0};     // largest per-step change of the trace
    std::size_t steps{0};
};

// Adaptive Dormand-Prince integration, sampled at t_grid (ascending, starting at or
// after 0 with rho0 given at t = 0). The returned states are never renormalised.
// Throws StiffnessError on step-size underflow, SolverFailure on trace drift.
Trajectory evolve(const Liouvillian& l, const DenseMatrix& rho0, const std::vector<double>& t_grid,
                  const EvolveOptions& options = {});

// Same dynamics integrated in collective coordinates and mapped back to the
// decoupled basis at each grid time. Tolerances apply to the projected elements.
Trajectory evolve_projected(const ProjectedGenerator& generator, const DenseMatrix& rho0,
                            const std::vector<double>& t_grid, const EvolveOptions& options = {});

// (1/2) sum |eigenvalues of (a - b)|, for Hermitian a and b.
double trace_distance(const DenseMatrix& a, const DenseMatrix& b);

// Hermitian, unit trace and eigenvalues >= -tol. Throws DomainError naming the violation.
void check_density_matrix(const DenseMatrix& rho, double tol = 1e-10);

// Flat complex-matrix text format: one matrix row per line, entries "re,im"
// separated by single spaces, 17 significant digits.
void write_matrix(std::ostream& os, const DenseMatrix& m);
DenseMatrix read_matrix(std::istream& is); // throws ConfigError on malformed input
void write_matrix_file(const std::string& path, const DenseMatrix& m);
DenseMatrix read_matrix_file(const std::string& path);

} // namespace ote
