#include "ote/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/numeric/odeint.hpp>

#include "ote/collective.hpp"
#include "ote/errors.hpp"

namespace ote {

namespace {

constexpr cplx I{0.0, 1.0};
using RowMajorMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Two-level preconditioner for the reduced block system (ground population fixed).
//
// In the collective basis (X~ = V^dag X V per sector) the coherent part of the
// generator is diagonal, i (Omega_b - conj(Omega_a)). Elements whose two eigenvalues
// lie within a few dissipative rates of each other (populations and near-degenerate
// coherences) are slow; they are solved exactly on a dense coarse system. Everything
// else is fast and handled by the diagonal inverse.
class TwoLevelPreconditioner {
public:
    using Op = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

    TwoLevelPreconditioner(const Liouvillian& l, Op op, double gap_factor, std::size_t max_coarse)
        : l_(l), op_(std::move(op)) {
        const double floor = 1e-12 * l.scale();
        const auto& blocks = l.blocks();
        try {
            spec_ = spectral(EffectiveHamiltonian{blocks, l.heff_blocks()});
        } catch (const NonDiagonalizable&) {
            jacobi_ = true;
        }
        if (jacobi_) {
            for (const auto& h : l.heff_blocks()) {
                const auto d = h.rows();
                DenseMatrix den(d, d);
                for (Eigen::Index a = 0; a < d; ++a) {
                    for (Eigen::Index b = 0; b < d; ++b) {
                        den(a, b) = safe(I * (h(b, b) - std::conj(h(a, a))), floor);
                    }
                }
                denominators_.push_back(std::move(den));
            }
            return;
        }
        const auto& rates = l.rates();
        const double gamma = rates.gamma_plus.norm() + rates.gamma_minus.norm();
        double gap = gap_factor * gamma;
        while (true) {
            select_coarse(gap);
            if (coarse_.size() <= max_coarse || gap == 0.0) {
                break;
            }
            gap = gap > 1e-6 * gamma ? gap / 4.0 : 0.0;
        }
        for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
            const auto& w = spec_.sectors[n].eigenvalues;
            const auto d = w.size();
            DenseMatrix den(d, d);
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) {
                    den(a, b) = coarse_mask_[n](a, b) ? cplx(0.0) : safe(I * (w[b] - std::conj(w[a])), floor);
                }
            }
            denominators_.push_back(std::move(den));
        }
        build_coarse();
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
        Eigen::VectorXcd x = smooth(v);
        if (jacobi_ || coarse_.empty()) {
            return x;
        }
        x += coarse_correction(v - op_(x));
        x += smooth(v - op_(x));
        x[0] = 0.0;
        return x;
    }

private:
    struct Element {
        std::size_t sector;
        Eigen::Index row;
        Eigen::Index col;
    };

    static cplx safe(cplx z, double floor) { return std::abs(z) < floor ? cplx(floor, 0.0) : z; }

    void select_coarse(double gap) {
        coarse_.clear();
        coarse_mask_.clear();
        coarse_index_.clear();
        for (std::size_t n = 0; n < spec_.sectors.size(); ++n) {
            const auto& w = spec_.sectors[n].eigenvalues;
            const auto d = w.size();
            Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(d, d);
            Eigen::MatrixXi index = Eigen::MatrixXi::Constant(d, d, -1);
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) {
                    mask(a, b) = a == b || std::abs(w[a] - w[b]) <= gap;
                    // The ground population is the pinned unknown.
                    if (mask(a, b) && !(n == 0 && a == 0 && b == 0)) {
                        index(a, b) = int(coarse_.size());
                        coarse_.push_back({n, a, b});
                    }
                }
            }
            coarse_mask_.push_back(std::move(mask));
            coarse_index_.push_back(std::move(index));
        }
    }

    // Galerkin restriction of the generator to the coarse elements, in collective coordinates.
    void build_coarse() {
        const auto& blocks = l_.blocks();
        const auto& rates = l_.rates();
        const std::size_t nq = blocks.qubits;
        const LadderMaps maps = ladder_maps(spec_);
        const auto k = Eigen::Index(coarse_.size());
        DenseMatrix a = DenseMatrix::Zero(k, k);
        for (Eigen::Index r = 0; r < k; ++r) {
            const auto& e = coarse_[r];
            const auto& w = spec_.sectors[e.sector].eigenvalues;
            a(r, r) = I * (w[e.col] - std::conj(w[e.row]));
        }
        // Up-coupling from sector n + 1 with X_i = raise[n][i]^T (d_{n+1} x d_n):
        //   coefficient of X~(a', b') in row (a, b) is sum_j conj(X_j(a', a)) C_j(b', b),
        //   C_j = sum_i Gamma+_ij X_i. Down-coupling is the same with lower maps and Gamma-.
        auto couple = [&](std::size_t n, std::size_t m, const std::vector<DenseMatrix>& maps_n,
                          const DenseMatrix& gamma) {
            std::vector<DenseMatrix> x(nq);
            std::vector<DenseMatrix> c(nq);
            for (std::size_t i = 0; i < nq; ++i) {
                x[i] = maps_n[i].transpose();
            }
            for (std::size_t j = 0; j < nq; ++j) {
                c[j] = DenseMatrix::Zero(x[0].rows(), x[0].cols());
                for (std::size_t i = 0; i < nq; ++i) {
                    if (gamma(i, j) != cplx(0.0)) {
                        c[j] += gamma(i, j) * x[i];
                    }
                }
            }
            const auto& rows_idx = coarse_index_[n];
            const auto& cols_idx = coarse_index_[m];
            for (Eigen::Index ra = 0; ra < rows_idx.rows(); ++ra) {
                for (Eigen::Index rb = 0; rb < rows_idx.cols(); ++rb) {
                    const int row = rows_idx(ra, rb);
                    if (row < 0) {
                        continue;
                    }
                    for (Eigen::Index ca = 0; ca < cols_idx.rows(); ++ca) {
                        for (Eigen::Index cb = 0; cb < cols_idx.cols(); ++cb) {
                            const int col = cols_idx(ca, cb);
                            if (col < 0) {
                                continue;
                            }
                            cplx acc = 0.0;
                            for (std::size_t j = 0; j < nq; ++j) {
                                acc += std::conj(x[j](ca, ra)) * c[j](cb, rb);
                            }
                            a(row, col) += acc;
                        }
                    }
                }
            }
        };
        for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
            if (n + 1 < blocks.sector_count()) {
                couple(n, n + 1, maps.raise[n], rates.gamma_plus);
            }
            if (n > 0) {
                couple(n, n - 1, maps.lower[n], rates.gamma_minus);
            }
        }
        coarse_lu_.compute(a);
    }

    Eigen::VectorXcd smooth(const Eigen::VectorXcd& y) const {
        Eigen::VectorXcd x(y.size());
        const auto& blocks = l_.blocks();
        for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
            const auto d = Eigen::Index(blocks.dim(n));
            Eigen::Map<const RowMajorMatrix> yn(y.data() + l_.block_offset(n), d, d);
            Eigen::Map<RowMajorMatrix> xn(x.data() + l_.block_offset(n), d, d);
            if (jacobi_) {
                xn = yn.cwiseQuotient(denominators_[n]);
                continue;
            }
            const auto& s = spec_.sectors[n];
            DenseMatrix t = s.vectors.adjoint() * yn * s.vectors;
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) {
                    t(a, b) = coarse_mask_[n](a, b) ? cplx(0.0) : t(a, b) / denominators_[n](a, b);
                }
            }
            xn = s.inverse.adjoint() * t * s.inverse;
        }
        x[0] = 0.0;
        return x;
    }

    Eigen::VectorXcd coarse_correction(const Eigen::VectorXcd& r) const {
        const auto& blocks = l_.blocks();
        std::vector<DenseMatrix> tilde(blocks.sector_count());
        Eigen::VectorXcd rc(Eigen::Index(coarse_.size()));
        for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
            const auto d = Eigen::Index(blocks.dim(n));
            Eigen::Map<const RowMajorMatrix> rn(r.data() + l_.block_offset(n), d, d);
            tilde[n] = spec_.sectors[n].vectors.adjoint() * rn * spec_.sectors[n].vectors;
        }
        for (std::size_t k = 0; k < coarse_.size(); ++k) {
            rc[Eigen::Index(k)] = tilde[coarse_[k].sector](coarse_[k].row, coarse_[k].col);
        }
        const Eigen::VectorXcd e = coarse_lu_.solve(rc);
        for (auto& t : tilde) {
            t.setZero();
        }
        for (std::size_t k = 0; k < coarse_.size(); ++k) {
            tilde[coarse_[k].sector](coarse_[k].row, coarse_[k].col) = e[Eigen::Index(k)];
        }
        Eigen::VectorXcd x(r.size());
        for (std::size_t n = 0; n < blocks.sector_count(); ++n) {
            const auto d = Eigen::Index(blocks.dim(n));
            Eigen::Map<RowMajorMatrix> xn(x.data() + l_.block_offset(n), d, d);
            const auto& s = spec_.sectors[n];
            xn = s.inverse.adjoint() * tilde[n] * s.inverse;
        }
        x[0] = 0.0;
        return x;
    }

    const Liouvillian& l_;
    Op op_;
    bool jacobi_{false};
    CollectiveSpectrum spec_;
    std::vector<Element> coarse_;
    std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> coarse_mask_;
    std::vector<Eigen::MatrixXi> coarse_index_;
    std::vector<DenseMatrix> denominators_;
    Eigen::PartialPivLU<DenseMatrix> coarse_lu_;
};

struct GmresResult {
    Eigen::VectorXcd x;
    std::size_t iterations{0};
    double relative_residual{0.0};
    bool converged{false};
};

// Restarted GMRES with right preconditioning and re-orthogonalised modified Gram-Schmidt.
template <class Op, class Prec>
GmresResult gmres(const Op& op, const Prec& prec, const Eigen::VectorXcd& b, std::size_t restart,
                  std::size_t max_iterations, double tol) {
    const auto n = b.size();
    GmresResult res;
    res.x = Eigen::VectorXcd::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    const auto m = Eigen::Index(restart);
    DenseMatrix v(n, m + 1);
    DenseMatrix h = DenseMatrix::Zero(m + 1, m);
    std::vector<double> c(m);
    std::vector<cplx> s(m);
    while (res.iterations < max_iterations) {
        const Eigen::VectorXcd r = b - op(res.x);
        const double beta = r.norm();
        res.relative_residual = beta / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            return res;
        }
        v.col(0) = r / beta;
        h.setZero();
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
        g[0] = beta;
        Eigen::Index j = 0;
        for (; j < m && res.iterations < max_iterations; ++j) {
            ++res.iterations;
            Eigen::VectorXcd w = op(prec(v.col(j)));
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index i = 0; i <= j; ++i) {
                    const cplx hij = v.col(i).dot(w);
                    h(i, j) += hij;
                    w -= hij * v.col(i);
                }
            }
            const double wn = w.norm();
            h(j + 1, j) = wn;
            for (Eigen::Index i = 0; i < j; ++i) {
                const cplx t = c[i] * h(i, j) + s[i] * h(i + 1, j);
                h(i + 1, j) = -std::conj(s[i]) * h(i, j) + c[i] * h(i + 1, j);
                h(i, j) = t;
            }
            const cplx a = h(j, j);
            const double bb = wn;
            const double t = std::hypot(std::abs(a), bb);
            if (std::abs(a) == 0.0) {
                c[j] = 0.0;
                s[j] = 1.0;
            } else {
                c[j] = std::abs(a) / t;
                s[j] = (a / std::abs(a)) * bb / t;
            }
            h(j, j) = c[j] * a + s[j] * bb;
            h(j + 1, j) = 0.0;
            g[j + 1] = -std::conj(s[j]) * g[j];
            g[j] = c[j] * g[j];
            res.relative_residual = std::abs(g[j + 1]) / bnorm;
            if (res.relative_residual <= tol || wn == 0.0) {
                ++j;
                break;
            }
            v.col(j + 1) = w / wn;
        }
        const Eigen::VectorXcd y =
            h.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
        res.x += prec(v.leftCols(j) * y);
    }
    const Eigen::VectorXcd r = b - op(res.x);
    res.relative_residual = r.norm() / bnorm;
    res.converged = res.relative_residual <= tol;
    return res;
}

DenseMatrix finish(const DenseMatrix& raw, double positivity_tol) {
    const cplx tr = raw.trace();
    if (!(std::abs(tr) > 0.0)) {
        throw SolverFailure("stationary solution has zero trace");
    }
    DenseMatrix rho = raw / tr;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -positivity_tol) {
        std::ostringstream msg;
        msg << "stationary state violates positivity: smallest eigenvalue " << es.eigenvalues().minCoeff();
        throw SolverFailure(msg.str());
    }
    return rho;
}

SteadyResult solve_dense_nullspace(const Liouvillian& l, const SteadyOptions& opt) {
    const DenseMatrix a = l.dense();
    Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = opt.nullspace_threshold * sv[0];
    std::size_t null_dim = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv[k] <= cut) {
            ++null_dim;
        }
    }
    if (null_dim != 1) {
        throw DegeneracyError("steady state is not unique", null_dim);
    }
    const Eigen::VectorXcd v = svd.matrixV().col(sv.size() - 1);
    const auto d = Eigen::Index(l.hilbert_dim());
    const DenseMatrix raw = Eigen::Map<const DenseMatrix>(v.data(), d, d);
    SteadyResult res;
    res.rho = finish(raw, opt.positivity_tol);
    res.method = SteadyMethod::dense_nullspace;
    return res;
}

SteadyResult solve_blocked(const Liouvillian& l, const SteadyOptions& opt) {
    // Unknown 0 is the ground-state population. It is fixed to 1 (normalised afterwards)
    // and its equation, redundant by trace conservation, is dropped.
    const auto n = Eigen::Index(l.block_unknowns());
    SteadyResult res;
    res.method = SteadyMethod::blocked_linear;
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
    x[0] = 1.0;
    if (std::size_t(n) <= opt.dense_block_limit) {
        const DenseMatrix a(l.block_matrix());
        Eigen::BDCSVD<DenseMatrix> svd(a);
        const auto& sv = svd.singularValues();
        std::size_t null_dim = 0;
        for (Eigen::Index k = 0; k < sv.size(); ++k) {
            if (sv[k] <= opt.nullspace_threshold * sv[0]) {
                ++null_dim;
            }
        }
        if (null_dim != 1) {
            throw DegeneracyError("steady state is not unique", null_dim);
        }
        if (n > 1) {
            const DenseMatrix sub = a.bottomRightCorner(n - 1, n - 1);
            x.tail(n - 1) = sub.partialPivLu().solve(-a.col(0).tail(n - 1));
        }
    } else {
        auto op = [&l](const Eigen::VectorXcd& y) {
            Eigen::VectorXcd padded = y;
            padded[0] = 0.0;
            Eigen::VectorXcd out = l.apply_blocks(padded);
            out[0] = 0.0;
            return out;
        };
        const TwoLevelPreconditioner pre(l, op, opt.coarse_gap_factor, opt.max_coarse_unknowns);
        auto prec = [&](const Eigen::VectorXcd& y) { return pre.apply(y); };
        Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(n);
        e0[0] = 1.0;
        Eigen::VectorXcd rhs = -l.apply_blocks(e0);
        rhs[0] = 0.0;
        // Since |x| >= 1 (x[0] = 1), an absolute residual of 1e-2 * residual_tol * scale
        // already meets the acceptance residual with margin; asking for more only hits
        // the conditioning floor of nearly dark collective states.
        const double bnorm = rhs.norm();
        const double tol = bnorm > 0.0 ? std::max(opt.gmres_tol, 1e-2 * opt.residual_tol * l.scale() / bnorm)
                                       : opt.gmres_tol;
        const GmresResult g = gmres(op, prec, rhs, opt.gmres_restart, opt.gmres_max_iterations, tol);
        res.iterations = g.iterations;
        if (!g.converged) {
            throw ConvergenceError("blocked GMRES did not converge after " + std::to_string(g.iterations) +
                                       " iterations",
                                   g.relative_residual);
        }
        x += g.x;
        x[0] = 1.0;
    }
    res.rho = finish(l.blocks_to_full(x), opt.positivity_tol);
    return res;
}

double slowest_time(const Liouvillian& l) {
    double rate = std::numeric_limits<double>::infinity();
    try {
        const CollectiveSpectrum spec = spectral(EffectiveHamiltonian{l.blocks(), l.heff_blocks()});
        for (std::size_t n = 0; n < spec.sectors.size(); ++n) {
            for (Eigen::Index a = 0; a < spec.sectors[n].eigenvalues.size(); ++a) {
                const double g = spec.decay_constant(n, std::size_t(a));
                if (g > 1e-12 * l.scale()) {
                    rate = std::min(rate, g);
                }
            }
        }
    } catch (const NonDiagonalizable&) {
    }
    if (!std::isfinite(rate)) {
        rate = l.scale();
    }
    return 1.0 / rate;
}

SteadyResult solve_long_time(const Liouvillian& l, const SteadyOptions& opt) {
    const auto d = Eigen::Index(l.hilbert_dim());
    DenseMatrix rho = DenseMatrix::Identity(d, d) / double(d);
    const double tau = slowest_time(l);
    double chunk = tau;
    double elapsed = 0.0;
    EvolveOptions eo;
    eo.rel_tol = 1e-12;
    eo.abs_tol = 1e-14;
    SteadyResult res;
    res.method = SteadyMethod::long_time;
    while (elapsed < opt.long_time_max * tau) {
        const Trajectory tr = evolve(l, rho, {chunk}, eo);
        res.iterations += tr.steps;
        const DenseMatrix next = tr.states.back();
        const double change = trace_distance(next, rho);
        rho = next;
        elapsed += chunk;
        if (change < opt.long_time_tol) {
            res.rho = finish(rho, opt.positivity_tol);
            return res;
        }
        chunk *= 2.0;
    }
    throw ConvergenceError("long-time evolution did not settle", 0.0);
}

} // namespace

std::string to_string(SteadyMethod m) {
    switch (m) {
    case SteadyMethod::automatic: return "auto";
    case SteadyMethod::dense_nullspace: return "dense-nullspace";
    case SteadyMethod::blocked_linear: return "blocked-linear";
    case SteadyMethod::long_time: return "long-time";
    }
    return "auto";
}

SteadyMethod parse_steady_method(const std::string& name) {
    for (auto m : {SteadyMethod::automatic, SteadyMethod::dense_nullspace, SteadyMethod::blocked_linear,
                   SteadyMethod::long_time}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw ConfigError("unknown steady-state method '" + name +
                      "' (expected auto, dense-nullspace, blocked-linear or long-time)");
}

SteadyMethod default_method(std::size_t qubits) {
    return qubits <= 4 ? SteadyMethod::dense_nullspace : SteadyMethod::blocked_linear;
}

double relative_residual(const Liouvillian& l, const DenseMatrix& rho) {
    const double rn = rho.norm();
    if (rn == 0.0) {
        return 0.0;
    }
    return l.apply(rho).norm() / (l.scale() * rn);
}

SteadyResult steady_state(const Liouvillian& l, const SteadyOptions& options) {
    SteadyMethod method = options.method;
    if (method == SteadyMethod::automatic) {
        method = default_method(l.qubits());
    }
    SteadyResult res;
    switch (method) {
    case SteadyMethod::dense_nullspace: res = solve_dense_nullspace(l, options); break;
    case SteadyMethod::long_time: res = solve_long_time(l, options); break;
    default: res = solve_blocked(l, options); break;
    }
    res.residual = relative_residual(l, res.rho);
    if (!(res.residual < options.residual_tol)) {
        throw ConvergenceError("stationary residual " + std::to_string(res.residual) + " above tolerance",
                               res.residual);
    }
    return res;
}

namespace {

// Dormand-Prince integration of dX/dt = deriv(X) for a d x d matrix X, sampled on t_grid.
// `trace_of` gives the physical trace of a state in the integration coordinates.
template <class Deriv, class TraceOf>
Trajectory integrate_matrix(Eigen::Index d, Deriv deriv, TraceOf trace_of, const DenseMatrix& x0,
                            const std::vector<double>& t_grid, double scale, const EvolveOptions& options) {
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<cplx>;

    if (!std::is_sorted(t_grid.begin(), t_grid.end()) || (!t_grid.empty() && t_grid.front() < 0.0)) {
        throw DomainError("evolve: time grid must be ascending and non-negative");
    }
    auto as_matrix = [d](const State& x) { return DenseMatrix(Eigen::Map<const DenseMatrix>(x.data(), d, d)); };
    auto system = [&](const State& x, State& dxdt, double) {
        const DenseMatrix out = deriv(as_matrix(x));
        dxdt.assign(out.data(), out.data() + out.size());
    };

    Trajectory traj;
    State x(x0.data(), x0.data() + x0.size());
    double t = 0.0;
    const double span = t_grid.empty() ? 0.0 : t_grid.back();
    double dt = std::min(span > 0.0 ? span : 1.0, 1e-2 / scale);
    const double min_dt = options.min_step_fraction * std::max(span, 1.0 / scale);
    auto stepper = odeint::make_controlled(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());

    for (const double target : t_grid) {
        while (t < target) {
            const bool last = dt >= target - t;
            double step = last ? target - t : dt;
            const cplx before = trace_of(as_matrix(x));
            const double proposed = dt;
            const auto outcome = stepper.try_step(system, x, t, step);
            if (outcome == odeint::success) {
                ++traj.steps;
                const double drift = std::abs(trace_of(as_matrix(x)) - before);
                traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
                if (drift > options.trace_drift_tol) {
                    throw SolverFailure("evolve: trace drift " + std::to_string(drift) + " in a single step");
                }
                if (last) {
                    t = target;
                    dt = std::max(proposed, step);
                } else {
                    dt = step;
                }
                if (traj.steps > options.max_steps) {
                    throw StiffnessError("evolve: step budget exhausted; use a stationary solver instead");
                }
            } else {
                dt = step;
            }
            if (dt < min_dt && t < target) {
                throw StiffnessError("evolve: step size underflow at t = " + std::to_string(t) +
                                     "; the problem is stiff, use a stationary solver instead");
            }
        }
        traj.times.push_back(target);
        traj.states.push_back(as_matrix(x));
    }
    return traj;
}

} // namespace

Trajectory evolve(const Liouvillian& l, const DenseMatrix& rho0, const std::vector<double>& t_grid,
                  const EvolveOptions& options) {
    const auto d = Eigen::Index(l.hilbert_dim());
    if (rho0.rows() != d || rho0.cols() != d) {
        throw DomainError("evolve: initial state has the wrong dimension");
    }
    check_density_matrix(rho0, 1e-8);
    return integrate_matrix(
        d, [&l](const DenseMatrix& rho) { return l.apply(rho); }, [](const DenseMatrix& rho) { return rho.trace(); },
        rho0, t_grid, l.scale(), options);
}

Trajectory evolve_projected(const ProjectedGenerator& g, const DenseMatrix& rho0, const std::vector<double>& t_grid,
                            const EvolveOptions& options) {
    const auto d = Eigen::Index(std::size_t{1} << g.qubits());
    if (rho0.rows() != d || rho0.cols() != d) {
        throw DomainError("evolve_projected: initial state has the wrong dimension");
    }
    check_density_matrix(rho0, 1e-8);
    double scale = 0.0;
    for (const auto& s : g.spectrum().sectors) {
        for (Eigen::Index a = 0; a < s.eigenvalues.size(); ++a) {
            scale = std::max(scale, 2.0 * std::abs(s.eigenvalues[a]));
        }
    }
    if (scale == 0.0) {
        scale = 1.0;
    }
    Trajectory traj = integrate_matrix(
        d, [&g](const DenseMatrix& r) { return g.apply(r); },
        [&g](const DenseMatrix& r) { return g.from_projected(r).trace(); }, g.to_projected(rho0), t_grid, scale,
        options);
    for (auto& state : traj.states) {
        state = g.from_projected(state);
    }
    return traj;
}

double trace_distance(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DomainError("trace_distance: dimension mismatch");
    }
    const DenseMatrix diff = a - b;
    const DenseMatrix h = 0.5 * (diff + diff.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

void check_density_matrix(const DenseMatrix& rho, double tol) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw DomainError("density matrix must be square and non-empty");
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) {
        throw DomainError("density matrix is not Hermitian");
    }
    if (std::abs(rho.trace() - cplx(1.0)) > tol) {
        throw DomainError("density matrix does not have unit trace");
    }
    const DenseMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
        throw DomainError("density matrix has a negative eigenvalue");
    }
}

void write_matrix(std::ostream& os, const DenseMatrix& m) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                os << ' ';
            }
            os << m(r, c).real() << ',' << m(r, c).imag();
        }
        os << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

DenseMatrix read_matrix(std::istream& is) {
    std::vector<std::vector<cplx>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ls(line);
        std::string token;
        std::vector<cplx> row;
        while (ls >> token) {
            const auto comma = token.find(',');
            if (comma == std::string::npos) {
                throw ConfigError("matrix entry '" + token + "' is not of the form re,im");
            }
            try {
                std::size_t used_re = 0;
                std::size_t used_im = 0;
                const std::string re = token.substr(0, comma);
                const std::string im = token.substr(comma + 1);
                const double vr = std::stod(re, &used_re);
                const double vi = std::stod(im, &used_im);
                if (used_re != re.size() || used_im != im.size()) {
                    throw std::invalid_argument(token);
                }
                row.emplace_back(vr, vi);
            } catch (const std::logic_error&) {
                throw ConfigError("matrix entry '" + token + "' is not numeric");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ConfigError("matrix rows have different lengths");
        }
        rows.push_back(std::move(row));
    }
    DenseMatrix m(Eigen::Index(rows.size()), rows.empty() ? 0 : Eigen::Index(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
        }
    }
    return m;
}

void write_matrix_file(const std::string& path, const DenseMatrix& m) {
    std::ofstream os(path);
    if (!os) {
        throw ConfigError("cannot write '" + path + "'");
    }
    write_matrix(os, m);
}

DenseMatrix read_matrix_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot read '" + path + "'");
    }
    return read_matrix(is);
}

} // namespace ote
