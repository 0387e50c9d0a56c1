#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ote/errors.hpp"
#include "ote/steady_state.hpp"

using namespace ote;

namespace {

// Detailed-balance rates of a common thermal bath with occupation n.
RateSet thermal_rates(std::size_t qubits, double nbar, std::mt19937& rng) {
    RateSet r = oracle::random_rates(qubits, rng, 1.0, true);
    r.gamma_minus = r.gamma_plus * (nbar / (1.0 + nbar));
    return r;
}

SteadyOptions with(SteadyMethod m) {
    SteadyOptions o;
    o.method = m;
    return o;
}

} // namespace

TEST_CASE("single qubit relaxes to population n/(1+2n)", "[steady]") {
    for (double nbar : {0.0, 0.3, 7.37}) {
        RateSet r;
        r.gamma_plus = DenseMatrix::Constant(1, 1, 2.0 * (1.0 + nbar));
        r.gamma_minus = DenseMatrix::Constant(1, 1, 2.0 * nbar);
        r.lambda = DenseMatrix::Zero(1, 1);
        r.gamma0 = Eigen::VectorXd::Constant(1, 2.0);
        const Liouvillian l(r, 0.0, 1);
        for (auto m : {SteadyMethod::dense_nullspace, SteadyMethod::blocked_linear, SteadyMethod::long_time}) {
            const SteadyResult s = steady_state(l, with(m));
            CHECK(std::abs(s.rho(1, 1).real() - nbar / (1.0 + 2.0 * nbar)) < 1e-8);
        }
    }
}

TEST_CASE("common thermal bath gives the product Gibbs state", "[steady][property]") {
    std::mt19937 rng(53);
    for (std::size_t n = 2; n <= 4; ++n) {
        for (double nbar : {0.1, 2.0}) {
            const Liouvillian l(thermal_rates(n, nbar, rng), 0.0, n);
            const SteadyResult s = steady_state(l);
            CHECK(trace_distance(s.rho, oracle::product_thermal(n, nbar)) < 1e-8);
        }
    }
}

TEST_CASE("dense, blocked and long-time solvers agree", "[steady][property]") {
    std::mt19937 rng(59);
    for (int t = 0; t < 8; ++t) {
        const std::size_t n = 1 + std::size_t(t % 4);
        const Liouvillian l(oracle::random_rates(n, rng), 0.0, n);
        const SteadyResult d = steady_state(l, with(SteadyMethod::dense_nullspace));
        const SteadyResult b = steady_state(l, with(SteadyMethod::blocked_linear));
        const SteadyResult g = steady_state(l, with(SteadyMethod::long_time));
        CHECK(trace_distance(d.rho, b.rho) < 1e-6);
        CHECK(trace_distance(d.rho, g.rho) < 1e-6);
        for (const auto* s : {&d, &b, &g}) {
            CHECK_NOTHROW(check_density_matrix(s->rho, 1e-8));
            CHECK(relative_residual(l, s->rho) < 1e-8);
        }
    }
}

TEST_CASE("iterative blocked solve agrees with the dense null space", "[steady]") {
    std::mt19937 rng(61);
    const std::size_t n = 5;
    const Liouvillian l(oracle::random_rates(n, rng), 0.0, n);
    SteadyOptions iter = with(SteadyMethod::blocked_linear);
    iter.dense_block_limit = 0;
    const SteadyResult g = steady_state(l, iter);
    const SteadyResult b = steady_state(l, with(SteadyMethod::blocked_linear));
    CHECK(g.iterations > 0);
    CHECK(trace_distance(g.rho, b.rho) < 1e-8);
    CHECK(relative_residual(l, g.rho) < 1e-10);
}

TEST_CASE("automatic method choice", "[steady]") {
    CHECK(default_method(2) == SteadyMethod::dense_nullspace);
    CHECK(default_method(4) == SteadyMethod::dense_nullspace);
    CHECK(default_method(5) == SteadyMethod::blocked_linear);
    CHECK(parse_steady_method("long-time") == SteadyMethod::long_time);
    CHECK(parse_steady_method(to_string(SteadyMethod::blocked_linear)) == SteadyMethod::blocked_linear);
    CHECK_THROWS_AS(parse_steady_method("magic"), ConfigError);
}

TEST_CASE("decoupled emitters without absorption leave a degenerate steady state", "[steady]") {
    RateSet r;
    r.gamma_plus = DenseMatrix::Zero(2, 2);
    r.gamma_minus = DenseMatrix::Zero(2, 2);
    r.lambda = DenseMatrix::Zero(2, 2);
    r.gamma0 = Eigen::VectorXd::Ones(2);
    const Liouvillian l(r, 0.0, 2);
    CHECK_THROWS_AS(steady_state(l, with(SteadyMethod::dense_nullspace)), DegeneracyError);
}

TEST_CASE("time evolution conserves trace and reaches the steady state", "[steady]") {
    std::mt19937 rng(67);
    const Liouvillian l(oracle::random_rates(3, rng), 0.0, 3);
    const DenseMatrix rho0 = oracle::random_density(8, rng);
    const Trajectory tr = evolve(l, rho0, {0.0, 1.0, 5.0, 60.0});
    REQUIRE(tr.states.size() == 4);
    CHECK((tr.states[0] - rho0).norm() == 0.0);
    for (const auto& s : tr.states) {
        CHECK(std::abs(s.trace() - 1.0) < 1e-9);
    }
    const SteadyResult s = steady_state(l);
    CHECK(trace_distance(tr.states.back(), s.rho) < 1e-6);
    // derivative of the trajectory at t = 0 matches the generator
    const double h = 1e-6;
    const Trajectory small = evolve(l, rho0, {h});
    CHECK(((small.states[0] - rho0) / h - l.apply(rho0)).norm() < 1e-4 * l.scale());
}

TEST_CASE("projected and direct trajectories coincide", "[steady][property]") {
    std::mt19937 rng(71);
    for (std::size_t n = 1; n <= 3; ++n) {
        const RateSet r = oracle::random_rates(n, rng);
        const Liouvillian l(r, 0.0, n);
        const ProjectedGenerator g(spectral(build_heff(r, 0.0, n)), r);
        const DenseMatrix rho0 = oracle::random_density(std::size_t{1} << n, rng);
        const std::vector<double> grid{0.5, 2.0, 5.0};
        const Trajectory a = evolve(l, rho0, grid);
        const Trajectory b = evolve_projected(g, rho0, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(trace_distance(a.states[k], b.states[k]) < 1e-8);
        }
    }
}

TEST_CASE("evolve rejects a bad time grid", "[steady]") {
    std::mt19937 rng(73);
    const Liouvillian l(oracle::random_rates(2, rng), 0.0, 2);
    const DenseMatrix rho0 = oracle::random_density(4, rng);
    CHECK_THROWS_AS(evolve(l, rho0, {2.0, 1.0}), DomainError);
    CHECK_THROWS_AS(evolve(l, rho0, {-1.0}), DomainError);
}

TEST_CASE("trace distance", "[steady]") {
    std::mt19937 rng(79);
    const DenseMatrix a = oracle::random_density(4, rng);
    const DenseMatrix b = oracle::random_density(4, rng);
    CHECK(trace_distance(a, a) < 1e-15);
    CHECK(std::abs(trace_distance(a, b) - trace_distance(b, a)) < 1e-14);
    DenseMatrix p = DenseMatrix::Zero(2, 2);
    DenseMatrix q = DenseMatrix::Zero(2, 2);
    p(0, 0) = 1.0;
    q(1, 1) = 1.0;
    CHECK(std::abs(trace_distance(p, q) - 1.0) < 1e-15);
}

TEST_CASE("density-matrix checks", "[steady]") {
    std::mt19937 rng(83);
    DenseMatrix rho = oracle::random_density(4, rng);
    CHECK_NOTHROW(check_density_matrix(rho));
    DenseMatrix bad = rho;
    bad(0, 1) += 0.1;
    CHECK_THROWS_AS(check_density_matrix(bad), DomainError);
    CHECK_THROWS_AS(check_density_matrix(2.0 * rho), DomainError);
    DenseMatrix neg = DenseMatrix::Zero(2, 2);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(check_density_matrix(neg), DomainError);
}

TEST_CASE("matrix text format round-trips exactly", "[steady]") {
    std::mt19937 rng(89);
    const DenseMatrix m = oracle::random_density(8, rng);
    std::stringstream ss;
    write_matrix(ss, m);
    const DenseMatrix back = read_matrix(ss);
    CHECK(back == m);
    std::stringstream bad("1,0 2,0\n3,0\n");
    CHECK_THROWS_AS(read_matrix(bad), ConfigError);
}
