#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "ote/entanglement.hpp"
#include "ote/errors.hpp"

using namespace ote;

namespace {

DenseMatrix pure(const Eigen::VectorXcd& psi) {
    return psi * psi.adjoint();
}

DenseMatrix bell() {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
    psi[0] = psi[3] = 1.0 / std::sqrt(2.0);
    return pure(psi);
}

DenseMatrix werner(double p) {
    return p * bell() + (1.0 - p) * DenseMatrix::Identity(4, 4) / 4.0;
}

DenseMatrix ghz(std::size_t n) {
    const auto d = Eigen::Index(std::size_t{1} << n);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d);
    psi[0] = psi[d - 1] = 1.0 / std::sqrt(2.0);
    return pure(psi);
}

} // namespace

TEST_CASE("negativity and concurrence match brute-force oracles", "[entanglement][property]") {
    std::mt19937 rng(97);
    for (int t = 0; t < 100; ++t) {
        const std::size_t rank = 1 + std::size_t(t % 4);
        const DenseMatrix rho = oracle::random_density(4, rng, rank);
        CHECK(std::abs(negativity(rho, QubitSet{0}) - oracle::negativity_brute(rho, 2, {0})) < 1e-10);
        CHECK(std::abs(concurrence(rho) - oracle::concurrence_brute(rho)) < 1e-10);
    }
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + std::size_t(t % 2);
        const DenseMatrix rho = oracle::random_density(std::size_t{1} << n, rng, 1 + std::size_t(t % 3));
        for (const auto& b : all_bipartitions(n)) {
            CHECK(std::abs(negativity(rho, b) - oracle::negativity_brute(rho, n, b.a)) < 1e-10);
        }
    }
}

TEST_CASE("partial transpose matches the index-loop oracle", "[entanglement]") {
    std::mt19937 rng(101);
    const DenseMatrix rho = oracle::random_density(16, rng);
    for (const QubitSet& a : {QubitSet{0}, QubitSet{2}, QubitSet{1, 3}, QubitSet{0, 1, 2}}) {
        CHECK((partial_transpose(rho, a) - oracle::partial_transpose_loop(rho, 4, a)).norm() < 1e-15);
    }
}

TEST_CASE("reference states", "[entanglement]") {
    CHECK(std::abs(negativity(bell(), QubitSet{0}) - 1.0) < 1e-12);
    CHECK(std::abs(concurrence(bell()) - 1.0) < 1e-12);
    CHECK(std::abs(negativity(werner(0.5), QubitSet{0}) - 0.25) < 1e-12);
    CHECK(std::abs(concurrence(werner(0.5)) - 0.25) < 1e-12);
    CHECK(negativity(werner(1.0 / 3.0), QubitSet{0}) < 1e-12);
    CHECK(std::abs(tripartite_negativity(ghz(3)) - 1.0) < 1e-12);
    // product and maximally mixed states
    CHECK(negativity(DenseMatrix::Identity(8, 8) / 8.0, QubitSet{1}) == 0.0);
    CHECK(tripartite_negativity(DenseMatrix::Identity(8, 8) / 8.0) == 0.0);
}

TEST_CASE("measures are invariant under local unitaries", "[entanglement][property]") {
    std::mt19937 rng(103);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix rho = oracle::random_density(4, rng, 2);
        const DenseMatrix ua = oracle::random_density(2, rng).householderQr().householderQ();
        const DenseMatrix ub = oracle::random_density(2, rng).householderQr().householderQ();
        const DenseMatrix u = oracle::kron(ua, ub);
        const DenseMatrix r2 = u * rho * u.adjoint();
        CHECK(std::abs(negativity(rho, QubitSet{0}) - negativity(r2, QubitSet{0})) < 1e-10);
        CHECK(std::abs(concurrence(rho) - concurrence(r2)) < 1e-10);
    }
}

TEST_CASE("partial trace", "[entanglement]") {
    std::mt19937 rng(107);
    const DenseMatrix a = oracle::random_density(2, rng);
    const DenseMatrix b = oracle::random_density(4, rng);
    const DenseMatrix ab = oracle::kron(a, b);
    CHECK((partial_trace(ab, {0}) - a).norm() < 1e-14);
    CHECK((partial_trace(ab, {1, 2}) - b).norm() < 1e-14);
    CHECK_THROWS_AS(partial_trace(ab, {}), DomainError);
}

TEST_CASE("bipartitions", "[entanglement]") {
    for (std::size_t n = 2; n <= 8; ++n) {
        const auto all = all_bipartitions(n);
        CHECK(all.size() == (std::size_t{1} << (n - 1)) - 1);
        std::set<QubitSet> seen;
        for (const auto& b : all) {
            CHECK(b.a.size() <= b.b.size());
            seen.insert(b.a);
        }
        CHECK(seen.size() == all.size());
    }
    CHECK(make_bipartition(3, {1, 2}).label(3) == "1/23");
    CHECK(make_bipartition(6, {0, 1, 3}).label(6) == "124/356");
    CHECK_THROWS_AS(make_bipartition(3, {}), DomainError);
    CHECK_THROWS_AS(make_bipartition(3, {0, 1, 2}), DomainError);
    CHECK_THROWS_AS(make_bipartition(3, {5}), DomainError);
}

TEST_CASE("dihedral symmetry of a hexagon has three pair classes", "[entanglement]") {
    const DenseMatrix rho = DenseMatrix::Identity(64, 64) / 64.0;
    MeasureOptions o;
    o.symmetry = Symmetry::dihedral;
    o.bipartitions = false;
    o.concurrences = false;
    const MeasureReport r = measure_suite(rho, o);
    std::vector<std::string> labels;
    for (const auto& row : r.rows) {
        labels.push_back(row.label);
    }
    CHECK(labels == std::vector<std::string>{"1-2", "1-3", "1-4"});
    CHECK(symmetry_images({0, 1}, 6, Symmetry::none).size() == 1);
    CHECK(parse_symmetry("cyclic") == Symmetry::cyclic);
    CHECK_THROWS_AS(parse_symmetry("icosahedral"), ConfigError);
}

TEST_CASE("symmetry reduction keeps the maxima of a symmetric state", "[entanglement]") {
    // W state is invariant under every permutation
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(16);
    for (int k = 0; k < 4; ++k) {
        psi[1 << k] = 0.5;
    }
    const DenseMatrix rho = pure(psi);
    MeasureOptions full;
    MeasureOptions dih;
    dih.symmetry = Symmetry::dihedral;
    const MeasureReport a = measure_suite(rho, full);
    const MeasureReport b = measure_suite(rho, dih);
    CHECK(b.rows.size() < a.rows.size());
    CHECK(std::abs(a.pair_maximum - b.pair_maximum) < 1e-14);
    for (std::size_t k = 0; k < a.bipartition_maxima.size(); ++k) {
        CHECK(std::abs(a.bipartition_maxima[k] - b.bipartition_maxima[k]) < 1e-14);
    }
}

TEST_CASE("measure input validation", "[entanglement]") {
    CHECK_THROWS_AS(qubit_count(DenseMatrix::Identity(3, 3)), DomainError);
    CHECK_THROWS_AS(concurrence(DenseMatrix::Identity(8, 8) / 8.0), DomainError);
    CHECK_THROWS_AS(tripartite_negativity(bell()), DomainError);
}
