// entanglement.hpp - Negativity, concurrence and tripartite negativity of multi-qubit states
//
// Qubit indices are 0-based in code and 1-based in labels ("1-3", "124/356").
// Negativity uses the doubled convention: -2 * (sum of negative eigenvalues of the
// partial transpose), so a maximally entangled pair has negativity 1.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ote/master.hpp"

namespace ote {

using QubitSet = std::vector<std::size_t>;

struct Bipartition {
    QubitSet a;  // sorted, |a| <= |b|; ties broken lexicographically
    QubitSet b;  // sorted complement

    std::string label(std::size_t qubits) const; // "1/23"
    bool operator==(const Bipartition& o) const { return a == o.a && b == o.b; }
};

// Canonical bipartition with `subset` on one side. Throws DomainError unless subset is
// non-empty, a proper subset and within range.
Bipartition make_bipartition(std::size_t qubits, QubitSet subset);

// Every bipartition of N qubits once, ordered by (|A|, A).
std::vector<Bipartition> all_bipartitions(std::size_t qubits);

// Eigenvalues with |lambda| below this are treated as zero.
inline constexpr double negativity_noise_floor = 1e-12;

std::size_t qubit_count(const DenseMatrix& rho); // throws DomainError unless 2^N x 2^N

// Reduced state on `keep` (sorted order of the kept qubits). Throws DomainError if empty.
DenseMatrix partial_trace(const DenseMatrix& rho, const QubitSet& keep);

// Transpose on the qubits of `subset`.
DenseMatrix partial_transpose(const DenseMatrix& rho, const QubitSet& subset);

double negativity(const DenseMatrix& rho, const Bipartition& split);
double negativity(const DenseMatrix& rho, const QubitSet& subset);

// Wootters concurrence of a two-qubit state. Throws DomainError for other sizes.
double concurrence(const DenseMatrix& rho);

// Geometric mean of the three one-vs-two negativities of a three-qubit state.
double tripartite_negativity(const DenseMatrix& rho);

enum class Symmetry { none, cyclic, dihedral };

std::string to_string(Symmetry s);
Symmetry parse_symmetry(const std::string& name); // throws ConfigError

// Images of a qubit set under the declared group acting on polygon vertex labels.
std::vector<QubitSet> symmetry_images(const QubitSet& set, std::size_t qubits, Symmetry symmetry);

struct MeasureRow {
    std::string kind;   // pair_negativity, concurrence, bipartition_negativity, tripartite_negativity
    std::string label;  // 1-based index set
    QubitSet indices;   // pair or side A (0-based)
    double value{0.0};
};

struct MeasureOptions {
    Symmetry symmetry{Symmetry::none};
    bool pairs{true};
    bool concurrences{true};
    bool bipartitions{true};
};

struct MeasureReport {
    std::vector<MeasureRow> rows;
    // Largest bipartition negativity for |A| = k, index k - 1.
    std::vector<double> bipartition_maxima;
    double pair_maximum{0.0};
};

MeasureReport measure_suite(const DenseMatrix& rho, const MeasureOptions& options = {});

std::string pair_label(std::size_t i, std::size_t j);

} // namespace ote
