// excitation.hpp - Computational basis bookkeeping and excitation-number sectors
//
// Basis index convention: qubit i (0-based) is bit (N - 1 - i) of the index, 1 = excited,
// so |q_0 q_1 ... q_{N-1}> reads left to right as in the usual ket notation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ote {

using BasisIndex = std::uint32_t;

inline BasisIndex qubit_mask(std::size_t qubits, std::size_t i) {
    return BasisIndex{1} << (qubits - 1 - i);
}

struct ExcitationBlocks {
    std::size_t qubits{0};
    // states[n] lists the basis indices with n excitations, ascending.
    std::vector<std::vector<BasisIndex>> states;
    // local[b] is the position of basis index b inside its sector.
    std::vector<std::size_t> local;

    std::size_t sector_count() const { return states.size(); }
    std::size_t dim(std::size_t n) const { return states[n].size(); }
    std::size_t hilbert_dim() const { return local.size(); }
    // sum_n d_n^2: unknowns of the coupled block-diagonal steady-state system.
    std::size_t block_unknowns() const;
    static std::size_t sector_of(BasisIndex b);
};

inline constexpr std::size_t kMaxQubits = 10;

// Throws DomainError unless 1 <= qubits <= max_qubits.
ExcitationBlocks excitation_blocks(std::size_t qubits, std::size_t max_qubits = kMaxQubits);

} // namespace ote
