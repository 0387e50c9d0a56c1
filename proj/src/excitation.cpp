#include "ote/excitation.hpp"

#include <bit>
#include <string>

#include "ote/errors.hpp"

namespace ote {

std::size_t ExcitationBlocks::block_unknowns() const {
    std::size_t total = 0;
    for (const auto& s : states) {
        total += s.size() * s.size();
    }
    return total;
}

std::size_t ExcitationBlocks::sector_of(BasisIndex b) {
    return static_cast<std::size_t>(std::popcount(b));
}

ExcitationBlocks excitation_blocks(std::size_t qubits, std::size_t max_qubits) {
    if (qubits < 1 || qubits > max_qubits) {
        throw DomainError("excitation_blocks: qubit count " + std::to_string(qubits) + " outside [1, " +
                          std::to_string(max_qubits) + "]");
    }
    ExcitationBlocks blocks;
    blocks.qubits = qubits;
    blocks.states.resize(qubits + 1);
    const BasisIndex dim = BasisIndex{1} << qubits;
    blocks.local.resize(dim);
    for (BasisIndex b = 0; b < dim; ++b) {
        auto& sector = blocks.states[ExcitationBlocks::sector_of(b)];
        blocks.local[b] = sector.size();
        sector.push_back(b);
    }
    return blocks;
}

} // namespace ote
