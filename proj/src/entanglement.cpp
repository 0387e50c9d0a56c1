#include "ote/entanglement.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>

#include "ote/errors.hpp"

namespace ote {

namespace {

BasisIndex set_mask(const QubitSet& set, std::size_t qubits) {
    BasisIndex m = 0;
    for (auto q : set) {
        m |= qubit_mask(qubits, q);
    }
    return m;
}

std::string set_label(const QubitSet& set, std::size_t qubits) {
    std::string out;
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (k > 0 && qubits >= 10) {
            out += ',';
        }
        out += std::to_string(set[k] + 1);
    }
    return out;
}

bool canonical_less(const Bipartition& x, const Bipartition& y) {
    if (x.a.size() != y.a.size()) {
        return x.a.size() < y.a.size();
    }
    return x.a < y.a;
}

double negative_sum(const Eigen::VectorXd& ev) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (ev[k] < -negativity_noise_floor) {
            s += ev[k];
        }
    }
    return s;
}

bool excitation_block_diagonal(const DenseMatrix& rho) {
    const auto d = rho.rows();
    for (Eigen::Index b = 0; b < d; ++b) {
        for (Eigen::Index a = 0; a < d; ++a) {
            if (std::popcount(BasisIndex(a)) != std::popcount(BasisIndex(b)) && std::abs(rho(a, b)) >= 1e-13) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

std::string Bipartition::label(std::size_t qubits) const {
    return set_label(a, qubits) + "/" + set_label(b, qubits);
}

std::string pair_label(std::size_t i, std::size_t j) {
    return std::to_string(i + 1) + "-" + std::to_string(j + 1);
}

Bipartition make_bipartition(std::size_t qubits, QubitSet subset) {
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    if (subset.empty() || subset.size() >= qubits || subset.back() >= qubits) {
        throw DomainError("bipartition side must be a non-empty proper subset of the qubits");
    }
    Bipartition p;
    for (std::size_t q = 0; q < qubits; ++q) {
        (std::binary_search(subset.begin(), subset.end(), q) ? p.a : p.b).push_back(q);
    }
    if (p.a.size() > p.b.size() || (p.a.size() == p.b.size() && p.b < p.a)) {
        std::swap(p.a, p.b);
    }
    return p;
}

std::vector<Bipartition> all_bipartitions(std::size_t qubits) {
    std::vector<Bipartition> out;
    if (qubits < 2) {
        return out;
    }
    const BasisIndex full = BasisIndex{1} << qubits;
    for (BasisIndex m = 1; m + 1 < full; ++m) {
        QubitSet s;
        for (std::size_t q = 0; q < qubits; ++q) {
            if (m & (BasisIndex{1} << q)) {
                s.push_back(q);
            }
        }
        Bipartition p = make_bipartition(qubits, s);
        if (p.a == s) {
            out.push_back(std::move(p));
        }
    }
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

std::size_t qubit_count(const DenseMatrix& rho) {
    const auto d = rho.rows();
    if (d < 2 || rho.cols() != d || (d & (d - 1)) != 0) {
        throw DomainError("state must be a 2^N x 2^N matrix with N >= 1");
    }
    return std::size_t(std::countr_zero(std::uint64_t(d)));
}

DenseMatrix partial_trace(const DenseMatrix& rho, const QubitSet& keep_in) {
    const std::size_t n = qubit_count(rho);
    QubitSet keep = keep_in;
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    if (keep.empty()) {
        throw DomainError("partial_trace: keep set is empty");
    }
    if (keep.back() >= n) {
        throw DomainError("partial_trace: qubit index out of range");
    }
    const std::size_t k = keep.size();
    const BasisIndex kept = set_mask(keep, n);
    const auto dim = BasisIndex(rho.rows());
    auto reduce = [&](BasisIndex x) {
        BasisIndex r = 0;
        for (std::size_t t = 0; t < k; ++t) {
            if (x & qubit_mask(n, keep[t])) {
                r |= qubit_mask(k, t);
            }
        }
        return r;
    };
    DenseMatrix out = DenseMatrix::Zero(Eigen::Index(1) << k, Eigen::Index(1) << k);
    for (BasisIndex b = 0; b < dim; ++b) {
        for (BasisIndex a = 0; a < dim; ++a) {
            if ((a & ~kept) == (b & ~kept)) {
                out(reduce(a), reduce(b)) += rho(a, b);
            }
        }
    }
    return out;
}

DenseMatrix partial_transpose(const DenseMatrix& rho, const QubitSet& subset) {
    const std::size_t n = qubit_count(rho);
    for (auto q : subset) {
        if (q >= n) {
            throw DomainError("partial_transpose: qubit index out of range");
        }
    }
    const BasisIndex m = set_mask(subset, n);
    const auto dim = BasisIndex(rho.rows());
    DenseMatrix out(rho.rows(), rho.cols());
    for (BasisIndex b = 0; b < dim; ++b) {
        for (BasisIndex a = 0; a < dim; ++a) {
            out(a, b) = rho((a & ~m) | (b & m), (b & ~m) | (a & m));
        }
    }
    return out;
}

double negativity(const DenseMatrix& rho, const QubitSet& subset) {
    const std::size_t n = qubit_count(rho);
    const BasisIndex m = set_mask(subset, n);
    double neg = 0.0;
    if (excitation_block_diagonal(rho)) {
        // The transpose is then block diagonal in q = n_B - n_A.
        const auto dim = BasisIndex(rho.rows());
        std::map<int, std::vector<BasisIndex>> groups;
        for (BasisIndex a = 0; a < dim; ++a) {
            groups[std::popcount(a & ~m) - std::popcount(a & m)].push_back(a);
        }
        for (const auto& [q, members] : groups) {
            const auto d = Eigen::Index(members.size());
            DenseMatrix block(d, d);
            for (Eigen::Index j = 0; j < d; ++j) {
                for (Eigen::Index i = 0; i < d; ++i) {
                    const BasisIndex a = members[i];
                    const BasisIndex b = members[j];
                    block(i, j) = rho((a & ~m) | (b & m), (b & ~m) | (a & m));
                }
            }
            const DenseMatrix h = 0.5 * (block + block.adjoint());
            Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
            neg += negative_sum(es.eigenvalues());
        }
    } else {
        const DenseMatrix pt = partial_transpose(rho, subset);
        const DenseMatrix h = 0.5 * (pt + pt.adjoint());
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
        neg = negative_sum(es.eigenvalues());
    }
    return neg < 0.0 ? -2.0 * neg : 0.0;
}

double negativity(const DenseMatrix& rho, const Bipartition& split) {
    return negativity(rho, split.a);
}

double concurrence(const DenseMatrix& rho) {
    if (rho.rows() != 4 || rho.cols() != 4) {
        throw DomainError("concurrence is defined for two-qubit (4 x 4) states only");
    }
    DenseMatrix yy = DenseMatrix::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    // The lambda_i are the singular values of sqrt(rho) yy conj(sqrt(rho)); taking them
    // directly avoids the square root of eigenvalues of rho rho~, which loses half the
    // digits for rank-deficient states.
    const DenseMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const DenseMatrix sq = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
    const DenseMatrix m = sq * yy * sq.conjugate();
    Eigen::VectorXd lam = Eigen::JacobiSVD<DenseMatrix>(m).singularValues();
    std::sort(lam.data(), lam.data() + 4, std::greater<>());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

double tripartite_negativity(const DenseMatrix& rho) {
    if (rho.rows() != 8 || rho.cols() != 8) {
        throw DomainError("tripartite negativity is defined for three-qubit (8 x 8) states only");
    }
    double product = 1.0;
    for (std::size_t q = 0; q < 3; ++q) {
        const double n = negativity(rho, QubitSet{q});
        if (n == 0.0) {
            return 0.0;
        }
        product *= n;
    }
    return std::cbrt(product);
}

std::string to_string(Symmetry s) {
    switch (s) {
    case Symmetry::cyclic: return "cyclic";
    case Symmetry::dihedral: return "dihedral";
    case Symmetry::none: break;
    }
    return "none";
}

Symmetry parse_symmetry(const std::string& name) {
    for (auto s : {Symmetry::none, Symmetry::cyclic, Symmetry::dihedral}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown symmetry '" + name + "' (expected none, cyclic or dihedral)");
}

std::vector<QubitSet> symmetry_images(const QubitSet& set, std::size_t qubits, Symmetry symmetry) {
    std::vector<QubitSet> out{set};
    if (symmetry == Symmetry::none) {
        return out;
    }
    for (std::size_t k = 0; k < qubits; ++k) {
        for (int reflect = 0; reflect < (symmetry == Symmetry::dihedral ? 2 : 1); ++reflect) {
            QubitSet img;
            for (auto q : set) {
                img.push_back(reflect ? (qubits + k - q) % qubits : (q + k) % qubits);
            }
            std::sort(img.begin(), img.end());
            out.push_back(std::move(img));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MeasureReport measure_suite(const DenseMatrix& rho, const MeasureOptions& options) {
    const std::size_t n = qubit_count(rho);
    MeasureReport report;

    if (n >= 2 && (options.pairs || options.concurrences)) {
        std::set<QubitSet> reps;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto images = symmetry_images({i, j}, n, options.symmetry);
                reps.insert(*std::min_element(images.begin(), images.end()));
            }
        }
        std::vector<MeasureRow> conc;
        for (const auto& p : reps) {
            const DenseMatrix reduced = partial_trace(rho, p);
            const std::string label = pair_label(p[0], p[1]);
            if (options.pairs) {
                const double v = negativity(reduced, QubitSet{0});
                report.rows.push_back({"pair_negativity", label, p, v});
                report.pair_maximum = std::max(report.pair_maximum, v);
            }
            if (options.concurrences) {
                conc.push_back({"concurrence", label, p, concurrence(reduced)});
            }
        }
        report.rows.insert(report.rows.end(), conc.begin(), conc.end());
    }

    if (n >= 2 && options.bipartitions) {
        report.bipartition_maxima.assign(n / 2, 0.0);
        std::vector<Bipartition> reps;
        for (const auto& p : all_bipartitions(n)) {
            Bipartition best = p;
            for (const auto& img : symmetry_images(p.a, n, options.symmetry)) {
                const Bipartition c = make_bipartition(n, img);
                if (canonical_less(c, best)) {
                    best = c;
                }
            }
            if (best == p) {
                reps.push_back(p);
            }
        }
        for (const auto& p : reps) {
            const double v = negativity(rho, p);
            report.rows.push_back({"bipartition_negativity", p.label(n), p.a, v});
            auto& mx = report.bipartition_maxima[p.a.size() - 1];
            mx = std::max(mx, v);
        }
    }

    if (n == 3) {
        report.rows.push_back({"tripartite_negativity", "123", {0, 1, 2}, tripartite_negativity(rho)});
    }
    return report;
}

} // namespace ote
