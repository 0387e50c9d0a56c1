// alpha_kernel.hpp - Dipole-contracted environment response functions near a slab
//
// The wall-sourced (W) and slab-sourced (M) response tensors of an emitter pair are
// transverse-wavevector integrals over the slab scattering coefficients. The azimuthal
// integral is done either analytically (Bessel kernels in k|r_i - r_j|) or by direct
// trapezoidal quadrature; the radial integral uses adaptive Gauss-Kronrod panels.
//
// Normalisation: with a transparent slab, the contracted W tensor of a single emitter
// equals one for any unit dipole, so that Gamma+ = Gamma0 (1 + n).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ote/slab_optics.hpp"

namespace ote {

using AlphaTensor = Eigen::Matrix3cd;

struct EmitterArray {
    std::vector<Eigen::Vector3d> positions;  // (x, y, z) in m, z > 0 on the vacuum side
    std::vector<Eigen::Vector3cd> dipoles;   // unit orientation vectors
    std::vector<double> dipole_moments;      // |d| in C m
    double omega0{0.0};                      // bare transition frequency, rad/s
    double omega_renormalized{0.0};          // common renormalized frequency, rad/s

    std::size_t size() const { return positions.size(); }

    // Checks counts, unit dipoles, z > 0. Throws DomainError.
    void validate() const;
    // Common height; throws UnsupportedConfiguration when heights differ.
    double common_height() const;
    // Vacuum spontaneous emission rate of emitter i at frequency omega.
    double vacuum_rate(std::size_t i, double omega) const;
};

struct QuadratureSpec {
    enum class Angular { bessel, direct };

    double rel_tol{1e-11};
    double abs_tol{1e-14};
    double evanescent_cutoff{1e-12}; // stop once exp(-2 kappa z) drops below this
    Angular angular{Angular::bessel};

    void validate() const;
};

struct AlphaTensors {
    AlphaTensor wall{AlphaTensor::Zero()};
    AlphaTensor slab{AlphaTensor::Zero()};
};

// Slab tensor split by field sector; wall tensor has no evanescent part.
struct AlphaSectors {
    AlphaTensor wall{AlphaTensor::Zero()};
    AlphaTensor slab_propagative{AlphaTensor::Zero()};
    AlphaTensor slab_evanescent{AlphaTensor::Zero()};
    double error{0.0};
};

// Response tensors for in-plane separation `separation` = r_i - r_j at common height z.
AlphaSectors alpha_sectors(const Eigen::Vector2d& separation, double height, double omega,
                           const SlabSpec& slab, const QuadratureSpec& quad);

AlphaTensors alpha_tensors(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad);

AlphaTensor alpha_tensor_W(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad);
AlphaTensor alpha_tensor_M(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad);

// sum_{l,l'} conj(d_i[l]) d_j[l'] T[l][l']
cplx alpha_contract(const AlphaTensor& tensor, const Eigen::Vector3cd& d_i, const Eigen::Vector3cd& d_j);

// Contracted wall/slab values for every ordered pair.
struct AlphaMatrices {
    Eigen::MatrixXcd wall;
    Eigen::MatrixXcd slab;
};

class AlphaCache;

AlphaMatrices alpha_matrices(double omega, const EmitterArray& emitters, const SlabSpec& slab,
                             const QuadratureSpec& quad, AlphaCache* cache = nullptr);

// Memo of pair tensors keyed on (omega, separation, height, slab, tolerances).
// Safe for concurrent use; persisted as text with hex-float values.
class AlphaCache {
public:
    static constexpr const char* format_tag = "ote-alpha-cache";
    static constexpr int format_version = 1;

    static std::uint64_t key(const Eigen::Vector2d& separation, double height, double omega,
                             const SlabSpec& slab, const QuadratureSpec& quad);

    bool lookup(std::uint64_t key, AlphaTensors& out) const;
    void store(std::uint64_t key, const AlphaTensors& value);
    std::size_t size() const;

    // Missing file is not an error; a malformed one throws ConfigError.
    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::uint64_t, AlphaTensors> entries_;
};

} // namespace ote
