#include "ote/alpha_kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ote/constants.hpp"
#include "ote/errors.hpp"
#include "ote/quadrature.hpp"

namespace ote {

namespace {

constexpr cplx I{0.0, 1.0};

// Azimuthal averages of exp(i k.r), khat_a exp(i k.r) and khat_a khat_b exp(i k.r)
// for in-plane directions a, b.
struct AngularMoments {
    cplx m0;
    Eigen::Vector2cd m1;
    Eigen::Matrix2cd m2;
};

AngularMoments bessel_moments(double k, const Eigen::Vector2d& sep) {
    const double dist = sep.norm();
    const double x = k * dist;
    const Eigen::Vector2d u = dist > 0.0 ? Eigen::Vector2d(sep / dist) : Eigen::Vector2d(1.0, 0.0);
    const double j0 = std::cyl_bessel_j(0.0, x);
    const double j1 = x > 0.0 ? std::cyl_bessel_j(1.0, x) : 0.0;
    const double j2 = x > 0.0 ? std::cyl_bessel_j(2.0, x) : 0.0;
    AngularMoments m;
    m.m0 = j0;
    m.m1 = (I * j1) * u.cast<cplx>();
    m.m2 = (0.5 * (j0 + j2) * Eigen::Matrix2d::Identity() - j2 * u * u.transpose()).cast<cplx>();
    return m;
}

AngularMoments trapezoid_moments(double k, const Eigen::Vector2d& sep, double rel_tol) {
    auto evaluate = [&](int n) {
        AngularMoments m{0.0, Eigen::Vector2cd::Zero(), Eigen::Matrix2cd::Zero()};
        for (int s = 0; s < n; ++s) {
            const double phi = 2.0 * constants::pi * s / n;
            const Eigen::Vector2d kh(std::cos(phi), std::sin(phi));
            const cplx e = std::exp(I * (k * kh.dot(sep)));
            m.m0 += e;
            m.m1 += e * kh.cast<cplx>();
            m.m2 += e * (kh * kh.transpose()).cast<cplx>();
        }
        m.m0 /= double(n);
        m.m1 /= double(n);
        m.m2 /= double(n);
        return m;
    };
    AngularMoments prev = evaluate(16);
    for (int n = 32; n <= 16384; n *= 2) {
        AngularMoments next = evaluate(n);
        const double change = std::abs(next.m0 - prev.m0) + (next.m1 - prev.m1).cwiseAbs().maxCoeff() +
                              (next.m2 - prev.m2).cwiseAbs().maxCoeff();
        if (change < rel_tol) {
            return next;
        }
        prev = next;
    }
    throw ConvergenceError("azimuthal trapezoid did not converge", 0.0);
}

// Polarization dyadics averaged over the azimuth, in units of (omega/c)^2.
// kn = k c/omega, kzn = kz c/omega; TM vectors carry directions phi, phi2 = +-1.
AlphaTensor te_dyadic(const AngularMoments& m) {
    AlphaTensor d = AlphaTensor::Zero();
    d.topLeftCorner<2, 2>() = m.m0 * Eigen::Matrix2cd::Identity() - m.m2;
    return d;
}

AlphaTensor tm_dyadic(const AngularMoments& m, double kn, cplx kzn, int phi, int phi2) {
    AlphaTensor d;
    d.topLeftCorner<2, 2>() = (double(phi * phi2) * kzn * std::conj(kzn)) * m.m2;
    d.topRightCorner<2, 1>() = (-double(phi) * kzn * kn) * m.m1;
    d.bottomLeftCorner<1, 2>() = ((-double(phi2) * std::conj(kzn) * kn) * m.m1).transpose();
    d(2, 2) = kn * kn * m.m0;
    return d;
}

constexpr std::size_t kPropDim = 18;
constexpr std::size_t kEvanDim = 9;

template <std::size_t Dim>
void put(std::array<cplx, Dim>& out, std::size_t offset, const AlphaTensor& t) {
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            out[offset + 3 * r + c] = t(r, c);
        }
    }
}

template <std::size_t Dim>
AlphaTensor take(const std::array<cplx, Dim>& in, std::size_t offset) {
    AlphaTensor t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            t(r, c) = in[offset + 3 * r + c];
        }
    }
    return t;
}

std::vector<double> linspace_breaks(double a, double b, std::size_t panels) {
    std::vector<double> v(panels + 1);
    for (std::size_t i = 0; i <= panels; ++i) {
        v[i] = a + (b - a) * double(i) / double(panels);
    }
    v.back() = b;
    return v;
}

void insert_break(std::vector<double>& breaks, double x) {
    if (x <= breaks.front() || x >= breaks.back()) {
        return;
    }
    auto it = std::lower_bound(breaks.begin(), breaks.end(), x);
    const double span = breaks.back() - breaks.front();
    if (std::abs(*it - x) < 1e-9 * span || std::abs(*(it - 1) - x) < 1e-9 * span) {
        return;
    }
    breaks.insert(it, x);
}

} // namespace

void EmitterArray::validate() const {
    if (positions.empty()) {
        throw DomainError("emitter array is empty");
    }
    if (dipoles.size() != positions.size() || dipole_moments.size() != positions.size()) {
        throw DomainError("emitter array: positions, dipoles and moments must have equal length");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if (!(positions[i].z() > 0.0)) {
            throw DomainError("emitter array: emitters must sit at z > 0");
        }
        if (std::abs(dipoles[i].norm() - 1.0) > 1e-12) {
            throw DomainError("emitter array: dipole orientations must be unit vectors");
        }
        if (!(dipole_moments[i] > 0.0)) {
            throw DomainError("emitter array: dipole moments must be positive");
        }
    }
}

double EmitterArray::common_height() const {
    const double z = positions.front().z();
    for (const auto& p : positions) {
        if (std::abs(p.z() - z) > 1e-12 * std::abs(z)) {
            throw UnsupportedConfiguration("emitters at different heights above the slab are not supported");
        }
    }
    return z;
}

double EmitterArray::vacuum_rate(std::size_t i, double omega) const {
    using namespace constants;
    const double d = dipole_moments.at(i);
    return d * d * omega * omega * omega / (3.0 * pi * hbar * epsilon_0 * c * c * c);
}

void QuadratureSpec::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
        throw DomainError("quadrature tolerances must be positive");
    }
    if (!(evanescent_cutoff > 0.0 && evanescent_cutoff < 1.0)) {
        throw DomainError("evanescent cutoff must lie in (0, 1)");
    }
}

AlphaSectors alpha_sectors(const Eigen::Vector2d& separation, double height, double omega,
                           const SlabSpec& slab, const QuadratureSpec& quad) {
    if (!(omega > 0.0)) {
        throw DomainError("alpha: frequency must be positive");
    }
    if (!(height > 0.0)) {
        throw DomainError("alpha: emitters must sit at z > 0");
    }
    quad.validate();

    const double q0 = omega / constants::c;
    const cplx eps = permittivity(slab.permittivity, omega);
    const bool transparent = slab.permittivity.is_vacuum() || slab.thickness == 0.0;
    const double dist = separation.norm();
    const double medium_line = std::sqrt(eps).real(); // Re sqrt(eps) in units of omega/c

    auto moments = [&](double k) {
        return quad.angular == QuadratureSpec::Angular::bessel ? bessel_moments(k, separation)
                                                                : trapezoid_moments(k, separation, 1e-3 * quad.rel_tol);
    };
    const Polarization pols[2] = {Polarization::TE, Polarization::TM};

    // Propagative sector: k = q0 sin(theta), kz = q0 cos(theta); k dk / kz = q0 sin(theta) dtheta.
    quad::Integrand<kPropDim> propagative = [&](double theta) {
        const double kn = std::sin(theta);
        const double kzn = std::cos(theta);
        const AngularMoments m = moments(q0 * kn);
        const cplx up_down = std::exp(I * (2.0 * q0 * height * kzn));
        AlphaTensor wall = AlphaTensor::Zero();
        AlphaTensor emitted = AlphaTensor::Zero();
        for (Polarization p : pols) {
            SlabCoefficients sc{{0.0, 0.0}, {1.0, 0.0}};
            if (!transparent) {
                sc = slab_coeffs_kz(p, q0 * kzn, q0 * outgoing_sqrt(eps - kn * kn), slab.thickness, eps);
            }
            auto dyadic = [&](int phi, int phi2) {
                return p == Polarization::TE ? te_dyadic(m) : tm_dyadic(m, kn, kzn, phi, phi2);
            };
            const double scattered = std::norm(sc.rho) + std::norm(sc.tau);
            wall += scattered * dyadic(+1, +1) + (sc.rho * up_down) * dyadic(+1, -1) +
                    (std::conj(sc.rho) * std::conj(up_down)) * dyadic(-1, +1) + dyadic(-1, -1);
            emitted += (1.0 - scattered) * dyadic(+1, +1);
        }
        std::array<cplx, kPropDim> out;
        const double jac = 0.75 * kn;
        put(out, 0, jac * wall);
        put(out, 9, jac * emitted);
        return out;
    };

    quad::Tolerance tol{quad.rel_tol, quad.abs_tol, 200000};

    // Panels no wider than a quarter of the fastest phase period in theta.
    const double phase_rate = q0 * (dist + 2.0 * height);
    std::size_t prop_panels = std::clamp<std::size_t>(std::size_t(std::ceil(phase_rate / (constants::pi / 2.0))), 4, 4000);
    std::vector<double> prop_breaks = linspace_breaks(0.0, constants::pi / 2.0, prop_panels);
    if (medium_line > 0.0 && medium_line < 1.0) {
        insert_break(prop_breaks, std::asin(medium_line));
    }
    const auto prop = quad::integrate<kPropDim>(propagative, prop_breaks, tol);

    AlphaSectors out;
    out.wall = take(prop.value, 0);
    out.slab_propagative = take(prop.value, 9);
    out.error = prop.error;
    if (transparent) {
        out.slab_propagative.setZero();
        return out;
    }

    // Evanescent sector: k = q0 cosh(u), kz = i kappa = i q0 sinh(u); k dk / kappa = q0 cosh(u) du.
    quad::Integrand<kEvanDim> evanescent = [&](double u) {
        const double kn = std::cosh(u);
        const double kappa_n = std::sinh(u);
        const AngularMoments m = moments(q0 * kn);
        const double decay = std::exp(-2.0 * q0 * height * kappa_n);
        AlphaTensor emitted = AlphaTensor::Zero();
        for (Polarization p : pols) {
            const SlabCoefficients sc = slab_coeffs_kz(p, cplx(0.0, q0 * kappa_n),
                                                       q0 * outgoing_sqrt(eps - 1.0 - kappa_n * kappa_n),
                                                       slab.thickness, eps);
            const AlphaTensor d = p == Polarization::TE ? te_dyadic(m) : tm_dyadic(m, kn, cplx(0.0, kappa_n), 1, 1);
            emitted += (2.0 * sc.rho.imag() * decay) * d;
        }
        std::array<cplx, kEvanDim> res;
        put(res, 0, (0.75 * kn) * emitted);
        return res;
    };

    const double kappa_max = -std::log(quad.evanescent_cutoff) / (2.0 * height);
    const double k_max = std::hypot(q0, kappa_max);
    const double u_max = std::asinh(kappa_max / q0);
    double dk = 1.0 / height;
    if (dist > 0.0) {
        dk = std::min(dk, constants::pi / dist);
    }
    const std::size_t evan_panels = std::clamp<std::size_t>(std::size_t(std::ceil((k_max - q0) / dk)), 8, 4000);
    std::vector<double> evan_breaks(evan_panels + 1);
    for (std::size_t i = 0; i <= evan_panels; ++i) {
        const double k = q0 + (k_max - q0) * double(i) / double(evan_panels);
        evan_breaks[i] = std::acosh(std::max(1.0, k / q0));
    }
    evan_breaks.front() = 0.0;
    evan_breaks.back() = u_max;
    if (medium_line > 1.0) {
        insert_break(evan_breaks, std::acosh(medium_line));
    }
    // A thin film carries TE0/TM0 guided modes just beyond the light line, at
    // kappa ~ q0^2 (eps - 1) d / 2 (TE) and that over eps (TM). With small losses they
    // are narrow peaks in Im rho; cluster breakpoints around the estimates.
    if (q0 * std::abs(std::sqrt(eps - 1.0)) * slab.thickness < 0.1) {
        const double base = q0 * (eps - 1.0).real() * slab.thickness / 2.0;
        for (const double kappa_n : {base, base / eps.real()}) {
            if (!(kappa_n > 0.0)) {
                continue;
            }
            const double u0 = std::asinh(kappa_n);
            for (const double s : {0.0, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3}) {
                insert_break(evan_breaks, u0 * (1.0 + s));
                insert_break(evan_breaks, u0 * (1.0 - s));
            }
        }
    }
    const auto evan = quad::integrate<kEvanDim>(evanescent, evan_breaks, tol);
    out.slab_evanescent = take(evan.value, 0);
    out.error += evan.error;
    return out;
}

AlphaTensors alpha_tensors(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad) {
    emitters.validate();
    if (i >= emitters.size() || j >= emitters.size()) {
        throw DomainError("alpha: emitter index out of range");
    }
    const double z = emitters.common_height();
    const Eigen::Vector2d sep = (emitters.positions[i] - emitters.positions[j]).head<2>();
    const AlphaSectors s = alpha_sectors(sep, z, omega, slab, quad);
    return {s.wall, s.slab_propagative + s.slab_evanescent};
}

AlphaTensor alpha_tensor_W(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad) {
    return alpha_tensors(i, j, omega, emitters, slab, quad).wall;
}

AlphaTensor alpha_tensor_M(std::size_t i, std::size_t j, double omega, const EmitterArray& emitters,
                           const SlabSpec& slab, const QuadratureSpec& quad) {
    return alpha_tensors(i, j, omega, emitters, slab, quad).slab;
}

cplx alpha_contract(const AlphaTensor& tensor, const Eigen::Vector3cd& d_i, const Eigen::Vector3cd& d_j) {
    return d_i.adjoint() * tensor * d_j;
}

AlphaMatrices alpha_matrices(double omega, const EmitterArray& emitters, const SlabSpec& slab,
                             const QuadratureSpec& quad, AlphaCache* cache) {
    emitters.validate();
    const double z = emitters.common_height();
    const std::size_t n = emitters.size();
    AlphaMatrices out{Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const Eigen::Vector2d sep = (emitters.positions[i] - emitters.positions[j]).head<2>();
            AlphaTensors t;
            const std::uint64_t key = AlphaCache::key(sep, z, omega, slab, quad);
            if (!(cache && cache->lookup(key, t))) {
                const AlphaSectors s = alpha_sectors(sep, z, omega, slab, quad);
                t = {s.wall, s.slab_propagative + s.slab_evanescent};
                if (cache) {
                    cache->store(key, t);
                }
            }
            out.wall(i, j) = alpha_contract(t.wall, emitters.dipoles[i], emitters.dipoles[j]);
            out.slab(i, j) = alpha_contract(t.slab, emitters.dipoles[i], emitters.dipoles[j]);
        }
    }
    return out;
}

namespace {

struct Fnv1a {
    std::uint64_t h = 14695981039346656037ull;
    void add(double v) {
        if (v == 0.0) {
            v = 0.0; // fold -0.0
        }
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
};

} // namespace

std::uint64_t AlphaCache::key(const Eigen::Vector2d& separation, double height, double omega, const SlabSpec& slab,
                              const QuadratureSpec& quad) {
    Fnv1a f;
    f.add(double(format_version));
    f.add(omega);
    f.add(separation.x());
    f.add(separation.y());
    f.add(height);
    f.add(slab.thickness);
    f.add(slab.permittivity.is_vacuum() ? 0.0 : 1.0);
    f.add(slab.permittivity.eps_inf);
    for (const auto& r : slab.permittivity.resonances) {
        f.add(r.strength);
        f.add(r.frequency);
        f.add(r.damping);
    }
    f.add(quad.rel_tol);
    f.add(quad.abs_tol);
    f.add(quad.evanescent_cutoff);
    f.add(quad.angular == QuadratureSpec::Angular::bessel ? 0.0 : 1.0);
    return f.h;
}

bool AlphaCache::lookup(std::uint64_t key, AlphaTensors& out) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return false;
    }
    out = it->second;
    return true;
}

void AlphaCache::store(std::uint64_t key, const AlphaTensors& value) {
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(key, value);
}

std::size_t AlphaCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void AlphaCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        return;
    }
    std::string tag;
    int version = 0;
    std::size_t count = 0;
    if (!(in >> tag >> version >> count) || tag != format_tag || version != format_version) {
        throw ConfigError("alpha cache " + path.string() + ": unrecognised header");
    }
    std::map<std::uint64_t, AlphaTensors> loaded;
    std::string token;
    for (std::size_t r = 0; r < count; ++r) {
        std::uint64_t key = 0;
        if (!(in >> std::hex >> key >> std::dec)) {
            throw ConfigError("alpha cache " + path.string() + ": truncated record");
        }
        AlphaTensors t;
        for (AlphaTensor* m : {&t.wall, &t.slab}) {
            for (int e = 0; e < 9; ++e) {
                double re = 0.0;
                double im = 0.0;
                for (double* v : {&re, &im}) {
                    if (!(in >> token)) {
                        throw ConfigError("alpha cache " + path.string() + ": truncated record");
                    }
                    *v = std::strtod(token.c_str(), nullptr);
                }
                (*m)(e / 3, e % 3) = {re, im};
            }
        }
        loaded.insert_or_assign(key, t);
    }
    std::unique_lock lock(mutex_);
    for (auto& [k, v] : loaded) {
        entries_.insert_or_assign(k, v);
    }
}

void AlphaCache::save(const std::filesystem::path& path) const {
    std::ostringstream os;
    {
        std::shared_lock lock(mutex_);
        os << format_tag << ' ' << format_version << ' ' << entries_.size() << '\n';
        for (const auto& [key, t] : entries_) {
            os << std::hex << key << std::dec << std::hexfloat;
            for (const AlphaTensor* m : {&t.wall, &t.slab}) {
                for (int e = 0; e < 9; ++e) {
                    os << ' ' << (*m)(e / 3, e % 3).real() << ' ' << (*m)(e / 3, e % 3).imag();
                }
            }
            os << std::defaultfloat << '\n';
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::ios_base::failure("cannot write alpha cache " + path.string());
    }
    out << os.str();
}

} // namespace ote
