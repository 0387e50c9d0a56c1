// slab_optics.hpp - Dielectric response and slab reflection/transmission per field mode

#pragma once

#include <complex>
#include <vector>

namespace ote {

using cplx = std::complex<double>;

struct LorentzResonance {
    double strength{0.0};  // dimensionless oscillator strength
    double frequency{0.0}; // rad/s
    double damping{0.0};   // rad/s
};

// eps(w) = eps_inf + sum_k S_k w_k^2 / (w_k^2 - w^2 - i g_k w)
struct PermittivityModel {
    enum class Kind { vacuum, drude_lorentz };

    Kind kind{Kind::vacuum};
    double eps_inf{1.0};
    std::vector<LorentzResonance> resonances;

    static PermittivityModel vacuum() { return {}; }
    static PermittivityModel single_resonance(double eps_inf, LorentzResonance r) {
        return {Kind::drude_lorentz, eps_inf, {r}};
    }
    // One-resonance stand-in for sapphire with the lowest TO resonance at 0.81e14 rad/s.
    static PermittivityModel sapphire();

    bool is_vacuum() const;
};

enum class Polarization { TE = 1, TM = 2 };

struct SlabSpec {
    double thickness{0.0};        // m
    PermittivityModel permittivity;
    double temperature{0.0};      // K
};

struct FresnelCoefficients {
    cplx r;     // vacuum-medium reflection
    cplx t;     // vacuum-medium transmission
    cplx t_bar; // medium-vacuum transmission
};

struct SlabCoefficients {
    cplx rho; // reflection seen from the emitter side
    cplx tau; // transmission through the slab
};

// Throws DomainError for omega <= 0.
cplx permittivity(const PermittivityModel& model, double omega);

// Square root with Im >= 0; real positive radicands give the positive root.
cplx outgoing_sqrt(cplx radicand);

cplx kz(double omega, double k);
cplx kzm(double omega, double k, cplx eps);

FresnelCoefficients fresnel(double omega, double k, Polarization p, cplx eps);

SlabCoefficients slab_coeffs(double omega, double k, Polarization p, double thickness, cplx eps);
// Same, from the normal wavevector components in vacuum (kv) and in the medium (km).
// Lets callers supply kz without the cancellation in sqrt(q0^2 - k^2) near the light line.
SlabCoefficients slab_coeffs_kz(Polarization p, cplx kv, cplx km, double thickness, cplx eps);
SlabCoefficients slab_coeffs(double omega, double k, Polarization p, const SlabSpec& slab);

} // namespace ote
