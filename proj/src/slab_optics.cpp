#include "ote/slab_optics.hpp"

#include <cmath>

#include "ote/constants.hpp"
#include "ote/errors.hpp"

namespace ote {

PermittivityModel PermittivityModel::sapphire() {
    // eps(0) = 9.4, eps_inf = 3.1; damping chosen to give the far-infrared loss
    // tangent of a few 1e-3 at the emitter frequencies of interest.
    return single_resonance(3.1, {6.3, 0.81e14, 2.0e12});
}

bool PermittivityModel::is_vacuum() const {
    return kind == Kind::vacuum;
}

cplx permittivity(const PermittivityModel& model, double omega) {
    if (!(omega > 0.0)) {
        throw DomainError("permittivity: frequency must be positive");
    }
    if (model.kind == PermittivityModel::Kind::vacuum) {
        return {1.0, 0.0};
    }
    cplx eps{model.eps_inf, 0.0};
    for (const auto& res : model.resonances) {
        const double w2 = res.frequency * res.frequency;
        eps += res.strength * w2 / cplx(w2 - omega * omega, -res.damping * omega);
    }
    return eps;
}

cplx outgoing_sqrt(cplx radicand) {
    cplx root = std::sqrt(radicand);
    if (root.imag() < 0.0) {
        root = -root;
    }
    return root;
}

cplx kz(double omega, double k) {
    const double q0 = omega / constants::c;
    return outgoing_sqrt(cplx(q0 * q0 - k * k, 0.0));
}

cplx kzm(double omega, double k, cplx eps) {
    const double q0 = omega / constants::c;
    return outgoing_sqrt(eps * (q0 * q0) - k * k);
}

FresnelCoefficients fresnel(double omega, double k, Polarization p, cplx eps) {
    if (eps == cplx(1.0, 0.0)) {
        return {{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}};
    }
    const cplx kv = kz(omega, k);
    const cplx km = kzm(omega, k, eps);
    if (p == Polarization::TE) {
        const cplx den = kv + km;
        return {(kv - km) / den, 2.0 * kv / den, 2.0 * km / den};
    }
    const cplx sqrt_eps = std::sqrt(eps);
    const cplx den = eps * kv + km;
    return {(eps * kv - km) / den, 2.0 * sqrt_eps * kv / den, 2.0 * sqrt_eps * km / den};
}

SlabCoefficients slab_coeffs_kz(Polarization p, cplx kv, cplx km, double thickness, cplx eps) {
    if (thickness < 0.0) {
        throw DomainError("slab_coeffs: negative thickness");
    }
    if (eps == cplx(1.0, 0.0) || thickness == 0.0) {
        return {{0.0, 0.0}, {1.0, 0.0}};
    }
    // With A = kz (TE) or eps kz (TM) and B = kzm, the multiple-reflection sums reduce to
    //   rho = (A^2 - B^2)(1 - e) / D,  tau = 4 A B exp(i (kzm - kz) d) / D,
    //   D = 4 A B + (A - B)^2 (1 - e),  e = exp(2 i kzm d),
    // which stays accurate near grazing incidence and near thin-film guided modes.
    const cplx a = p == Polarization::TE ? kv : eps * kv;
    const cplx b = km;
    const cplx half = cplx(0.0, 1.0) * km * thickness;
    // 1 - e without cancellation for small |half| and without overflow for thick slabs
    const cplx one_minus_e = half.real() > -1.0 ? -2.0 * std::exp(half) * std::sinh(half) : 1.0 - std::exp(2.0 * half);
    const cplx den = 4.0 * a * b + (a - b) * (a - b) * one_minus_e;
    return {(a - b) * (a + b) * one_minus_e / den,
            4.0 * a * b * std::exp(cplx(0.0, 1.0) * (km - kv) * thickness) / den};
}

SlabCoefficients slab_coeffs(double omega, double k, Polarization p, double thickness, cplx eps) {
    return slab_coeffs_kz(p, kz(omega, k), kzm(omega, k, eps), thickness, eps);
}

SlabCoefficients slab_coeffs(double omega, double k, Polarization p, const SlabSpec& slab) {
    return slab_coeffs(omega, k, p, slab.thickness, permittivity(slab.permittivity, omega));
}

} // namespace ote
