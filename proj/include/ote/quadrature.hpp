// quadrature.hpp - Globally adaptive Gauss-Kronrod (7/15) for vector-valued complex integrands

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ote::quad {

using cplx = std::complex<double>;

struct Tolerance {
    double rel{1e-10};
    double abs{1e-14};
    std::size_t max_panels{20000};
};

template <std::size_t Dim>
struct Result {
    std::array<cplx, Dim> value{};
    double error{0.0}; // max-norm error estimate
    std::size_t evaluations{0};
};

template <std::size_t Dim>
using Integrand = std::function<std::array<cplx, Dim>(double)>;

namespace detail {

// Kronrod nodes on [0, 1] ascending from the centre; even indices are the 7-point Gauss nodes.
struct GK15 {
    std::array<double, 8> nodes;
    std::array<double, 8> kronrod;
    std::array<double, 4> gauss;
};
const GK15& gk15();

double max_abs(std::span<const cplx> v);

} // namespace detail

// Integrate f over the panels defined by consecutive entries of `breaks`
// (strictly increasing, at least two). Panels are bisected until the summed error
// estimate meets max(tol.abs, tol.rel * |I|). Throws ConvergenceError on panel exhaustion.
template <std::size_t Dim>
Result<Dim> integrate(const Integrand<Dim>& f, const std::vector<double>& breaks, const Tolerance& tol);

} // namespace ote::quad

#include "ote/quadrature_impl.hpp"
