// quadrature_impl.hpp - Template body of the adaptive Gauss-Kronrod driver

#pragma once

#include <algorithm>
#include <queue>

#include "ote/errors.hpp"

namespace ote::quad {

namespace detail {

template <std::size_t Dim>
struct Panel {
    double a;
    double b;
    std::array<cplx, Dim> value;
    double error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

template <std::size_t Dim>
Panel<Dim> evaluate_panel(const Integrand<Dim>& f, double a, double b) {
    const auto& rule = gk15();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<cplx, Dim> kron{};
    std::array<cplx, Dim> gauss{};

    const auto centre = f(mid);
    for (std::size_t d = 0; d < Dim; ++d) {
        kron[d] = rule.kronrod[0] * centre[d];
        gauss[d] = rule.gauss[0] * centre[d];
    }
    for (std::size_t n = 1; n < 8; ++n) {
        const double dx = half * rule.nodes[n];
        const auto lo = f(mid - dx);
        const auto hi = f(mid + dx);
        for (std::size_t d = 0; d < Dim; ++d) {
            const cplx s = lo[d] + hi[d];
            kron[d] += rule.kronrod[n] * s;
            if (n % 2 == 0) {
                gauss[d] += rule.gauss[n / 2] * s;
            }
        }
    }
    Panel<Dim> p{a, b, {}, 0.0};
    double err = 0.0;
    for (std::size_t d = 0; d < Dim; ++d) {
        p.value[d] = half * kron[d];
        err = std::max(err, std::abs(half * (kron[d] - gauss[d])));
    }
    p.error = err;
    return p;
}

} // namespace detail

template <std::size_t Dim>
Result<Dim> integrate(const Integrand<Dim>& f, const std::vector<double>& breaks, const Tolerance& tol) {
    if (breaks.size() < 2) {
        throw DomainError("quad::integrate: need at least one panel");
    }
    std::priority_queue<detail::Panel<Dim>> heap;
    std::array<cplx, Dim> total{};
    double total_error = 0.0;
    std::size_t evals = 0;

    auto push = [&](detail::Panel<Dim>&& p) {
        for (std::size_t d = 0; d < Dim; ++d) {
            total[d] += p.value[d];
        }
        total_error += p.error;
        evals += 15;
        heap.push(std::move(p));
    };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) {
            throw DomainError("quad::integrate: breakpoints must be strictly increasing");
        }
        push(detail::evaluate_panel(f, breaks[i], breaks[i + 1]));
    }

    auto target = [&] { return std::max(tol.abs, tol.rel * detail::max_abs(total)); };
    while (total_error > target()) {
        if (heap.size() >= tol.max_panels) {
            throw ConvergenceError("adaptive quadrature exhausted its panel budget", total_error);
        }
        detail::Panel<Dim> worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw ConvergenceError("adaptive quadrature reached machine resolution", total_error);
        }
        for (std::size_t d = 0; d < Dim; ++d) {
            total[d] -= worst.value[d];
        }
        total_error -= worst.error;
        push(detail::evaluate_panel(f, worst.a, mid));
        push(detail::evaluate_panel(f, mid, worst.b));
        // Re-sum occasionally to keep cancellation in the running sums from drifting.
        if (heap.size() % 256 == 0) {
            auto copy = heap;
            total = {};
            total_error = 0.0;
            while (!copy.empty()) {
                for (std::size_t d = 0; d < Dim; ++d) {
                    total[d] += copy.top().value[d];
                }
                total_error += copy.top().error;
                copy.pop();
            }
        }
    }
    return {total, total_error, evals};
}

} // namespace ote::quad
