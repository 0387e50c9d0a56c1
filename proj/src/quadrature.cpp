#include "ote/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ote::quad::detail {

const GK15& gk15() {
    static const GK15 rule = [] {
        using boost::math::quadrature::gauss;
        using boost::math::quadrature::gauss_kronrod;
        GK15 r{};
        const auto& x = gauss_kronrod<double, 15>::abscissa();
        const auto& wk = gauss_kronrod<double, 15>::weights();
        const auto& wg = gauss<double, 7>::weights();
        for (std::size_t i = 0; i < 8; ++i) {
            r.nodes[i] = x[i];
            r.kronrod[i] = wk[i];
        }
        for (std::size_t i = 0; i < 4; ++i) {
            r.gauss[i] = wg[i];
        }
        return r;
    }();
    return rule;
}

double max_abs(std::span<const cplx> v) {
    double m = 0.0;
    for (const auto& z : v) {
        m = std::max(m, std::abs(z));
    }
    return m;
}

} // namespace ote::quad::detail
