#pragma once
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <type_traits>
#include <vector>

#include "errors.hpp"

namespace degzero::quad {

using cplx = std::complex<double>;

struct Options {
    double rel_tol = 1e-10;
    double abs_tol = 1e-15;
    unsigned max_depth = 18;
};

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

// Adaptive 31-point Gauss-Kronrod on [a,b]. Works for real and complex
// integrands; throws QuadratureFailure when the error estimate exceeds
// max(rel_tol * L1, abs_tol).
template <class F>
auto adaptive(F f, double a, double b, const Options& opt = {}) {
    using K = decltype(f(a));
    if (a == b) return K{};
    double err = 0.0, l1 = 0.0;
    K v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, opt.max_depth,
                                                                       opt.rel_tol, &err, &l1);
    using std::abs;
    const double bound = std::max(opt.rel_tol * std::abs(l1), opt.abs_tol);
    if (!(err <= bound) || !std::isfinite(abs(v))) {
        std::ostringstream os;
        os << "adaptive Gauss-Kronrod on [" << a << ", " << b << "] error " << err << " > " << bound;
        throw QuadratureFailure(os.str());
    }
    return v;
}

// Same, but split at the given breakpoints (sorted, inclusive of the ends).
template <class F>
auto adaptive_panels(F f, const std::vector<double>& pts, const Options& opt = {}) {
    using K = decltype(f(pts.front()));
    K sum{};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += adaptive(f, pts[i], pts[i + 1], opt);
    return sum;
}

// Breakpoints for an integrand oscillating with angular frequency up to
// omega: panels no longer than roughly one period, at least one panel.
inline std::vector<double> oscillation_panels(double a, double b, double omega, double per_period = 1.0) {
    const double period = omega > 0 ? 2.0 * M_PI / omega : (b - a);
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / period * per_period)));
    std::vector<double> pts(n + 1);
    for (std::size_t i = 0; i <= n; ++i) pts[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    pts.back() = b;
    return pts;
}

// Fixed-order composite Gauss-Legendre; used where the node budget must
// be known ahead of time (resolution contracts on oscillatory kernels).
template <class F>
auto gauss_legendre(F f, double a, double b, std::size_t panels) {
    using K = decltype(f(a));
    K sum{};
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t i = 0; i < panels; ++i) {
        const double lo = a + h * static_cast<double>(i);
        sum += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + h);
    }
    return sum;
}
inline constexpr std::size_t gauss_legendre_nodes_per_panel = 20;

// Double-exponential rule for integrands with integrable endpoint
// singularities (1/sqrt at an end, for example).
template <class F>
auto endpoint_singular(F f, double a, double b, double tol = 1e-10) {
    using K = decltype(f(a));
    thread_local boost::math::quadrature::tanh_sinh<double> ts(15);
    auto one = [&](auto g) {
        double err = 0.0, l1 = 0.0;
        // Nodes that round onto an endpoint carry negligible weight and are dropped.
        auto guarded = [&](double x, double) { return (x <= a || x >= b) ? 0.0 : static_cast<double>(g(x)); };
        double v = ts.integrate(guarded, a, b, tol, &err, &l1);
        if (!(err <= std::max(1e3 * tol * l1, 1e-15)) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "tanh-sinh on [" << a << ", " << b << "] error " << err;
            throw QuadratureFailure(os.str());
        }
        return v;
    };
    if (a == b) return K{};
    if constexpr (is_complex<K>::value) {
        const double re = one([&](double x) { return f(x).real(); });
        const double im = one([&](double x) { return f(x).imag(); });
        return K(re, im);
    } else {
        return K(one(f));
    }
}

}  // namespace degzero::quad
