#pragma once
#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <sstream>

#include "errors.hpp"
#include "ode.hpp"
#include "quadrature.hpp"

namespace degzero::normalform {

using cplx = std::complex<double>;
using Vec2 = Eigen::Vector2d;

struct KoenigsValue {
    double value = 0.0;
    int iterations = 0;
};

// h(y) = lim mu^{-n} P^n(y) for a contracting germ P(0) = 0, P'(0) = mu.
template <class Map>
KoenigsValue koenigs_chart(const Map& P, double mu, double y, int cap = 200, double tol = 1e-12) {
    if (!(std::abs(mu) > 0.0 && std::abs(mu) < 1.0)) throw DomainError("koenigs_chart needs 0 < |mu| < 1 (invert P for expanding germs)");
    double yn = y, scale = 1.0, prev = y;
    const double blowup = std::max(1.0, 10.0 * std::abs(y));
    for (int n = 1; n <= cap; ++n) {
        yn = P(yn);
        scale *= mu;
        if (!std::isfinite(yn) || std::abs(yn) > blowup) {
            std::ostringstream os;
            os << "orbit of y = " << y << " leaves the basin (|P^n(y)| = " << std::abs(yn) << " at n = " << n << ")";
            throw NoConvergence(os.str());
        }
        const double h = yn / scale;
        if (std::abs(h - prev) < tol) return {h, n};
        prev = h;
    }
    std::ostringstream os;
    os << "Koenigs iteration stalled after " << cap << " steps at y = " << y;
    throw NoConvergence(os.str());
}

// Expanding germ |mu| > 1: linearize the local inverse, found by Newton's
// method from the linear guess. The chart conjugates P to y -> mu y.
template <class Map>
KoenigsValue koenigs_chart_expanding(const Map& P, double mu, double y, int cap = 200, double tol = 1e-12) {
    if (!(std::abs(mu) > 1.0)) throw DomainError("koenigs_chart_expanding needs |mu| > 1");
    auto inverse = [&](double target) {
        double z = target / mu;
        for (int it = 0; it < 60; ++it) {
            const double h = 1e-7 * std::max(1e-3, std::abs(z));
            const double d = (P(z + h) - P(z - h)) / (2 * h);
            const double step = (P(z) - target) / d;
            z -= step;
            if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(z))) break;
        }
        return z;
    };
    auto r = koenigs_chart(inverse, 1.0 / mu, y, cap, tol);
    return r;
}

struct CylinderField {
    std::function<Vec2(const Vec2&)> V;
    double lambda = 1.0;

    // V0 = d/dx - lambda y d/dy
    static CylinderField linear(double lambda) {
        return {[lambda](const Vec2& q) { return Vec2(1.0, -lambda * q[1]); }, lambda};
    }
};

// Unperturbed flow U0(t)(x, y) = (x + t, y e^{-lambda t}).
inline Vec2 linear_flow(double lambda, const Vec2& q, double t) { return {q[0] + t, q[1] * std::exp(-lambda * t)}; }

inline Vec2 flow(const CylinderField& F, const Vec2& q, double t, double dt = 1e-3) {
    const long n = std::max(1L, static_cast<long>(std::ceil(std::abs(t) / dt)));
    const double h = t / static_cast<double>(n);
    Rk4<Vec2> rk(q);
    auto rhs = [&F](double, const Vec2& v) { return F.V(v); };
    for (long i = 0; i < n; ++i) rk.step(rhs, h);
    return rk.state();
}

struct WaveMapResult {
    Vec2 value;
    double horizon = 0.0;
    double gap = 0.0;  // |W_T - W_2T| at the accepted horizon
};

// W(q) = lim U0(-T) U(T) q, certified by agreement of the horizons T and 2T.
inline WaveMapResult nelson_wave_map(const CylinderField& F, const Vec2& q, double T = 20.0, double tol = 1e-8,
                                     double dt = 1e-3, int max_doublings = 8, double y_max = 10.0) {
    if (!(T > 0.0)) throw DomainError("nelson_wave_map needs T > 0");
    const long n = std::max(1L, static_cast<long>(std::ceil(T / dt)));
    const double h = T / static_cast<double>(n);
    Rk4<Vec2> rk(q);
    auto rhs = [&F](double, const Vec2& v) { return F.V(v); };
    auto advance = [&](long steps) {
        for (long i = 0; i < steps; ++i) {
            rk.step(rhs, h);
            if (!(std::abs(rk.state()[1]) <= y_max)) {
                std::ostringstream os;
                os << "|y| = " << std::abs(rk.state()[1]) << " exceeded " << y_max << " along the flow";
                throw BasinEscape(os.str());
            }
        }
    };
    auto pulled_back = [&](double horizon) { return linear_flow(F.lambda, rk.state(), -horizon); };
    advance(n);
    double horizon = T;
    Vec2 prev = pulled_back(horizon);
    double gap = 0.0;
    for (int d = 0; d < max_doublings; ++d) {
        advance(rk.steps());
        horizon *= 2.0;
        const Vec2 cur = pulled_back(horizon);
        gap = (cur - prev).norm();
        if (gap < tol) return {cur, horizon, gap};
        prev = cur;
    }
    std::ostringstream os;
    os << "wave map gap " << gap << " still above " << tol << " at horizon " << horizon;
    throw NotConverged(os.str());
}

using Source = std::function<cplx(double y, double s)>;

// alpha_{n,k}(y,s) = (1/lambda) int_0^1 tau^{n-1-ik/lambda} rho(y + (tau-1)s/lambda, tau s) dtau,
// evaluated after tau = e^{-u}, which turns the oscillating power into the
// damped exponential e^{-(n - ik/lambda) u} on [0, infinity).
inline cplx solve_cohomological(double lambda, int n, int k, const Source& rho, double y, double s, double rel_tol = 1e-10) {
    if (lambda == 0.0) throw DomainError("cohomological solver needs lambda != 0");
    if (n < 1) throw DomainError("cohomological solver needs order n >= 1");
    const double nu = static_cast<double>(k) / lambda;
    auto integrand = [&](double u) {
        const double tau = std::exp(-u);
        return std::exp(cplx(-n * u, nu * u)) * rho(y + (tau - 1.0) * s / lambda, tau * s);
    };
    const double u_max = 40.0 / n;
    const double width = std::min(1.0, std::abs(nu) > 0 ? M_PI / std::abs(nu) : 1.0);
    quad::Options opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = 1e-16;
    return quad::adaptive_panels(integrand, quad::oscillation_panels(0.0, u_max, 2 * M_PI / width), opt) / lambda;
}

// v(y) = int_0^1 s^{-ik/lambda} g(ys) ds + l_plus y^{-1+ik/lambda}, y > 0.
class ProfileSolution {
public:
    ProfileSolution(double lambda, int k, std::function<double(double)> g, std::function<double(double)> dg, cplx l_plus)
        : lambda_(lambda), k_(k), g_(std::move(g)), dg_(std::move(dg)), l_plus_(l_plus) {
        if (lambda == 0.0) throw DomainError("profile ODE needs lambda != 0");
        if (!dg_) {
            auto g0 = g_;
            dg_ = [g0](double y) {
                const double h = 1e-3 * std::max(1.0, std::abs(y));
                return (8.0 * (g0(y + h) - g0(y - h)) - (g0(y + 2 * h) - g0(y - 2 * h))) / (12 * h);
            };
        }
    }

    cplx value(double y) const {
        check(y);
        return damped([&](double, double e) { return e * g_(y * e); }, 1.0) + homogeneous(y);
    }

    cplx derivative(double y) const {
        check(y);
        const cplx nu1(-1.0, nu());
        return damped([&](double, double e) { return e * e * dg_(y * e); }, 2.0) + nu1 * homogeneous(y) / y;
    }

    // (ik - lambda (y d/dy + 1)) v + lambda g
    cplx residual(double y) const {
        const cplx v = value(y), dv = derivative(y);
        return cplx(0.0, k_) * v - lambda_ * (y * dv + v) + lambda_ * g_(y);
    }

    double nu() const { return static_cast<double>(k_) / lambda_; }

private:
    void check(double y) const {
        if (!(y > 0.0)) throw DomainError("profile ODE solution is evaluated on y > 0");
    }
    cplx homogeneous(double y) const {
        if (l_plus_ == cplx(0.0)) return 0.0;
        return l_plus_ * std::exp(cplx(-1.0, nu()) * std::log(y));
    }
    template <class F>
    cplx damped(F f, double decay) const {
        auto integrand = [&](double u) { return std::exp(cplx(0.0, nu() * u)) * f(u, std::exp(-u)); };
        const double u_max = 40.0 / decay;
        const double width = std::min(1.0, std::abs(nu()) > 0 ? M_PI / std::abs(nu()) : 1.0);
        quad::Options opt;
        opt.rel_tol = 1e-12;
        opt.abs_tol = 1e-16;
        return quad::adaptive_panels(integrand, quad::oscillation_panels(0.0, u_max, 2 * M_PI / width), opt);
    }

    double lambda_;
    int k_;
    std::function<double(double)> g_, dg_;
    cplx l_plus_;
};

inline ProfileSolution solve_profile_ode(double lambda, int k, std::function<double(double)> g, cplx l_plus,
                                         std::function<double(double)> dg = {}) {
    return ProfileSolution(lambda, k, std::move(g), std::move(dg), l_plus);
}

}  // namespace degzero::normalform
