#pragma once
#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace degzero::quasires {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
inline constexpr cplx I{0.0, 1.0};

inline double sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

// (1 - e^{-i t mu}) / mu, evaluated without cancellation near mu = 0.
inline cplx resonant_kernel(double t, double mu) { return I * t * std::exp(-I * (0.5 * t * mu)) * sinc(0.5 * t * mu); }

struct ForcingProfile {
    std::function<cplx(double)> fhat;
    double xi_max = 8.0;
    int n_points = 4001;

    ForcingProfile(std::function<cplx(double)> f, double xi_max_ = 8.0, int n_points_ = 4001)
        : fhat(std::move(f)), xi_max(xi_max_), n_points(n_points_) {
        if (!(xi_max > 0.0) || n_points < 3) throw DomainError("forcing grid needs xi_max > 0 and at least 3 points");
        check_decay();
    }

    cplx operator()(double xi) const { return fhat(xi); }

    ForcingProfile scaled(cplx c) const {
        auto f = fhat;
        return ForcingProfile([f, c](double xi) { return c * f(xi); }, xi_max, n_points);
    }

    // |f|(1+|xi|)^4 must not grow toward the edge of the grid.
    void check_decay() const {
        double inner = 0.0, outer = 0.0;
        for (int i = 0; i < n_points; ++i) {
            const double xi = -xi_max + 2.0 * xi_max * i / (n_points - 1);
            const double w = std::abs(fhat(xi)) * std::pow(1.0 + std::abs(xi), 4);
            if (!std::isfinite(w)) throw DomainError("forcing profile is not finite on its grid");
            if (std::abs(xi) <= 0.5 * xi_max) inner = std::max(inner, w);
            else outer = std::max(outer, w);
        }
        if (outer > inner * (1.0 + 1e-12) + 1e-300) {
            std::ostringstream os;
            os << "forcing does not decay like (1+|xi|)^-4 on its grid (outer weighted sup " << outer << " > inner " << inner << ")";
            throw DomainError(os.str());
        }
    }
};

inline cplx schrodinger_forced_spectrum(const ForcingProfile& f, double omega0, double t, double xi) {
    if (!(omega0 > 0.0)) throw DomainError("forcing frequency must be positive");
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    const double mu = xi * xi - omega0;
    const cplx phase = std::exp(-I * (t * xi * xi));
    if (std::abs(mu) < 1e-8) return -I * f(xi) * (I * t) * phase;
    // e^{i t mu} - 1 = 2i sin(t mu / 2) e^{i t mu / 2}
    return -I * f(xi) * phase * (2.0 * I * std::sin(0.5 * t * mu) * std::exp(I * (0.5 * t * mu))) / mu;
}

// Composite Gauss-Legendre over [-xi_max, xi_max] with panels short enough
// to follow e^{-i t xi^2} at the grid edge and to put at least 32 nodes
// inside the band |xi^2 - omega0| <= 2 pi / t. The estimate at half the
// panel count doubles as the error check.
template <class F>
auto resonant_band_quadrature(F integrand, double xi_max, double omega0, double t, double rel_tol = 1e-8) {
    const double len = 2.0 * xi_max;
    const double osc_width = t > 0 ? M_PI / (t * xi_max) : len;
    const double band = t > 0 ? 2.0 * M_PI / (t * std::sqrt(omega0)) : len;
    const double band_width = band * static_cast<double>(quad::gauss_legendre_nodes_per_panel) / 32.0;
    const double width = std::min({osc_width, band_width, len / 8.0});
    auto panels = static_cast<std::size_t>(std::ceil(len / width));
    if (panels > 20'000'000) throw QuadratureFailure("quasi-resonant band cannot be resolved at this t");
    panels += panels % 2;
    const auto fine = quad::gauss_legendre(integrand, -xi_max, xi_max, panels);
    const auto coarse = quad::gauss_legendre(integrand, -xi_max, xi_max, panels / 2);
    using std::abs;
    if (abs(fine - coarse) > rel_tol * std::max(1e-12, static_cast<double>(abs(fine)))) {
        std::ostringstream os;
        os << "band quadrature not converged at t = " << t << " (panel halving changed the value by " << abs(fine - coarse) << ")";
        throw QuadratureFailure(os.str());
    }
    return fine;
}

// Scalar density on [lo, hi] with lo < 0 < hi; m may be singular (integrably)
// at either end but must be Hoelder continuous at 0.
struct Density {
    std::function<cplx(double)> m;
    double lo = -1.0, hi = 1.0;
};

struct PlemeljValue {
    cplx pv;           // principal value of int m(s)/s ds
    cplx m0;           // m(0)
    double holder = 0; // observed exponent of |m(+-r) - m(0)| on the excision radii
    cplx value() const { return pv + I * M_PI * m0; }
};

// <(s - i0)^{-1}, m> = p.v. int m/s + i pi m(0). The principal value is the
// limit of the symmetric excision integral I(r); two Richardson stages over
// the radii {r, r/2, r/4} remove the O(r) and O(r^3) terms.
inline PlemeljValue sokhotski_plemelj(const Density& d, double r0 = 0.0, double tol = 1e-11) {
    if (!(d.lo < 0.0 && d.hi > 0.0)) throw DomainError("density support must contain 0 in its interior");
    const double support = d.hi - d.lo;
    if (r0 <= 0.0) r0 = 1e-2 * support;
    const double R = std::min(-d.lo, d.hi);
    r0 = std::min(r0, 0.5 * R);
    const cplx m0 = d.m(0.0);

    double first = 0.0, last = 0.0, slope_sum = 0.0;
    int slopes = 0;
    double prev = -1.0;
    for (int j = 0; j <= 6; ++j) {
        const double r = r0 * std::ldexp(1.0, -j);
        const double dev = std::max(std::abs(d.m(r) - m0), std::abs(d.m(-r) - m0));
        if (j == 0) first = dev;
        if (prev > 0.0 && dev > 0.0) {
            slope_sum += std::log2(prev / dev);
            ++slopes;
        }
        prev = dev;
        last = dev;
    }
    const double holder = slopes ? slope_sum / slopes : 1.0;
    if (last > 1e-9 * (1.0 + std::abs(m0)) && holder < 0.05) {
        std::ostringstream os;
        os << "density is not Hoelder at 0: |m(+-r) - m(0)| stays near " << last << " (from " << first << ")";
        throw HolderViolation(os.str());
    }

    auto odd = [&](double s) { return (d.m(s) - d.m(-s)) / s; };
    cplx tails = 0.0;
    auto over_s = [&](double s) { return d.m(s) / s; };
    if (d.hi > R) tails += quad::endpoint_singular(over_s, R, d.hi, tol);
    if (-d.lo > R) tails += quad::endpoint_singular(over_s, d.lo, -R, tol);
    auto excised = [&](double r) { return quad::endpoint_singular(odd, r, R, tol) + tails; };
    const cplx i1 = excised(r0), i2 = excised(0.5 * r0), i4 = excised(0.25 * r0);
    const cplx j1 = 2.0 * i2 - i1, j2 = 2.0 * i4 - i2;
    return {(8.0 * j2 - j1) / 7.0, m0, holder};
}

struct AmplitudeResult {
    cplx value;
    cplx predicted;
};

// F(z) = (f(sqrt z) conj(phi(sqrt z)) + f(-sqrt z) conj(phi(-sqrt z))) / (2 sqrt z)
inline std::function<cplx(double)> amplitude_density(const ForcingProfile& f, const ForcingProfile& phi) {
    return [f, phi](double z) {
        if (z <= 0.0) return cplx(0.0);
        const double r = std::sqrt(z);
        return (f(r) * std::conj(phi(r)) + f(-r) * std::conj(phi(-r))) / (2.0 * r);
    };
}

// 2 pi e^{i omega0 t} <psi, phi> and its t -> infinity limit -i <(s - i0)^{-1}, F(omega0 + s)>.
inline AmplitudeResult amplitude_observable(const ForcingProfile& f, const ForcingProfile& phi, double omega0, double t) {
    if (!(omega0 > 0.0)) throw DomainError("forcing frequency must be positive");
    const double xi_max = std::min(f.xi_max, phi.xi_max);
    auto integrand = [&](double xi) { return std::conj(phi(xi)) * f(xi) * resonant_kernel(t, xi * xi - omega0); };
    const cplx value = -I * resonant_band_quadrature(integrand, xi_max, omega0, t);
    auto F = amplitude_density(f, phi);
    const Density shifted{[F, omega0](double s) { return F(omega0 + s); }, -omega0, xi_max * xi_max - omega0};
    return {value, -I * sokhotski_plemelj(shifted).value()};
}

// G(z) = (|f(sqrt z)|^2 + |f(-sqrt z)|^2) sqrt z
inline double energy_density(const ForcingProfile& f, double z) {
    if (z <= 0.0) return 0.0;
    const double r = std::sqrt(z);
    return (std::norm(f(r)) + std::norm(f(-r))) * r;
}

inline double energy_observable(const ForcingProfile& f, double omega0, double t) {
    if (!(omega0 > 0.0)) throw DomainError("forcing frequency must be positive");
    auto integrand = [&](double xi) {
        const double s = sinc(0.5 * t * (xi * xi - omega0));
        return xi * xi * std::norm(f(xi)) * t * t * s * s;
    };
    return resonant_band_quadrature(integrand, f.xi_max, omega0, t);
}

// Leading growth rate of the kinetic energy: t int (1 - cos mu)/mu^2 G(omega0 + mu/t) dmu ~ pi G(omega0) t.
inline double energy_growth_rate(const ForcingProfile& f, double omega0) { return M_PI * energy_density(f, omega0); }

struct LinearFit {
    double slope = 0, intercept = 0;
    double max_residual = 0;
};

inline LinearFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw EmptyData("linear fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.max_residual = std::max(fit.max_residual, std::abs(y[i] - fit.intercept - fit.slope * x[i]));
    return fit;
}

struct Atom {
    double s;
    VecC w;
};

// nu = m(s) ds on [lo, hi] plus atoms away from 0, valued in C^dim.
struct SpectralMeasure {
    int dim = 1;
    std::function<VecC(double)> density;  // empty: no absolutely continuous part
    double lo = -1.0, hi = 1.0;
    std::vector<Atom> atoms;

    double gap() const {
        double g = std::numeric_limits<double>::infinity();
        for (const auto& a : atoms) g = std::min(g, std::abs(a.s));
        return g;
    }

    void validate() const {
        if (dim < 1) throw DomainError("measure dimension must be positive");
        for (const auto& a : atoms) {
            if (!(std::abs(a.s) > 0.0)) throw DomainError("singular atoms must sit away from 0");
            if (a.w.size() != dim) throw DomainError("atom weight has the wrong dimension");
        }
        if (density && !(lo < 0.0 && hi > 0.0)) throw DomainError("absolutely continuous support must contain 0");
    }
};

struct DecompositionResult {
    VecC I_inf;
    double cut = 0.0;
    std::vector<double> t;
    std::vector<VecC> I, b, eps;
    std::vector<VecC> ac_tail;  // -int_{|s|>=cut} e^{-its} m(s)/s ds, the oscillating part of eps
};

// I(t) = <(1 - e^{-its})/s, nu> = I_inf + b(t) + eps(t), where b carries the
// atoms (b(t) = -sum w_j e^{-i t s_j}/s_j) and eps -> 0 collects the
// absolutely continuous remainder.
inline DecompositionResult decompose_oscillating_integral(const SpectralMeasure& nu, const std::vector<double>& times,
                                                          double cut = 0.0, double tol = 1e-10) {
    nu.validate();
    if (cut <= 0.0) {
        cut = nu.atoms.empty() ? std::max(-nu.lo, nu.hi) : 0.5 * nu.gap();
        if (nu.density) cut = std::min(cut, std::min(-nu.lo, nu.hi));
    }
    for (const auto& a : nu.atoms)
        if (std::abs(a.s) <= cut) {
            std::ostringstream os;
            os << "atom at s = " << a.s << " lies inside the excision window [-" << cut << ", " << cut << "]";
            throw AtomTooClose(os.str());
        }

    DecompositionResult res;
    res.cut = cut;
    res.I_inf = VecC::Zero(nu.dim);
    auto component = [&](int c) { return [&nu, c](double s) { return cplx(nu.density(s)[c]); }; };
    if (nu.density)
        for (int c = 0; c < nu.dim; ++c)
            res.I_inf[c] = sokhotski_plemelj({component(c), nu.lo, nu.hi}, std::min(cut, 1e-2 * (nu.hi - nu.lo))).value();
    for (const auto& a : nu.atoms) res.I_inf += a.w / a.s;

    quad::Options opt;
    opt.rel_tol = tol;
    opt.abs_tol = 1e-14;
    for (double t : times) {
        VecC It = VecC::Zero(nu.dim), bt = VecC::Zero(nu.dim), tail = VecC::Zero(nu.dim);
        for (const auto& a : nu.atoms) {
            It += a.w * resonant_kernel(t, a.s);
            bt -= a.w * std::exp(-I * (t * a.s)) / a.s;
        }
        if (nu.density) {
            for (int c = 0; c < nu.dim; ++c) {
                auto m = component(c);
                It[c] += quad::adaptive_panels([&](double s) { return resonant_kernel(t, s) * m(s); },
                                               quad::oscillation_panels(nu.lo, nu.hi, t), opt);
                auto osc = [&](double s) { return -std::exp(-I * (t * s)) * m(s) / s; };
                if (nu.hi > cut) tail[c] += quad::adaptive_panels(osc, quad::oscillation_panels(cut, nu.hi, t), opt);
                if (-nu.lo > cut) tail[c] += quad::adaptive_panels(osc, quad::oscillation_panels(nu.lo, -cut, t), opt);
            }
        }
        res.t.push_back(t);
        res.I.push_back(It);
        res.b.push_back(bt);
        res.eps.push_back(It - res.I_inf - bt);
        res.ac_tail.push_back(tail);
    }
    return res;
}

// Co-area density of f on the level set h = lambda: sum over roots of f(xi)/|h'(xi)|.
inline cplx spectral_density(const std::function<double(double)>& h, const ForcingProfile& f, double lambda,
                             std::function<double(double)> dh = {}) {
    if (!dh)
        dh = [&h](double x) {
            const double e = 1e-6 * std::max(1.0, std::abs(x));
            return (h(x + e) - h(x - e)) / (2 * e);
        };
    auto g = [&](double x) { return h(x) - lambda; };
    cplx total = 0.0;
    const int n = f.n_points | 1;
    double a = -f.xi_max, ga = g(a);
    auto add_root = [&](double x) {
        const double d = std::abs(dh(x));
        if (d < 1e-8) {
            std::ostringstream os;
            os << "|h'| = " << d << " at the root xi = " << x;
            throw DegenerateLevel(os.str());
        }
        total += f(x) / d;
    };
    if (ga == 0.0) add_root(a);
    for (int i = 1; i < n; ++i) {
        const double b = -f.xi_max + 2.0 * f.xi_max * i / (n - 1), gb = g(b);
        if (gb == 0.0) {
            add_root(b);
        } else if (ga * gb < 0.0) {
            std::uintmax_t iters = 200;
            auto tol = [](double l, double r) { return std::abs(r - l) < 1e-15 * std::max(1.0, std::abs(l)); };
            auto [l, r] = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, iters);
            add_root(0.5 * (l + r));
        }
        a = b;
        ga = gb;
    }
    return total;
}

}  // namespace degzero::quasires
