#pragma once
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace degzero::profile {

using cplx = std::complex<double>;
inline const cplx I{0.0, 1.0};

// Lanczos approximation, g = 7 with nine coefficients, reflected for Re z < 1/2.
inline cplx complex_gamma(cplx z) {
    static constexpr std::array<double, 9> c{0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                             771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                             -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.real() < 0.5) return M_PI / (std::sin(M_PI * z) * complex_gamma(1.0 - z));
    z -= 1.0;
    cplx x = c[0];
    for (int i = 1; i < 9; ++i) x += c[i] / (z + static_cast<double>(i));
    const cplx t = z + 7.5;
    return std::sqrt(2.0 * M_PI) * std::exp((z + 0.5) * std::log(t) - t) * x;
}

// |Gamma(1 - i alpha)| = sqrt(pi alpha / sinh(pi alpha)), written so that
// large |alpha| does not overflow.
inline double gamma_magnitude(double alpha) {
    const double a = std::abs(alpha);
    if (a < 1e-8) return 1.0 - M_PI * M_PI * a * a / 12.0;
    return std::exp(-0.5 * M_PI * a) * std::sqrt(2.0 * M_PI * a / -std::expm1(-2.0 * M_PI * a));
}

// Prefactor of the transform of (y + i0)^{-1 + i alpha}: -2 pi i e^{-alpha pi/2} / Gamma(1 - i alpha).
inline cplx gamma_prefactor(double alpha) {
    return -2.0 * M_PI * I * std::exp(-alpha * M_PI / 2.0) / complex_gamma(cplx(1.0, -alpha));
}

// (y + i eps)^{-1 + i alpha}, principal branch
inline cplx regularized_power(double alpha, double y, double eps) {
    return std::exp(cplx(-1.0, alpha) * std::log(cplx(y, eps)));
}

// eta^{-i alpha} for eta > 0, zero for eta < 0
inline cplx eta_phase(double alpha, double eta) {
    if (eta <= 0.0) return 0.0;
    return std::exp(cplx(0.0, -alpha * std::log(eta)));
}

inline double local_l2_norm2(double alpha, double eps) {
    // |(y + i eps)^{-1+i alpha}|^2 = e^{-2 alpha arg(y + i eps)} / (y^2 + eps^2)
    auto f = [&](double y) { return std::exp(-2.0 * alpha * std::atan2(eps, y)) / (y * y + eps * eps); };
    std::vector<double> all{-1.0, 0.0, 1.0};
    for (double s = eps / 16; s < 1.0; s *= 2.0) {
        all.push_back(s);
        all.push_back(-s);
    }
    std::sort(all.begin(), all.end());
    return quad::adaptive_panels(f, all, {1e-10, 1e-300, 15});
}

struct FourierSample {
    double eta = 0;
    std::vector<cplx> by_eps;  // transform at each regularization
    cplx limit;                // Richardson extrapolation to eps = 0
    cplx closed_form;          // gamma_alpha eta_+^{-i alpha}
    double rel_error = 0;
};

struct FourierConfig {
    double inner = 40.0;          // [-A, A] handled by Gauss-Kronrod
    double quad_tol = 1e-10;
    double extrapolation_tol = 1e-2;  // relative disagreement of the last two Richardson stages
};

namespace detail {

// int e^{-i y eta} (y + i eps)^{-1+i alpha} dy over the real line.
inline cplx transform_regularized(double alpha, double eta, double eps, const FourierConfig& cfg) {
    if (eta == 0.0) throw DomainError("transform is evaluated at eta != 0");
    const double A = cfg.inner;
    auto u = [&](double y) { return regularized_power(alpha, y, eps) * std::exp(cplx(0.0, -y * eta)); };
    std::vector<double> pts = quad::oscillation_panels(-A, A, std::abs(eta), 2.0);
    for (double s = eps / 16; s < A; s *= 2.0) {
        pts.push_back(s);
        pts.push_back(-s);
    }
    pts.push_back(0.0);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    quad::Options opt{cfg.quad_tol, 1e-14, 20};
    cplx inner = quad::adaptive_panels(u, pts, opt);

    // Tails: int_0^inf g(t) e^{-i s t eta} dt with g(t) = (+-A + ... + i eps)^{-1+i alpha}.
    boost::math::quadrature::ooura_fourier_sin<double> osin(1e-10);
    boost::math::quadrature::ooura_fourier_cos<double> ocos(1e-10);
    const double w = std::abs(eta);
    auto tail = [&](double sign) {
        // y = sign (A + t); e^{-i y eta} = e^{-i sign A eta} e^{-i sign eta t}
        const double s = sign * (eta > 0 ? 1.0 : -1.0);  // e^{-i s w t}
        auto re = [&](double t) { return regularized_power(alpha, sign * (A + t), eps).real(); };
        auto im = [&](double t) { return regularized_power(alpha, sign * (A + t), eps).imag(); };
        const double cr = ocos.integrate(re, w).first, sr = osin.integrate(re, w).first;
        const double ci = ocos.integrate(im, w).first, si = osin.integrate(im, w).first;
        // (re + i im)(cos - i s sin)
        const cplx val = cplx(cr + s * si, ci - s * sr);
        return std::exp(cplx(0.0, -sign * A * eta)) * val;
    };
    return inner + tail(1.0) + tail(-1.0);
}

}  // namespace detail

// Transform of (y + i eps)^{-1+i alpha} for each eps, Richardson-extrapolated
// (two stages) to eps = 0 and compared with the closed form.
inline std::vector<FourierSample> ft_power_law(double alpha, const std::vector<double>& eta_grid,
                                               const std::vector<double>& eps_sequence, const FourierConfig& cfg = {}) {
    if (eps_sequence.size() < 3) throw DomainError("ft_power_law needs at least three regularization values");
    for (std::size_t i = 0; i < eps_sequence.size(); ++i) {
        if (!(eps_sequence[i] > 0.0)) throw DomainError("regularization values must be positive");
        if (i > 0 && !(eps_sequence[i] < eps_sequence[i - 1])) throw DomainError("regularization values must decrease");
    }
    const cplx gamma = gamma_prefactor(alpha);
    std::vector<FourierSample> out;
    for (double eta : eta_grid) {
        FourierSample s;
        s.eta = eta;
        for (double e : eps_sequence) s.by_eps.push_back(detail::transform_regularized(alpha, eta, e, cfg));
        // Neville tableau in eps for F(eps) = F0 + c1 eps + c2 eps^2 + ...
        std::vector<cplx> row = s.by_eps, last_stage;
        for (int stage = 1; stage <= 2; ++stage) {
            std::vector<cplx> next;
            for (std::size_t i = 0; i + 1 < row.size(); ++i) {
                const double r = eps_sequence[i] / eps_sequence[i + stage];
                next.push_back((r * row[i + 1] - row[i]) / (r - 1.0));
            }
            last_stage = row;
            row = next;
        }
        s.limit = row.back();
        const double drift = std::abs(s.limit - last_stage.back());
        if (drift > cfg.extrapolation_tol * std::max(std::abs(s.limit), std::abs(gamma))) {
            std::ostringstream os;
            os << "extrapolated transform at eta = " << eta << " moves by " << drift << " between stages";
            throw ExtrapolationUnstable(os.str());
        }
        s.closed_form = gamma * eta_phase(alpha, eta);
        const double denom = std::abs(s.closed_form);
        s.rel_error = denom > 0 ? std::abs(s.limit - s.closed_form) / denom : std::abs(s.limit);
        out.push_back(std::move(s));
    }
    return out;
}

// lambda plus a finitely supported k -> v_k
struct ProfileCoefficients {
    double lambda = 1.0;
    std::map<int, cplx> v;

    void validate() const {
        if (lambda == 0.0) throw DomainError("profile coefficients need lambda != 0");
        if (v.empty()) throw DomainError("profile coefficients are empty");
    }
};

// One term v_k (y + i eps)^{-1+ik/lambda} e^{ikx}.
struct ModeProfile {
    double lambda = 1.0;
    int k = 0;
    cplx v = 1.0;

    double alpha() const { return k / lambda; }
    cplx at(double x, double y, double eps) const {
        return v * regularized_power(alpha(), y, eps) * std::exp(cplx(0.0, k * x));
    }
    cplx eta_rep(double x, double eta) const {
        return gamma_prefactor(alpha()) * v * eta_phase(alpha(), eta) * std::exp(cplx(0.0, k * x));
    }
};

struct GrowthVerdict {
    bool admissible = true;
    double m = 0;  // fitted polynomial degree
    double C = 0;
    double exp_rate = 0;  // exponential rate of the worse side when it wins the fit
    std::string reason;
};

// Tests whether w_k = |v_k| e^{pi (k/lambda)_-} is bounded by C (1+|k|)^m.
// Each side of k is fitted both as a power of (1+|k|) and as an exponential
// in |k|; an exponential that fits better with positive rate fails the test.
inline GrowthVerdict growth_check(const ProfileCoefficients& c) {
    c.validate();
    auto weight = [&](int k, cplx v) {
        const double a = k / c.lambda;
        return std::abs(v) * std::exp(M_PI * std::max(0.0, -a));
    };
    GrowthVerdict out;
    double m = 0.0;
    for (int side : {1, -1}) {
        std::vector<double> lk, kk, lw;
        for (const auto& [k, v] : c.v) {
            if (k * side <= 0) continue;
            const double w = weight(k, v);
            if (!(w > 0.0)) continue;
            lk.push_back(std::log1p(std::abs(k)));
            kk.push_back(std::abs(k));
            lw.push_back(std::log(w));
        }
        if (lw.size() < 3) continue;
        auto fit = [&](const std::vector<double>& x) {
            const double n = static_cast<double>(x.size());
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sx += x[i];
                sy += lw[i];
                sxx += x[i] * x[i];
                sxy += x[i] * lw[i];
            }
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            const double icpt = (sy - slope * sx) / n;
            double ssr = 0;
            for (std::size_t i = 0; i < x.size(); ++i) ssr += std::pow(lw[i] - icpt - slope * x[i], 2);
            return std::pair{slope, ssr};
        };
        const auto [poly_slope, poly_ssr] = fit(lk);
        const auto [exp_slope, exp_ssr] = fit(kk);
        if (exp_slope > 0.0 && exp_ssr < poly_ssr) {
            out.admissible = false;
            out.exp_rate = std::max(out.exp_rate, exp_slope);
            std::ostringstream os;
            os << "weighted coefficients grow exponentially for " << (side > 0 ? "k > 0" : "k < 0") << " (rate " << exp_slope << ")";
            if (!out.reason.empty()) out.reason += "; ";
            out.reason += os.str();
        }
        m = std::max(m, poly_slope);
    }
    out.m = m;
    for (const auto& [k, v] : c.v) out.C = std::max(out.C, weight(k, v) / std::pow(1.0 + std::abs(k), m));
    return out;
}

struct SynthesizedField {
    std::vector<double> x, y;
    std::vector<cplx> u;  // x-major: u[i * y.size() + j]
    cplx at(std::size_t i, std::size_t j) const { return u[i * y.size() + j]; }
};

// sum_k v_k (y + i eps)^{-1+ik/lambda} e^{ikx}
inline SynthesizedField synthesize_uinfty(const ProfileCoefficients& c, const std::vector<double>& x_grid,
                                          const std::vector<double>& y_grid, double eps) {
    c.validate();
    if (!(eps > 0.0)) throw DomainError("synthesis needs eps > 0");
    const auto verdict = growth_check(c);
    if (!verdict.admissible) throw GrowthViolation(verdict.reason);
    SynthesizedField f{x_grid, y_grid, std::vector<cplx>(x_grid.size() * y_grid.size())};
    for (const auto& [k, v] : c.v) {
        const ModeProfile mp{c.lambda, k, v};
        for (std::size_t j = 0; j < y_grid.size(); ++j) {
            const cplx py = v * regularized_power(mp.alpha(), y_grid[j], eps);
            for (std::size_t i = 0; i < x_grid.size(); ++i) f.u[i * y_grid.size() + j] += py * std::exp(cplx(0.0, k * x_grid[i]));
        }
    }
    return f;
}

// sum_k gamma_{k/lambda} v_k eta_+^{-ik/lambda} e^{ikx}
inline cplx eta_representation(const ProfileCoefficients& c, double x, double eta) {
    cplx s = 0.0;
    for (const auto& [k, v] : c.v) s += ModeProfile{c.lambda, k, v}.eta_rep(x, eta);
    return s;
}

}  // namespace degzero::profile
