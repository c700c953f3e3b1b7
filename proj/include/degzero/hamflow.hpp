#pragma once
#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "ode.hpp"

namespace degzero::hamflow {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;

struct PhasePoint {
    Vec2 x = Vec2::Zero();
    Vec2 p = Vec2::UnitX();

    static PhasePoint from(const Vec4& v) { return {v.head<2>(), v.tail<2>()}; }
    Vec4 packed() const {
        Vec4 v;
        v << x, p;
        return v;
    }
};

struct Gradient {
    Vec2 dx = Vec2::Zero();
    Vec2 dp = Vec2::Zero();
};

class Symbol {
public:
    using Value = std::function<double(const PhasePoint&)>;
    using Grad = std::function<Gradient(const PhasePoint&)>;

    Symbol(Value value, int degree, Grad grad = {}) : value_(std::move(value)), grad_(std::move(grad)), degree_(degree) {}

    double operator()(const PhasePoint& z) const {
        if (!(z.p.norm() > 0.0)) throw DomainError("symbol evaluated at p = 0");
        return value_(z);
    }

    Gradient gradient(const PhasePoint& z) const {
        if (!(z.p.norm() > 0.0)) throw DomainError("symbol gradient at p = 0");
        if (grad_) return grad_(z);
        return central_difference(z);
    }

    // Relative step 1e-6 of the local scale, used when no analytic gradient is registered.
    Gradient central_difference(const PhasePoint& z) const {
        Gradient g;
        const double hx = 1e-6 * std::max(1.0, z.x.norm()), hp = 1e-6 * z.p.norm();
        for (int i = 0; i < 2; ++i) {
            PhasePoint a = z, b = z;
            a.x[i] += hx;
            b.x[i] -= hx;
            g.dx[i] = (value_(a) - value_(b)) / (2 * hx);
            a = z;
            b = z;
            a.p[i] += hp;
            b.p[i] -= hp;
            g.dp[i] = (value_(a) - value_(b)) / (2 * hp);
        }
        return g;
    }

    int degree() const { return degree_; }
    bool has_analytic_gradient() const { return static_cast<bool>(grad_); }

private:
    Value value_;
    Grad grad_;
    int degree_;
};

// {f,g} = dp f . dx g - dx f . dp g, so that dg/dt = {h,g} along the flow of h.
inline double poisson_bracket(const Symbol& f, const Symbol& g, const PhasePoint& z) {
    const Gradient a = f.gradient(z), b = g.gradient(z);
    return a.dp.dot(b.dx) - a.dx.dot(b.dp);
}

// Largest deviation of h(x, s p) from s^degree h(x, p) over s in {2, 10, 100}.
inline double homogeneity_defect(const Symbol& h, const PhasePoint& z) {
    double worst = 0.0;
    const double base = h(z);
    for (double s : {2.0, 10.0, 100.0}) {
        PhasePoint w = z;
        w.p *= s;
        worst = std::max(worst, std::abs(h(w) - std::pow(s, h.degree()) * base));
    }
    return worst;
}

// 2D internal waves: h = N |p1| / |p|.
inline Symbol internal_wave_symbol(double N) {
    if (!(N > 0.0)) throw DomainError("buoyancy frequency must be positive");
    return Symbol(
        [N](const PhasePoint& z) { return N * std::abs(z.p[0]) / z.p.norm(); }, 0,
        [N](const PhasePoint& z) {
            const double r = z.p.norm(), r3 = r * r * r;
            const double s1 = z.p[0] >= 0 ? 1.0 : -1.0;
            Gradient g;
            g.dp[0] = N * s1 * z.p[1] * z.p[1] / r3;
            g.dp[1] = -N * std::abs(z.p[0]) * z.p[1] / r3;
            return g;
        });
}

// h0 = xi/eta - lambda y, coordinates x = (x, y), p = (xi, eta).
inline Symbol toy_symbol(double lambda) {
    return Symbol(
        [lambda](const PhasePoint& z) { return z.p[0] / z.p[1] - lambda * z.x[1]; }, 0,
        [lambda](const PhasePoint& z) {
            Gradient g;
            g.dx[1] = -lambda;
            g.dp[0] = 1.0 / z.p[1];
            g.dp[1] = -z.p[0] / (z.p[1] * z.p[1]);
            return g;
        });
}

// Global cylinder model h = xi/eta - lambda sin y: a stable cycle at y = 0
// and an unstable one at y = pi for lambda > 0.
inline Symbol cylinder_symbol(double lambda) {
    return Symbol(
        [lambda](const PhasePoint& z) { return z.p[0] / z.p[1] - lambda * std::sin(z.x[1]); }, 0,
        [lambda](const PhasePoint& z) {
            Gradient g;
            g.dx[1] = -lambda * std::cos(z.x[1]);
            g.dp[0] = 1.0 / z.p[1];
            g.dp[1] = -z.p[0] / (z.p[1] * z.p[1]);
            return g;
        });
}

// m(x) * h for a positive degree-0 multiplier depending on position only.
inline Symbol multiplied(const Symbol& h, std::function<double(const Vec2&)> m, std::function<Vec2(const Vec2&)> dm) {
    return Symbol(
        [h, m](const PhasePoint& z) { return m(z.x) * h(z); }, h.degree(),
        [h, m, dm](const PhasePoint& z) {
            const Gradient g = h.gradient(z);
            const double mv = m(z.x), hv = h(z);
            Gradient out;
            out.dx = mv * g.dx + hv * dm(z.x);
            out.dp = mv * g.dp;
            return out;
        });
}

inline Symbol zero_symbol(int degree) {
    return Symbol([](const PhasePoint&) { return 0.0; }, degree, [](const PhasePoint&) { return Gradient{}; });
}

struct Trajectory {
    std::vector<double> t;
    std::vector<PhasePoint> z;
};

inline Trajectory flow_integrate(const Symbol& h, const PhasePoint& z0, double t_end, double dt, long sample_every = 1) {
    if (!(dt > 0.0)) throw DomainError("flow_integrate needs dt > 0");
    if (!(t_end >= 0.0)) throw DomainError("flow_integrate needs t_end >= 0");
    auto rhs = [&h](double, const Vec4& v) {
        const Gradient g = h.gradient(PhasePoint::from(v));
        Vec4 d;
        d << g.dp, -g.dx;
        return d;
    };
    const long steps = std::lround(t_end / dt);
    Rk4<Vec4> rk(z0.packed());
    Trajectory tr;
    tr.t.push_back(0.0);
    tr.z.push_back(z0);
    for (long i = 1; i <= steps; ++i) {
        rk.step(rhs, dt);
        const double pn = rk.state().tail<2>().norm();
        if (!(pn >= 1e-8 && pn <= 1e12)) {
            std::ostringstream os;
            os << "|p| = " << pn << " left [1e-8, 1e12] at t = " << i * dt;
            throw NumericalFailure(os.str());
        }
        if (i % sample_every == 0 || i == steps) {
            tr.t.push_back(rk.time(dt));
            tr.z.push_back(PhasePoint::from(rk.state()));
        }
    }
    return tr;
}

// Exact toy dynamics. The Poincare section x = 0 returns after one turn
// of length `period`; with period 1 one turn is (y, eta) -> (e^{-l} y, e^{l} eta).
struct ToyModel {
    double lambda = 1.0;
    double period = 1.0;

    struct State {
        double x = 0, y = 0, xi = 0, eta = 1;
    };

    double energy(const State& s) const { return s.xi / s.eta - lambda * s.y; }

    State flow(const State& s0, double t) const {
        if (lambda == 0.0) throw DomainError("toy model needs lambda != 0");
        const double growth = 1.0 + lambda * t / s0.eta;
        if (!(growth > 0.0)) throw DomainError("toy flow leaves eta > 0 (1 + lambda t / eta0 <= 0)");
        const double c = energy(s0);
        State s = s0;
        s.eta = s0.eta + lambda * t;
        s.x = s0.x + std::log1p(lambda * t / s0.eta) / lambda;
        s.y = (s0.xi / s.eta - c) / lambda;
        return s;
    }

    double wrap_x(double x) const { return x - period * std::floor(x / period); }

    // Time needed for x to advance by one period.
    double turn_time(const State& s0) const { return s0.eta * std::expm1(lambda * period) / lambda; }

    std::pair<double, double> poincare(double y, double eta) const {
        if (!(eta > 0.0)) throw DomainError("toy Poincare map needs eta > 0");
        return {std::exp(-lambda * period) * y, std::exp(lambda * period) * eta};
    }
};

// Bump profile: phi = 1 on |y| <= k, decreasing in |y|, zero beyond k + w.
struct Bump {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double plateau = 1.0;
    double support = 2.0;

    double operator()(double y) const { return value(y); }

    // exp(1 - 1/(1 - u^2)) with u = (|y| - k)/w on the taper.
    static Bump taper(double k, double w) {
        if (!(k > 0.0) || !(w > 0.0)) throw InvalidBump("plateau and taper widths must be positive");
        Bump b;
        b.plateau = k;
        b.support = k + w;
        b.value = [k, w](double y) {
            const double u = (std::abs(y) - k) / w;
            if (u <= 0.0) return 1.0;
            if (u >= 1.0) return 0.0;
            return std::exp(1.0 - 1.0 / (1.0 - u * u));
        };
        b.derivative = [k, w](double y) {
            const double u = (std::abs(y) - k) / w;
            if (u <= 0.0 || u >= 1.0) return 0.0;
            const double q = 1.0 - u * u;
            const double dphi_du = std::exp(1.0 - 1.0 / q) * (-2.0 * u / (q * q));
            return dphi_du / w * (y >= 0 ? 1.0 : -1.0);
        };
        return b;
    }
};

inline void validate_bump(const Bump& b, int grid = 2001) {
    const double R = 1.5 * b.support;
    for (int i = 0; i < grid; ++i) {
        const double y = -R + 2 * R * i / (grid - 1);
        const double v = b(y), dv = b.derivative(y);
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidBump("bump leaves [0,1]");
        if (y * dv > 1e-14) {
            std::ostringstream os;
            os << "y phi'(y) = " << y * dv << " > 0 at y = " << y;
            throw InvalidBump(os.str());
        }
    }
    if (std::abs(b(0.0) - 1.0) > 1e-15) throw InvalidBump("bump must equal 1 on the plateau");
}

// Canonical lift of the cycle coordinate: Y = g(y), eta -> eta / g'(y).
struct Chart {
    enum class Kind { identity, half_angle } kind = Kind::identity;
    double center = 0.0;

    static double wrap_pi(double a) { return a - 2 * M_PI * std::floor((a + M_PI) / (2 * M_PI)); }

    double g(double y) const {
        if (kind == Kind::identity) return y - center;
        const double u = wrap_pi(y - center);
        if (std::abs(u) >= M_PI * (1 - 1e-15)) return std::numeric_limits<double>::infinity();
        return std::tan(0.5 * u);
    }
    double dg(double y) const {
        if (kind == Kind::identity) return 1.0;
        const double Y = g(y);
        return 0.5 * (1.0 + Y * Y);
    }
    // Phi^2 = 1/g' is the multiplier relating the global symbol to the chart toy model.
    double phi2(double y) const { return std::isfinite(g(y)) ? 1.0 / dg(y) : 0.0; }
};

struct EscapePiece {
    double lambda;  // signed: negative for an unstable cycle
    Bump bump;
    Chart chart;
};

class EscapeField {
public:
    explicit EscapeField(std::vector<EscapePiece> pieces, std::function<double(const Vec2&)> multiplier2 = {})
        : pieces_(std::move(pieces)), mult2_(std::move(multiplier2)) {
        for (const auto& pc : pieces_) {
            if (pc.lambda == 0.0) throw DomainError("escape piece needs lambda != 0");
            validate_bump(pc.bump);
        }
    }

    double value(const PhasePoint& z) const {
        double d = 0.0;
        for (const auto& pc : pieces_) {
            const double Y = pc.chart.g(z.x[1]);
            if (!std::isfinite(Y)) continue;
            d += pc.lambda * z.p[1] * pc.bump(Y) / pc.chart.dg(z.x[1]);
        }
        return d;
    }

    Gradient gradient(const PhasePoint& z) const {
        Gradient g;
        for (const auto& pc : pieces_) {
            const double Y = pc.chart.g(z.x[1]);
            if (!std::isfinite(Y)) continue;
            const double gp = pc.chart.dg(z.x[1]);
            const double phi = pc.bump(Y), dphi = pc.bump.derivative(Y);
            const double curvature = pc.chart.kind == Chart::Kind::identity ? 0.0 : Y;  // g''/g'
            g.dx[1] += pc.lambda * z.p[1] * (dphi - phi * curvature / gp);
            g.dp[1] += pc.lambda * phi / gp;
        }
        return g;
    }

    Symbol symbol() const {
        auto self = *this;
        return Symbol([self](const PhasePoint& z) { return self.value(z); }, 1,
                      [self](const PhasePoint& z) { return self.gradient(z); });
    }

    // The bracket each piece contributes on the energy shell:
    // lambda^2 Phi^2 (phi - Y phi') with Phi^2 from the chart and the optional multiplier.
    double shell_bracket_formula(const PhasePoint& z) const {
        double total = 0.0;
        const double m2 = mult2_ ? mult2_(z.x) : 1.0;
        for (const auto& pc : pieces_) {
            const double Y = pc.chart.g(z.x[1]);
            if (!std::isfinite(Y)) continue;
            total += pc.lambda * pc.lambda * m2 * pc.chart.phi2(z.x[1]) * (pc.bump(Y) - Y * pc.bump.derivative(Y));
        }
        return total;
    }

    const std::vector<EscapePiece>& pieces() const { return pieces_; }

private:
    std::vector<EscapePiece> pieces_;
    std::function<double(const Vec2&)> mult2_;
};

// d = lambda eta phi(y) around the cycle y = 0 of h0.
inline EscapeField local_escape(double lambda, double k, std::optional<Bump> bump = std::nullopt,
                                std::function<double(const Vec2&)> multiplier2 = {}) {
    if (lambda == 0.0) throw DomainError("local_escape needs lambda != 0");
    return EscapeField({{lambda, bump ? *bump : Bump::taper(k, k), Chart{}}}, std::move(multiplier2));
}

// Stable piece at y = 0 and unstable piece at y = pi for h = xi/eta - lambda sin y.
inline EscapeField cylinder_escape(double lambda, double k) {
    const Bump b = Bump::taper(k, k);
    return EscapeField({{lambda, b, {Chart::Kind::half_angle, 0.0}}, {-lambda, b, {Chart::Kind::half_angle, M_PI}}});
}

// Points of the shell h = omega0 with |p| = 1 above each position, found
// by scanning the angle of p over (theta_lo, theta_hi) and refining each
// sign change with TOMS 748.
inline std::vector<PhasePoint> sample_shell(const Symbol& h, double omega0, const std::vector<Vec2>& positions,
                                            double theta_lo = 1e-6, double theta_hi = M_PI - 1e-6, int scan = 256) {
    std::vector<PhasePoint> out;
    for (const Vec2& x : positions) {
        auto f = [&](double th) { return h({x, Vec2(std::cos(th), std::sin(th))}) - omega0; };
        double a = theta_lo, fa = f(a);
        for (int i = 1; i <= scan; ++i) {
            const double b = theta_lo + (theta_hi - theta_lo) * i / scan, fb = f(b);
            if (fa == 0.0) {
                out.push_back({x, Vec2(std::cos(a), std::sin(a))});
            } else if (fa * fb < 0.0) {
                std::uintmax_t iters = 200;
                auto tol = [](double l, double r) { return std::abs(r - l) < 1e-15; };
                auto [l, r] = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
                const double th = std::abs(f(l)) < std::abs(f(r)) ? l : r;
                PhasePoint z{x, Vec2(std::cos(th), std::sin(th))};
                if (std::abs(h(z) - omega0) <= 1e-10) out.push_back(z);
            }
            a = b;
            fa = fb;
        }
    }
    return out;
}

struct PositivityReport {
    double min_bracket = std::numeric_limits<double>::infinity();
    PhasePoint argmin;
    std::size_t n_samples = 0;
    bool positive = false;
};

inline PositivityReport escape_positivity(const Symbol& h, const Symbol& d, const std::vector<PhasePoint>& shell) {
    if (shell.empty()) throw EmptyShell("no shell samples");
    PositivityReport r;
    for (const auto& z : shell) {
        const double b = poisson_bracket(h, d, z);
        if (b < r.min_bracket) {
            r.min_bracket = b;
            r.argmin = z;
        }
    }
    r.n_samples = shell.size();
    r.positive = r.min_bracket > 0.0;
    return r;
}

}  // namespace degzero::hamflow
