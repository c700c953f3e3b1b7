#pragma once
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace degzero::torus {

using cplx = std::complex<double>;

template <int D>
using Lattice = std::array<int, D>;
template <int D>
using RVec = std::array<double, D>;

template <int D>
double norm(const Lattice<D>& n) {
    double s = 0.0;
    for (int v : n) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

template <int D>
bool is_zero(const Lattice<D>& n) {
    for (int v : n)
        if (v != 0) return false;
    return true;
}

inline constexpr double resonance_tol = 1e-14;

// Degree-0 function on R^d \ 0 evaluated at lattice points. Constructors
// evaluate in integer arithmetic where they can, so rational resonances
// come out as exact zeros.
template <int D>
struct LatticeSymbol {
    static_assert(D >= 1 && D <= 3, "lattice dimension is capped at 3");
    std::function<double(const RVec<D>&)> f;

    double operator()(const Lattice<D>& n) const {
        if (is_zero<D>(n)) throw DomainError("lattice symbol is undefined at n = 0");
        RVec<D> x{};
        for (int i = 0; i < D; ++i) x[i] = n[i];
        return f(x);
    }

    // Gradient of the degree-0 function at the unit vector u.
    RVec<D> gradient(const RVec<D>& u, double h = 1e-6) const {
        RVec<D> g{};
        for (int i = 0; i < D; ++i) {
            RVec<D> a = u, b = u;
            a[i] += h;
            b[i] -= h;
            g[i] = (f(a) - f(b)) / (2 * h);
        }
        return g;
    }

    // h(n) = Y.n / |n|
    static LatticeSymbol linear(const RVec<D>& Y) {
        return {[Y](const RVec<D>& x) {
            double dot = 0.0, r = 0.0;
            for (int i = 0; i < D; ++i) {
                dot += Y[i] * x[i];
                r += x[i] * x[i];
            }
            return dot / std::sqrt(r);
        }};
    }
};

template <int D>
class ModeSet {
public:
    using Map = std::map<Lattice<D>, cplx>;

    ModeSet() = default;
    explicit ModeSet(Map m) {
        for (const auto& [n, a] : m) set(n, a);
    }

    void set(const Lattice<D>& n, cplx a) {
        if (is_zero<D>(n)) {
            if (a != cplx(0.0)) throw DomainError("mode sets carry a_0 = 0");
            return;
        }
        modes_[n] = a;
    }
    cplx get(const Lattice<D>& n) const {
        auto it = modes_.find(n);
        return it == modes_.end() ? cplx(0.0) : it->second;
    }
    const Map& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }

    double norm2() const {
        double s = 0.0;
        for (const auto& [n, a] : modes_) s += std::norm(a);
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }
    double sobolev2(double s) const {
        double acc = 0.0;
        for (const auto& [n, a] : modes_) acc += std::norm(a) * std::pow(degzero::torus::norm<D>(n), 2 * s);
        return acc;
    }
    cplx inner(const ModeSet& o) const {
        cplx acc = 0.0;
        for (const auto& [n, a] : modes_) acc += a * std::conj(o.get(n));
        return acc;
    }

    ModeSet operator+(const ModeSet& o) const {
        ModeSet r = *this;
        for (const auto& [n, a] : o.modes_) r.modes_[n] += a;
        return r;
    }
    ModeSet operator-(const ModeSet& o) const { return *this + o * cplx(-1.0); }
    ModeSet operator*(cplx c) const {
        ModeSet r = *this;
        for (auto& [n, a] : r.modes_) a *= c;
        return r;
    }

private:
    Map modes_;
};

// Solution of (1/i) du/dt + H u = f, u(0) = 0, mode by mode:
// a_n (1 - e^{-i t h(n)}) / h(n), or i t a_n on the kernel.
template <int D>
ModeSet<D> evolve_forced(const LatticeSymbol<D>& h, const ModeSet<D>& f, double t) {
    ModeSet<D> u;
    for (const auto& [n, a] : f.modes()) {
        const double hn = h(n);
        if (std::abs(hn) <= resonance_tol) u.set(n, cplx(0.0, t) * a);
        else u.set(n, a * (1.0 - std::exp(cplx(0.0, -t * hn))) / hn);
    }
    return u;
}

template <int D>
ModeSet<D> kernel_projection(const LatticeSymbol<D>& h, const ModeSet<D>& f) {
    ModeSet<D> p;
    for (const auto& [n, a] : f.modes())
        if (std::abs(h(n)) <= resonance_tol) p.set(n, a);
    return p;
}

// Visit every n with 0 < |n| <= R in lexicographic order.
template <int D, class F>
void for_each_in_ball(double R, F&& visit) {
    const int m = static_cast<int>(std::floor(R));
    const double R2 = R * R;
    Lattice<D> n{};
    for (int i = 0; i < D; ++i) n[i] = -m;
    while (true) {
        double r2 = 0.0;
        for (int v : n) r2 += static_cast<double>(v) * v;
        if (r2 > 0.0 && r2 <= R2) visit(n, std::sqrt(r2));
        int i = D - 1;
        while (i >= 0 && n[i] == m) n[i--] = -m;
        if (i < 0) break;
        ++n[i];
    }
}

template <int D>
struct DiophantineStats {
    double n_max = 0;
    std::vector<double> alpha_grid, h_min, h_min_2N;
    std::vector<double> beta_grid, Y_min, Y_min_2N;
    std::optional<double> alpha_star, beta_star;  // smallest stabilized exponents
    Lattice<D> h_argmin{}, Y_argmin{};
};

inline std::vector<double> exponent_grid(double lo = 0.0, double hi = 4.0, double step = 0.25) {
    std::vector<double> g;
    for (int i = 0; lo + step * i <= hi + 1e-12; ++i) g.push_back(lo + step * i);
    return g;
}

// Minima of |h(n)| |n|^alpha and |Y.n| |n|^beta over the balls of radius N
// and 2N; an exponent counts as stabilized once the minimum moves by less
// than 10% between the two radii.
template <int D>
DiophantineStats<D> diophantine_stats(const LatticeSymbol<D>& h, const RVec<D>& Y, double N,
                                      std::vector<double> alpha_grid = exponent_grid(),
                                      std::vector<double> beta_grid = exponent_grid()) {
    if (!(N >= 1.0)) throw DomainError("diophantine_stats needs N >= 1");
    DiophantineStats<D> st;
    st.n_max = N;
    st.alpha_grid = alpha_grid;
    st.beta_grid = beta_grid;
    const double inf = std::numeric_limits<double>::infinity();
    // Work with logarithms; an exact zero is -inf and pins the minimum to 0.
    std::vector<double> la(alpha_grid.size(), inf), la2(alpha_grid.size(), inf);
    std::vector<double> lb(beta_grid.size(), inf), lb2(beta_grid.size(), inf);
    double best_h = inf, best_Y = inf;
    for_each_in_ball<D>(2.0 * N, [&](const Lattice<D>& n, double r) {
        double yn = 0.0;
        for (int i = 0; i < D; ++i) yn += Y[i] * n[i];
        const double hn = std::abs(h(n));
        const double lr = std::log(r), lh = std::log(hn), ly = std::log(std::abs(yn));
        const bool inner = r <= N;
        for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
            const double v = lh + alpha_grid[k] * lr;
            if (v < la2[k]) la2[k] = v;
            if (inner && v < la[k]) la[k] = v;
        }
        for (std::size_t k = 0; k < beta_grid.size(); ++k) {
            const double v = ly + beta_grid[k] * lr;
            if (v < lb2[k]) lb2[k] = v;
            if (inner && v < lb[k]) lb[k] = v;
        }
        if (inner && hn < best_h) {
            best_h = hn;
            st.h_argmin = n;
        }
        if (inner && std::abs(yn) < best_Y) {
            best_Y = std::abs(yn);
            st.Y_argmin = n;
        }
    });
    auto expo = [](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i]);
        return out;
    };
    st.h_min = expo(la);
    st.h_min_2N = expo(la2);
    st.Y_min = expo(lb);
    st.Y_min_2N = expo(lb2);
    auto stabilized = [](const std::vector<double>& grid, const std::vector<double>& a, const std::vector<double>& b) -> std::optional<double> {
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (a[k] > 0.0 && std::abs(b[k] - a[k]) < 0.1 * a[k]) return grid[k];
        return std::nullopt;
    };
    st.alpha_star = stabilized(alpha_grid, st.h_min, st.h_min_2N);
    st.beta_star = stabilized(beta_grid, st.Y_min, st.Y_min_2N);
    return st;
}

template <int D>
struct SmallDenominatorRecord {
    double gradient_norm = 0;
    double empirical_constant = std::numeric_limits<double>::infinity();  // min |h(n)| |n| / (|h'(n0)| |n0|)
    std::size_t violations = 0;
    std::size_t scanned = 0;
    std::size_t excluded = 0;  // lattice points with h(n) = 0
    std::optional<Lattice<D>> first_violation;
};

// Checks |h(n)| >= (1/2) |h'(n0)| |n0| / |n| whenever h(n) != 0.
template <int D>
SmallDenominatorRecord<D> small_denominator_bound(const LatticeSymbol<D>& h, const Lattice<D>& n0, double N) {
    if (std::abs(h(n0)) > resonance_tol) throw DomainError("n0 must be a resonant lattice point (h(n0) = 0)");
    const double r0 = norm<D>(n0);
    RVec<D> u{};
    for (int i = 0; i < D; ++i) u[i] = n0[i] / r0;
    const auto g = h.gradient(u);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    gn = std::sqrt(gn);
    if (gn < 1e-12) throw DegenerateResonance("gradient of h vanishes at n0/|n0|");
    SmallDenominatorRecord<D> rec;
    rec.gradient_norm = gn;
    const double scale = gn * r0;
    for_each_in_ball<D>(N, [&](const Lattice<D>& n, double r) {
        const double hn = std::abs(h(n));
        if (hn <= resonance_tol) {
            ++rec.excluded;
            return;
        }
        ++rec.scanned;
        const double c = hn * r / scale;
        rec.empirical_constant = std::min(rec.empirical_constant, c);
        if (c < 0.5) {
            ++rec.violations;
            if (!rec.first_violation) rec.first_violation = n;
        }
    });
    return rec;
}

}  // namespace degzero::torus
