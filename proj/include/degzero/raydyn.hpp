#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"

namespace degzero::raydyn {

enum class Wall { bottom, top, left, slope };

inline const char* wall_name(Wall w) {
    switch (w) {
        case Wall::bottom: return "bottom";
        case Wall::top: return "top";
        case Wall::left: return "left";
        case Wall::slope: return "slope";
    }
    return "?";
}

struct Point {
    double x1 = 0.0;
    double x3 = 0.0;
};

struct Tolerances {
    double corner = 1e-9;
    double critical = 1e-9;
    double on_wall = 1e-9;
};

// Depth is 1; the vertical wall sits at x1 = 0 and the slope rises from
// (L,0) to (L - cot(alpha), 1).
class TrapeziumDomain {
public:
    TrapeziumDomain(double L, double alpha) : L_(L), alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < M_PI / 2)) throw DomainError("slope angle must lie in (0, pi/2)");
        sin_ = std::sin(alpha);
        cos_ = std::cos(alpha);
        cot_ = cos_ / sin_;
        if (!(L > cot_)) throw DomainError("L must exceed cot(alpha) so that the top edge has positive length");
    }

    // alpha = pi/2 limit: the slope becomes a vertical wall at x1 = L.
    static TrapeziumDomain rectangle(double L) {
        if (!(L > 0.0)) throw DomainError("rectangle length must be positive");
        TrapeziumDomain d;
        d.L_ = L;
        d.alpha_ = M_PI / 2;
        d.sin_ = 1.0;
        d.cos_ = 0.0;
        d.cot_ = 0.0;
        return d;
    }

    double length() const { return L_; }
    double alpha() const { return alpha_; }
    double sin_alpha() const { return sin_; }
    double cos_alpha() const { return cos_; }
    double cot_alpha() const { return cot_; }

    std::array<Point, 4> vertices() const { return {{{0, 0}, {L_, 0}, {L_ - cot_, 1}, {0, 1}}}; }

    // Outward unit normal n and offset c: the domain is {x : n.x <= c} over all walls.
    std::array<double, 2> normal(Wall w) const {
        switch (w) {
            case Wall::bottom: return {0.0, -1.0};
            case Wall::top: return {0.0, 1.0};
            case Wall::left: return {-1.0, 0.0};
            case Wall::slope: return {sin_, cos_};
        }
        return {0, 0};
    }
    double offset(Wall w) const {
        switch (w) {
            case Wall::top: return 1.0;
            case Wall::slope: return L_ * sin_;
            default: return 0.0;
        }
    }
    double signed_distance(Wall w, Point p) const {
        const auto n = normal(w);
        return n[0] * p.x1 + n[1] * p.x3 - offset(w);
    }
    bool strictly_inside(Point p) const {
        for (Wall w : {Wall::bottom, Wall::top, Wall::left, Wall::slope})
            if (!(signed_distance(w, p) < 0.0)) return false;
        return true;
    }
    // Height on the slope as a function of x3 (the lateral boundary graph).
    double slope_x1(double x3) const { return L_ - x3 * cot_; }

private:
    TrapeziumDomain() = default;
    double L_ = 0, alpha_ = 0, sin_ = 0, cos_ = 0, cot_ = 0;
};

struct Direction {
    int sigma1 = 1;
    int sigma3 = 1;
};

struct RayState {
    double x1 = 0.0;
    double x3 = 0.0;
    int sigma1 = 1;
    int sigma3 = 1;
    double phi = 0.0;
    double kappa = 1.0;

    Point position() const { return {x1, x3}; }
    std::array<double, 2> velocity() const { return {sigma1 * std::cos(phi), sigma3 * std::sin(phi)}; }
    // Wavenumber compatible with the group velocity for h = |p1|/|p|:
    // sign(p1) = sigma1, sign(p3) = -sigma3, |p| = kappa.
    std::array<double, 2> wavenumber() const {
        return {kappa * sigma1 * std::sin(phi), -kappa * sigma3 * std::cos(phi)};
    }
};

inline double angle_from_frequency(double omega0, double N) {
    if (!(N > 0.0) || !(omega0 > 0.0) || !(omega0 < N))
        throw DomainError("need 0 < omega0 < N for a propagating direction");
    return std::asin(omega0 / N);
}

// Order: (+,+), (+,-), (-,+), (-,-) in (sign of v1, sign of v3).
inline std::array<std::array<double, 2>, 4> admissible_directions(double omega0, double N) {
    const double phi = angle_from_frequency(omega0, N);
    const double c = std::cos(phi), s = std::sin(phi);
    return {{{c, s}, {c, -s}, {-c, s}, {-c, -s}}};
}

namespace detail {

inline int sgn(double v) { return v >= 0.0 ? 1 : -1; }

// Phase matching: p' = p + mu n with p' on the other characteristic line.
// Lines through the origin: A = span(sin, -cos), B = span(sin, cos).
// Returns the outgoing signs and the new |p'|.
struct Matched {
    Direction out;
    double kappa;
    std::array<double, 2> p_out;
};

inline Matched phase_match(const RayState& s, const std::array<double, 2>& n, double critical_tol) {
    const double c = std::cos(s.phi), si = std::sin(s.phi);
    const auto p = s.wavenumber();
    const bool on_a = s.sigma1 * s.sigma3 > 0;
    const std::array<double, 2> other = on_a ? std::array<double, 2>{c, -si} : std::array<double, 2>{c, si};
    const double denom = other[0] * n[0] + other[1] * n[1];
    if (std::abs(denom) < critical_tol) throw CriticalSlope("wall is parallel to the reflected characteristic");
    const double mu = -(other[0] * p[0] + other[1] * p[1]) / denom;
    const std::array<double, 2> q{p[0] + mu * n[0], p[1] + mu * n[1]};
    return {{sgn(q[0]), -sgn(q[1])}, std::hypot(q[0], q[1]), q};
}

}  // namespace detail

inline RayState reflect(const RayState& state, Wall wall, const TrapeziumDomain& dom, const Tolerances& tol = {}) {
    const Point x = state.position();
    if (std::abs(dom.signed_distance(wall, x)) > tol.on_wall) {
        std::ostringstream os;
        os << "point (" << x.x1 << ", " << x.x3 << ") is not on the " << wall_name(wall) << " wall";
        throw DomainError(os.str());
    }
    for (const Point& v : dom.vertices())
        if (std::hypot(x.x1 - v.x1, x.x3 - v.x3) < tol.corner) throw CornerAbsorbed("hit within corner tolerance of a vertex");
    if (wall == Wall::slope && std::abs(state.phi - dom.alpha()) < tol.critical)
        throw CriticalSlope("ray angle equals the slope angle");
    const auto n = dom.normal(wall);
    const auto v = state.velocity();
    if (!(v[0] * n[0] + v[1] * n[1] > 0.0)) throw DomainError("incoming direction does not point out of the wall");

    const auto m = detail::phase_match(state, n, tol.critical);
    RayState out = state;
    out.sigma1 = m.out.sigma1;
    out.sigma3 = m.out.sigma3;
    out.kappa = m.kappa;
    const auto w = out.velocity();
    if (!(w[0] * n[0] + w[1] * n[1] < 0.0)) throw DomainError("phase matching produced an outgoing ray leaving the domain");
    return out;
}

enum class Termination { max_bounces, corner_absorbed, critical_slope };

inline const char* termination_name(Termination t) {
    switch (t) {
        case Termination::max_bounces: return "max_bounces";
        case Termination::corner_absorbed: return "corner_absorbed";
        case Termination::critical_slope: return "critical_slope";
    }
    return "?";
}

struct Bounce {
    Point hit;
    Wall wall;
    Direction incoming;
    Direction outgoing;
    double kappa;
};

struct RayPath {
    RayState start;
    std::vector<Bounce> bounces;
    Termination termination = Termination::max_bounces;
    std::optional<Point> terminal;  // where the ray died, for corner/critical endings
};

namespace detail {

struct Exit {
    Wall wall;
    double t;
    Point hit;
};

inline Exit first_exit(const TrapeziumDomain& dom, const RayState& s) {
    const auto v = s.velocity();
    Exit best{Wall::bottom, std::numeric_limits<double>::infinity(), {}};
    for (Wall w : {Wall::bottom, Wall::top, Wall::left, Wall::slope}) {
        const auto n = dom.normal(w);
        const double vn = v[0] * n[0] + v[1] * n[1];
        if (vn <= 0.0) continue;
        const double t = std::max(0.0, -dom.signed_distance(w, s.position()) / vn);
        if (t < best.t) best = {w, t, {}};
    }
    best.hit = {s.x1 + best.t * v[0], s.x3 + best.t * v[1]};
    // Snap onto the wall line to stop drift over many bounces.
    switch (best.wall) {
        case Wall::bottom: best.hit.x3 = 0.0; break;
        case Wall::top: best.hit.x3 = 1.0; break;
        case Wall::left: best.hit.x1 = 0.0; break;
        case Wall::slope: best.hit.x1 = dom.slope_x1(best.hit.x3); break;
    }
    return best;
}

}  // namespace detail

inline RayPath trace(const TrapeziumDomain& dom, const RayState& start, std::size_t max_bounces, const Tolerances& tol = {}) {
    if (!dom.strictly_inside(start.position())) throw DomainError("trace start must lie strictly inside the domain");
    if (!(start.phi > 0.0 && start.phi < M_PI / 2)) throw DomainError("ray angle must lie in (0, pi/2)");
    RayPath path;
    path.start = start;
    RayState s = start;
    while (path.bounces.size() < max_bounces) {
        const auto e = detail::first_exit(dom, s);
        RayState at = s;
        at.x1 = e.hit.x1;
        at.x3 = e.hit.x3;
        try {
            RayState out = reflect(at, e.wall, dom, tol);
            path.bounces.push_back({e.hit, e.wall, {s.sigma1, s.sigma3}, {out.sigma1, out.sigma3}, out.kappa});
            s = out;
        } catch (const CornerAbsorbed&) {
            path.termination = Termination::corner_absorbed;
            path.terminal = e.hit;
            return path;
        } catch (const CriticalSlope&) {
            path.termination = Termination::critical_slope;
            path.terminal = e.hit;
            return path;
        }
    }
    path.termination = Termination::max_bounces;
    return path;
}

inline double wrap01(double s) {
    double r = s - std::floor(s);
    return r >= 1.0 ? 0.0 : r;
}
// Circle difference in (-1/2, 1/2].
inline double circle_diff(double a, double b) {
    double d = a - b;
    d -= std::round(d);
    return d == -0.5 ? 0.5 : d;
}

// Poincare return map on the sloping wall. The section point s in [0,1)
// is half the unfolded height zeta in [0,2): zeta = x3 for upward
// outgoing rays and 2 - x3 for downward ones, which is the circle the
// image-method unfolding produces.
class ReturnMap {
public:
    ReturnMap(const TrapeziumDomain& dom, double phi, const Tolerances& tol = {}) : dom_(dom), phi_(phi), tol_(tol) {
        if (std::abs(phi - dom.alpha()) < tol.critical) throw CriticalSlope("ray angle equals the slope angle");
        if (!(phi > 0.0) || phi >= dom.alpha()) throw SectionUnavailable("the sloping-wall section needs phi < alpha");
    }
    static ReturnMap from_frequency(const TrapeziumDomain& dom, double omega0, double N) {
        return ReturnMap(dom, angle_from_frequency(omega0, N));
    }

    const TrapeziumDomain& domain() const { return dom_; }
    double phi() const { return phi_; }
    bool orientation_preserving() const { return true; }

    RayState section_state(double s) const {
        const double zeta = 2.0 * wrap01(s);
        RayState r;
        r.phi = phi_;
        r.sigma1 = -1;
        if (zeta < 1.0) {
            r.x3 = zeta;
            r.sigma3 = 1;
        } else {
            r.x3 = 2.0 - zeta;
            r.sigma3 = -1;
        }
        r.x1 = dom_.slope_x1(r.x3);
        return r;
    }

    static double section_coordinate(double x3, int sigma3) { return wrap01(0.5 * (sigma3 > 0 ? x3 : 2.0 - x3)); }

    // Corners are crossed by reflecting on both adjacent walls, which is
    // the continuous extension of the unfolded flow.
    double operator()(double s) const {
        RayState r = section_state(s);
        for (int seg = 0; seg < 100000; ++seg) {
            const auto e = detail::first_exit(dom_, r);
            r.x1 = e.hit.x1;
            r.x3 = e.hit.x3;
            if (e.wall == Wall::slope) {
                const auto m = detail::phase_match(r, dom_.normal(Wall::slope), tol_.critical);
                return section_coordinate(r.x3, m.out.sigma3);
            }
            if (e.wall == Wall::left) r.sigma1 = -r.sigma1;
            else r.sigma3 = -r.sigma3;
            const bool near_bottom = r.x3 < tol_.corner, near_top = r.x3 > 1.0 - tol_.corner;
            if (e.wall == Wall::left && (near_bottom || near_top)) r.sigma3 = -r.sigma3;
            if (e.wall != Wall::left && r.x1 < tol_.corner) r.sigma1 = -r.sigma1;
        }
        throw NumericalFailure("return map: no slope hit after 1e5 segments");
    }

private:
    TrapeziumDomain dom_;
    double phi_;
    Tolerances tol_;
};

struct RotationEstimate {
    double rho_n = 0.0;
    double rho_2n = 0.0;
    double error = 0.0;  // circle distance between the n and 2n estimates
    bool converged = false;
    long n = 0;
};

// Counting formula: fraction of the orbit of cprime inside the arc [c, f(c)).
template <class CircleMap>
RotationEstimate rotation_number(const CircleMap& f, long n, double c, double cprime) {
    if (n < 1) throw DomainError("rotation_number needs n >= 1");
    c = wrap01(c);
    const double fc = wrap01(f(c));
    auto in_arc = [&](double x) {
        if (fc >= c) return x >= c && x < fc;
        return x >= c || x < fc;
    };
    long count_n = 0, count_2n = 0;
    double s = wrap01(cprime);
    for (long j = 0; j < 2 * n; ++j) {
        if (in_arc(s)) {
            ++count_2n;
            if (j < n) ++count_n;
        }
        s = wrap01(f(s));
    }
    RotationEstimate r;
    r.n = n;
    r.rho_n = static_cast<double>(count_n) / static_cast<double>(n);
    r.rho_2n = static_cast<double>(count_2n) / static_cast<double>(2 * n);
    r.error = std::abs(circle_diff(r.rho_n, r.rho_2n));
    r.converged = r.error < 2.0 / static_cast<double>(n);
    return r;
}

struct LyapunovEstimate {
    double value = 0.0;
    long samples = 0;
    long flagged = 0;  // DerivativeUndefined occurrences (skipped, not fatal)
};

// One-sided quotients must agree before a central difference is trusted;
// otherwise the step is refined, and if a kink persists the sample is
// skipped and re-taken at the next orbit point.
template <class CircleMap>
std::optional<double> circle_derivative(const CircleMap& f, double s, double f0, double h) {
    for (int refine = 0; refine < 4; ++refine, h *= 0.125) {
        const double fp = f(wrap01(s + h)), fm = f(wrap01(s - h));
        const double dp = circle_diff(fp, f0) / h, dm = circle_diff(f0, fm) / h;
        if (std::abs(dp - dm) <= 1e-5 * std::max(std::abs(dp), std::abs(dm)) + 1e-9) return circle_diff(fp, fm) / (2 * h);
    }
    return std::nullopt;
}

template <class CircleMap>
LyapunovEstimate lyapunov_exponent(const CircleMap& f, long n, double s0, double h = 1e-6) {
    if (n < 1) throw DomainError("lyapunov_exponent needs n >= 1");
    LyapunovEstimate out;
    double s = wrap01(s0), sum = 0.0;
    for (long it = 0; out.samples < n && it < 4 * n + 16; ++it) {
        const double next = wrap01(f(s));
        if (auto d = circle_derivative(f, s, next, h)) {
            sum += std::log(std::abs(*d));
            ++out.samples;
        } else {
            ++out.flagged;
        }
        s = next;
    }
    out.value = out.samples > 0 ? sum / static_cast<double>(out.samples) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

enum class CellClass { corner_focusing, attractor, no_pattern, error };

inline const char* cell_class_name(CellClass c) {
    switch (c) {
        case CellClass::corner_focusing: return "corner";
        case CellClass::attractor: return "attractor";
        case CellClass::no_pattern: return "no_pattern";
        case CellClass::error: return "error";
    }
    return "?";
}

struct SweepConfig {
    double L = 6.0;
    long n_iter = 1000;
    long n_transient = 200;
    std::uint64_t seed = 1;
    double lyapunov_threshold = -1e-3;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepCell {
    double alpha = 0, phi = 0;
    double rho = std::numeric_limits<double>::quiet_NaN();
    double rho_err = std::numeric_limits<double>::quiet_NaN();
    double lyapunov = std::numeric_limits<double>::quiet_NaN();
    CellClass cls = CellClass::no_pattern;
    std::string message;
};

struct SweepResult {
    std::vector<double> alphas, phis;
    std::vector<SweepCell> cells;  // alpha-major
    const SweepCell& at(std::size_t ia, std::size_t ip) const { return cells[ia * phis.size() + ip]; }
};

inline SweepCell sweep_cell(double alpha, double phi, std::size_t index, const SweepConfig& cfg) {
    SweepCell cell;
    cell.alpha = alpha;
    cell.phi = phi;
    try {
        if (phi >= alpha) {
            cell.cls = CellClass::corner_focusing;
            return cell;
        }
        TrapeziumDomain dom(cfg.L, alpha);
        ReturnMap map(dom, phi);
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + index);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double c = u(rng), cprime = u(rng);
        double s = cprime;
        for (long j = 0; j < cfg.n_transient; ++j) s = map(s);
        const auto rot = rotation_number(map, cfg.n_iter, c, s);
        const auto lyap = lyapunov_exponent(map, cfg.n_iter, s);
        cell.rho = rot.rho_2n;
        cell.rho_err = rot.error;
        cell.lyapunov = lyap.value;
        cell.cls = (lyap.value < cfg.lyapunov_threshold) ? CellClass::attractor : CellClass::no_pattern;
    } catch (const std::exception& e) {
        cell.cls = CellClass::error;
        cell.message = e.what();
    }
    return cell;
}

inline SweepResult bifurcation_sweep(const std::vector<double>& alphas, const std::vector<double>& phis, const SweepConfig& cfg) {
    if (alphas.empty() || phis.empty()) throw DomainError("bifurcation sweep needs non-empty grids");
    SweepResult res{alphas, phis, std::vector<SweepCell>(alphas.size() * phis.size())};
    const std::size_t total = res.cells.size();
    unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nt = static_cast<unsigned>(std::min<std::size_t>(nt, total));
    auto work = [&](unsigned id) {
        for (std::size_t k = id; k < total; k += nt)
            res.cells[k] = sweep_cell(alphas[k / phis.size()], phis[k % phis.size()], k, cfg);
    };
    if (nt <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned id = 0; id < nt; ++id) pool.emplace_back(work, id);
    }
    return res;
}

struct Fraction {
    long p = 0, q = 1;
    bool operator==(const Fraction&) const = default;
};

// Best rational p/q (q <= q_max) within tol of rho on the circle.
inline std::optional<Fraction> identify_rational(double rho, double tol, long q_max = 24) {
    for (long q = 1; q <= q_max; ++q) {
        const long p = std::lround(rho * static_cast<double>(q));
        if (std::abs(rho - static_cast<double>(p) / static_cast<double>(q)) <= tol) return Fraction{p % q, q};
    }
    return std::nullopt;
}

struct Plateau {
    Fraction value;
    std::vector<std::size_t> cells;  // flat indices into SweepResult::cells
};

// Connected (4-neighbour) groups of attractor cells sharing one rational
// rotation number.
inline std::vector<Plateau> detect_plateaus(const SweepResult& r, double tol, long q_max = 24) {
    const std::size_t na = r.alphas.size(), np = r.phis.size();
    std::vector<std::optional<Fraction>> frac(r.cells.size());
    for (std::size_t k = 0; k < r.cells.size(); ++k)
        if (r.cells[k].cls == CellClass::attractor) frac[k] = identify_rational(r.cells[k].rho, tol, q_max);
    std::vector<char> seen(r.cells.size(), 0);
    std::vector<Plateau> out;
    for (std::size_t k = 0; k < r.cells.size(); ++k) {
        if (seen[k] || !frac[k]) continue;
        Plateau pl{*frac[k], {}};
        std::vector<std::size_t> stack{k};
        seen[k] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            pl.cells.push_back(cur);
            const std::size_t ia = cur / np, ip = cur % np;
            auto visit = [&](std::size_t a, std::size_t p) {
                const std::size_t nb = a * np + p;
                if (!seen[nb] && frac[nb] && *frac[nb] == pl.value) {
                    seen[nb] = 1;
                    stack.push_back(nb);
                }
            };
            if (ia > 0) visit(ia - 1, ip);
            if (ia + 1 < na) visit(ia + 1, ip);
            if (ip > 0) visit(ia, ip - 1);
            if (ip + 1 < np) visit(ia, ip + 1);
        }
        std::sort(pl.cells.begin(), pl.cells.end());
        out.push_back(std::move(pl));
    }
    return out;
}

}  // namespace degzero::raydyn
