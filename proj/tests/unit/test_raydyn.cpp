#include <catch_amalgamated.hpp>

#include <degzero/raydyn.hpp>

using namespace degzero;
using namespace degzero::raydyn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double deg = M_PI / 180.0;

double tri(double z) {
    z = std::fmod(z, 2.0);
    if (z < 0) z += 2.0;
    return z <= 1.0 ? z : 2.0 - z;
}

// Unfolded lift: the outgoing ray from unfolded slope height z0 next meets
// the (unfolded) slope at z1 solving (z1 - z0) cot(phi) = X(z0) + X(z1),
// X(z) = L - tri(z) cot(alpha). Solved by bisection; returns z1.
double lift_oracle(double L, double alpha, double phi, double z0) {
    const double cp = 1.0 / std::tan(phi), ca = 1.0 / std::tan(alpha);
    auto X = [&](double z) { return L - tri(z) * ca; };
    double lo = z0, hi = z0 + 2.0 * L * std::tan(phi) + 4.0;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        if ((m - z0) * cp - X(z0) - X(m) < 0) lo = m;
        else hi = m;
    }
    return lo;
}

double map_oracle(double L, double alpha, double phi, double s) { return wrap01(0.5 * lift_oracle(L, alpha, phi, 2.0 * s)); }

// Derivative of the lift from implicit differentiation of the matching condition.
double map_derivative_oracle(double L, double alpha, double phi, double s) {
    const double cp = 1.0 / std::tan(phi), ca = 1.0 / std::tan(alpha);
    const double z0 = 2.0 * s, z1 = lift_oracle(L, alpha, phi, z0);
    auto dX = [&](double z) {
        const double r = std::fmod(z, 2.0) + (z < 0 ? 2.0 : 0.0);
        return r < 1.0 ? -ca : ca;
    };
    return (cp + dX(z0)) / (cp - dX(z1));
}

// The outgoing direction chosen by enumeration: among the four admissible
// directions, the one different from the incoming direction, pointing into
// the domain, whose wavenumber differs from the incoming one by a multiple
// of the wall normal.
std::optional<Direction> enumerate_reflection(const RayState& s, const std::array<double, 2>& n) {
    const auto p = s.wavenumber();
    const std::array<double, 2> tangent{-n[1], n[0]};
    std::optional<Direction> found;
    for (int s1 : {1, -1})
        for (int s3 : {1, -1}) {
            if (s1 == s.sigma1 && s3 == s.sigma3) continue;
            RayState c = s;
            c.sigma1 = s1;
            c.sigma3 = s3;
            const auto v = c.velocity();
            if (!(v[0] * n[0] + v[1] * n[1] < 0)) continue;
            // wavenumber of the candidate is kappa' times a fixed unit vector; pick kappa'
            // so that the tangential components agree.
            const auto q = c.wavenumber();
            const double qt = q[0] * tangent[0] + q[1] * tangent[1], pt = p[0] * tangent[0] + p[1] * tangent[1];
            if (std::abs(qt) < 1e-14 || qt * pt <= 0) continue;
            found = Direction{s1, s3};
        }
    return found;
}

}  // namespace

TEST_CASE("admissible directions follow sin(phi) = omega0/N", "[raydyn]") {
    const auto d = admissible_directions(0.5, 1.0);
    CHECK_THAT(angle_from_frequency(0.5, 1.0), WithinAbs(M_PI / 6, 1e-15));
    CHECK_THAT(d[0][0], WithinAbs(0.8660254037844386, 1e-15));
    CHECK_THAT(d[0][1], WithinAbs(0.5, 1e-15));
    CHECK(d[3][0] < 0);
    CHECK(d[3][1] < 0);
    CHECK(d[1][0] > 0);
    CHECK(d[1][1] < 0);
    const auto e = admissible_directions(1.0 / std::sqrt(2.0), 1.0);
    CHECK_THAT(e[0][0], WithinAbs(std::sqrt(0.5), 1e-15));
    CHECK_THAT(e[0][1], WithinAbs(std::sqrt(0.5), 1e-15));
    CHECK_THROWS_AS(admissible_directions(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(admissible_directions(0.0, 1.0), DomainError);
}

TEST_CASE("trapezium validates its geometry", "[raydyn]") {
    CHECK_THROWS_AS(TrapeziumDomain(1.0, 0.3), DomainError);  // L < cot(alpha)
    CHECK_THROWS_AS(TrapeziumDomain(5.0, M_PI / 2), DomainError);
    TrapeziumDomain d(3.0, 40 * deg);
    const auto v = d.vertices();
    CHECK_THAT(v[2].x1, WithinAbs(3.0 - 1.0 / std::tan(40 * deg), 1e-15));
    // the sloping wall lies on x1 sin(alpha) + x3 cos(alpha) = L sin(alpha)
    for (double x3 : {0.0, 0.3, 1.0}) CHECK_THAT(d.signed_distance(Wall::slope, {d.slope_x1(x3), x3}), WithinAbs(0.0, 1e-15));
}

TEST_CASE("specular reflections on the horizontal and vertical walls", "[raydyn]") {
    TrapeziumDomain d(4.0, 60 * deg);
    const double phi = 20 * deg;
    RayState bottom{1.0, 0.0, 1, -1, phi, 1.0};
    const auto b = reflect(bottom, Wall::bottom, d);
    CHECK(b.sigma1 == 1);
    CHECK(b.sigma3 == 1);
    CHECK(b.kappa == Catch::Approx(1.0).epsilon(1e-15));
    RayState left{0.0, 0.5, -1, 1, phi, 1.0};
    const auto l = reflect(left, Wall::left, d);
    CHECK(l.sigma1 == 1);
    CHECK(l.sigma3 == 1);
    RayState top{1.0, 1.0, -1, 1, phi, 2.0};
    const auto t = reflect(top, Wall::top, d);
    CHECK(t.sigma3 == -1);
    CHECK(t.sigma1 == -1);
    CHECK(t.kappa == Catch::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("sloping-wall bounce scales the wavenumber by sin(phi+alpha)/sin(alpha-phi)", "[raydyn]") {
    const double alpha = 30 * deg, phi = 10 * deg;
    TrapeziumDomain d(5.0, alpha);
    // Focusing bounce: a ray travelling right and up hits the slope and is sent down.
    RayState s{d.slope_x1(0.4), 0.4, 1, 1, phi, 1.0};
    const auto out = reflect(s, Wall::slope, d);
    const double ratio = std::abs(out.wavenumber()[1]) / std::abs(s.wavenumber()[1]);
    CHECK_THAT(ratio, WithinAbs(1.8793852415718169, 1e-12));
    CHECK_THAT(ratio, WithinRel(std::sin(40 * deg) / std::sin(20 * deg), 1e-13));
    CHECK_THAT(out.kappa, WithinRel(std::sin(40 * deg) / std::sin(20 * deg), 1e-13));
    // The reverse ray undoes it.
    RayState back{d.slope_x1(0.4), 0.4, out.sigma1 * -1, out.sigma3 * -1, phi, out.kappa};
    CHECK_THAT(reflect(back, Wall::slope, d).kappa, WithinRel(1.0, 1e-13));
}

TEST_CASE("phase matching agrees with enumeration of admissible directions", "[raydyn]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const double alpha = 0.1 + 1.3 * u(rng), phi = 0.05 + 1.4 * u(rng);
        if (std::abs(phi - alpha) < 1e-3) continue;
        TrapeziumDomain d(1.0 / std::tan(alpha) + 1.0, alpha);
        const double x3 = 0.05 + 0.9 * u(rng);
        for (int s1 : {1, -1})
            for (int s3 : {1, -1}) {
                RayState s{d.slope_x1(x3), x3, s1, s3, phi, 1.0};
                const auto n = d.normal(Wall::slope);
                const auto v = s.velocity();
                if (!(v[0] * n[0] + v[1] * n[1] > 0)) continue;
                const auto out = reflect(s, Wall::slope, d);
                const auto e = enumerate_reflection(s, n);
                REQUIRE(e);
                CHECK(out.sigma1 == e->sigma1);
                CHECK(out.sigma3 == e->sigma3);
                // |v3| = sin(phi) and the jump p' - p is normal to the wall
                CHECK_THAT(std::abs(out.velocity()[1]), WithinAbs(std::sin(phi), 1e-12));
                const auto p = s.wavenumber(), q = out.wavenumber();
                CHECK_THAT((q[0] - p[0]) * (-n[1]) + (q[1] - p[1]) * n[0], WithinAbs(0.0, 1e-12));
                ++checked;
            }
    }
    CHECK(checked > 300);
}

TEST_CASE("critical slope and corner hits are rejected", "[raydyn]") {
    TrapeziumDomain d(4.0, 0.5);
    RayState s{d.slope_x1(0.5), 0.5, 1, 1, 0.5, 1.0};
    CHECK_THROWS_AS(reflect(s, Wall::slope, d), CriticalSlope);
    RayState c{4.0, 0.0, 1, -1, 0.3, 1.0};
    CHECK_THROWS_AS(reflect(c, Wall::bottom, d), CornerAbsorbed);
    RayState off{1.0, 0.5, 1, -1, 0.3, 1.0};
    CHECK_THROWS_AS(reflect(off, Wall::bottom, d), DomainError);
}

TEST_CASE("steeper rays than the slope end in a corner", "[raydyn]") {
    TrapeziumDomain d(3.0, 30 * deg);
    for (double x1 : {0.5, 1.2, 1.6})
        for (double x3 : {0.2, 0.7}) {
            const auto path = trace(d, {x1, x3, 1, 1, 50 * deg, 1.0}, 100000);
            CHECK(path.termination == Termination::corner_absorbed);
            REQUIRE(path.terminal);
        }
}

TEST_CASE("diagonal billiard in the unit square closes after four bounces", "[raydyn]") {
    const auto sq = TrapeziumDomain::rectangle(1.0);
    RayState s{0.25, 0.5, 1, 1, M_PI / 4, 1.0};
    const auto path = trace(sq, s, 4);
    REQUIRE(path.bounces.size() == 4);
    // After the fourth bounce the ray heads back through the start in the original direction.
    const auto& last = path.bounces.back();
    CHECK(last.outgoing.sigma1 == 1);
    CHECK(last.outgoing.sigma3 == 1);
    const double dx = 0.25 - last.hit.x1, dy = 0.5 - last.hit.x3;
    CHECK_THAT(dx - dy, WithinAbs(0.0, 1e-9));
    CHECK_THAT(last.hit.x1, WithinAbs(0.0, 1e-12));
    CHECK_THAT(last.hit.x3, WithinAbs(0.25, 1e-12));
}

TEST_CASE("trace invariants along a long path", "[raydyn]") {
    const double alpha = 30 * deg, phi = 10 * deg;
    TrapeziumDomain d(1.0 / std::tan(phi) + 0.5 / std::tan(alpha), alpha);
    const auto path = trace(d, {0.3, 0.5, 1, 1, phi, 1.0}, 300);
    REQUIRE(path.bounces.size() == 300);
    const double f = std::sin(phi + alpha) / std::sin(alpha - phi);
    double kappa = 1.0;
    for (const auto& b : path.bounces) {
        if (b.wall == Wall::slope) kappa *= (b.incoming.sigma3 > 0 ? f : 1.0 / f);
        CHECK_THAT(b.kappa, WithinRel(kappa, 1e-9));
        CHECK_THAT(std::abs(d.signed_distance(b.wall, b.hit)), WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("return map matches the unfolded lift", "[raydyn]") {
    for (auto [L, alpha, phi] : {std::tuple{6.0, 0.9, 0.3}, {3.0, 0.9, 0.3}, {10.0, 0.7, 0.5}, {6.537, 30 * deg, 10 * deg}}) {
        TrapeziumDomain d(L, alpha);
        ReturnMap f(d, phi);
        double worst = 0;
        for (int i = 0; i < 2000; ++i) {
            const double s = (i + 0.5) / 2000;
            worst = std::max(worst, std::abs(circle_diff(f(s), map_oracle(L, alpha, phi, s))));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("return map is a monotone degree-one circle map", "[raydyn]") {
    TrapeziumDomain d(6.0, 0.9);
    ReturnMap f(d, 0.3);
    CHECK(f.orientation_preserving());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = a + 0.2 * u(rng);
        // lift increments over [a, b] must be non-negative
        const double fa = f(a), fb = f(wrap01(b));
        double steps = 0;
        double prev = fa;
        for (int k = 1; k <= 8; ++k) {
            const double v = f(wrap01(a + (b - a) * k / 8));
            steps += wrap01(v - prev + 1e-13) - 1e-13;
            prev = v;
        }
        CHECK(steps >= -1e-12);
        CHECK(steps < 1.0);
        CHECK(std::abs(circle_diff(fa + steps, fb)) < 1e-10);
    }
    // bit-for-bit determinism
    CHECK(f(0.123456) == f(0.123456));
    CHECK_THROWS_AS(ReturnMap(d, 1.0), SectionUnavailable);
    CHECK_THROWS_AS(ReturnMap(d, 0.9), CriticalSlope);
}

TEST_CASE("periodic point of the return map is the traced attractor height", "[raydyn]") {
    const double alpha = 30 * deg, phi = 10 * deg, L = 1.0 / std::tan(phi) + 0.5 / std::tan(alpha);
    TrapeziumDomain d(L, alpha);
    ReturnMap f(d, phi);
    double s = 0.1;
    for (int i = 0; i < 200; ++i) s = f(s);
    // find the period and polish the q-periodic point by secant iteration on f^q(s) - s
    int q = 1;
    for (; q <= 8; ++q) {
        double x = s;
        for (int j = 0; j < q; ++j) x = f(x);
        if (std::abs(circle_diff(x, s)) < 1e-9) break;
    }
    REQUIRE(q <= 8);
    auto g = [&](double x) {
        double y = x;
        for (int j = 0; j < q; ++j) y = f(y);
        return circle_diff(y, x);
    };
    double x0 = s - 1e-3, x1 = s + 1e-3;
    for (int it = 0; it < 50 && std::abs(x1 - x0) > 1e-15; ++it) {
        const double g0 = g(x0), g1 = g(x1);
        if (g1 == g0) break;
        const double x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        x0 = x1;
        x1 = x2;
    }
    const double fixed = wrap01(x1);
    const auto path = trace(d, {0.3, 0.5, 1, 1, phi, 1.0}, 400);
    double best = 1;
    for (std::size_t i = path.bounces.size() - 20; i < path.bounces.size(); ++i) {
        const auto& b = path.bounces[i];
        if (b.wall != Wall::slope) continue;
        const double sc = ReturnMap::section_coordinate(b.hit.x3, b.outgoing.sigma3);
        best = std::min(best, std::abs(circle_diff(sc, fixed)));
    }
    CHECK(best < 1e-8);
}

TEST_CASE("rotation number by counting", "[raydyn]") {
    auto rigid = [](double s) { return wrap01(s + 1.0 / 3.0); };
    const auto r = rotation_number(rigid, 3000, 0.1, 0.37);
    CHECK_THAT(r.rho_n, WithinAbs(1.0 / 3.0, 1.0 / 3000));
    CHECK(r.converged);
    auto id = [](double s) { return s; };
    CHECK(rotation_number(id, 100, 0.2, 0.5).rho_n == 0.0);
    auto irr = [](double s) { return wrap01(s + std::sqrt(2.0) - 1.0); };
    CHECK_THAT(rotation_number(irr, 5000, 0.0, 0.3).rho_2n, WithinAbs(std::sqrt(2.0) - 1.0, 2e-3));
    CHECK_THROWS_AS(rotation_number(id, 0, 0.0, 0.0), DomainError);
}

TEST_CASE("rotation number of the q-th iterate is q rho mod 1", "[raydyn]") {
    TrapeziumDomain d(6.0, 0.9);
    ReturnMap f(d, 0.3);
    const long n = 2000;
    const double rho = rotation_number(f, n, 0.3, 0.6).rho_2n;
    for (int q : {2, 3}) {
        auto fq = [&](double s) {
            for (int j = 0; j < q; ++j) s = f(s);
            return s;
        };
        const double rq = rotation_number(fq, n, 0.3, 0.6).rho_2n;
        CHECK(std::abs(circle_diff(rq, q * rho)) < 4.0 * q / n);
    }
}

TEST_CASE("Lyapunov exponents of reference maps", "[raydyn]") {
    auto rigid = [](double s) { return wrap01(s + 0.3); };
    CHECK_THAT(lyapunov_exponent(rigid, 500, 0.1).value, WithinAbs(0.0, 1e-6));
    auto doubling = [](double s) { return wrap01(2.0 * s); };
    const auto l = lyapunov_exponent(doubling, 2000, 0.1234);
    CHECK_THAT(l.value, WithinAbs(std::log(2.0), 1e-4));
}

TEST_CASE("attractor Lyapunov exponent equals the cycle slope product", "[raydyn]") {
    const double alpha = 30 * deg, phi = 10 * deg, L = 1.0 / std::tan(phi) + 0.5 / std::tan(alpha);
    TrapeziumDomain d(L, alpha);
    ReturnMap f(d, phi);
    double s = 0.1;
    for (int i = 0; i < 300; ++i) s = f(s);
    int q = 1;
    for (double x = f(s); std::abs(circle_diff(x, s)) > 1e-10 && q < 16; x = f(x)) ++q;
    double log_prod = 0;
    double x = s;
    for (int j = 0; j < q; ++j) {
        log_prod += std::log(std::abs(map_derivative_oracle(L, alpha, phi, x)));
        x = f(x);
    }
    const auto l = lyapunov_exponent(f, 40 * q, s);
    CHECK(l.value < 0);
    CHECK_THAT(l.value, WithinAbs(log_prod / q, 1e-6));
}

TEST_CASE("sweep classifies cells and is deterministic", "[raydyn]") {
    SweepConfig cfg;
    cfg.n_iter = 300;
    cfg.n_transient = 50;
    cfg.threads = 2;
    const std::vector<double> A{0.5, 0.9}, P{0.3, 0.7};
    const auto r1 = bifurcation_sweep(A, P, cfg);
    CHECK(r1.at(0, 1).cls == CellClass::corner_focusing);
    CHECK(r1.at(1, 1).cls != CellClass::corner_focusing);
    cfg.threads = 1;
    const auto r2 = bifurcation_sweep(A, P, cfg);
    for (std::size_t k = 0; k < r1.cells.size(); ++k) {
        CHECK(std::memcmp(&r1.cells[k].rho, &r2.cells[k].rho, sizeof(double)) == 0);
        CHECK(std::memcmp(&r1.cells[k].lyapunov, &r2.cells[k].lyapunov, sizeof(double)) == 0);
    }
}

TEST_CASE("plateau detection groups neighbouring cells with one rational value", "[raydyn]") {
    SweepResult r{{0, 1, 2}, {0, 1}, std::vector<SweepCell>(6)};
    const double vals[6] = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.4, 0.5, 0.5};
    for (int k = 0; k < 6; ++k) {
        r.cells[k].rho = vals[k];
        r.cells[k].cls = CellClass::attractor;
    }
    const auto pl = detect_plateaus(r, 1e-6);
    REQUIRE(pl.size() == 3);
    CHECK(pl[0].value == Fraction{1, 3});
    CHECK(pl[0].cells.size() == 3);
    CHECK(identify_rational(0.6000001, 1e-3) == Fraction{3, 5});
    CHECK_FALSE(identify_rational(std::sqrt(2.0) - 1, 1e-6, 24));
}
