#include <catch_amalgamated.hpp>

#include <degzero/hamflow.hpp>

using namespace degzero;
using namespace degzero::hamflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PhasePoint pt(double x, double y, double p1, double p2) { return {Vec2(x, y), Vec2(p1, p2)}; }

std::vector<Vec2> grid(int nx, int ny, double ymax) {
    std::vector<Vec2> pos;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) pos.emplace_back((i + 0.5) / nx, -ymax + 2 * ymax * (j + 0.5) / ny);
    return pos;
}

}  // namespace

TEST_CASE("internal wave symbol values and gradient", "[hamflow]") {
    const auto h = internal_wave_symbol(2.0);
    CHECK(h(pt(0, 0, 1, 0)) == 2.0);
    CHECK_THAT(h(pt(0, 0, 1, 1)), WithinRel(2.0 / std::sqrt(2.0), 1e-15));
    const auto h1 = internal_wave_symbol(1.0);
    const auto z = pt(0.3, 0.1, 1, 1);
    CHECK_THAT(h1.gradient(z).dp[0], WithinAbs(0.3535533905932738, 1e-15));
    CHECK_THAT(h1.central_difference(z).dp[0], WithinAbs(0.3535534, 1e-7));
    CHECK_THAT(h1.central_difference(z).dp[1], WithinAbs(h1.gradient(z).dp[1], 1e-8));
    CHECK_THROWS_AS(h(pt(0, 0, 0, 0)), DomainError);
    CHECK_THROWS_AS(internal_wave_symbol(0.0), DomainError);
}

TEST_CASE("symbols carry their homogeneity degree", "[hamflow]") {
    const auto z = pt(0.2, 0.4, 0.7, -1.3);
    CHECK(homogeneity_defect(internal_wave_symbol(1.0), z) < 1e-10);
    CHECK(homogeneity_defect(toy_symbol(0.8), pt(0.2, 0.4, 0.7, 1.3)) < 1e-10);
    CHECK(homogeneity_defect(cylinder_symbol(0.8), pt(0.2, 0.4, 0.7, 1.3)) < 1e-10);
    const auto d = local_escape(1.0, 0.5).symbol();
    CHECK(d.degree() == 1);
    CHECK(homogeneity_defect(d, pt(0.2, 0.6, 0.7, 1.3)) < 1e-10);
}

TEST_CASE("internal wave flow keeps the wavenumber and energy", "[hamflow]") {
    const auto h = internal_wave_symbol(1.0);
    const auto z0 = pt(0.1, 0.2, 0.6, 0.8);
    const auto tr = flow_integrate(h, z0, 10.0, 1e-3, 100);
    double dp = 0, dh = 0;
    for (const auto& z : tr.z) {
        dp = std::max(dp, (z.p - z0.p).norm());
        dh = std::max(dh, std::abs(h(z) - h(z0)));
    }
    CHECK(dp < 1e-10);
    CHECK(dh < 1e-8);
    // dx1/dt = p3^2/|p|^3
    const auto& zt = tr.z.back();
    CHECK_THAT(zt.x[0] - z0.x[0], WithinAbs(10.0 * 0.64, 1e-10));
}

TEST_CASE("degree-0 flow rescales time with the wavenumber", "[hamflow]") {
    const auto h = cylinder_symbol(0.7);
    const auto z0 = pt(0.0, 0.3, 0.2, 1.0);
    auto z2 = z0;
    z2.p *= 2.0;
    const auto a = flow_integrate(h, z0, 2.0, 1e-3, 1);
    const auto b = flow_integrate(h, z2, 4.0, 1e-3, 1);
    // b at t = 4 against a at t = 2 with p doubled
    const auto& za = a.z.back();
    const auto& zb = b.z.back();
    CHECK((za.x - zb.x).norm() < 1e-8);
    CHECK((2.0 * za.p - zb.p).norm() < 1e-8);
}

TEST_CASE("toy flow closed form", "[hamflow]") {
    ToyModel m{1.0};
    const auto s = m.flow({0.0, 1.0, 1.0, 1.0}, std::exp(1.0) - 1.0);
    CHECK_THAT(s.x, WithinAbs(1.0, 1e-14));
    CHECK_THAT(s.eta, WithinAbs(std::exp(1.0), 1e-14));
    CHECK_THAT(s.y, WithinAbs(std::exp(-1.0), 1e-14));
    CHECK(s.xi == 1.0);
    // motion on the cycle
    ToyModel m2{0.6};
    for (double t : {0.5, 3.0, 10.0}) {
        const auto c = m2.flow({0.2, 0.0, 0.0, 1.5}, t);
        CHECK(c.y == 0.0);
        CHECK_THAT(c.x, WithinAbs(0.2 + std::log(1.0 + 0.6 * t / 1.5) / 0.6, 1e-14));
    }
    CHECK_THROWS_AS(ToyModel{-1.0}.flow({0, 0, 0, 1}, 2.0), DomainError);
}

TEST_CASE("toy flow conserves both first integrals and matches RK4", "[hamflow]") {
    ToyModel m{1.3};
    const ToyModel::State s0{0.1, 0.4, 0.2, 0.9};
    const auto h = toy_symbol(1.3);
    const auto tr = flow_integrate(h, pt(s0.x, s0.y, s0.xi, s0.eta), 10.0, 1e-3, 50);
    double worst = 0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        const auto e = m.flow(s0, tr.t[i]);
        CHECK_THAT(m.energy(e), WithinAbs(m.energy(s0), 1e-13));
        CHECK(e.xi == s0.xi);
        const auto& z = tr.z[i];
        worst = std::max({worst, std::abs(z.x[0] - e.x), std::abs(z.x[1] - e.y), std::abs(z.p[0] - e.xi), std::abs(z.p[1] - e.eta)});
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("toy Poincare map", "[hamflow]") {
    ToyModel m{std::log(2.0)};
    auto [y, eta] = m.poincare(1.0, 1.0);
    CHECK_THAT(y, WithinAbs(0.5, 1e-15));
    CHECK_THAT(eta, WithinAbs(2.0, 1e-15));
    // one turn of the exact flow lands on the same point
    const ToyModel::State s0{0.0, 1.0, std::log(2.0) * 1.0 * 1.0, 1.0};
    const auto s1 = m.flow(s0, m.turn_time(s0));
    CHECK_THAT(s1.x, WithinAbs(1.0, 1e-14));
    CHECK_THAT(s1.y, WithinAbs(0.5, 1e-14));
    CHECK_THAT(s1.eta, WithinAbs(2.0, 1e-14));
    ToyModel m3{0.37};
    auto [y0, e0] = m3.poincare(0.0, 1.5);
    CHECK(y0 == 0.0);
    CHECK_THAT(e0, WithinRel(1.5 * std::exp(0.37), 1e-15));
    double yy = 0.8, ee = 1.1;
    for (int i = 0; i < 5; ++i) std::tie(yy, ee) = m3.poincare(yy, ee);
    CHECK_THAT(yy, WithinRel(0.8 * std::exp(-5 * 0.37), 1e-14));
    CHECK_THAT(ee, WithinRel(1.1 * std::exp(5 * 0.37), 1e-14));
    CHECK_THROWS_AS(m3.poincare(0.1, 0.0), DomainError);
}

TEST_CASE("stable-cone spirals", "[hamflow]") {
    const double lambda = 0.9, y0 = 0.3, eta0 = 1.2;
    ToyModel m{lambda};
    const ToyModel::State s0{0.0, y0, lambda * y0 * eta0, eta0};
    for (double t : {0.3, 2.0, 9.0}) {
        const auto s = m.flow(s0, t);
        CHECK_THAT(s.y, WithinAbs(y0 * std::exp(-lambda * s.x), 1e-8));
        CHECK_THAT(s.eta, WithinAbs(eta0 * std::exp(lambda * s.x), 1e-8));
    }
}

TEST_CASE("bracket of the toy Hamiltonian with a local escape field", "[hamflow]") {
    const double lambda = 1.7;
    const auto h = toy_symbol(lambda);
    const auto field = local_escape(lambda, 0.5);
    const auto d = field.symbol();
    // plateau point on the zero shell: xi = lambda y eta
    CHECK_THAT(poisson_bracket(h, d, pt(0.3, 0.2, lambda * 0.2 * 2.0, 2.0)), WithinRel(lambda * lambda, 1e-13));
    const auto& b = field.pieces().front().bump;
    for (double y : {0.55, 0.7, 0.8, 0.95, -0.6, -0.9}) {
        const auto z = pt(0.1, y, lambda * y * 1.5, 1.5);
        const double expected = lambda * lambda * (b(y) - y * b.derivative(y));
        CHECK_THAT(poisson_bracket(h, d, z), WithinAbs(expected, 1e-8));
        CHECK_THAT(field.shell_bracket_formula(z), WithinAbs(expected, 1e-12));
    }
    for (const auto& s : {h, d, cylinder_symbol(0.4), internal_wave_symbol(1.0)})
        CHECK_THAT(poisson_bracket(s, s, pt(0.2, 0.3, 0.5, 1.1)), WithinAbs(0.0, 1e-12));
}

TEST_CASE("bracket equals the time derivative along the flow", "[hamflow]") {
    const auto h = cylinder_symbol(0.8);
    const auto d = cylinder_escape(0.8, 0.7).symbol();
    const auto z0 = pt(0.0, 0.9, 0.1, 1.0);
    const double dt = 1e-3;
    const auto tr = flow_integrate(h, z0, 0.02, dt, 1);
    // central difference around t = 0.01
    const std::size_t mid = 10;
    const double fd = (d(tr.z[mid + 1]) - d(tr.z[mid - 1])) / (2 * dt);
    CHECK_THAT(poisson_bracket(h, d, tr.z[mid]), WithinAbs(fd, 1e-6));
}

TEST_CASE("local escape field values", "[hamflow]") {
    const auto f = local_escape(1.0, 0.5);
    CHECK(f.value(pt(0.0, 0.0, 0.3, 2.0)) == 2.0);
    CHECK_THAT(f.value(pt(0.0, 0.7, 0.3, 3.0)), WithinRel(3.0 * f.value(pt(0.0, 0.7, 0.3, 1.0)), 1e-15));
    CHECK(f.value(pt(0.0, 1.5, 0.3, 1.0)) == 0.0);
    CHECK_THROWS_AS(local_escape(0.0, 0.5), DomainError);
    CHECK_THROWS_AS(Bump::taper(0.0, 1.0), InvalidBump);
    Bump bad = Bump::taper(0.5, 0.5);
    bad.derivative = [](double y) { return y; };  // y phi' > 0
    CHECK_THROWS_AS(local_escape(1.0, 0.5, bad), InvalidBump);
}

TEST_CASE("escape bracket with a conjugating multiplier", "[hamflow]") {
    const double lambda = 0.8;
    auto m = [](const Vec2& x) { return 1.5 + 0.5 * std::cos(2 * M_PI * x[0]); };
    auto dm = [](const Vec2& x) { return Vec2(-M_PI * std::sin(2 * M_PI * x[0]), 0.0); };
    const auto h = multiplied(toy_symbol(lambda), m, dm);
    const auto field = local_escape(lambda, 0.5, std::nullopt, m);
    const auto shell = sample_shell(h, 0.0, grid(40, 40, 1.0));
    REQUIRE(shell.size() > 1000);
    const auto rep = escape_positivity(h, field.symbol(), shell);
    CHECK(rep.min_bracket >= -1e-12);
    for (const auto& z : shell)
        if (std::abs(z.x[1]) <= 0.5) CHECK(poisson_bracket(h, field.symbol(), z) >= lambda * lambda * 1.0 - 1e-9);
}

TEST_CASE("two-chart escape field is positive on the cylinder shell", "[hamflow]") {
    const double lambda = 1.0;
    const auto h = cylinder_symbol(lambda);
    const auto field = cylinder_escape(lambda, 1.0);
    const auto shell = sample_shell(h, 0.0, grid(100, 100, M_PI));
    CHECK(shell.size() == 10000);
    const auto rep = escape_positivity(h, field.symbol(), shell);
    CHECK(rep.positive);
    CHECK(rep.min_bracket > 0.1);
    double dev = 0;
    for (const auto& z : shell) dev = std::max(dev, std::abs(poisson_bracket(h, field.symbol(), z) - field.shell_bracket_formula(z)));
    CHECK(dev < 1e-8);
    // doubling the field doubles the minimum
    const auto d2 = Symbol([&](const PhasePoint& z) { return 2 * field.value(z); }, 1, [&](const PhasePoint& z) {
        auto g = field.gradient(z);
        g.dx *= 2;
        g.dp *= 2;
        return g;
    });
    CHECK_THAT(escape_positivity(h, d2, shell).min_bracket, WithinRel(2 * rep.min_bracket, 1e-13));
}

TEST_CASE("zero escape field is not positive and empty shells are rejected", "[hamflow]") {
    const auto h = toy_symbol(1.0);
    const auto shell = sample_shell(h, 0.0, grid(10, 10, 1.0));
    const auto rep = escape_positivity(h, zero_symbol(1), shell);
    CHECK_FALSE(rep.positive);
    CHECK(rep.min_bracket <= 0.0);
    CHECK_THROWS_AS(escape_positivity(h, zero_symbol(1), {}), EmptyShell);
    // |h| <= 1 for internal waves, so the level 2 is empty
    CHECK(sample_shell(internal_wave_symbol(1.0), 2.0, grid(4, 4, 1.0)).empty());
}
