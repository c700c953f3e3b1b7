#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <degzero/hamflow.hpp>
#include <degzero/normalform.hpp>
#include <degzero/profile.hpp>
#include <degzero/quasires.hpp>
#include <degzero/raydyn.hpp>
#include <degzero/svg.hpp>
#include <degzero/torus.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

namespace degzero::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using cplx = std::complex<double>;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json jcplx(cplx z) { return json::array({jnum(z.real()), jnum(z.imag())}); }

class Csv {
public:
    explicit Csv(std::string header) { os_ << header << '\n'; }
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
        os_ << '\n';
    }
    std::string str() const { return os_.str(); }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    std::ostringstream os_;
};

struct Globals {
    std::string out = ".";
    std::vector<std::string> format{"csv", "json"};
    std::uint64_t seed = 1;
    double tol = 0.0;  // 0: each command keeps its own default
    std::string config;
    bool degrees = false;
};

class Artifacts {
public:
    Artifacts(const Globals& g, std::ostream& out) : dir_(g.out), out_(out) {
        for (const auto& f : g.format) {
            if (f != "csv" && f != "json" && f != "svg") throw UsageError("unknown format '" + f + "' (expected csv, json, svg)");
            formats_.insert(f);
        }
    }
    bool want(const std::string& f) const { return formats_.count(f) > 0; }
    void write(const std::string& name, const std::string& content) const {
        const auto ext = fs::path(name).extension().string().substr(1);
        if (!want(ext)) return;
        fs::create_directories(dir_);
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        f << content;
    }
    void summary(const std::string& name, const json& j) const {
        write(name + ".json", j.dump(2) + "\n");
        out_ << j.dump() << '\n';
    }

private:
    fs::path dir_;
    std::set<std::string> formats_;
    std::ostream& out_;
};

struct Ctx {
    Globals& g;
    Artifacts art;
    double angle(double v) const { return g.degrees ? v * M_PI / 180.0 : v; }
    double tol_or(double fallback) const { return g.tol > 0 ? g.tol : fallback; }
};

struct Command {
    CLI::App* app;
    std::function<void(Ctx&)> run;
};

void add_globals(CLI::App* sub, Globals& g) {
    sub->add_option("--out", g.out, "output directory");
    sub->add_option("--format", g.format, "artifact formats: csv,json,svg")->delimiter(',');
    sub->add_option("--seed", g.seed, "random seed");
    sub->add_option("--tol", g.tol, "tolerance override");
    sub->add_option("--config", g.config, "key=value file; command-line flags win");
    sub->add_flag("--degrees", g.degrees, "angles are given in degrees");
}

// ---------------------------------------------------------------- raydyn

struct RayOpts {
    double alpha = 0, phi = 0, L = 0, omega0 = 0, N = 0;
};

void add_ray_opts(CLI::App* s, RayOpts& o) {
    s->add_option("--alpha", o.alpha, "slope angle")->required();
    s->add_option("--phi", o.phi, "ray angle (or give --omega0 and --N)");
    s->add_option("--omega0", o.omega0, "forcing frequency");
    s->add_option("--N", o.N, "buoyancy frequency");
    s->add_option("--L", o.L, "bottom length; default cot(phi) + cot(alpha)/2");
}

struct Geometry {
    double alpha, phi;
    raydyn::TrapeziumDomain dom;
};

Geometry geometry(const Ctx& c, const RayOpts& o) {
    const double alpha = c.angle(o.alpha);
    double phi;
    if (o.omega0 > 0 || o.N > 0) phi = raydyn::angle_from_frequency(o.omega0, o.N);
    else if (o.phi > 0) phi = c.angle(o.phi);
    else throw UsageError("give --phi or both --omega0 and --N");
    const double L = o.L > 0 ? o.L : 1.0 / std::tan(phi) + 0.5 / std::tan(alpha);
    return {alpha, phi, raydyn::TrapeziumDomain(L, alpha)};
}

std::vector<svg::XY> outline(const raydyn::TrapeziumDomain& d) {
    std::vector<svg::XY> v;
    for (auto p : d.vertices()) v.push_back({p.x1, p.x3});
    return v;
}

Command cmd_trace(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("trace", "trace a ray through the trapezium");
    add_globals(s, g);
    auto o = std::make_shared<RayOpts>();
    auto x1 = std::make_shared<double>(0.3), x3 = std::make_shared<double>(0.5);
    auto s1 = std::make_shared<int>(1), s3 = std::make_shared<int>(1);
    auto n = std::make_shared<std::size_t>(200);
    add_ray_opts(s, *o);
    s->add_option("--x1", *x1);
    s->add_option("--x3", *x3);
    s->add_option("--sigma1", *s1)->check(CLI::IsMember({-1, 1}));
    s->add_option("--sigma3", *s3)->check(CLI::IsMember({-1, 1}));
    s->add_option("--bounces", *n);
    return {s, [=](Ctx& c) {
                const auto geo = geometry(c, *o);
                raydyn::RayState st{*x1, *x3, *s1, *s3, geo.phi, 1.0};
                const auto path = raydyn::trace(geo.dom, st, *n);
                Csv csv("bounce,x1,x3,wall,sigma1,sigma3,kappa");
                std::vector<svg::XY> pts{{st.x1, st.x3}};
                for (std::size_t i = 0; i < path.bounces.size(); ++i) {
                    const auto& b = path.bounces[i];
                    csv.row(i + 1, b.hit.x1, b.hit.x3, raydyn::wall_name(b.wall), b.outgoing.sigma1, b.outgoing.sigma3, b.kappa);
                    pts.push_back({b.hit.x1, b.hit.x3});
                }
                if (path.terminal && (path.bounces.empty() || path.terminal->x1 != pts.back().x || path.terminal->x3 != pts.back().y))
                    pts.push_back({path.terminal->x1, path.terminal->x3});
                c.art.write("path.csv", csv.str());
                c.art.write("path.svg", svg::emit_path(outline(geo.dom), pts));
                json j{{"command", "trace"},
                       {"alpha", geo.alpha},
                       {"phi", geo.phi},
                       {"L", geo.dom.length()},
                       {"bounces", path.bounces.size()},
                       {"termination", raydyn::termination_name(path.termination)}};
                if (path.terminal) j["terminal"] = {path.terminal->x1, path.terminal->x3};
                if (pts.size() >= 20) {
                    const auto tc = svg::tail_cluster(pts);
                    j["tail_period"] = tc.period;
                    j["tail_spread_ratio"] = jnum(tc.ratio());
                }
                c.art.summary("path", j);
            }};
}

Command cmd_return_map(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("return-map", "iterate the sloping-wall return map");
    add_globals(s, g);
    auto o = std::make_shared<RayOpts>();
    auto s0 = std::make_shared<double>(0.25);
    auto n = std::make_shared<long>(100);
    auto table = std::make_shared<int>(0);
    add_ray_opts(s, *o);
    s->add_option("--s0", *s0, "section coordinate in [0,1)");
    s->add_option("--n", *n, "iterations");
    s->add_option("--table", *table, "also tabulate the map on this many points");
    return {s, [=](Ctx& c) {
                const auto geo = geometry(c, *o);
                raydyn::ReturnMap f(geo.dom, geo.phi);
                Csv csv("bounce,x1,x3,wall,sigma1,sigma3,kappa");
                double sv = raydyn::wrap01(*s0);
                std::vector<double> orbit{sv};
                for (long i = 0; i < *n; ++i) {
                    const auto st = f.section_state(sv);
                    csv.row(i, st.x1, st.x3, "slope", st.sigma1, st.sigma3, std::nan(""));
                    sv = f(sv);
                    orbit.push_back(sv);
                }
                c.art.write("orbit.csv", csv.str());
                if (*table > 0) {
                    Csv t("s,f");
                    for (int i = 0; i < *table; ++i) {
                        const double x = (i + 0.5) / *table;
                        t.row(x, f(x));
                    }
                    c.art.write("map.csv", t.str());
                }
                c.art.summary("orbit", {{"command", "return-map"}, {"alpha", geo.alpha}, {"phi", geo.phi}, {"L", geo.dom.length()},
                                        {"iterations", *n}, {"final", orbit.back()}});
            }};
}

Command cmd_rotation(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("rotation", "rotation number of the return map");
    add_globals(s, g);
    auto o = std::make_shared<RayOpts>();
    auto n = std::make_shared<long>(1000);
    add_ray_opts(s, *o);
    s->add_option("--n", *n, "orbit length");
    return {s, [=](Ctx& c) {
                const auto geo = geometry(c, *o);
                raydyn::ReturnMap f(geo.dom, geo.phi);
                std::mt19937_64 rng(c.g.seed);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const double a = u(rng), b = u(rng);
                const auto r = raydyn::rotation_number(f, *n, a, b);
                json j{{"command", "rotation"}, {"alpha", geo.alpha}, {"phi", geo.phi}, {"L", geo.dom.length()},
                       {"c", a}, {"cprime", b}, {"rho_n", r.rho_n}, {"rho_2n", r.rho_2n}, {"error", r.error},
                       {"converged", r.converged}, {"n", r.n}};
                if (auto q = raydyn::identify_rational(r.rho_2n, c.tol_or(2.0 / *n))) j["rational"] = std::to_string(q->p) + "/" + std::to_string(q->q);
                c.art.summary("rotation", j);
            }};
}

Command cmd_lyapunov(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("lyapunov", "Lyapunov exponent of the return map");
    add_globals(s, g);
    auto o = std::make_shared<RayOpts>();
    auto n = std::make_shared<long>(1000);
    auto s0 = std::make_shared<double>(0.25);
    auto transient = std::make_shared<long>(200);
    add_ray_opts(s, *o);
    s->add_option("--n", *n);
    s->add_option("--s0", *s0);
    s->add_option("--transient", *transient);
    return {s, [=](Ctx& c) {
                const auto geo = geometry(c, *o);
                raydyn::ReturnMap f(geo.dom, geo.phi);
                double x = *s0;
                for (long i = 0; i < *transient; ++i) x = f(x);
                const auto r = raydyn::lyapunov_exponent(f, *n, x);
                c.art.summary("lyapunov", {{"command", "lyapunov"}, {"alpha", geo.alpha}, {"phi", geo.phi}, {"L", geo.dom.length()},
                                           {"lyapunov", jnum(r.value)}, {"samples", r.samples}, {"flagged", r.flagged}});
            }};
}

std::vector<double> linspace(double a, double b, int n) {
    if (n < 1) throw UsageError("grid sizes must be positive");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

Command cmd_bifurcation(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("bifurcation", "rotation/Lyapunov sweep over (alpha, phi)");
    add_globals(s, g);
    struct O {
        double amin = 0, amax = 0, pmin = 0, pmax = 0, L = 6;
        int na = 50, np = 50;
        long n = 1000, transient = 200;
        unsigned threads = 0;
    };
    auto o = std::make_shared<O>();
    s->add_option("--alpha-min", o->amin)->required();
    s->add_option("--alpha-max", o->amax)->required();
    s->add_option("--phi-min", o->pmin)->required();
    s->add_option("--phi-max", o->pmax)->required();
    s->add_option("--na", o->na);
    s->add_option("--np", o->np);
    s->add_option("--L", o->L);
    s->add_option("--n", o->n);
    s->add_option("--transient", o->transient);
    s->add_option("--threads", o->threads);
    return {s, [=](Ctx& c) {
                const auto A = linspace(c.angle(o->amin), c.angle(o->amax), o->na);
                const auto P = linspace(c.angle(o->pmin), c.angle(o->pmax), o->np);
                raydyn::SweepConfig cfg;
                cfg.L = o->L;
                cfg.n_iter = o->n;
                cfg.n_transient = o->transient;
                cfg.seed = c.g.seed;
                cfg.threads = o->threads;
                const auto res = raydyn::bifurcation_sweep(A, P, cfg);
                Csv csv("alpha,phi,rho,rho_err,lyapunov,class");
                std::vector<double> grid(res.cells.size());
                for (std::size_t k = 0; k < res.cells.size(); ++k) {
                    const auto& cell = res.cells[k];
                    csv.row(cell.alpha, cell.phi, cell.rho, cell.rho_err, cell.lyapunov, raydyn::cell_class_name(cell.cls));
                    grid[k] = cell.lyapunov;
                }
                c.art.write("sweep.csv", csv.str());
                c.art.write("sweep.svg", svg::emit_grid(P, A, grid, {"Lyapunov exponent over (phi, alpha)"}));
                const auto plateaus = raydyn::detect_plateaus(res, c.tol_or(2.0 / o->n));
                json pl = json::array();
                for (const auto& p : plateaus)
                    if (p.cells.size() >= 2) pl.push_back({{"rho", std::to_string(p.value.p) + "/" + std::to_string(p.value.q)}, {"cells", p.cells.size()}});
                std::map<std::string, int> counts;
                for (const auto& cell : res.cells) ++counts[raydyn::cell_class_name(cell.cls)];
                c.art.summary("sweep", {{"command", "bifurcation"}, {"L", o->L}, {"na", o->na}, {"np", o->np}, {"classes", counts}, {"plateaus", pl}});
            }};
}

// ---------------------------------------------------------------- hamflow

Command cmd_toymodel(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("toymodel", "integrate the toy Hamiltonian and compare with the closed form");
    add_globals(s, g);
    struct O {
        double lambda = 1, x0 = 0, y0 = 0.5, xi0 = 0.2, eta0 = 1, t = 10, dt = 1e-3;
        long every = 100;
    };
    auto o = std::make_shared<O>();
    s->add_option("--lambda", o->lambda);
    s->add_option("--x0", o->x0);
    s->add_option("--y0", o->y0);
    s->add_option("--xi0", o->xi0);
    s->add_option("--eta0", o->eta0);
    s->add_option("--t", o->t);
    s->add_option("--dt", o->dt);
    s->add_option("--every", o->every, "write every n-th step");
    return {s, [=](Ctx& c) {
                const auto h = hamflow::toy_symbol(o->lambda);
                hamflow::PhasePoint z0{{o->x0, o->y0}, {o->xi0, o->eta0}};
                const auto tr = hamflow::flow_integrate(h, z0, o->t, o->dt, o->every);
                hamflow::ToyModel toy{o->lambda};
                Csv csv("t,x1,x2,p1,p2,h");
                double dev = 0;
                for (std::size_t i = 0; i < tr.t.size(); ++i) {
                    const auto& z = tr.z[i];
                    csv.row(tr.t[i], z.x[0], z.x[1], z.p[0], z.p[1], h(z));
                    const auto e = toy.flow({o->x0, o->y0, o->xi0, o->eta0}, tr.t[i]);
                    dev = std::max({dev, std::abs(e.x - z.x[0]), std::abs(e.y - z.x[1]), std::abs(e.xi - z.p[0]), std::abs(e.eta - z.p[1])});
                }
                c.art.write("trajectory.csv", csv.str());
                const double T = toy.turn_time({o->x0, o->y0, o->xi0, o->eta0});
                const auto after = toy.flow({o->x0, o->y0, o->xi0, o->eta0}, T);
                const auto pm = toy.poincare(o->y0, o->eta0);
                c.art.summary("trajectory", {{"command", "toymodel"}, {"lambda", o->lambda}, {"samples", tr.t.size()},
                                             {"max_closed_form_deviation", dev}, {"turn_time", T},
                                             {"poincare", {pm.first, pm.second}}, {"flow_after_turn", {after.y, after.eta}}});
            }};
}

Command cmd_escape(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("escape-check", "positivity of the escape-function bracket on the energy shell");
    add_globals(s, g);
    struct O {
        double lambda = 1, k = 1, omega0 = 0;
        int nx = 100, ny = 100;
        std::string model = "cylinder";
    };
    auto o = std::make_shared<O>();
    s->add_option("--lambda", o->lambda);
    s->add_option("--k", o->k, "plateau half-width");
    s->add_option("--omega0", o->omega0, "shell level");
    s->add_option("--nx", o->nx);
    s->add_option("--ny", o->ny);
    s->add_option("--model", o->model)->check(CLI::IsMember({"cylinder", "toy"}));
    return {s, [=](Ctx& c) {
                const bool cyl = o->model == "cylinder";
                const auto h = cyl ? hamflow::cylinder_symbol(o->lambda) : hamflow::toy_symbol(o->lambda);
                const auto field = cyl ? hamflow::cylinder_escape(o->lambda, o->k) : hamflow::local_escape(o->lambda, o->k);
                const double ymax = cyl ? M_PI : field.pieces().front().bump.support;
                std::vector<hamflow::Vec2> pos;
                for (int i = 0; i < o->nx; ++i)
                    for (int j = 0; j < o->ny; ++j)
                        pos.emplace_back((i + 0.5) / o->nx, -ymax + 2 * ymax * (j + 0.5) / o->ny);
                const auto shell = hamflow::sample_shell(h, o->omega0, pos);
                const auto d = field.symbol();
                const auto rep = hamflow::escape_positivity(h, d, shell);
                double formula = 0;
                for (const auto& z : shell) formula = std::max(formula, std::abs(hamflow::poisson_bracket(h, d, z) - field.shell_bracket_formula(z)));
                c.art.summary("escape", {{"command", "escape-check"}, {"model", o->model}, {"lambda", o->lambda}, {"k", o->k},
                                         {"omega0", o->omega0}, {"min_bracket", rep.min_bracket},
                                         {"argmin", {rep.argmin.x[0], rep.argmin.x[1], rep.argmin.p[0], rep.argmin.p[1]}},
                                         {"n_samples", rep.n_samples}, {"positive", rep.positive}, {"max_formula_deviation", formula}});
            }};
}

// ---------------------------------------------------------------- normalform

Command cmd_normalform(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("normalform", "Koenigs chart and Nelson wave map residuals");
    add_globals(s, g);
    struct O {
        double mu = 0.5, c2 = 1.0, ymax = 0.1, lambda = 1.0, perturb = 0.1, T = 20;
        int ny = 21;
    };
    auto o = std::make_shared<O>();
    s->add_option("--mu", o->mu, "multiplier of P(y) = mu y + c2 y^2");
    s->add_option("--c2", o->c2);
    s->add_option("--ymax", o->ymax);
    s->add_option("--ny", o->ny);
    s->add_option("--lambda", o->lambda);
    s->add_option("--perturb", o->perturb, "amplitude of the y^2 sin x perturbation");
    s->add_option("--T", o->T, "initial horizon");
    return {s, [=](Ctx& c) {
                const double mu = o->mu, c2 = o->c2;
                auto P = [mu, c2](double y) { return mu * y + c2 * y * y; };
                Csv csv("y,h,residual");
                double worst = 0;
                for (double y : linspace(-o->ymax, o->ymax, o->ny)) {
                    const auto hy = normalform::koenigs_chart(P, mu, y);
                    const auto hp = normalform::koenigs_chart(P, mu, P(y));
                    const double r = std::abs(hp.value - mu * hy.value);
                    worst = std::max(worst, r);
                    csv.row(y, hy.value, r);
                }
                c.art.write("koenigs.csv", csv.str());
                const double lam = o->lambda, eps = o->perturb;
                normalform::CylinderField F{[lam, eps](const normalform::Vec2& q) {
                                                return normalform::Vec2(1.0, -lam * q[1] + eps * q[1] * q[1] * std::sin(q[0]));
                                            },
                                            lam};
                json pts = json::array();
                double inter = 0;
                const double tol = c.tol_or(1e-8);
                for (double x : {0.0, 1.0, 2.0})
                    for (double y : {-0.2, 0.1, 0.2}) {
                        const normalform::Vec2 q(x, y);
                        const auto W = normalform::nelson_wave_map(F, q, o->T, tol);
                        const auto Wq1 = normalform::nelson_wave_map(F, normalform::flow(F, q, 1.0), o->T, tol);
                        const double r = (Wq1.value - normalform::linear_flow(lam, W.value, 1.0)).norm();
                        inter = std::max(inter, r);
                        pts.push_back({{"q", {x, y}}, {"W", {W.value[0], W.value[1]}}, {"horizon", W.horizon}, {"gap", W.gap}, {"intertwining", r}});
                    }
                c.art.summary("normalform", {{"command", "normalform"}, {"mu", mu}, {"c2", c2}, {"max_conjugacy_residual", worst},
                                             {"lambda", lam}, {"perturb", eps}, {"max_intertwining_residual", inter}, {"wave_map", pts}});
            }};
}

Command cmd_cohomological(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("cohomological", "solve s(d_y + lambda d_s) a + (lambda n - ik) a = rho");
    add_globals(s, g);
    struct O {
        double lambda = 1;
        int n = 1, k = 0;
        std::string rho = "mixed";
        std::vector<double> y{-0.5, 0.0, 0.5}, s{0.1, 0.5, 1.0};
        double h = 1e-3;
    };
    auto o = std::make_shared<O>();
    s->add_option("--lambda", o->lambda);
    s->add_option("--order", o->n);
    s->add_option("--k", o->k);
    s->add_option("--rho", o->rho)->check(CLI::IsMember({"one", "y", "mixed"}));
    s->add_option("--y", o->y)->delimiter(',');
    s->add_option("--s", o->s)->delimiter(',');
    s->add_option("--fd-step", o->h, "finite-difference step for the residual");
    return {s, [=](Ctx& c) {
                normalform::Source rho;
                if (o->rho == "one") rho = [](double, double) { return cplx(1.0); };
                else if (o->rho == "y") rho = [](double y, double) { return cplx(y); };
                else rho = [](double y, double s) { return cplx(std::cos(y) * std::exp(-s), y * s); };
                const double tol = c.tol_or(1e-10), lam = o->lambda, h = o->h;
                auto alpha = [&](double y, double s) { return normalform::solve_cohomological(lam, o->n, o->k, rho, y, s, tol); };
                Csv csv("y,s,Re,Im,residual");
                double worst = 0;
                for (double y : o->y)
                    for (double sv : o->s) {
                        const cplx a = alpha(y, sv);
                        const cplx dy = (alpha(y + h, sv) - alpha(y - h, sv)) / (2 * h);
                        const cplx ds = (alpha(y, sv + h) - alpha(y, sv - h)) / (2 * h);
                        const double r = std::abs(sv * (dy + lam * ds) + cplx(lam * o->n, -o->k) * a - rho(y, sv));
                        worst = std::max(worst, r);
                        csv.row(y, sv, a.real(), a.imag(), r);
                    }
                c.art.write("cohomological.csv", csv.str());
                c.art.summary("cohomological", {{"command", "cohomological"}, {"lambda", lam}, {"order", o->n}, {"k", o->k},
                                                {"rho", o->rho}, {"step", h}, {"max_residual", worst}});
            }};
}

// ---------------------------------------------------------------- quasires

quasires::ForcingProfile forcing(const std::string& name) {
    if (name == "gauss") return quasires::ForcingProfile([](double x) { return cplx(std::exp(-x * x)); });
    if (name == "xi2gauss") return quasires::ForcingProfile([](double x) { return cplx(x * x * std::exp(-x * x)); });
    throw UsageError("unknown forcing '" + name + "'");
}

Command cmd_amplitude(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("quasires-amplitude", "amplitude observable and its limiting value");
    add_globals(s, g);
    struct O {
        double omega0 = 1;
        std::vector<double> t{50, 100, 200};
        std::string f = "xi2gauss", w = "gauss";
    };
    auto o = std::make_shared<O>();
    s->add_option("--omega0", o->omega0);
    s->add_option("--t", o->t)->delimiter(',');
    s->add_option("--forcing", o->f)->check(CLI::IsMember({"gauss", "xi2gauss"}));
    s->add_option("--weight", o->w)->check(CLI::IsMember({"gauss", "xi2gauss"}));
    return {s, [=](Ctx& c) {
                const auto f = forcing(o->f), w = forcing(o->w);
                Csv csv("t,Re(A),Im(A),Re(limit),Im(limit),t_err");
                json rows = json::array();
                cplx limit;
                for (double t : o->t) {
                    const auto a = quasires::amplitude_observable(f, w, o->omega0, t);
                    limit = a.predicted;
                    const double te = t * std::abs(a.value - a.predicted);
                    csv.row(t, a.value.real(), a.value.imag(), a.predicted.real(), a.predicted.imag(), te);
                    rows.push_back({{"t", t}, {"value", jcplx(a.value)}, {"t_err", te}});
                }
                c.art.write("amplitude.csv", csv.str());
                c.art.summary("amplitude", {{"command", "quasires-amplitude"}, {"omega0", o->omega0}, {"forcing", o->f}, {"weight", o->w},
                                            {"limit", jcplx(limit)}, {"samples", rows}});
            }};
}

Command cmd_energy(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("quasires-energy", "energy observable and its linear growth rate");
    add_globals(s, g);
    struct O {
        double omega0 = 1;
        std::vector<double> t{50, 75, 100, 125, 150, 175, 200};
        std::string f = "gauss";
    };
    auto o = std::make_shared<O>();
    s->add_option("--omega0", o->omega0);
    s->add_option("--t", o->t)->delimiter(',');
    s->add_option("--forcing", o->f)->check(CLI::IsMember({"gauss", "xi2gauss"}));
    return {s, [=](Ctx& c) {
                const auto f = forcing(o->f);
                Csv csv("t,energy");
                std::vector<double> e;
                for (double t : o->t) {
                    e.push_back(quasires::energy_observable(f, o->omega0, t));
                    csv.row(t, e.back());
                }
                c.art.write("energy.csv", csv.str());
                const auto fit = quasires::least_squares_line(o->t, e);
                const double G = quasires::energy_density(f, o->omega0);
                c.art.summary("energy", {{"command", "quasires-energy"}, {"omega0", o->omega0}, {"forcing", o->f},
                                         {"fitted_slope", fit.slope}, {"predicted_slope", M_PI * G},
                                         {"half_rate_slope", 0.5 * M_PI * G}, {"G", G}, {"max_residual", fit.max_residual}});
            }};
}

Command cmd_oscint(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("oscint", "decompose I(t) = I_inf + b(t) + eps(t)");
    add_globals(s, g);
    struct O {
        std::string kase = "mixed";
        std::vector<double> t{10, 100, 1000};
    };
    auto o = std::make_shared<O>();
    s->add_option("--case", o->kase)->check(CLI::IsMember({"atom", "box", "mixed"}));
    s->add_option("--t", o->t)->delimiter(',');
    return {s, [=](Ctx& c) {
                quasires::SpectralMeasure nu;
                auto one = [] {
                    quasires::VecC v(1);
                    v[0] = 1.0;
                    return v;
                };
                if (o->kase != "atom") {
                    nu.density = [one](double) { return one(); };
                    nu.lo = -1;
                    nu.hi = 1;
                }
                if (o->kase == "atom") nu.atoms.push_back({1.0, one()});
                if (o->kase == "mixed") nu.atoms.push_back({2.0, one() * 0.5});
                const auto d = quasires::decompose_oscillating_integral(nu, o->t, 0.0, c.tol_or(1e-10));
                Csv csv("t,Re(I),Im(I),Re(b),Im(b),abs(eps),energy");
                std::vector<double> en;
                for (std::size_t i = 0; i < d.t.size(); ++i) {
                    const cplx I = d.I[i][0], b = d.b[i][0];
                    en.push_back(std::norm(I));
                    csv.row(d.t[i], I.real(), I.imag(), b.real(), b.imag(), std::abs(d.eps[i][0]), en.back());
                }
                c.art.write("oscint.csv", csv.str());
                json j{{"command", "oscint"}, {"case", o->kase}, {"I_inf", jcplx(d.I_inf[0])}, {"cut", d.cut}};
                json eps = json::array();
                for (std::size_t i = 0; i < d.t.size(); ++i) eps.push_back({{"t", d.t[i]}, {"abs_eps", std::abs(d.eps[i][0])}, {"abs_ac_tail", std::abs(d.ac_tail[i][0])}});
                j["eps"] = eps;
                if (d.t.size() >= 2) {
                    j["fitted_slope"] = quasires::least_squares_line(d.t, en).slope;
                    j["predicted_slope"] = 0.0;  // |I(t)|^2 stays bounded
                }
                c.art.summary("oscint", j);
            }};
}

// ---------------------------------------------------------------- torus

std::vector<double> parse_vector(const std::vector<double>& v, int dim, const char* what) {
    if (static_cast<int>(v.size()) != dim) throw UsageError(std::string(what) + " needs exactly --dim components");
    return v;
}

template <int D>
torus::RVec<D> to_rvec(const std::vector<double>& v) {
    torus::RVec<D> r{};
    for (int i = 0; i < D; ++i) r[i] = v[i];
    return r;
}

template <int D>
void torus_evolve(Ctx& c, const std::vector<double>& Yv, int nmax, const std::string& kind, const std::vector<double>& times) {
    const auto Y = to_rvec<D>(Yv);
    const auto h = torus::LatticeSymbol<D>::linear(Y);
    torus::ModeSet<D> f;
    torus::Lattice<D> n{};
    for (int i = 0; i < D; ++i) n[i] = -nmax;
    while (true) {
        if (!torus::is_zero<D>(n)) {
            const double r = torus::norm<D>(n);
            const bool ker = std::abs(h(n)) <= torus::resonance_tol;
            if (kind == "decay" || ker) f.set(n, std::pow(1.0 + r * r, -1.5));
        }
        int i = D - 1;
        while (i >= 0 && n[i] == nmax) n[i--] = -nmax;
        if (i < 0) break;
        ++n[i];
    }
    const auto f0 = torus::kernel_projection(h, f);
    double bound = 0;
    for (const auto& [m, a] : f.modes())
        if (std::abs(h(m)) > torus::resonance_tol) bound += std::norm(2.0 * a / h(m));
    bound = std::sqrt(bound);
    Csv csv("t,norm_u,norm_dev,bound");
    json rows = json::array();
    double sup = 0;
    for (double t : times) {
        const auto u = torus::evolve_forced(h, f, t);
        const double dev = (u - f0 * cplx(0.0, t)).norm();
        sup = std::max(sup, dev);
        csv.row(t, u.norm(), dev, bound);
        rows.push_back({{"t", t}, {"norm_u", u.norm()}, {"norm_dev", dev}});
    }
    c.art.write("torus.csv", csv.str());
    c.art.summary("torus", {{"command", "torus-evolve"}, {"dim", D}, {"modes", f.size()}, {"kernel_modes", f0.size()},
                            {"kernel_norm", f0.norm()}, {"deviation_bound", bound}, {"sup_deviation", sup}, {"samples", rows}});
}

Command cmd_torus(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("torus-evolve", "forced evolution for h(n) = Y.n/|n| on the torus");
    add_globals(s, g);
    struct O {
        int dim = 2, nmax = 20;
        std::vector<double> Y{1.0, 0.0};
        std::string forcing = "decay";
        std::vector<double> t{100, 250, 500, 750, 1000};
    };
    auto o = std::make_shared<O>();
    s->add_option("--dim", o->dim)->check(CLI::Range(1, 3));
    s->add_option("--Y", o->Y)->delimiter(',');
    s->add_option("--nmax", o->nmax, "modes with |n|_inf <= nmax");
    s->add_option("--forcing", o->forcing)->check(CLI::IsMember({"decay", "kernel"}));
    s->add_option("--t", o->t)->delimiter(',');
    return {s, [=](Ctx& c) {
                const auto Y = parse_vector(o->Y, o->dim, "--Y");
                if (o->nmax < 1) throw UsageError("--nmax must be positive");
                switch (o->dim) {
                    case 1: torus_evolve<1>(c, Y, o->nmax, o->forcing, o->t); break;
                    case 2: torus_evolve<2>(c, Y, o->nmax, o->forcing, o->t); break;
                    default: torus_evolve<3>(c, Y, o->nmax, o->forcing, o->t); break;
                }
            }};
}

template <int D>
void diophantine(Ctx& c, const std::vector<double>& Yv, double N) {
    const auto Y = to_rvec<D>(Yv);
    const auto st = torus::diophantine_stats<D>(torus::LatticeSymbol<D>::linear(Y), Y, N);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json hm = json::array(), hm2 = json::array(), ym = json::array(), ym2 = json::array();
    for (double v : st.h_min) hm.push_back(v);
    for (double v : st.h_min_2N) hm2.push_back(v);
    for (double v : st.Y_min) ym.push_back(v);
    for (double v : st.Y_min_2N) ym2.push_back(v);
    Csv csv("exponent,h_min,h_min_2N,Y_min,Y_min_2N");
    for (std::size_t i = 0; i < st.alpha_grid.size(); ++i) csv.row(st.alpha_grid[i], st.h_min[i], st.h_min_2N[i], st.Y_min[i], st.Y_min_2N[i]);
    c.art.write("diophantine.csv", csv.str());
    c.art.summary("diophantine", {{"n_max", st.n_max}, {"alpha_grid", st.alpha_grid}, {"h_min", hm}, {"beta_grid", st.beta_grid},
                                  {"Y_min", ym}, {"h_min_2N", hm2}, {"Y_min_2N", ym2}, {"alpha_star", opt(st.alpha_star)},
                                  {"beta_star", opt(st.beta_star)}});
}

Command cmd_diophantine(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("diophantine", "small-denominator statistics of Y.n");
    add_globals(s, g);
    struct O {
        int dim = 2;
        std::vector<double> Y{1.0, std::sqrt(2.0)};
        double N = 1000;
    };
    auto o = std::make_shared<O>();
    s->add_option("--dim", o->dim)->check(CLI::Range(1, 3));
    s->add_option("--Y", o->Y)->delimiter(',');
    s->add_option("--N", o->N, "scan radius (the 2N ball is scanned too)");
    return {s, [=](Ctx& c) {
                const auto Y = parse_vector(o->Y, o->dim, "--Y");
                switch (o->dim) {
                    case 1: diophantine<1>(c, Y, o->N); break;
                    case 2: diophantine<2>(c, Y, o->N); break;
                    default: diophantine<3>(c, Y, o->N); break;
                }
            }};
}

// ---------------------------------------------------------------- profile

profile::ProfileCoefficients parse_coeffs(double lambda, const std::vector<std::string>& items) {
    profile::ProfileCoefficients pc;
    pc.lambda = lambda;
    for (const auto& it : items) {
        std::istringstream is(it);
        std::string a, b, c;
        std::getline(is, a, ':');
        std::getline(is, b, ':');
        std::getline(is, c, ':');
        try {
            pc.v[std::stoi(a)] = cplx(b.empty() ? 1.0 : std::stod(b), c.empty() ? 0.0 : std::stod(c));
        } catch (const std::exception&) {
            throw UsageError("coefficient '" + it + "' is not of the form k:re[:im]");
        }
    }
    return pc;
}

Command cmd_profile(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("profile-synthesize", "synthesize sum v_k (y + i eps)^{-1+ik/lambda} e^{ikx}");
    add_globals(s, g);
    struct O {
        double lambda = 1, eps = 0.05, ymin = -1, ymax = 1, eta_max = 10;
        int nx = 16, ny = 101, neta = 50;
        std::vector<std::string> coeffs{"0:1"};
    };
    auto o = std::make_shared<O>();
    s->add_option("--lambda", o->lambda);
    s->add_option("--coeffs", o->coeffs, "k:re[:im] list")->delimiter(',');
    s->add_option("--eps", o->eps);
    s->add_option("--nx", o->nx);
    s->add_option("--ny", o->ny);
    s->add_option("--ymin", o->ymin);
    s->add_option("--ymax", o->ymax);
    s->add_option("--eta-max", o->eta_max);
    s->add_option("--neta", o->neta);
    return {s, [=](Ctx& c) {
                const auto pc = parse_coeffs(o->lambda, o->coeffs);
                std::vector<double> xs(o->nx);
                for (int i = 0; i < o->nx; ++i) xs[i] = 2 * M_PI * i / o->nx;
                const auto ys = linspace(o->ymin, o->ymax, o->ny);
                const auto field = profile::synthesize_uinfty(pc, xs, ys, o->eps);
                Csv csv("x,y,Re(u),Im(u)");
                for (std::size_t i = 0; i < xs.size(); ++i)
                    for (std::size_t j = 0; j < ys.size(); ++j) csv.row(xs[i], ys[j], field.at(i, j).real(), field.at(i, j).imag());
                c.art.write("field.csv", csv.str());
                Csv eta("k,eta,Re,Im");
                for (const auto& [k, v] : pc.v)
                    for (double e : linspace(o->eta_max / o->neta, o->eta_max, o->neta)) {
                        const cplx z = profile::ModeProfile{pc.lambda, k, v}.eta_rep(0.0, e);
                        eta.row(k, e, z.real(), z.imag());
                    }
                c.art.write("eta.csv", eta.str());
                const auto gv = profile::growth_check(pc);
                c.art.summary("profile", {{"command", "profile-synthesize"}, {"lambda", pc.lambda}, {"modes", pc.v.size()}, {"eps", o->eps},
                                          {"admissible", gv.admissible}, {"m", gv.m}, {"C", gv.C}});
            }};
}

Command cmd_gamma(CLI::App& root, Globals& g) {
    auto s = root.add_subcommand("gamma-check", "|Gamma(1 - i alpha)| identity and the power-law Fourier transform");
    add_globals(s, g);
    struct O {
        double amin = 0.1, amax = 10, ft_alpha = 1;
        int n = 100;
        std::vector<double> eta{1, 2, 5, 10}, eps{0.01, 0.005, 0.0025};
    };
    auto o = std::make_shared<O>();
    s->add_option("--alpha-min", o->amin);
    s->add_option("--alpha-max", o->amax);
    s->add_option("--n", o->n);
    s->add_option("--ft-alpha", o->ft_alpha);
    s->add_option("--eta", o->eta)->delimiter(',');
    s->add_option("--eps", o->eps)->delimiter(',');
    return {s, [=](Ctx& c) {
                Csv csv("alpha,closed_form,lanczos,rel_err");
                double worst = 0;
                for (double a : linspace(o->amin, o->amax, o->n)) {
                    const double cf = profile::gamma_magnitude(a), lz = std::abs(profile::complex_gamma(cplx(1.0, -a)));
                    const double r = std::abs(cf - lz) / lz;
                    worst = std::max(worst, r);
                    csv.row(a, cf, lz, r);
                }
                c.art.write("gamma.csv", csv.str());
                const auto ft = profile::ft_power_law(o->ft_alpha, o->eta, o->eps);
                Csv f("eta,Re,Im,Re_closed,Im_closed,rel_err");
                double ftw = 0;
                for (const auto& smp : ft) {
                    f.row(smp.eta, smp.limit.real(), smp.limit.imag(), smp.closed_form.real(), smp.closed_form.imag(), smp.rel_error);
                    ftw = std::max(ftw, smp.rel_error);
                }
                c.art.write("ft.csv", f.str());
                c.art.summary("gamma", {{"command", "gamma-check"}, {"max_rel_err", worst}, {"ft_alpha", o->ft_alpha}, {"ft_max_rel_err", ftw}});
            }};
}

// ---------------------------------------------------------------- driver

std::vector<std::string> with_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = "--" + trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        bool given = false;
        for (const auto& a : args)
            if (a == key || a.rfind(key + "=", 0) == 0) given = true;
        if (given) continue;
        if (key == "--degrees") {
            if (value == "true" || value == "1") args.push_back(key);
        } else {
            args.push_back(key + "=" + value);
        }
    }
    return args;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    Globals g;
    CLI::App app{"degzero: internal-wave attractors and degree-zero dynamics"};
    app.require_subcommand(1);
    std::vector<Command> cmds{cmd_trace(app, g),       cmd_return_map(app, g), cmd_rotation(app, g),     cmd_lyapunov(app, g),
                              cmd_bifurcation(app, g), cmd_toymodel(app, g),   cmd_escape(app, g),       cmd_normalform(app, g),
                              cmd_cohomological(app, g), cmd_amplitude(app, g), cmd_energy(app, g),      cmd_oscint(app, g),
                              cmd_torus(app, g),       cmd_diophantine(app, g), cmd_profile(app, g),     cmd_gamma(app, g)};
    try {
        args = with_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        for (auto& cmd : cmds)
            if (cmd.app->parsed()) {
                Ctx ctx{g, Artifacts(g, out)};
                cmd.run(ctx);
            }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << '\n';
        return exit_domain;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return exit_ok;
}

}  // namespace degzero::cli
