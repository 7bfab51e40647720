#include "chb/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <unistd.h>

namespace chb {

namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

std::string fixed(double x, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

template <class F>
CriterionResult timed(int id, std::string name, F&& body) {
    CriterionResult r;
    r.id = id;
    r.name = std::move(name);
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

FaceCoefficients analytic_faces(const Grid& g, const std::function<double(double, double)>& k) {
    FaceCoefficients c;
    c.x.resize(static_cast<std::size_t>((g.nx + 1) * g.ny));
    c.y.resize(static_cast<std::size_t>(g.nx * (g.ny + 1)));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) c.x[static_cast<std::size_t>(i + (g.nx + 1) * j)] = k(i * g.hx, g.yc(j));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) c.y[static_cast<std::size_t>(i + g.nx * j)] = k(g.xc(i), j * g.hy);
    return c;
}

void fill_orders(ConvergenceTable& t) {
    for (std::size_t k = 1; k < t.rows.size(); ++k)
        t.rows[k].order = std::log2(t.rows[k - 1].error / t.rows[k].error);
}

double max_state_difference(const BrinkmanSolution& a, const BrinkmanSolution& b) {
    double m = 0.0;
    const auto &au = a.v.u_values(), &bu = b.v.u_values(), &aw = a.v.w_values(), &bw = b.v.w_values();
    for (std::size_t k = 0; k < au.size(); ++k) m = std::max(m, std::abs(au[k] - bu[k]));
    for (std::size_t k = 0; k < aw.size(); ++k) m = std::max(m, std::abs(aw[k] - bw[k]));
    for (std::size_t k = 0; k < a.p.size(); ++k) m = std::max(m, std::abs(a.p[k] - b.p[k]));
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double ledger_worst(const std::vector<BalanceLedger>& ledgers) {
    double w = 0.0;
    for (const auto& l : ledgers) w = std::max({w, std::abs(l.phi_residual), std::abs(l.sigma_residual)});
    return w;
}

}  // namespace

std::string format_result(const CriterionResult& r) {
    char head[96];
    std::snprintf(head, sizeof head, "[%s] %2d %s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
    return std::string(head) + ": " + r.detail + " (" + fixed(r.seconds, 1) + " s)";
}

std::vector<double> ConvergenceTable::orders() const {
    std::vector<double> o;
    for (std::size_t k = 1; k < rows.size(); ++k) o.push_back(rows[k].order);
    return o;
}

ConvergenceTable mms_neumann_poisson(const std::vector<int>& ns) {
    ConvergenceTable t;
    t.name = "neumann-poisson";
    auto k = [](double x, double y) { return 1.0 + 0.5 * x * y; };
    for (int n : ns) {
        Grid g = make_grid(1.0, 1.0, n, n);
        StencilOperator L = neumann_operator(g, analytic_faces(g, k));
        StencilOperator A{-L.matrix, true, "-div(k grad .)"};
        CellField f = sample(g, [&](double x, double y) {
            double u = std::cos(pi * x) * std::cos(pi * y);
            double ux = -pi * std::sin(pi * x) * std::cos(pi * y), uy = -pi * std::cos(pi * x) * std::sin(pi * y);
            return -(k(x, y) * (-2.0 * pi * pi * u) + 0.5 * y * ux + 0.5 * x * uy);
        });
        auto [u, rep] = solve_spd(A, f, g, {1e-12, 0.0, 100000, true});
        if (!rep.converged) throw std::runtime_error("mms_neumann_poisson: solver did not converge");
        CellField exact = sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
        const double shift = (integrate_cell(u, g) - integrate_cell(exact, g)) / g.area();
        CellField e = u - exact;
        for (auto& x : e.values()) x -= shift;
        t.rows.push_back({n, g.hx, l2_norm(e, g), 0.0});
    }
    fill_orders(t);
    return t;
}

ConvergenceTable mms_robin_diffusion(const std::vector<int>& ns) {
    ConvergenceTable t;
    t.name = "robin-diffusion";
    const double b = 1.0;
    auto k = [](double x, double y) { return 1.0 + 0.5 * x * y; };
    auto u = [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y) + x + y * y; };
    auto ux = [](double x, double y) { return -pi * std::sin(pi * x) * std::cos(pi * y) + 1.0; };
    auto uy = [](double x, double y) { return -pi * std::cos(pi * x) * std::sin(pi * y) + 2.0 * y; };
    for (int n : ns) {
        Grid g = make_grid(1.0, 1.0, n, n);
        // the wall flux k du/dn equals b (u_inf - u)
        EdgeTraces inf = EdgeTraces::constant(g, 0.0);
        for (int j = 0; j < g.ny; ++j) {
            double y = g.yc(j);
            inf.left[static_cast<std::size_t>(j)] = u(0.0, y) + k(0.0, y) * (-ux(0.0, y)) / b;
            inf.right[static_cast<std::size_t>(j)] = u(1.0, y) + k(1.0, y) * ux(1.0, y) / b;
        }
        for (int i = 0; i < g.nx; ++i) {
            double x = g.xc(i);
            inf.bottom[static_cast<std::size_t>(i)] = u(x, 0.0) + k(x, 0.0) * (-uy(x, 0.0)) / b;
            inf.top[static_cast<std::size_t>(i)] = u(x, 1.0) + k(x, 1.0) * uy(x, 1.0) / b;
        }
        RobinOperator R = robin_operator(g, analytic_faces(g, k), b, inf);
        StencilOperator A{identity(g.cells()) - R.linear.matrix, false, "I - div(k grad .) with Robin walls"};
        CellField f = sample(g, [&](double x, double y) {
            double lap = -2.0 * pi * pi * std::cos(pi * x) * std::cos(pi * y) + 2.0;
            return u(x, y) - (k(x, y) * lap + 0.5 * y * ux(x, y) + 0.5 * x * uy(x, y));
        });
        auto [uh, rep] = solve_general(A, f + R.source, g, {1e-12, 0.0, 100000, false});
        if (!rep.converged) throw std::runtime_error("mms_robin_diffusion: solver did not converge");
        CellField e = uh - sample(g, u);
        t.rows.push_back({n, g.hx, l2_norm(e, g), 0.0});
    }
    fill_orders(t);
    return t;
}

namespace {

Model self_convergence_model() {
    Model m{make_grid(1.0, 1.0, 32, 32), {}, {}, true};
    m.params.epsilon = 0.1;
    m.params.chi_phi = 0.05;
    m.params.b = 1.0;
    m.params.sigma_inf = {1.0, 1.0, 1.0, 1.0};
    m.spec.potential.kind = PotentialKind::QuadraticGrowth;
    m.spec.m = BoundedCoefficient::constant(0.01);
    m.spec.source.kind = SourceKind::Lima;
    m.spec.source.P = 0.5;
    m.spec.source.A = 0.1;
    m.spec.source.C = 0.2;
    m.spec.source.c_gamma_v = 0.5;
    return m;
}

}  // namespace

ConvergenceTable coupled_self_convergence(const std::vector<double>& dts, double horizon) {
    if (dts.size() < 3) throw std::invalid_argument("coupled_self_convergence: need at least three time steps");
    ConvergenceTable t;
    t.name = "coupled-dt";
    Model m = self_convergence_model();
    CellField phi0 = tanh_disc(m.grid, 0.5, 0.5, 0.3, m.params.epsilon);
    State s0 = initial_state(phi0, nutrient_equilibrium(phi0, 1.0, m.params), m);
    s0 = relax_initial_state(s0, m, 2e-3, 200);
    std::vector<State> finals;
    for (double dt : dts) {
        SchemeOptions o;
        o.dt = dt;
        RunOptions ro;
        ro.steps = static_cast<int>(std::llround(horizon / dt));
        ro.diagnostics = false;
        RunResult r = run(s0, o, m, ro);
        if (!r.completed) throw std::runtime_error("coupled_self_convergence: " + r.failure);
        finals.push_back(r.final_state);
    }
    for (std::size_t k = 0; k + 1 < finals.size(); ++k) {
        double e = std::hypot(l2_norm(finals[k].phi - finals[k + 1].phi, m.grid),
                              l2_norm(finals[k].sigma - finals[k + 1].sigma, m.grid));
        t.rows.push_back({static_cast<int>(std::llround(horizon / dts[k])), dts[k], e, 0.0});
    }
    fill_orders(t);
    return t;
}

DecayStudy gradient_flow_decay(int n, int steps, double dt) {
    Model m{make_grid(1.0, 1.0, n, n), {}, {}, false};
    m.params.epsilon = 0.05;
    m.params.chi_phi = 0.0;
    m.params.b = 0.0;
    SchemeOptions o;
    o.dt = dt;
    o.s = 2.0;
    State s0 = initial_state(cosine_perturbation(m.grid, 0.0, 0.1, 3), CellField(m.grid, 0.5), m, o);
    RunOptions ro;
    ro.steps = steps;
    ro.diagnostics = false;
    RunResult r = run(s0, o, m, ro);
    DecayStudy d;
    d.completed = r.completed;
    d.failure = r.failure;
    d.steps = static_cast<int>(r.rows.size()) - 1;
    d.worst_increase = -INFINITY;
    for (std::size_t k = 1; k < r.rows.size(); ++k)
        d.worst_increase = std::max(d.worst_increase, (r.rows[k].energy - r.rows[k - 1].energy) /
                                                          std::max(1.0, std::abs(r.rows[k - 1].energy)));
    return d;
}

Model coupled_budget_model(int n) {
    Model m{make_grid(1.0, 1.0, n, n), {}, {}, true};
    m.params.epsilon = 0.05;
    m.params.chi_phi = 0.05;
    m.params.chi_sigma = 1.0;
    m.params.b = 1.0;
    m.params.sigma_inf = {1.0, 1.0, 1.0, 1.0};
    m.spec.potential.kind = PotentialKind::QuadraticGrowth;
    m.spec.m = BoundedCoefficient::constant(0.01);
    m.spec.n = BoundedCoefficient::constant(1.0);
    m.spec.source.kind = SourceKind::Lima;
    m.spec.source.P = 0.05;
    m.spec.source.A = 0.025;
    m.spec.source.C = 0.05;
    m.spec.source.c_gamma_v = 0.5;
    return m;
}

State coupled_budget_initial(const Model& m) {
    CellField phi0 = tanh_disc(m.grid, 0.5, 0.5, 0.25, m.params.epsilon);
    State s = initial_state(phi0, nutrient_equilibrium(phi0, 1.0, m.params), m);
    return relax_initial_state(s, m, 2e-3, 500);
}

BudgetStudy energy_budget_study(double dt, double horizon, int n) {
    Model m = coupled_budget_model(n);
    State s0 = coupled_budget_initial(m);
    BudgetStudy st;
    for (double h : {dt, 0.5 * dt}) {
        SchemeOptions o;
        o.dt = h;
        RunOptions ro;
        ro.steps = static_cast<int>(std::llround(horizon / h));
        BudgetRun br;
        br.dt = h;
        br.result = run(initial_state(s0.phi, s0.sigma, m, o), o, m, ro);
        if (!br.result.completed) throw std::runtime_error("energy_budget_study: " + br.result.failure);
        for (const auto& b : br.result.budgets)
            br.max_relative = std::max(br.max_relative, std::abs(b.residual) / std::max(1.0, std::abs(b.E_after)));
        st.runs.push_back(std::move(br));
    }
    st.ratio = st.runs[0].max_relative / st.runs[1].max_relative;
    return st;
}

Model galerkin_reference_model() {
    Model m{make_grid(1.0, 1.0, 32, 32), {}, {}, true};
    m.params.epsilon = 0.1;
    m.params.chi_phi = 0.1;
    m.params.b = 1.0;
    m.params.sigma_inf = {1.0, 1.0, 1.0, 1.0};
    m.spec.m = BoundedCoefficient::constant(0.05);
    m.spec.potential.kind = PotentialKind::QuadraticGrowth;
    m.spec.source.kind = SourceKind::Lima;
    m.spec.source.P = 0.5;
    m.spec.source.A = 0.1;
    m.spec.source.C = 0.5;
    m.spec.source.c_gamma_v = 0.5;
    return m;
}

std::pair<CellField, CellField> galerkin_reference_data(const Grid& g) {
    CellField phi0 = sample(g, [](double x, double y) {
        return 0.5 * std::cos(pi * x) * std::cos(pi * y) + 0.3 * std::cos(2.0 * pi * x) - 0.2;
    });
    CellField sigma0 = sample(g, [](double, double y) { return 0.8 + 0.2 * std::cos(pi * y); });
    return {phi0, sigma0};
}

std::vector<OracleRow> brinkman_oracle_comparison(std::uint64_t seed, const std::vector<int>& ns, int trials) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<OracleRow> rows;
    for (int n : ns) {
        Grid g = make_grid(1.0, 1.0, n, n);
        for (int trial = 0; trial < trials; ++trial) {
            BrinkmanProblem pb;
            pb.eta = CellField(g);
            pb.lambda = CellField(g);
            pb.gamma_v = CellField(g);
            pb.force = FaceField(g);
            pb.nu = 0.2 + 2.0 * U(rng);
            // eta in [eta0, eta1] and 0 <= lambda <= lambda0 cell by cell
            const double eta0 = 0.1 + U(rng), eta1 = eta0 + 3.0 * U(rng), lambda0 = 2.0 * U(rng);
            for (std::size_t k = 0; k < pb.eta.size(); ++k) {
                pb.eta[k] = eta0 + (eta1 - eta0) * U(rng);
                pb.lambda[k] = lambda0 * U(rng);
                pb.gamma_v[k] = 2.0 * U(rng) - 1.0;
            }
            for (auto& x : pb.force.u_values()) x = 2.0 * U(rng) - 1.0;
            for (auto& x : pb.force.w_values()) x = 2.0 * U(rng) - 1.0;
            BrinkmanSolution kry = solve_brinkman(pb, g);
            BrinkmanSolution dense = dense_oracle_solve(pb, g);
            rows.push_back({n, trial, max_state_difference(kry, dense), kry.div_residual, kry.iterations, kry.converged});
        }
    }
    return rows;
}

CriterionResult check_brinkman_oracle() {
    return timed(1, "Brinkman oracle equivalence", [](CriterionResult& r) {
        auto rows = brinkman_oracle_comparison(20240611, {6, 8, 12}, 10);
        double diff = 0.0, div = 0.0;
        bool conv = true;
        for (const auto& row : rows) {
            diff = std::max(diff, row.max_difference);
            div = std::max(div, row.div_residual);
            conv = conv && row.converged;
        }
        r.passed = conv && diff <= 1e-8 && div <= 1e-9;
        r.detail = std::to_string(rows.size()) + " random problems on 6/8/12 grids, max |krylov - dense| = " +
                   sci(diff) + " (<= 1e-8), max div residual = " + sci(div) + " (<= 1e-9)";
    });
}

CriterionResult check_constant_force() {
    return timed(2, "constant-force Brinkman exactness", [](CriterionResult& r) {
        double worst = 0.0;
        int cases = 0;
        bool conv = true;
        for (int n : {8, 16, 32})
            for (auto [c, eta, lambda, nu] : {std::array{1.0, 1.0, 0.0, 1.0}, std::array{1.5, 0.8, 0.3, 2.5},
                                              std::array{-0.7, 3.0, 1.0, 0.4}}) {
                Grid g = make_grid(1.0, 1.0, n, n);
                BrinkmanProblem pb;
                pb.eta = CellField(g, eta);
                pb.lambda = CellField(g, lambda);
                pb.gamma_v = CellField(g);
                pb.force = FaceField(g);
                pb.nu = nu;
                for (auto& x : pb.force.u_values()) x = c;
                BrinkmanSolution s = solve_brinkman(pb, g);
                conv = conv && s.converged;
                for (double x : s.v.u_values()) worst = std::max(worst, std::abs(x - c / nu));
                for (double x : s.v.w_values()) worst = std::max(worst, std::abs(x));
                for (double x : s.p.values()) worst = std::max(worst, std::abs(x));
                ++cases;
            }
        r.passed = conv && worst <= 1e-10;
        r.detail = std::to_string(cases) + " cases, max |(v, p) - (c/nu, 0, 0)| = " + sci(worst) + " (<= 1e-10)";
    });
}

CriterionResult check_gradient_flow_decay() {
    return timed(3, "gradient-flow energy decay", [](CriterionResult& r) {
        DecayStudy d = gradient_flow_decay();
        r.passed = d.completed && d.steps == 500 && d.worst_increase <= 1e-12;
        r.detail = "64x64, dt=1e-3, " + std::to_string(d.steps) + " steps, max (E^{n+1}-E^n)/max(1,|E|) = " +
                   sci(d.worst_increase) + " (<= 1e-12)" + (d.completed ? "" : ", failed: " + d.failure);
        if (r.seconds > 60.0) r.passed = false;
    });
}

CriterionResult check_mass_ledgers(const BudgetStudy* budget) {
    return timed(4, "mass ledgers", [&](CriterionResult& r) {
        struct Case {
            std::string name;
            Model m;
            CellField phi0, sigma0;
        };
        std::vector<Case> cases;
        auto base = [](bool flow) {
            Model m{make_grid(1.0, 1.0, 32, 32), {}, {}, flow};
            m.params.epsilon = 0.1;
            m.spec.potential.kind = PotentialKind::QuadraticGrowth;
            return m;
        };
        {
            Model m = base(true);
            m.params.b = 1.0;
            m.params.chi_phi = 0.1;
            m.params.sigma_inf = {1.0, 0.5, 0.8, 0.2};
            m.spec.m = BoundedCoefficient::smooth(0.05, 0.5);
            m.spec.source.kind = SourceKind::Lima;
            m.spec.source.P = 1.0;
            m.spec.source.A = 0.2;
            m.spec.source.C = 0.5;
            m.spec.source.c_gamma_v = 0.5;
            cases.push_back({"lima+flow+robin", m, tanh_disc(m.grid, 0.4, 0.5, 0.25, 0.1), CellField(m.grid, 1.0)});
        }
        {
            Model m = base(true);
            m.params.b = 0.5;
            m.params.sigma_inf = {1.0, 1.0, 1.0, 1.0};
            m.spec.potential.kind = PotentialKind::Quartic;
            m.spec.source.kind = SourceKind::Hawkins;
            m.spec.source.p0 = 0.5;
            m.spec.source.rho_min_variant = true;
            m.spec.source.c_gamma_v = 0.3;
            cases.push_back({"hawkins+flow", m, cosine_perturbation(m.grid, 0.0, 0.4, 2), CellField(m.grid, 0.5)});
        }
        {
            Model m = base(false);
            m.spec.n = BoundedCoefficient::linear(0.5, 2.0);
            cases.push_back({"closed, no flow", m, cosine_perturbation(m.grid, 0.1, 0.3, 3), CellField(m.grid, 0.3)});
        }
        {
            Model m = base(true);
            m.params.b = 2.0;
            m.params.chi_phi = 0.2;
            m.params.sigma_inf = {0.0, 1.5, 0.5, 1.0};
            m.spec.potential.kind = PotentialKind::Quartic;
            m.spec.eta = BoundedCoefficient::smooth(0.5, 2.0);
            m.spec.lambda = BoundedCoefficient::smooth(0.0, 1.0);
            cases.push_back({"robin, no sources", m, tanh_disc(m.grid, 0.6, 0.4, 0.2, 0.1), CellField(m.grid, 0.2)});
        }
        double worst = 0.0;
        int steps = 0;
        for (const auto& c : cases) {
            SchemeOptions o;
            o.dt = 1e-3;
            RunOptions ro;
            ro.steps = 20;
            RunResult res = run(initial_state(c.phi0, c.sigma0, c.m, o), o, c.m, ro);
            if (!res.completed) throw std::runtime_error(c.name + ": " + res.failure);
            worst = std::max(worst, ledger_worst(res.ledgers) / c.m.grid.area());
            steps += static_cast<int>(res.ledgers.size());
        }
        if (budget)
            for (const auto& br : budget->runs) {
                worst = std::max(worst, ledger_worst(br.result.ledgers));
                steps += static_cast<int>(br.result.ledgers.size());
            }
        r.passed = worst <= 1e-11;
        r.detail = std::to_string(steps) + " steps over " + std::to_string(cases.size() + (budget ? budget->runs.size() : 0)) +
                   " runs, max ledger residual / |Omega| = " + sci(worst) + " (<= 1e-11)";
    });
}

CriterionResult check_energy_budget(const BudgetStudy& budget) {
    return timed(5, "energy-budget residual", [&](CriterionResult& r) {
        const double a = budget.runs.at(0).max_relative, b = budget.runs.at(1).max_relative;
        r.passed = a <= 1e-6 && budget.ratio >= 2.0;
        r.detail = "64x64 Lima disc, b=1: max |res|/max(1,|E|) = " + sci(a) + " at dt=" + sci(budget.runs[0].dt) +
                   " (<= 1e-6), " + sci(b) + " at dt/2, shrink ratio = " + fixed(budget.ratio, 4) + " (>= 2)";
    });
}

CriterionResult check_convergence() {
    return timed(6, "manufactured-solution convergence", [](CriterionResult& r) {
        ConvergenceTable p = mms_neumann_poisson({16, 32, 64, 128});
        ConvergenceTable q = mms_robin_diffusion({16, 32, 64, 128});
        ConvergenceTable c = coupled_self_convergence({4e-3, 2e-3, 1e-3, 5e-4}, 0.04);
        bool ok = true;
        std::string d;
        auto report = [&](const ConvergenceTable& t, double lo, double hi) {
            d += (d.empty() ? "" : "; ") + t.name + " orders";
            for (double o : t.orders()) {
                d += " " + fixed(o, 3);
                ok = ok && o >= lo && o <= hi;
            }
        };
        report(p, 1.8, 2.2);
        report(q, 1.8, 2.2);
        report(c, 0.8, 1.2);
        r.passed = ok;
        r.detail = d + " (spatial in [1.8, 2.2], dt in [0.8, 1.2])";
    });
}

CriterionResult check_galerkin_uniform() {
    return timed(7, "Galerkin k-uniform bounds", [](CriterionResult& r) {
        Model m = galerkin_reference_model();
        auto [phi0, sigma0] = galerkin_reference_data(m.grid);
        GalerkinOptions o;
        o.dt = 1e-3;
        o.steps = 100;
        SweepReport rep = k_sweep({1, 5, 15, 30}, phi0, sigma0, m, o, 0.2);
        double worst = 0.0;
        std::string d = "k=15 vs 30 differences";
        auto names = GalerkinQuantities::names();
        for (std::size_t i = 0; i < rep.top_difference.size(); ++i) {
            worst = std::max(worst, rep.top_difference[i]);
            d += " " + names[i] + "=" + fixed(100.0 * rep.top_difference[i], 2) + "%";
        }
        r.passed = rep.all_finite && rep.uniform;
        r.detail = d + ", all finite: " + (rep.all_finite ? "yes" : "no") + " (< 20%)";
        if (r.seconds > 300.0) r.passed = false;
    });
}

CriterionResult check_validator() {
    return timed(8, "assumption validator", [](CriterionResult& r) {
        int checks = 0, failed = 0;
        std::string bad;
        auto expect = [&](bool cond, const std::string& what) {
            ++checks;
            if (!cond) {
                ++failed;
                bad += " " + what;
            }
        };
        auto passed = [](const ModelParams& p, const ConstitutiveSpec& s, const char* name) {
            const ValidationCheck* c = validate_params(p, s).find(name);
            if (!c) throw std::runtime_error(std::string("validator has no check ") + name);
            return c->passed;
        };
        ConstitutiveSpec spec;
        ModelParams p;
        p.chi_phi = 0.0;
        p.epsilon = 10.0;
        expect(passed(p, spec, "A6.epsilon"), "eps(chi_phi=0)");
        p.chi_phi = 1.0;
        p.chi_sigma = 1.0;
        p.epsilon = 0.05;
        expect(passed(p, spec, "A6.epsilon"), "eps(0.05)");
        p.epsilon = 0.1;
        expect(!passed(p, spec, "A6.epsilon"), "eps(0.1)");

        ModelParams q;
        expect(validate_params(q, spec).ok(), "defaults");
        auto with = [&](auto mutate) {
            ConstitutiveSpec s = spec;
            mutate(s);
            return s;
        };
        expect(!passed(q, with([](auto& s) { s.m = BoundedCoefficient::linear(0.0, 1.0); }), "A2.m"), "A2.m");
        expect(passed(q, with([](auto& s) { s.m = BoundedCoefficient::smooth(0.1, 1.0); }), "A2.m"), "A2.m ok");
        expect(!passed(q, with([](auto& s) { s.n = BoundedCoefficient::constant(-1.0); }), "A2.n"), "A2.n");
        expect(!passed(q, with([](auto& s) { s.eta = BoundedCoefficient::smooth(0.0, 2.0); }), "A3.eta"), "A3.eta");
        expect(passed(q, with([](auto& s) { s.eta = BoundedCoefficient::smooth(0.5, 2.0); }), "A3.eta"), "A3.eta ok");
        expect(!passed(q, with([](auto& s) { s.lambda = BoundedCoefficient::constant(-0.1); }), "A3.lambda"),
               "A3.lambda");
        auto lima = [](double gamma0) {
            return [gamma0](auto& s) {
                s.source.kind = SourceKind::Lima;
                s.source.P = 1.0;
                s.source.c_gamma_v = 1.0;
                s.source.gamma0 = gamma0;
            };
        };
        expect(!passed(q, with(lima(0.0)), "A5.gamma0"), "A5.gamma0");
        expect(passed(q, with(lima(-1.0)), "A5.gamma0"), "A5.gamma0 default");

        auto hawkins = [](bool rho, PotentialKind pot) {
            return [rho, pot](auto& s) {
                s.source.kind = SourceKind::Hawkins;
                s.source.p0 = 1.0;
                s.source.rho_min_variant = rho;
                s.potential.kind = pot;
            };
        };
        expect(!validate_params(q, with(hawkins(false, PotentialKind::Quartic))).ok(), "hawkins quartic");
        expect(validate_params(q, with(hawkins(true, PotentialKind::Quartic))).ok(), "hawkins rho_min");
        expect(validate_params(q, with(hawkins(false, PotentialKind::QuadraticGrowth))).ok(), "hawkins quadratic");
        r.passed = failed == 0;
        r.detail = std::to_string(checks - failed) + "/" + std::to_string(checks) +
                   " validator expectations met (3 epsilon examples, A2/A3/A5 bounds, Hawkins case rule)" +
                   (bad.empty() ? "" : "; failed:" + bad);
    });
}

CriterionResult check_gronwall(const BudgetStudy& budget) {
    return timed(9, "Gronwall checker", [&](CriterionResult& r) {
        const int n = 201;
        GronwallInput zero, cst;
        const double alpha = 2.5, beta = 1.3;
        for (int k = 0; k < n; ++k) {
            double t = 0.01 * k;
            zero.t.push_back(t);
            zero.alpha.push_back(1.0 + std::sin(t));
            zero.beta.push_back(0.0);
            zero.u.push_back(0.5);
            zero.v.push_back(0.0);
            cst.t.push_back(t);
            cst.alpha.push_back(alpha);
            cst.beta.push_back(beta);
            cst.u.push_back(alpha);
            cst.v.push_back(0.0);
        }
        GronwallResult g0 = gronwall_bound(zero), g1 = gronwall_bound(cst);
        double e0 = 0.0, e1 = 0.0;
        for (int k = 0; k < n; ++k) {
            e0 = std::max(e0, std::abs(g0.bound[static_cast<std::size_t>(k)] - zero.alpha[static_cast<std::size_t>(k)]));
            double ex = alpha * std::exp(beta * cst.t[static_cast<std::size_t>(k)]);
            e1 = std::max(e1, std::abs(g1.bound[static_cast<std::size_t>(k)] - ex) / ex);
        }
        const Model m = coupled_budget_model();
        const RunResult& run0 = budget.runs.at(0).result;
        std::vector<double> t, e;
        for (const auto& row : run0.rows) {
            t.push_back(row.t);
            e.push_back(row.energy);
        }
        GronwallResult fit = fitted_gronwall(t, e, run0.budgets, m);
        r.passed = e0 == 0.0 && e1 <= 1e-13 && fit.hypotheses_ok && fit.verified;
        r.detail = "beta=0 error " + sci(e0) + ", constant alpha/beta rel error " + sci(e1) +
                   ", fitted bound on the criterion-5 run: " + std::to_string(t.size()) +
                   " samples, min margin " + sci(fit.worst_margin) + (fit.verified ? " (dominates)" : " (violated)");
    });
}

CriterionResult check_determinism(const fs::path& workdir) {
    return timed(10, "determinism", [&](CriterionResult& r) {
        fs::path root = workdir.empty() ? fs::temp_directory_path() / ("chb_determinism_" + std::to_string(::getpid()))
                                        : workdir / "determinism";
        fs::remove_all(root);
        RunConfig c;
        c.nx = c.ny = 32;
        c.dt = 1e-3;
        c.t_end = 0.02;
        c.snapshot_every = 5;
        c.params.epsilon = 0.1;
        c.params.chi_phi = 0.05;
        c.params.b = 1.0;
        c.params.sigma_inf = {1.0, 0.8, 1.0, 0.6};
        c.spec.potential.kind = PotentialKind::QuadraticGrowth;
        c.spec.m = BoundedCoefficient::smooth(0.02, 0.2);
        c.spec.source.kind = SourceKind::Lima;
        c.spec.source.P = 0.5;
        c.spec.source.A = 0.1;
        c.spec.source.C = 0.2;
        c.spec.source.c_gamma_v = 0.5;
        c.init.sigma0 = SigmaPreset::Equilibrium;
        c.output.vtk = true;
        c.output.directory = (root / "a").string();
        RunOutcome a = execute(c);
        c.output.directory = (root / "b").string();
        RunOutcome b = execute(c);
        int compared = 0, differ = 0;
        for (const auto& f : a.files) {
            if (f.extension() != ".csv") continue;
            ++compared;
            if (slurp(f) != slurp(root / "b" / f.filename())) ++differ;
        }
        fs::remove_all(root);
        r.passed = a.result.completed && b.result.completed && compared > 0 && differ == 0;
        r.detail = std::to_string(compared) + " CSV files compared byte for byte, " + std::to_string(differ) + " differ";
    });
}

std::vector<CriterionResult> run_acceptance(const std::vector<int>& which, const fs::path& workdir) {
    auto selected = [&](int id) { return which.empty() || std::find(which.begin(), which.end(), id) != which.end(); };
    std::vector<CriterionResult> out;
    std::optional<BudgetStudy> budget;
    std::string budget_error;
    double budget_seconds = 0.0;
    if (selected(4) || selected(5) || selected(9)) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            budget = energy_budget_study();
        } catch (const std::exception& e) {
            budget_error = e.what();
        }
        budget_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    auto needs_budget = [&](int id, const std::string& name, auto fn) {
        if (budget) return fn(*budget);
        CriterionResult r;
        r.id = id;
        r.name = name;
        r.detail = "budget study failed: " + budget_error;
        return r;
    };
    if (selected(1)) out.push_back(check_brinkman_oracle());
    if (selected(2)) out.push_back(check_constant_force());
    if (selected(3)) out.push_back(check_gradient_flow_decay());
    if (selected(4)) out.push_back(check_mass_ledgers(budget ? &*budget : nullptr));
    if (selected(5)) {
        out.push_back(needs_budget(5, "energy-budget residual", [](const BudgetStudy& b) { return check_energy_budget(b); }));
        out.back().seconds += budget_seconds;
    }
    if (selected(6)) out.push_back(check_convergence());
    if (selected(7)) out.push_back(check_galerkin_uniform());
    if (selected(8)) out.push_back(check_validator());
    if (selected(9))
        out.push_back(needs_budget(9, "Gronwall checker", [](const BudgetStudy& b) { return check_gronwall(b); }));
    if (selected(10)) out.push_back(check_determinism(workdir));
    return out;
}

}  // namespace chb
