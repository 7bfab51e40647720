#include "chb/timestepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace chb {

namespace {

FaceCoefficients coefficient_faces(const CellField& phi, const BoundedCoefficient& c, const Grid& g) {
    CellField k(phi);
    for (auto& x : k.values()) x = c(x);
    return harmonic_faces(k, g);
}

struct FrozenSources {
    CellField lambda_phi, theta_phi, lambda_sigma, theta_sigma;
};

FrozenSources frozen_sources(const State& s, const Model& m) {
    const Grid& g = m.grid;
    FrozenSources f{CellField(g), CellField(g), CellField(g), CellField(g)};
    for (std::size_t k = 0; k < f.lambda_phi.size(); ++k) {
        auto v = sources(s.phi[k], s.sigma[k], 0.0, m.spec.source, m.params);
        f.lambda_phi[k] = v.lambda_phi;
        f.theta_phi[k] = v.theta_phi;
        f.lambda_sigma[k] = v.lambda_sigma;
        f.theta_sigma[k] = v.theta_sigma;
    }
    return f;
}

std::string fmt_residual(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", r);
    return buf;
}

FaceField zero_velocity(const Grid& g) { return FaceField(g); }

bool has_flow(const FaceField& v) {
    for (double x : v.u_values())
        if (x != 0.0) return true;
    for (double x : v.w_values())
        if (x != 0.0) return true;
    return false;
}

}  // namespace

void check_scheme(const SchemeOptions& opts, const Model& m) {
    if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw std::invalid_argument("scheme: dt must be > 0");
    const double thr = m.spec.potential.stabilization_threshold();
    if (!(opts.s >= thr))
        throw std::invalid_argument("scheme: stabilisation s = " + std::to_string(opts.s) +
                                    " below sup psi''/2 = " + std::to_string(thr));
}

CellField chemical_potential(const CellField& phi, const CellField& sigma, const Model& m) {
    const Grid& g = m.grid;
    const double eps = m.params.epsilon;
    CellField lap = neumann_operator(g, FaceCoefficients::constant(g, 1.0)).apply(phi, g);
    CellField mu(g);
    for (std::size_t k = 0; k < mu.size(); ++k)
        mu[k] = m.spec.potential.dpsi(phi[k]) / eps - eps * lap[k] - m.params.chi_phi * sigma[k];
    return mu;
}

PhaseResult step_phase(const State& s, const FaceField& v_new, const SchemeOptions& opts, const Model& m) {
    const Grid& g = m.grid;
    const double dt = opts.dt, eps = m.params.epsilon, st = opts.s;
    const int n = g.cells();
    FrozenSources fs = frozen_sources(s, m);

    SparseMatrix L = neumann_operator(g, FaceCoefficients::constant(g, 1.0)).matrix;
    SparseMatrix Lm = neumann_operator(g, coefficient_faces(s.phi, m.spec.m, g)).matrix;
    SparseMatrix Theta = diagonal(to_vector(fs.theta_phi));
    SparseMatrix M = (st / eps) * identity(n) - eps * L;
    SparseMatrix B = Theta - Lm;
    SparseMatrix A = (1.0 / dt) * identity(n) + SparseMatrix(B * M);
    const bool flow = has_flow(v_new);
    if (flow) A += upwind_matrix(v_new, g);

    // explicit part of mu': eps^-1 (psi'(phi) - s phi) - chi_phi sigma
    Vector gexp(n);
    for (int k = 0; k < n; ++k)
        gexp[k] = (m.spec.potential.dpsi(s.phi[k]) - st * s.phi[k]) / eps - m.params.chi_phi * s.sigma[k];
    Vector rhs = to_vector(s.phi) / dt + to_vector(fs.lambda_phi) - B * gexp;

    // constant-coefficient model of A, inverted exactly in the cosine basis
    double m_bar = 0.0;
    for (double x : s.phi.values()) m_bar += m.spec.m(x);
    m_bar /= static_cast<double>(n);
    const double theta_bar = integrate_cell(fs.theta_phi, g) / g.area();
    NeumannEigenbasis eig(g);
    auto precond = [&](const Vector& r) {
        return eig.apply(r, [&](double lam) {
            return 1.0 / (1.0 / dt + (theta_bar - m_bar * lam) * (st / eps - eps * lam));
        });
    };

    Vector x0 = to_vector(s.phi);
    auto [x, rep] = bicgstab(A, rhs, precond, opts.phase, &x0);
    if (!rep.converged || !x.allFinite())
        throw StepError("phase", "Krylov solve did not converge (residual " + fmt_residual(rep.residual) + ")");
    Vector mu = M * x + gexp;

    PhaseResult r{to_field(x, g), to_field(mu, g), rep, 0.0};
    if (opts.mass_correction) {
        auto defect = [&](const CellField& phi, const CellField& mu_f) {
            double src = 0.0;
            for (int k = 0; k < n; ++k) src += fs.lambda_phi[k] - fs.theta_phi[k] * mu_f[k];
            src *= g.cell_area();
            double flux = flow ? upwind_boundary_flux(phi, v_new, g) : 0.0;
            return integrate_cell(phi, g) - integrate_cell(s.phi, g) - dt * (src - flux);
        };
        double outflow = flow ? upwind_boundary_flux(CellField(g, 1.0), v_new, g) : 0.0;
        double denom = g.area() + dt * (st / eps) * integrate_cell(fs.theta_phi, g) + dt * outflow;
        double d = defect(r.phi, r.mu);
        if (d != 0.0 && std::abs(denom) > 0.5 * g.area()) {
            r.shift = -d / denom;
            for (int k = 0; k < n; ++k) {
                r.phi[k] += r.shift;
                r.mu[k] += (st / eps) * r.shift;
            }
        }
    }
    return r;
}

NutrientResult step_nutrient(const State& s, const FaceField& v_new, const CellField& phi_new,
                             const CellField& mu_new, const SchemeOptions& opts, const Model& m) {
    const Grid& g = m.grid;
    const ModelParams& p = m.params;
    const double dt = opts.dt;
    const int n = g.cells();
    FrozenSources fs = frozen_sources(s, m);

    FaceCoefficients nf = coefficient_faces(s.phi, m.spec.n, g);
    FaceCoefficients knf = nf;
    for (auto& x : knf.x) x *= p.chi_sigma;
    for (auto& x : knf.y) x *= p.chi_sigma;
    RobinOperator rob = robin_operator(g, knf, p.b, far_field(m));
    SparseMatrix A = (1.0 / dt) * identity(n) - rob.linear.matrix;
    const bool flow = has_flow(v_new);
    if (flow) A += upwind_matrix(v_new, g);

    Vector rhs = to_vector(s.sigma) / dt + to_vector(rob.source) - to_vector(fs.lambda_sigma) +
                 to_vector(fs.theta_sigma).cwiseProduct(to_vector(mu_new));
    if (p.chi_phi != 0.0) rhs -= p.chi_phi * (neumann_operator(g, nf).matrix * to_vector(phi_new));

    Vector x0 = to_vector(s.sigma);
    auto [x, rep] = bicgstab(A, rhs, opts.nutrient, &x0);
    if (!rep.converged || !x.allFinite())
        throw StepError("nutrient", "Krylov solve did not converge (residual " + fmt_residual(rep.residual) + ")");

    NutrientResult r{to_field(x, g), rep, 0.0};
    if (opts.mass_correction) {
        double src = 0.0;
        for (int k = 0; k < n; ++k) src -= fs.lambda_sigma[k] - fs.theta_sigma[k] * mu_new[k];
        src *= g.cell_area();
        double bnd = 0.0;
        if (p.b > 0.0) {
            EdgeTraces in = far_field(m), sw = wall_traces(r.sigma);
            bnd = p.b * (integrate_boundary(in, g) - integrate_boundary(sw, g));
        }
        double flux = flow ? upwind_boundary_flux(r.sigma, v_new, g) : 0.0;
        double d = integrate_cell(r.sigma, g) - integrate_cell(s.sigma, g) - dt * (src + bnd - flux);
        double outflow = flow ? upwind_boundary_flux(CellField(g, 1.0), v_new, g) : 0.0;
        double denom = g.area() + dt * p.b * g.perimeter() + dt * outflow;
        if (d != 0.0 && std::abs(denom) > 0.5 * g.area()) {
            r.shift = -d / denom;
            for (int k = 0; k < n; ++k) r.sigma[k] += r.shift;
        }
    }
    return r;
}

BrinkmanSolution step_flow(const State& s, const SchemeOptions& opts, const Model& m,
                           const BrinkmanSolution* warm) {
    const Grid& g = m.grid;
    if (!m.flow) {
        BrinkmanSolution z;
        z.v = zero_velocity(g);
        z.p = CellField(g);
        z.converged = true;
        return z;
    }
    BrinkmanProblem pb = make_brinkman_problem(s.phi, s.mu, s.sigma, m.params, m.spec, g);
    BrinkmanSolution sol = solve_brinkman(pb, g, opts.brinkman, warm);
    if (!sol.converged)
        throw StepError("brinkman", "MINRES did not converge (residual " + fmt_residual(sol.residual) + ")");
    return sol;
}

std::pair<State, StepReport> step(const State& s, const SchemeOptions& opts, const Model& m) {
    StepReport rep;
    rep.energy_before = energy(s, m);

    BrinkmanSolution warm;
    warm.v = s.v;
    warm.p = s.p;
    BrinkmanSolution flow = step_flow(s, opts, m, &warm);
    rep.brinkman_iters = flow.iterations;
    rep.brinkman_residual = flow.residual;
    rep.div_residual = flow.div_residual;

    PhaseResult ph = step_phase(s, flow.v, opts, m);
    rep.phase_iters = ph.report.iterations;
    rep.phase_residual = ph.report.residual;
    rep.phase_shift = ph.shift;
    rep.phi_min = ph.phi.min();
    rep.phi_max = ph.phi.max();
    if (!ph.phi.all_finite() || std::max(-rep.phi_min, rep.phi_max) > opts.range_limit)
        throw StepError("range", "|phi| exceeded " + std::to_string(opts.range_limit));

    NutrientResult nu = step_nutrient(s, flow.v, ph.phi, ph.mu, opts, m);
    rep.nutrient_iters = nu.report.iterations;
    rep.nutrient_residual = nu.report.residual;
    rep.nutrient_shift = nu.shift;

    State out{s.t + opts.dt, std::move(ph.phi), std::move(ph.mu), std::move(nu.sigma), std::move(flow.p),
              std::move(flow.v)};
    rep.energy_after = energy(out, m);
    return {std::move(out), rep};
}

State initial_state(const CellField& phi0, const CellField& sigma0, const Model& m, const SchemeOptions& opts) {
    const Grid& g = m.grid;
    require_on_grid(phi0, g, "initial_state phi0");
    require_on_grid(sigma0, g, "initial_state sigma0");
    if (!phi0.all_finite() || !sigma0.all_finite())
        throw std::invalid_argument("initial_state: initial data must be finite");
    State s = State::zeros(g);
    s.phi = phi0;
    s.sigma = sigma0;
    s.mu = chemical_potential(phi0, sigma0, m);
    BrinkmanSolution flow = step_flow(s, opts, m);
    s.v = std::move(flow.v);
    s.p = std::move(flow.p);
    return s;
}

CellField uniform_field(const Grid& g, double value) { return CellField(g, value); }

CellField tanh_disc(const Grid& g, double cx, double cy, double r0, double eps) {
    return sample(g, [&](double x, double y) {
        return std::tanh((r0 - std::hypot(x - cx, y - cy)) / (std::sqrt(2.0) * eps));
    });
}

CellField cosine_perturbation(const Grid& g, double mean, double amplitude, int modes) {
    const double pi = std::acos(-1.0);
    return sample(g, [&](double x, double y) {
        double v = mean;
        for (int k = 1; k <= modes; ++k) v += amplitude * std::cos(k * pi * x / g.Lx) * std::cos(k * pi * y / g.Ly);
        return v;
    });
}

CellField nutrient_equilibrium(const CellField& phi, double sigma_ref, const ModelParams& p) {
    CellField s(phi);
    for (auto& x : s.values()) x = sigma_ref + p.chi_phi / p.chi_sigma * (1.0 + x);
    return s;
}

State relax_initial_state(const State& s, const Model& m, double dt, int steps, const SchemeOptions& opts) {
    Model quiet = m;
    quiet.flow = false;
    quiet.spec.source.kind = SourceKind::None;
    SchemeOptions o = opts;
    o.dt = dt;
    RunOptions ro;
    ro.steps = steps;
    ro.diagnostics = false;
    RunResult r = run(initial_state(s.phi, s.sigma, quiet, o), o, quiet, ro);
    if (!r.completed) throw std::runtime_error("relax_initial_state: " + r.failure);
    return initial_state(r.final_state.phi, r.final_state.sigma, m, opts);
}

namespace {

DiagnosticsRow base_row(const State& s, double E, const Model& m) {
    DiagnosticsRow r;
    r.t = s.t;
    r.energy = E;
    r.mass_phi = integrate_cell(s.phi, m.grid);
    r.mass_sigma = integrate_cell(s.sigma, m.grid);
    r.phi_min = s.phi.min();
    r.phi_max = s.phi.max();
    return r;
}

}  // namespace

RunResult run(const State& initial, const SchemeOptions& opts, const Model& m, const RunOptions& ro) {
    check_scheme(opts, m);
    if (ro.steps < 0) throw std::invalid_argument("run: negative step count");
    RunResult res;
    NormAccumulator acc(m);
    acc.add_initial(initial);
    res.rows.push_back(base_row(initial, energy(initial, m), m));
    res.snapshots.push_back(initial);
    State cur = initial;
    bool last_saved = true;
    for (int k = 1; k <= ro.steps; ++k) {
        std::pair<State, StepReport> out;
        try {
            out = step(cur, opts, m);
        } catch (const std::exception& e) {
            res.failure = "step " + std::to_string(k) + ": " + e.what();
            break;
        }
        auto& [next, rep] = out;
        DiagnosticsRow row = base_row(next, rep.energy_after, m);
        row.div_residual = rep.div_residual;
        row.cg_iters_total = rep.total_iters();
        if (ro.diagnostics) {
            EnergyBudget b = energy_budget(cur, next, opts.dt, m);
            row.diss_mu = b.diss_mu;
            row.diss_nsigma = b.diss_nsigma;
            row.diss_visc = b.diss_visc;
            row.bnd_sigma_sq = b.bnd_sigma_sq;
            row.src_phi_mu = b.src_phi_mu;
            row.src_sigma_N = b.src_sigma_N;
            row.bnd_income = b.bnd_income;
            row.budget_residual = b.residual;
            res.budgets.push_back(b);
            res.ledgers.push_back(mass_balances(cur, next, opts.dt, m));
            acc.add_step(cur, next, opts.dt);
        }
        res.rows.push_back(row);
        res.reports.push_back(rep);
        cur = std::move(next);
        last_saved = ro.snapshot_every > 0 && k % ro.snapshot_every == 0;
        if (last_saved) res.snapshots.push_back(cur);
        if (ro.on_step) ro.on_step(k, cur);
    }
    if (!last_saved) res.snapshots.push_back(cur);
    res.completed = res.failure.empty();
    res.norms = acc.result();
    res.final_state = std::move(cur);
    return res;
}

}  // namespace chb
