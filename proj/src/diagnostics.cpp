#include "chb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chb {

namespace {

CellField map_cells(const CellField& f, auto&& fn) {
    CellField out = f;
    for (auto& x : out.values()) x = fn(x);
    return out;
}

CellField nutrient_potential(const CellField& phi, const CellField& sigma, const ModelParams& p) {
    CellField out(sigma);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = nutrient_energy(phi[k], sigma[k], p).N_sigma;
    return out;
}

struct SchemeSources {
    CellField gamma_phi;
    CellField gamma_sigma;
};

// Gamma with Lambda, theta frozen at the old state and mu taken from the new one.
SchemeSources scheme_sources(const State& before, const CellField& mu_new, const Model& m) {
    SchemeSources s{CellField(m.grid), CellField(m.grid)};
    for (std::size_t k = 0; k < s.gamma_phi.size(); ++k) {
        auto v = sources(before.phi[k], before.sigma[k], mu_new[k], m.spec.source, m.params);
        s.gamma_phi[k] = v.gamma_phi;
        s.gamma_sigma[k] = v.gamma_sigma;
    }
    return s;
}

EdgeTraces map_traces(EdgeTraces t, auto&& fn) {
    for (Edge e : {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top})
        for (auto& x : t.edge(e)) x = fn(x);
    return t;
}

}  // namespace

EdgeTraces far_field(const Model& m) { return EdgeTraces::per_edge(m.grid, m.params.sigma_inf); }

double energy(const State& s, const Model& m) {
    const Grid& g = m.grid;
    const double eps = m.params.epsilon;
    double bulk = 0.0;
    for (std::size_t k = 0; k < s.phi.size(); ++k)
        bulk += m.spec.potential.psi(s.phi[k]) / eps + nutrient_energy(s.phi[k], s.sigma[k], m.params).N;
    bulk *= g.cell_area();
    return bulk + 0.5 * eps * dirichlet_form(s.phi, FaceCoefficients::constant(g, 1.0), g);
}

EnergyBudget energy_budget(const State& before, const State& after, double dt, const Model& m) {
    const Grid& g = m.grid;
    const ModelParams& p = m.params;
    EnergyBudget b;
    b.dt = dt;
    b.E_before = energy(before, m);
    b.E_after = energy(after, m);

    FaceCoefficients mf = harmonic_faces(map_cells(before.phi, [&](double x) { return m.spec.m(x); }), g);
    FaceCoefficients nf = harmonic_faces(map_cells(before.phi, [&](double x) { return m.spec.n(x); }), g);
    CellField Ns = nutrient_potential(after.phi, after.sigma, p);
    b.diss_mu = dirichlet_form(after.mu, mf, g);
    b.diss_nsigma = dirichlet_form(Ns, nf, g);

    if (p.b > 0.0) {
        EdgeTraces sw = wall_traces(after.sigma), sc = wall_cells(after.sigma);
        EdgeTraces Nc = wall_cells(Ns);
        EdgeTraces one_minus_phi = map_traces(wall_cells(after.phi), [](double x) { return 1.0 - x; });
        b.bnd_sigma_sq = p.b * p.chi_sigma * boundary_pairing(sw, sc, g);
        b.bnd_income = p.b * (boundary_pairing(far_field(m), Nc, g) -
                              p.chi_phi * boundary_pairing(sw, one_minus_phi, g));
    }

    SchemeSources src = scheme_sources(before, after.mu, m);
    b.src_phi_mu = inner(src.gamma_phi, after.mu, g);
    b.src_sigma_N = -inner(src.gamma_sigma, Ns, g);

    if (m.flow) {
        SparseMatrix U = upwind_matrix(after.v, g);
        b.conv_transport = -inner(to_field(U * to_vector(after.phi), g), after.mu, g) -
                           inner(to_field(U * to_vector(after.sigma), g), Ns, g);
        BrinkmanProblem pb = make_brinkman_problem(before.phi, before.mu, before.sigma, p, m.spec, g);
        b.diss_visc = viscous_dissipation(after.v, pb, g);
        b.flow_work = face_pairing(pb.force, after.v, g) + inner(after.p, pb.gamma_v, g);
    }

    b.residual = (b.E_after - b.E_before) / dt + b.diss_mu + b.diss_nsigma + b.diss_visc +
                 b.bnd_sigma_sq - b.src_phi_mu - b.src_sigma_N - b.bnd_income - b.conv_transport -
                 b.flow_work;
    return b;
}

BalanceLedger mass_balances(const State& before, const State& after, double dt, const Model& m) {
    const Grid& g = m.grid;
    BalanceLedger l;
    SchemeSources src = scheme_sources(before, after.mu, m);
    l.phi_change = integrate_cell(after.phi, g) - integrate_cell(before.phi, g);
    l.phi_source = dt * integrate_cell(src.gamma_phi, g);
    l.phi_flux = m.flow ? dt * upwind_boundary_flux(after.phi, after.v, g) : 0.0;
    l.phi_residual = l.phi_change - (l.phi_source - l.phi_flux);

    l.sigma_change = integrate_cell(after.sigma, g) - integrate_cell(before.sigma, g);
    l.sigma_source = -dt * integrate_cell(src.gamma_sigma, g);
    if (m.params.b > 0.0) {
        EdgeTraces in = far_field(m);
        EdgeTraces sw = wall_traces(after.sigma);
        for (Edge e : {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top}) {
            auto& d = in.edge(e);
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = m.params.b * (d[k] - sw.edge(e)[k]);
        }
        l.sigma_boundary = dt * integrate_boundary(in, g);
    }
    l.sigma_flux = m.flow ? dt * upwind_boundary_flux(after.sigma, after.v, g) : 0.0;
    l.sigma_residual = l.sigma_change - (l.sigma_source + l.sigma_boundary - l.sigma_flux);
    return l;
}

double h1_norm(const CellField& f, const Grid& g) {
    return std::sqrt(inner(f, f, g) + dirichlet_form(f, FaceCoefficients::constant(g, 1.0), g));
}

double dual_h1_norm(const CellField& f, const Grid& g) {
    require_on_grid(f, g, "dual_h1_norm");
    Vector u = NeumannEigenbasis(g).apply(to_vector(f), [](double lam) { return 1.0 / (1.0 - lam); });
    return std::sqrt(std::max(to_vector(f).dot(u) * g.cell_area(), 0.0));
}

double velocity_h1_norm(const FaceField& v, const Grid& g) {
    const double A = g.cell_area();
    double grad = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double du = (v.u(i + 1, j) - v.u(i, j)) / g.hx, dw = (v.w(i, j + 1) - v.w(i, j)) / g.hy;
            grad += A * (du * du + dw * dw);
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            double d = (v.u(i, j) - v.u(i, j - 1)) / g.hy;
            grad += (i == 0 || i == g.nx ? 0.5 : 1.0) * A * d * d;
        }
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            double d = (v.w(i, j) - v.w(i - 1, j)) / g.hx;
            grad += (j == 0 || j == g.ny ? 0.5 : 1.0) * A * d * d;
        }
    return std::sqrt(face_pairing(v, v, g) + grad);
}

void NormAccumulator::add_initial(const State& s) {
    const Grid& g = m_.grid;
    sup_.sup_phi_H1 = std::max(sup_.sup_phi_H1, h1_norm(s.phi, g));
    sup_.sup_sigma_L2 = std::max(sup_.sup_sigma_L2, l2_norm(s.sigma, g));
}

void NormAccumulator::add_step(const State& before, const State& after, double dt) {
    const Grid& g = m_.grid;
    add_initial(after);
    FaceCoefficients one = FaceCoefficients::constant(g, 1.0);
    CellField lap = neumann_operator(g, one).apply(after.phi, g);
    double h1 = h1_norm(after.phi, g);
    phi_h2 += dt * (h1 * h1 + inner(lap, lap, g));
    CellField rate = (1.0 / dt) * (after.phi - before.phi);
    double dn = dual_h1_norm(rate, g);
    dtphi += dt * dn * dn;
    double s1 = h1_norm(after.sigma, g), m1 = h1_norm(after.mu, g);
    sig_h1 += dt * s1 * s1;
    mu_h1 += dt * m1 * m1;
    EdgeTraces sw = wall_traces(after.sigma);
    bnd += dt * m_.params.b * boundary_pairing(sw, sw, g);
    double pn = l2_norm(after.p, g);
    p43 += dt * std::pow(pn, 4.0 / 3.0);
    double vn = velocity_h1_norm(after.v, g);
    v_h1 += dt * vn * vn;
    if (m_.flow) {
        CellField d = upwind_div(after.phi, after.v, g);
        double s = 0.0;
        for (double x : d.values()) s += std::pow(std::abs(x), 1.5);
        double l32 = std::pow(s * g.cell_area(), 2.0 / 3.0);
        dphiv += dt * l32 * l32;
    }
}

NormEstimates NormAccumulator::result() const {
    NormEstimates r = sup_;
    r.phi_L2H2 = std::sqrt(phi_h2);
    r.dtphi_L2H1dual = std::sqrt(dtphi);
    r.sigma_L2H1 = std::sqrt(sig_h1);
    r.mu_L2H1 = std::sqrt(mu_h1);
    r.b_sigma_boundary = std::sqrt(bnd);
    r.p_L43L2 = std::pow(p43, 0.75);
    r.v_L2H1 = std::sqrt(v_h1);
    r.div_phi_v_L2L32 = std::sqrt(dphiv);
    return r;
}

NormEstimates norm_estimates(const std::vector<State>& traj, const Model& m) {
    NormAccumulator acc(m);
    if (traj.empty()) return acc.result();
    acc.add_initial(traj.front());
    for (std::size_t k = 1; k < traj.size(); ++k) {
        double dt = traj[k].t - traj[k - 1].t;
        if (!(dt > 0.0)) throw std::invalid_argument("norm_estimates: times must increase");
        acc.add_step(traj[k - 1], traj[k], dt);
    }
    return acc.result();
}

GronwallResult gronwall_bound(const GronwallInput& in, double tol) {
    const std::size_t n = in.t.size();
    if (in.alpha.size() != n || in.beta.size() != n || in.u.size() != n || in.v.size() != n)
        throw std::invalid_argument("gronwall_bound: sample arrays differ in length");
    GronwallResult r;
    r.bound.assign(n, 0.0);
    r.lhs.assign(n, 0.0);
    r.hypothesis_rhs.assign(n, 0.0);
    if (n == 0) {
        r.hypotheses_ok = r.verified = true;
        return r;
    }
    bool signs = true;
    for (std::size_t k = 0; k < n; ++k) signs = signs && in.beta[k] >= 0.0 && in.v[k] >= 0.0;

    // cumulative B(t_k) = int_0^{t_k} beta, trapezoid (exact for piecewise-linear beta)
    std::vector<double> B(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) B[k] = B[k - 1] + 0.5 * (in.beta[k] + in.beta[k - 1]) * (in.t[k] - in.t[k - 1]);

    double int_v = 0.0, int_bu = 0.0;
    bool hyp = signs;
    for (std::size_t s = 0; s < n; ++s) {
        if (s > 0) {
            double h = in.t[s] - in.t[s - 1];
            int_v += 0.5 * h * (in.v[s] + in.v[s - 1]);
            int_bu += 0.5 * h * (in.beta[s] * in.u[s] + in.beta[s - 1] * in.u[s - 1]);
        }
        r.lhs[s] = in.u[s] + int_v;
        r.hypothesis_rhs[s] = in.alpha[s] + int_bu;
        if (r.lhs[s] > r.hypothesis_rhs[s] + tol * std::max(1.0, std::abs(r.hypothesis_rhs[s]))) hyp = false;

        // interval k contributes abar (exp(B_s - B_k) - exp(B_s - B_{k+1})), exact when
        // alpha is constant and beta piecewise constant on the interval
        double integral = 0.0;
        for (std::size_t k = 0; k < s; ++k) {
            double abar = 0.5 * (in.alpha[k] + in.alpha[k + 1]);
            double bk = B[s] - B[k], bk1 = B[s] - B[k + 1];
            if (bk - bk1 > 1e-14) integral += abar * (std::exp(bk) - std::exp(bk1));
            else integral += abar * 0.5 * (in.beta[k] + in.beta[k + 1]) * (in.t[k + 1] - in.t[k]) * std::exp(bk1);
        }
        r.bound[s] = in.alpha[s] + integral;
    }
    r.hypotheses_ok = hyp;
    double worst = INFINITY;
    bool ok = true;
    for (std::size_t s = 0; s < n; ++s) {
        worst = std::min(worst, r.bound[s] - r.lhs[s]);
        if (r.lhs[s] > r.bound[s] + tol * std::max(1.0, std::abs(r.bound[s]))) ok = false;
    }
    r.worst_margin = worst;
    r.verified = hyp && ok;
    return r;
}

double energy_floor_shift(const Model& m) {
    const ModelParams& p = m.params;
    return (m.spec.potential.R2() / p.epsilon + 2.0 * p.chi_phi * p.chi_phi / p.chi_sigma) * m.grid.area();
}

GronwallResult fitted_gronwall(const std::vector<double>& t, const std::vector<double>& energy_vals,
                               const std::vector<EnergyBudget>& budgets, const Model& m) {
    const std::size_t n = t.size();
    if (energy_vals.size() != n || budgets.size() + 1 != n)
        throw std::invalid_argument("fitted_gronwall: need one budget per step");
    const double K = energy_floor_shift(m);
    GronwallInput in;
    in.t = t;
    in.u.resize(n);
    in.v.assign(n, 0.0);
    std::vector<double> S(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) in.u[k] = energy_vals[k] + K;
    for (std::size_t k = 1; k < n; ++k) {
        const EnergyBudget& b = budgets[k - 1];
        in.v[k] = b.diss_mu + b.diss_nsigma + b.diss_visc;
        S[k] = (b.E_after - b.E_before) / b.dt + in.v[k];
    }
    in.v[0] = in.v.size() > 1 ? in.v[1] : 0.0;
    double beta = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (in.u[k] > 0.0) beta = std::max(beta, std::max(S[k], 0.0) / in.u[k]);
    in.beta.assign(n, beta);
    // smallest constant alpha with u(s) + int v <= alpha + int beta u on the samples
    double alpha = in.u[0], int_v = 0.0, int_bu = 0.0;
    for (std::size_t s = 1; s < n; ++s) {
        double h = t[s] - t[s - 1];
        int_v += 0.5 * h * (in.v[s] + in.v[s - 1]);
        int_bu += 0.5 * h * beta * (in.u[s] + in.u[s - 1]);
        alpha = std::max(alpha, in.u[s] + int_v - int_bu);
    }
    in.alpha.assign(n, alpha);
    return gronwall_bound(in);
}

namespace {

struct TestFunction {
    int i, j;
};

std::vector<TestFunction> cosine_tests(int k) {
    std::vector<TestFunction> all;
    for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= k; ++j)
            if (i + j > 0) all.push_back({i, j});
    std::stable_sort(all.begin(), all.end(), [](const TestFunction& a, const TestFunction& b) {
        return a.i * a.i + a.j * a.j < b.i * b.i + b.j * b.j;
    });
    all.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(all.size()))));
    all.insert(all.begin(), TestFunction{0, 0});
    return all;
}

}  // namespace

WeakResiduals weak_residuals(const std::vector<State>& traj, const Model& m, int k_tests) {
    using std::numbers::pi;
    const Grid& g = m.grid;
    const ModelParams& p = m.params;
    const double A = g.cell_area();
    WeakResiduals out;
    auto tests = cosine_tests(std::max(k_tests, 0));
    for (std::size_t n = 1; n < traj.size(); ++n) {
        const State& a = traj[n - 1];
        const State& b = traj[n];
        const double dt = b.t - a.t;
        FaceCoefficients mf = harmonic_faces(map_cells(a.phi, [&](double x) { return m.spec.m(x); }), g);
        FaceCoefficients nf = harmonic_faces(map_cells(a.phi, [&](double x) { return m.spec.n(x); }), g);
        FaceCoefficients one = FaceCoefficients::constant(g, 1.0);
        SchemeSources src = scheme_sources(a, b.mu, m);
        CellField Ns = nutrient_potential(b.phi, b.sigma, p);
        CellField gv(g), dpsi(g);
        for (std::size_t k = 0; k < gv.size(); ++k) {
            gv[k] = sources(a.phi[k], a.sigma[k], a.mu[k], m.spec.source, p).gamma_v;
            dpsi[k] = m.spec.potential.dpsi(b.phi[k]);
        }
        CellField divv = m.flow ? divergence(b.v, g) : CellField(g);
        CellField Uphi(g), Usig(g);
        if (m.flow) {
            SparseMatrix U = upwind_matrix(b.v, g);
            Uphi = to_field(U * to_vector(b.phi), g);
            Usig = to_field(U * to_vector(b.sigma), g);
        } else {
            gv = CellField(g);
        }
        out.div_l2 = std::max(out.div_l2, l2_norm(divv - gv, g));
        EdgeTraces sw = wall_traces(b.sigma);

        for (const auto& tf : tests) {
            const double kx = tf.i * pi / g.Lx, ky = tf.j * pi / g.Ly;
            auto w = [&](double x, double y) { return std::cos(kx * x) * std::cos(ky * y); };
            CellField W = sample(g, w);
            // exact test gradients at face centres
            auto pairing = [&](const CellField& f, const FaceCoefficients& k) {
                double s = 0.0;
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 1; i < g.nx; ++i) {
                        double wx = -kx * std::sin(kx * i * g.hx) * std::cos(ky * g.yc(j));
                        s += k.x[i + (g.nx + 1) * j] * (f(i, j) - f(i - 1, j)) / g.hx * wx;
                    }
                for (int j = 1; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        double wy = -ky * std::cos(kx * g.xc(i)) * std::sin(ky * j * g.hy);
                        s += k.y[i + g.nx * j] * (f(i, j) - f(i, j - 1)) / g.hy * wy;
                    }
                return s * A;
            };
            double ra = inner(divv - gv, W, g);
            double rb = inner((1.0 / dt) * (b.phi - a.phi), W, g) + pairing(b.mu, mf) + inner(Uphi, W, g) -
                        inner(src.gamma_phi, W, g);
            double rc = inner(b.mu, W, g) - inner(dpsi, W, g) / p.epsilon - p.epsilon * pairing(b.phi, one) +
                        p.chi_phi * inner(b.sigma, W, g);
            double wall = 0.0;
            if (p.b > 0.0) {
                for (int j = 0; j < g.ny; ++j) {
                    wall += p.b * (p.sigma_inf[0] - sw.left[j]) * w(0.0, g.yc(j)) * g.hy;
                    wall += p.b * (p.sigma_inf[1] - sw.right[j]) * w(g.Lx, g.yc(j)) * g.hy;
                }
                for (int i = 0; i < g.nx; ++i) {
                    wall += p.b * (p.sigma_inf[2] - sw.bottom[i]) * w(g.xc(i), 0.0) * g.hx;
                    wall += p.b * (p.sigma_inf[3] - sw.top[i]) * w(g.xc(i), g.Ly) * g.hx;
                }
            }
            double rd = inner((1.0 / dt) * (b.sigma - a.sigma), W, g) + pairing(Ns, nf) + inner(Usig, W, g) -
                        wall + inner(src.gamma_sigma, W, g);
            out.div_constraint = std::max(out.div_constraint, std::abs(ra));
            out.phase = std::max(out.phase, std::abs(rb));
            out.potential = std::max(out.potential, std::abs(rc));
            out.nutrient = std::max(out.nutrient, std::abs(rd));
            if (tf.i == 0 && tf.j == 0) {
                out.phase_constant = std::max(out.phase_constant, std::abs(rb));
                out.nutrient_constant = std::max(out.nutrient_constant, std::abs(rd));
            }
        }
    }
    return out;
}

}  // namespace chb
