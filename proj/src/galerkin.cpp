#include "chb/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chb {

using std::numbers::pi;

namespace {

double mode_kappa(int i, int j, const Grid& g) {
    double k = 1.0 / std::sqrt(g.area());
    if (i > 0) k *= std::sqrt(2.0);
    if (j > 0) k *= std::sqrt(2.0);
    return k;
}

struct ModeEval {
    double w, wx, wy;
};

ModeEval eval_mode(const Mode& md, const Grid& g, double x, double y) {
    const double ax = md.i * pi / g.Lx, ay = md.j * pi / g.Ly;
    const double cx = std::cos(ax * x), cy = std::cos(ay * y);
    return {md.kappa * cx * cy, -md.kappa * ax * std::sin(ax * x) * cy, -md.kappa * ay * cx * std::sin(ay * y)};
}

CellField map_cells(const CellField& f, auto&& fn) {
    CellField out(f);
    for (auto& x : out.values()) x = fn(x);
    return out;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& A, const Vector& weight, const Eigen::MatrixXd& B) {
    return A.transpose() * weight.asDiagonal() * B;
}

}  // namespace

double SpectralBasis::value(int m, double x, double y) const {
    return eval_mode(modes.at(static_cast<std::size_t>(m)), grid, x, y).w;
}

SpectralBasis build_basis(int k, const Grid& g) {
    if (k < 1) throw std::invalid_argument("build_basis: k must be >= 1");
    std::vector<Mode> all;
    const int reach = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k)))) + 2;
    const int ix = static_cast<int>(std::ceil(reach * std::max(1.0, g.Lx / g.Ly)));
    const int iy = static_cast<int>(std::ceil(reach * std::max(1.0, g.Ly / g.Lx)));
    for (int i = 0; i <= ix + k; ++i)
        for (int j = 0; j <= iy + k; ++j)
            all.push_back({i, j, pi * pi * (i * i / (g.Lx * g.Lx) + j * j / (g.Ly * g.Ly)), mode_kappa(i, j, g)});
    std::stable_sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
        if (a.lambda != b.lambda) return a.lambda < b.lambda;
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    all.resize(static_cast<std::size_t>(k));
    for (const Mode& md : all)
        if (g.nx < 4 * md.i || g.ny < 4 * md.j)
            throw std::invalid_argument("build_basis: mode (" + std::to_string(md.i) + "," + std::to_string(md.j) +
                                        ") needs at least 8 cells per wavelength");

    SpectralBasis b;
    b.grid = g;
    b.modes = all;
    const int n = g.cells(), nu = (g.nx + 1) * g.ny, nw = g.nx * (g.ny + 1);
    const int nb = 2 * (g.nx + g.ny);
    b.W.resize(n, k);
    b.Gx.resize(n, k);
    b.Gy.resize(n, k);
    b.Wu.resize(nu, k);
    b.Gu.resize(nu, k);
    b.Ww.resize(nw, k);
    b.Gw.resize(nw, k);
    b.Wb.resize(nb, k);
    b.wall_length.resize(nb);
    for (int m = 0; m < k; ++m) {
        const Mode& md = all[static_cast<std::size_t>(m)];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                ModeEval e = eval_mode(md, g, g.xc(i), g.yc(j));
                b.W(g.idx(i, j), m) = e.w;
                b.Gx(g.idx(i, j), m) = e.wx;
                b.Gy(g.idx(i, j), m) = e.wy;
            }
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) {
                ModeEval e = eval_mode(md, g, i * g.hx, g.yc(j));
                b.Wu(i + (g.nx + 1) * j, m) = e.w;
                b.Gu(i + (g.nx + 1) * j, m) = e.wx;
            }
        for (int j = 0; j <= g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                ModeEval e = eval_mode(md, g, g.xc(i), j * g.hy);
                b.Ww(i + g.nx * j, m) = e.w;
                b.Gw(i + g.nx * j, m) = e.wy;
            }
        int r = 0;
        for (int j = 0; j < g.ny; ++j) b.Wb(r++, m) = eval_mode(md, g, 0.0, g.yc(j)).w;
        for (int j = 0; j < g.ny; ++j) b.Wb(r++, m) = eval_mode(md, g, g.Lx, g.yc(j)).w;
        for (int i = 0; i < g.nx; ++i) b.Wb(r++, m) = eval_mode(md, g, g.xc(i), 0.0).w;
        for (int i = 0; i < g.nx; ++i) b.Wb(r++, m) = eval_mode(md, g, g.xc(i), g.Ly).w;
    }
    for (int r = 0; r < nb; ++r) b.wall_length[r] = r < 2 * g.ny ? g.hy : g.hx;
    return b;
}

Vector project(const CellField& f, const SpectralBasis& basis) {
    require_on_grid(f, basis.grid, "project");
    return basis.W.transpose() * to_vector(f) * basis.grid.cell_area();
}

CellField spectral_to_grid(const Vector& coeffs, const SpectralBasis& basis) {
    if (coeffs.size() != basis.size()) throw std::invalid_argument("spectral_to_grid: coefficient count mismatch");
    return to_field(basis.W * coeffs, basis.grid);
}

Vector chemical_coefficients(const Vector& a, const Vector& c, const Model& m, const SpectralBasis& basis) {
    CellField phi = spectral_to_grid(a, basis);
    CellField dpsi = map_cells(phi, [&](double x) { return m.spec.potential.dpsi(x); });
    Vector lam(basis.size());
    for (int i = 0; i < basis.size(); ++i) lam[i] = basis.modes[static_cast<std::size_t>(i)].lambda;
    const double eps = m.params.epsilon;
    return eps * lam.cwiseProduct(a) + project(dpsi, basis) / eps - m.params.chi_phi * c;
}

GalerkinMatrices assemble_matrices(const Vector& a, const Vector& c, const FaceField& v, const Model& m,
                                   const SpectralBasis& basis) {
    const Grid& g = basis.grid;
    const int k = basis.size();
    if (a.size() != k || c.size() != k) throw std::invalid_argument("assemble_matrices: coefficient count mismatch");
    require_on_grid(v, g, "assemble_matrices");
    GalerkinMatrices M;
    const double A = g.cell_area();
    CellField phi = spectral_to_grid(a, basis);
    CellField sigma = spectral_to_grid(c, basis);

    M.S = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) M.S(i, i) = basis.modes[static_cast<std::size_t>(i)].lambda;
    Vector mw = A * to_vector(map_cells(phi, [&](double x) { return m.spec.m(x); }));
    Vector nw = A * to_vector(map_cells(phi, [&](double x) { return m.spec.n(x); }));
    M.S_m = weighted_gram(basis.Gx, mw, basis.Gx) + weighted_gram(basis.Gy, mw, basis.Gy);
    M.S_n = weighted_gram(basis.Gx, nw, basis.Gx) + weighted_gram(basis.Gy, nw, basis.Gy);
    M.M_bnd = weighted_gram(basis.Wb, basis.wall_length, basis.Wb);

    Vector sig_inf(basis.wall_length.size());
    {
        int r = 0;
        for (int e = 0; e < 4; ++e) {
            int len = e < 2 ? g.ny : g.nx;
            for (int q = 0; q < len; ++q, ++r) sig_inf[r] = m.params.sigma_inf[static_cast<std::size_t>(e)];
        }
    }
    M.Sig = basis.Wb.transpose() * sig_inf.cwiseProduct(basis.wall_length);

    CellField dpsi = map_cells(phi, [&](double x) { return m.spec.potential.dpsi(x); });
    M.psi_vec = project(dpsi, basis);
    M.b = M.S * a * m.params.epsilon + M.psi_vec / m.params.epsilon - m.params.chi_phi * c;
    CellField mu = spectral_to_grid(M.b, basis);

    CellField gphi(g), gsig(g), gv(g);
    for (std::size_t q = 0; q < gphi.size(); ++q) {
        auto s = sources(phi[q], sigma[q], mu[q], m.spec.source, m.params);
        gphi[q] = s.gamma_phi;
        gsig[q] = s.gamma_sigma;
        gv[q] = m.flow ? s.gamma_v : 0.0;
    }
    M.G = project(gphi, basis);
    M.F = project(gsig, basis);
    M.D = weighted_gram(basis.W, A * to_vector(gv), basis.W);

    // face quadrature: full cell area inside, half on the walls
    Vector uw(basis.Wu.rows()), ww(basis.Ww.rows());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            uw[i + (g.nx + 1) * j] = (i == 0 || i == g.nx ? 0.5 : 1.0) * A * v.u(i, j);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) ww[i + g.nx * j] = (j == 0 || j == g.ny ? 0.5 : 1.0) * A * v.w(i, j);
    M.C = weighted_gram(basis.Wu, uw, basis.Gu) + weighted_gram(basis.Ww, ww, basis.Gw);
    return M;
}

SpectralRates galerkin_rhs(const Vector& a, const Vector& c, const GalerkinMatrices& M, const Model& m) {
    const ModelParams& p = m.params;
    SpectralRates r;
    Eigen::MatrixXd T = M.C + M.D;
    r.da = -M.S_m * M.b + M.G - T * a;
    r.dc = M.S_n * (p.chi_phi * a - p.chi_sigma * c) - M.F - T * c - p.b * (M.M_bnd * c) + p.b * M.Sig;
    return r;
}

BrinkmanSolution galerkin_flow(const Vector& a, const Vector& b, const Vector& c, const Model& m,
                               const SpectralBasis& basis, const SolverOptions& opts,
                               const BrinkmanSolution* warm) {
    const Grid& g = basis.grid;
    if (!m.flow) {
        BrinkmanSolution z;
        z.v = FaceField(g);
        z.p = CellField(g);
        z.converged = true;
        return z;
    }
    CellField phi = spectral_to_grid(a, basis), mu = spectral_to_grid(b, basis), sigma = spectral_to_grid(c, basis);
    BrinkmanProblem pb = make_brinkman_problem(phi, mu, sigma, m.params, m.spec, g);
    BrinkmanSolution sol = solve_brinkman(pb, g, opts, warm);
    if (!sol.converged) throw std::runtime_error("galerkin: Brinkman solve did not converge");
    return sol;
}

std::vector<std::string> GalerkinQuantities::names() {
    return {"sup_phi_H1", "sup_sigma_L2", "grad_mu_L2L2", "v_L2H1", "b_sigma_boundary"};
}

std::vector<double> GalerkinQuantities::values() const {
    return {sup_phi_H1, sup_sigma_L2, grad_mu_L2L2, v_L2H1, b_sigma_boundary};
}

double galerkin_stable_dt(const Model& m, const SpectralBasis& basis) {
    double lmax = 0.0;
    for (const Mode& md : basis.modes) lmax = std::max(lmax, md.lambda);
    const ModelParams& p = m.params;
    const double eps = p.epsilon;
    double stiff = m.spec.m.upper() * (eps * lmax * lmax + m.spec.potential.R4() / eps * lmax) +
                   m.spec.n.upper() * p.chi_sigma * lmax + p.b * basis.grid.perimeter() / basis.grid.area() * 4.0;
    // classical RK4 is stable on the negative real axis up to about 2.78
    return stiff > 0.0 ? 2.78 / stiff : INFINITY;
}

GalerkinRun integrate(const CellField& phi0, const CellField& sigma0, const Model& m, const SpectralBasis& basis,
                      const GalerkinOptions& opts) {
    if (!(opts.dt > 0.0) || opts.steps < 0) throw std::invalid_argument("integrate: dt > 0 and steps >= 0 required");
    GalerkinRun run;
    run.k = basis.size();
    run.stable_dt = galerkin_stable_dt(m, basis);
    const int k = basis.size();
    Vector lam(k);
    for (int i = 0; i < k; ++i) lam[i] = basis.modes[static_cast<std::size_t>(i)].lambda;

    SpectralState s;
    s.a = project(phi0, basis);
    s.c = project(sigma0, basis);
    s.b = chemical_coefficients(s.a, s.c, m, basis);
    const Eigen::MatrixXd M_bnd = weighted_gram(basis.Wb, basis.wall_length, basis.Wb);

    GalerkinQuantities& q = run.quantities;
    double prev_mu = 0.0, prev_v = 0.0, prev_bnd = 0.0, int_mu = 0.0, int_v = 0.0, int_bnd = 0.0;
    auto sample_point = [&](const SpectralState& st, const FaceField& v, bool first) {
        q.sup_phi_H1 = std::max(q.sup_phi_H1, std::sqrt(st.a.dot(st.a) + st.a.dot(lam.cwiseProduct(st.a))));
        q.sup_sigma_L2 = std::max(q.sup_sigma_L2, st.c.norm());
        double gm = st.b.dot(lam.cwiseProduct(st.b));
        double vh = velocity_h1_norm(v, basis.grid);
        double bs = m.params.b * st.c.dot(M_bnd * st.c);
        if (!first) {
            int_mu += 0.5 * opts.dt * (gm + prev_mu);
            int_v += 0.5 * opts.dt * (vh * vh + prev_v);
            int_bnd += 0.5 * opts.dt * (bs + prev_bnd);
        }
        prev_mu = gm;
        prev_v = vh * vh;
        prev_bnd = bs;
    };

    BrinkmanSolution last;
    bool have_last = false;
    auto rates = [&](const Vector& a, const Vector& c, BrinkmanSolution* flow_out) {
        Vector b = chemical_coefficients(a, c, m, basis);
        BrinkmanSolution flow = galerkin_flow(a, b, c, m, basis, opts.brinkman, have_last ? &last : nullptr);
        last = flow;
        have_last = true;
        GalerkinMatrices M = assemble_matrices(a, c, flow.v, m, basis);
        if (flow_out) *flow_out = std::move(flow);
        return galerkin_rhs(a, c, M, m);
    };

    run.states.push_back(s);
    try {
        for (int n = 0; n < opts.steps; ++n) {
            BrinkmanSolution flow;
            SpectralRates k1 = rates(s.a, s.c, &flow);
            sample_point(s, flow.v, n == 0);
            const double h = opts.dt;
            SpectralRates k2 = rates(s.a + 0.5 * h * k1.da, s.c + 0.5 * h * k1.dc, nullptr);
            SpectralRates k3 = rates(s.a + 0.5 * h * k2.da, s.c + 0.5 * h * k2.dc, nullptr);
            SpectralRates k4 = rates(s.a + h * k3.da, s.c + h * k3.dc, nullptr);
            s.a += h / 6.0 * (k1.da + 2.0 * k2.da + 2.0 * k3.da + k4.da);
            s.c += h / 6.0 * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc);
            s.t += h;
            if (!s.a.allFinite() || !s.c.allFinite() || s.a.norm() + s.c.norm() > opts.blowup)
                throw std::runtime_error("galerkin: coefficients blew up at t = " + std::to_string(s.t));
            s.b = chemical_coefficients(s.a, s.c, m, basis);
            run.states.push_back(s);
        }
        BrinkmanSolution flow = galerkin_flow(s.a, s.b, s.c, m, basis, opts.brinkman, have_last ? &last : nullptr);
        sample_point(s, flow.v, opts.steps == 0);
        run.completed = true;
    } catch (const std::exception& e) {
        run.failure = e.what();
    }
    q.grad_mu_L2L2 = std::sqrt(int_mu);
    q.v_L2H1 = std::sqrt(int_v);
    q.b_sigma_boundary = std::sqrt(int_bnd);
    return run;
}

SweepReport k_sweep(const std::vector<int>& ks, const CellField& phi0, const CellField& sigma0, const Model& m,
                    const GalerkinOptions& opts, double threshold) {
    if (ks.size() < 2) throw std::invalid_argument("k_sweep: need at least two cutoffs");
    std::vector<int> sorted = ks;
    std::sort(sorted.begin(), sorted.end());
    SweepReport rep;
    rep.all_finite = true;
    for (int k : sorted) {
        SpectralBasis basis = build_basis(k, m.grid);
        GalerkinRun r = integrate(phi0, sigma0, m, basis, opts);
        for (double x : r.quantities.values()) rep.all_finite = rep.all_finite && std::isfinite(x);
        rep.all_finite = rep.all_finite && r.completed;
        rep.runs.push_back(std::move(r));
    }
    const auto& hi = rep.runs[rep.runs.size() - 1].quantities.values();
    const auto& lo = rep.runs[rep.runs.size() - 2].quantities.values();
    rep.uniform = rep.all_finite;
    for (std::size_t i = 0; i < hi.size(); ++i) {
        double scale = std::max(std::abs(hi[i]), std::abs(lo[i]));
        double d = scale > 1e-12 ? std::abs(hi[i] - lo[i]) / scale : 0.0;
        rep.top_difference.push_back(d);
        rep.uniform = rep.uniform && d < threshold;
    }
    return rep;
}

}  // namespace chb
