#include "chb/brinkman.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace chb {

namespace {

using Triplet = Eigen::Triplet<double>;

void validate(const BrinkmanProblem& pb, const Grid& g) {
    require_on_grid(pb.eta, g, "brinkman eta");
    require_on_grid(pb.lambda, g, "brinkman lambda");
    require_on_grid(pb.gamma_v, g, "brinkman gamma_v");
    require_on_grid(pb.force, g, "brinkman force");
    if (!(pb.nu >= 0.0) || !std::isfinite(pb.nu)) throw std::invalid_argument("brinkman: nu must be >= 0");
    for (double e : pb.eta.values())
        if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("brinkman: eta must be positive");
    for (double l : pb.lambda.values())
        if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("brinkman: lambda must be >= 0");
    if (!pb.force.all_finite() || !pb.gamma_v.all_finite())
        throw std::invalid_argument("brinkman: non-finite data");
}

SparseMatrix make(int rows, int cols, const std::vector<Triplet>& t) {
    SparseMatrix A(rows, cols);
    A.setFromTriplets(t.begin(), t.end());
    A.makeCompressed();
    return A;
}

}  // namespace

BrinkmanSystem assemble_brinkman(const BrinkmanProblem& pb, const Grid& g) {
    validate(pb, g);
    BrinkmanSystem s;
    const int nx = g.nx, ny = g.ny;
    s.n_u = (nx + 1) * ny;
    s.n_w = nx * (ny + 1);
    s.n_p = nx * ny;
    const int nv = s.n_u + s.n_w;
    const double A = g.cell_area();
    auto ui = [&](int i, int j) { return i + (nx + 1) * j; };
    auto wi = [&](int i, int j) { return s.n_u + i + nx * j; };

    std::vector<Triplet> tx, ty;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int c = g.idx(i, j);
            tx.emplace_back(c, ui(i + 1, j), 1.0 / g.hx);
            tx.emplace_back(c, ui(i, j), -1.0 / g.hx);
            ty.emplace_back(c, wi(i, j + 1), 1.0 / g.hy);
            ty.emplace_back(c, wi(i, j), -1.0 / g.hy);
        }
    SparseMatrix Ex = make(s.n_p, nv, tx), Ey = make(s.n_p, nv, ty);
    s.div = Ex + Ey;

    // shear rate at interior nodes only; wall nodes carry no shear stress
    const int nn = (nx - 1) * (ny - 1);
    std::vector<Triplet> tg;
    Vector eta_node(nn);
    for (int j = 1; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            int k = (i - 1) + (nx - 1) * (j - 1);
            tg.emplace_back(k, ui(i, j), 1.0 / g.hy);
            tg.emplace_back(k, ui(i, j - 1), -1.0 / g.hy);
            tg.emplace_back(k, wi(i, j), 1.0 / g.hx);
            tg.emplace_back(k, wi(i - 1, j), -1.0 / g.hx);
            eta_node[k] = 0.25 * (pb.eta(i - 1, j - 1) + pb.eta(i, j - 1) + pb.eta(i - 1, j) + pb.eta(i, j));
        }
    SparseMatrix G = make(nn, nv, tg);

    Vector two_eta(s.n_p), lam(s.n_p);
    for (int c = 0; c < s.n_p; ++c) {
        two_eta[c] = 2.0 * pb.eta[c] * A;
        lam[c] = pb.lambda[c] * A;
    }
    s.face_weight = Vector::Constant(nv, A);
    for (int j = 0; j < ny; ++j) {
        s.face_weight[ui(0, j)] = 0.5 * A;
        s.face_weight[ui(nx, j)] = 0.5 * A;
    }
    for (int i = 0; i < nx; ++i) {
        s.face_weight[wi(i, 0)] = 0.5 * A;
        s.face_weight[wi(i, ny)] = 0.5 * A;
    }

    SparseMatrix ExT = Ex.transpose(), EyT = Ey.transpose(), DT = s.div.transpose(), GT = G.transpose();
    s.A_vv = ExT * diagonal(two_eta) * Ex + EyT * diagonal(two_eta) * Ey + DT * diagonal(lam) * s.div +
             GT * diagonal(eta_node * A) * G + diagonal(pb.nu * s.face_weight);
    s.A_vv.makeCompressed();

    std::vector<Triplet> tk;
    tk.reserve(static_cast<std::size_t>(s.A_vv.nonZeros() + 4 * s.div.nonZeros()));
    for (int r = 0; r < s.A_vv.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(s.A_vv, r); it; ++it) tk.emplace_back(r, it.col(), it.value());
    for (int r = 0; r < s.div.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(s.div, r); it; ++it) {
            tk.emplace_back(nv + r, it.col(), -A * it.value());
            tk.emplace_back(it.col(), nv + r, -A * it.value());
        }
    s.K = make(nv + s.n_p, nv + s.n_p, tk);

    s.rhs = Vector::Zero(nv + s.n_p);
    const auto& fu = pb.force.u_values();
    const auto& fw = pb.force.w_values();
    for (int k = 0; k < s.n_u; ++k) s.rhs[k] = s.face_weight[k] * fu[k];
    for (int k = 0; k < s.n_w; ++k) s.rhs[s.n_u + k] = s.face_weight[s.n_u + k] * fw[k];
    for (int c = 0; c < s.n_p; ++c) s.rhs[nv + c] = -A * pb.gamma_v[c];
    return s;
}

Vector pack_brinkman(const FaceField& v, const CellField& p, const Grid& g) {
    const auto& u = v.u_values();
    const auto& w = v.w_values();
    Vector x(static_cast<Eigen::Index>(u.size() + w.size()) + g.cells());
    Eigen::Index k = 0;
    for (double a : u) x[k++] = a;
    for (double a : w) x[k++] = a;
    for (double a : p.values()) x[k++] = a;
    return x;
}

void unpack_brinkman(const Vector& x, const Grid& g, FaceField& v, CellField& p) {
    v = FaceField(g);
    p = CellField(g);
    auto& u = v.u_values();
    auto& w = v.w_values();
    Eigen::Index k = 0;
    for (double& a : u) a = x[k++];
    for (double& a : w) a = x[k++];
    for (double& a : p.values()) a = x[k++];
}

namespace {

BrinkmanSolution finalize(const BrinkmanSystem& s, const BrinkmanProblem& pb, const Grid& g,
                          const Vector& x) {
    BrinkmanSolution sol;
    unpack_brinkman(x, g, sol.v, sol.p);
    double bn = s.rhs.norm();
    Vector r = s.rhs - s.K * x;
    sol.residual = bn > 0 ? r.norm() / bn : r.norm();
    CellField d = divergence(sol.v, g);
    double m = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) m = std::max(m, std::abs(d[k] - pb.gamma_v[k]));
    sol.div_residual = m;
    return sol;
}

}  // namespace

BrinkmanSolution solve_brinkman(const BrinkmanProblem& pb, const Grid& g, const SolverOptions& opts,
                                const BrinkmanSolution* warm_start) {
    BrinkmanSystem s = assemble_brinkman(pb, g);
    const int nv = s.n_u + s.n_w;
    // Block-diagonal preconditioner: exact velocity block and the viscosity-scaled
    // pressure mass, which is spectrally equivalent to the Schur complement.
    Eigen::SimplicialLDLT<SparseMatrix> velocity(s.A_vv);
    if (velocity.info() != Eigen::Success) throw std::runtime_error("brinkman: velocity block factorisation failed");
    Vector dp(s.n_p);
    for (int c = 0; c < s.n_p; ++c) dp[c] = g.cell_area() / (2.0 * pb.eta[c] + pb.lambda[c]);
    auto M_inv = [&](const Vector& y) {
        Vector z(y.size());
        z.head(nv) = velocity.solve(y.head(nv));
        z.tail(s.n_p) = y.tail(s.n_p).cwiseQuotient(dp);
        return z;
    };
    Vector x0;
    const Vector* px0 = nullptr;
    if (warm_start && warm_start->v.matches(g) && warm_start->p.matches(g)) {
        x0 = pack_brinkman(warm_start->v, warm_start->p, g);
        px0 = &x0;
    }
    auto [x, rep] = minres(s.K, s.rhs, M_inv, opts, px0);
    BrinkmanSolution sol = finalize(s, pb, g, x);
    sol.iterations = rep.iterations;
    sol.converged = rep.converged;
    return sol;
}

BrinkmanSolution dense_oracle_solve(const BrinkmanProblem& pb, const Grid& g) {
    if (g.nx > 12 || g.ny > 12) throw std::invalid_argument("dense_oracle_solve: grid larger than 12x12");
    BrinkmanSystem s = assemble_brinkman(pb, g);
    Vector x = dense_solve(s.K, s.rhs);
    BrinkmanSolution sol = finalize(s, pb, g, x);
    sol.converged = true;
    return sol;
}

FaceField brinkman_force(const CellField& phi, const CellField& mu, const CellField& sigma,
                         const ModelParams& params, const ConstitutiveSpec& spec, const Grid& g) {
    require_on_grid(phi, g, "brinkman_force");
    require_on_grid(mu, g, "brinkman_force");
    require_on_grid(sigma, g, "brinkman_force");
    CellField Ns(g);
    for (std::size_t k = 0; k < Ns.size(); ++k) Ns[k] = nutrient_energy(phi[k], sigma[k], params).N_sigma;
    FaceField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            f.u(i, j) = 0.5 * (mu(i - 1, j) + mu(i, j)) * (phi(i, j) - phi(i - 1, j)) / g.hx +
                        0.5 * (Ns(i - 1, j) + Ns(i, j)) * (sigma(i, j) - sigma(i - 1, j)) / g.hx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.w(i, j) = 0.5 * (mu(i, j - 1) + mu(i, j)) * (phi(i, j) - phi(i, j - 1)) / g.hy +
                        0.5 * (Ns(i, j - 1) + Ns(i, j)) * (sigma(i, j) - sigma(i, j - 1)) / g.hy;
    if (params.b > 0.0) {
        EdgeTraces sw = wall_traces(sigma), pw = wall_traces(phi);
        auto wall = [&](Edge e, std::size_t k) {
            double s = sw.edge(e)[k], ph = pw.edge(e)[k];
            double dn = params.b * (params.sigma_inf[static_cast<int>(e)] - s) /
                        (spec.n(ph) * params.chi_sigma);
            return nutrient_energy(ph, s, params).N_sigma * dn;
        };
        for (int j = 0; j < g.ny; ++j) {
            f.u(0, j) = -wall(Edge::Left, j);
            f.u(g.nx, j) = wall(Edge::Right, j);
        }
        for (int i = 0; i < g.nx; ++i) {
            f.w(i, 0) = -wall(Edge::Bottom, i);
            f.w(i, g.ny) = wall(Edge::Top, i);
        }
    }
    return f;
}

BrinkmanProblem make_brinkman_problem(const CellField& phi, const CellField& mu,
                                      const CellField& sigma, const ModelParams& params,
                                      const ConstitutiveSpec& spec, const Grid& g) {
    BrinkmanProblem pb;
    pb.eta = CellField(g);
    pb.lambda = CellField(g);
    pb.gamma_v = CellField(g);
    pb.nu = params.nu;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        pb.eta[k] = spec.eta(phi[k]);
        pb.lambda[k] = spec.lambda(phi[k]);
        pb.gamma_v[k] = sources(phi[k], sigma[k], mu[k], spec.source, params).gamma_v;
    }
    pb.force = brinkman_force(phi, mu, sigma, params, spec, g);
    return pb;
}

double face_pairing(const FaceField& a, const FaceField& b, const Grid& g) {
    require_on_grid(a, g, "face_pairing");
    require_on_grid(b, g, "face_pairing");
    const double A = g.cell_area();
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            s += (i == 0 || i == g.nx ? 0.5 : 1.0) * a.u(i, j) * b.u(i, j);
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            s += (j == 0 || j == g.ny ? 0.5 : 1.0) * a.w(i, j) * b.w(i, j);
    return s * A;
}

double viscous_dissipation(const FaceField& v, const BrinkmanProblem& problem, const Grid& g) {
    BrinkmanSystem s = assemble_brinkman(problem, g);
    Vector x = pack_brinkman(v, CellField(g), g).head(s.n_u + s.n_w);
    return x.dot(s.A_vv * x);
}

}  // namespace chb
