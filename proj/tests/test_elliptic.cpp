#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "chb/elliptic.hpp"

using namespace chb;
using std::numbers::pi;

namespace {

CellField random_field(const Grid& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> U(lo, hi);
    CellField f(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = U(rng);
    return f;
}

double max_abs(const CellField& f) {
    double m = 0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

// Independent dense assembly of div(grad .) with zero wall flux, by cell loops.
Eigen::MatrixXd dense_laplacian(const Grid& g) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.cells(), g.cells());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            int c = g.idx(i, j);
            const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                int a = i + di[d], b = j + dj[d];
                if (a < 0 || a >= g.nx || b < 0 || b >= g.ny) continue;
                double w = di[d] ? 1.0 / (g.hx * g.hx) : 1.0 / (g.hy * g.hy);
                L(c, g.idx(a, b)) += w;
                L(c, c) -= w;
            }
        }
    return L;
}

}  // namespace

TEST_CASE("neumann laplacian basics") {
    Grid g = make_grid(1, 1, 12, 9);
    std::mt19937_64 rng(1);
    CellField k = random_field(g, rng, 0.5, 2.0);
    CHECK(max_abs(apply_neumann_laplacian(CellField(g, 3.7), k, g)) < 1e-11);
    CellField f = random_field(g, rng), h = random_field(g, rng);
    CellField lhs = apply_neumann_laplacian(f + h, k, g);
    CellField rhs = apply_neumann_laplacian(f, k, g) + apply_neumann_laplacian(h, k, g);
    CHECK(max_abs(lhs - rhs) < 1e-10);
    CHECK(std::abs(integrate_cell(apply_neumann_laplacian(f, k, g), g)) < 1e-12);
    CHECK_THROWS_AS(apply_neumann_laplacian(f, CellField(g, 0.0), g), std::invalid_argument);
}

TEST_CASE("neumann operator is symmetric and matches its Dirichlet form") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Grid g = make_grid(1.0 + 0.1 * trial, 1.0, 5 + trial, 7 + trial % 3);
        CellField k = random_field(g, rng, 0.1, 3.0);
        FaceCoefficients kf = harmonic_faces(k, g);
        CellField x = random_field(g, rng), y = random_field(g, rng);
        auto L = neumann_operator(g, kf);
        double a = inner(L.apply(x, g), y, g), b = inner(x, L.apply(y, g), g);
        CHECK(std::abs(a - b) < 1e-11 * (1 + std::abs(a)));
        CHECK(-inner(L.apply(x, g), x, g) == doctest::Approx(dirichlet_form(x, kf, g)).epsilon(1e-11));
        CHECK(-a == doctest::Approx(dirichlet_pairing(x, y, kf, g)).epsilon(1e-10));
    }
}

TEST_CASE("cosine mode is a discrete eigenfunction") {
    Grid g = make_grid(1, 1, 32, 32);
    CellField f = sample(g, [](double x, double) { return std::cos(pi * x); });
    Eigen::MatrixXd D = dense_laplacian(g);
    Vector oracle = D * to_vector(f);
    CellField Lf = apply_neumann_laplacian(f, CellField(g, 1.0), g);
    double lam = 4.0 / (g.hx * g.hx) * std::pow(std::sin(pi * g.hx / 2), 2);
    for (int k = 0; k < g.cells(); ++k) {
        CHECK(Lf[k] == doctest::Approx(oracle[k]).epsilon(1e-12).scale(1.0));
        CHECK(Lf[k] == doctest::Approx(-lam * f[k]).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("robin diffusion examples") {
    Grid g = make_grid(1, 1, 16, 16);
    CellField one(g, 1.0);
    auto eq = apply_robin_diffusion(CellField(g, 0.6), one, 2.0, EdgeTraces::constant(g, 0.6), g);
    CHECK(max_abs(eq.value) < 1e-12);
    CHECK(std::abs(eq.wall_inflow) < 1e-12);

    std::mt19937_64 rng(3);
    CellField f = random_field(g, rng);
    CellField k = random_field(g, rng, 0.5, 1.5);
    auto r0 = apply_robin_diffusion(f, k, 0.0, EdgeTraces::constant(g, 5.0), g);
    CHECK(max_abs(r0.value - apply_neumann_laplacian(f, k, g)) < 1e-12);

    auto in = apply_robin_diffusion(CellField(g, 0.0), one, 1.0, EdgeTraces::constant(g, 1.0), g);
    CHECK(in.wall_inflow == doctest::Approx(4.0));
    CHECK(integrate_cell(in.value, g) == doctest::Approx(4.0));

    // discrete divergence theorem on random data with per-edge far field
    auto rr = apply_robin_diffusion(f, k, 0.7, EdgeTraces::per_edge(g, {0.1, 0.2, -0.3, 0.4}), g);
    CHECK(integrate_cell(rr.value, g) == doctest::Approx(rr.wall_inflow).epsilon(1e-12));
    CHECK_THROWS(apply_robin_diffusion(f, k, -1.0, EdgeTraces::constant(g, 0.0), g));
}

TEST_CASE("spd solves") {
    Grid g = make_grid(1, 1, 8, 8);
    SolverOptions opts;
    StencilOperator I{identity(g.cells()), true, "identity"};
    std::mt19937_64 rng(4);
    CellField r = random_field(g, rng);
    auto [x, rep] = solve_spd(I, r, g, opts);
    CHECK(rep.converged);
    CHECK(max_abs(x - r) < 1e-14);

    auto L = neumann_operator(g, FaceCoefficients::constant(g, 1.0));
    StencilOperator M{identity(g.cells()) - 0.3 * L.matrix, true, "I - aL"};
    auto [c, rc] = solve_spd(M, CellField(g, 2.5), g, opts);
    CHECK(rc.converged);
    CHECK(max_abs(c - CellField(g, 2.5)) < 1e-9);

    // random SPD stencil against a dense factorisation
    CellField k = random_field(g, rng, 0.2, 4.0);
    SparseMatrix A = identity(g.cells()) * 0.5 - neumann_operator(g, harmonic_faces(k, g)).matrix;
    StencilOperator op{A, true, "random spd"};
    auto [y, ry] = solve_spd(op, r, g, opts);
    Vector ref = Eigen::MatrixXd(A).llt().solve(to_vector(r));
    CHECK(ry.converged);
    CHECK((to_vector(y) - ref).lpNorm<Eigen::Infinity>() < 1e-8);
    Vector res = to_vector(r) - A * to_vector(y);
    CHECK(res.norm() / to_vector(r).norm() <= 2.0 * ry.residual + 1e-16);
}

TEST_CASE("singular neumann solve returns the zero-mean solution") {
    Grid g = make_grid(1, 1, 16, 16);
    auto L = neumann_operator(g, FaceCoefficients::constant(g, 1.0));
    StencilOperator negL{-L.matrix, true, "-L"};
    CellField u = sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(2 * pi * y) + x * x; });
    double mean = integrate_cell(u, g) / g.area();
    for (auto& v : u.values()) v -= mean;
    CellField f = negL.apply(u, g);
    SolverOptions opts;
    opts.project_mean = true;
    opts.rel_tol = 1e-12;
    auto [x, rep] = solve_spd(negL, f + CellField(g, 0.3), g, opts);
    CHECK(rep.converged);
    CHECK(max_abs(x - u) < 1e-9);
}

TEST_CASE("general solves") {
    Grid g = make_grid(1, 1, 8, 8);
    std::mt19937_64 rng(5);
    CellField r = random_field(g, rng);
    SolverOptions opts;
    StencilOperator I{identity(g.cells()), true, "identity"};
    CHECK(max_abs(solve_general(I, r, g, opts).first - r) < 1e-14);

    CellField k = random_field(g, rng, 0.2, 4.0);
    StencilOperator A{identity(g.cells()) - neumann_operator(g, harmonic_faces(k, g)).matrix, true, "spd"};
    opts.rel_tol = 1e-13;
    auto a = solve_general(A, r, g, opts).first;
    auto b = solve_spd(A, r, g, opts).first;
    CHECK(max_abs(a - b) < 1e-10);

    // coupled phase-field block [I/dt + U, -L_m; (s/e) I - e L, -I]
    FaceField v(g);
    std::uniform_real_distribution<double> U(-1, 1);
    for (auto& x : v.u_values()) x = U(rng);
    for (auto& x : v.w_values()) x = U(rng);
    const int n = g.cells();
    const double dt = 1e-2, eps = 0.1, s = 2.0;
    SparseMatrix L = neumann_operator(g, FaceCoefficients::constant(g, 1.0)).matrix;
    SparseMatrix Lm = neumann_operator(g, harmonic_faces(k, g)).matrix;
    SparseMatrix A11 = identity(n) / dt + upwind_matrix(v, g);
    SparseMatrix A12 = -Lm;
    SparseMatrix A21 = identity(n) * (s / eps) - eps * L;
    SparseMatrix A22 = -identity(n);
    std::vector<Eigen::Triplet<double>> t;
    auto put = [&](const SparseMatrix& B, int r0, int c0) {
        for (int row = 0; row < B.outerSize(); ++row)
            for (SparseMatrix::InnerIterator it(B, row); it; ++it) t.emplace_back(r0 + row, c0 + it.col(), it.value());
    };
    put(A11, 0, 0);
    put(A12, 0, n);
    put(A21, n, 0);
    put(A22, n, n);
    SparseMatrix K(2 * n, 2 * n);
    K.setFromTriplets(t.begin(), t.end());
    CellField r2 = random_field(g, rng);
    auto [sol, rep] = solve_block(K, r, r2, g, opts);
    Vector rhs(2 * n);
    rhs << to_vector(r), to_vector(r2);
    Vector ref = Eigen::MatrixXd(K).fullPivLu().solve(rhs);
    CHECK(rep.converged);
    CHECK((to_vector(sol.first) - ref.head(n)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((to_vector(sol.second) - ref.tail(n)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("upwind divergence") {
    Grid g = make_grid(1, 1, 4, 4);
    std::mt19937_64 rng(6);
    CellField q = random_field(g, rng);
    CHECK(max_abs(upwind_div(q, FaceField(g), g)) == 0.0);

    // discretely divergence-free rotation from a node stream function, zero on the walls
    Grid h = make_grid(1, 1, 10, 10);
    auto psi = [&](int i, int j) {
        double x = i * h.hx, y = j * h.hy;
        return std::sin(pi * x) * std::sin(pi * y);
    };
    FaceField v(h);
    for (int j = 0; j < h.ny; ++j)
        for (int i = 0; i <= h.nx; ++i) v.u(i, j) = (psi(i, j + 1) - psi(i, j)) / h.hy;
    for (int j = 0; j <= h.ny; ++j)
        for (int i = 0; i < h.nx; ++i) v.w(i, j) = -(psi(i + 1, j) - psi(i, j)) / h.hx;
    CHECK(max_abs(divergence(v, h)) < 1e-12);
    CHECK(max_abs(upwind_div(CellField(h, 2.0), v, h)) < 1e-12);

    // uniform flow of a constant: every column telescopes to zero on the 4x4 grid
    FaceField w(g, 0.0);
    for (auto& x : w.u_values()) x = 1.0;
    CellField d = upwind_div(CellField(g, 1.0), w, g);
    CHECK(max_abs(d) < 1e-14);
    CHECK(integrate_cell(d, g) == doctest::Approx(upwind_boundary_flux(CellField(g, 1.0), w, g)));

    // telescoping on random data
    FaceField rv(g);
    std::uniform_real_distribution<double> U(-1, 1);
    for (auto& x : rv.u_values()) x = U(rng);
    for (auto& x : rv.w_values()) x = U(rng);
    CHECK(integrate_cell(upwind_div(q, rv, g), g) ==
          doctest::Approx(upwind_boundary_flux(q, rv, g)).epsilon(1e-12));
}

TEST_CASE("manufactured neumann-poisson converges at second order") {
    double prev = 0;
    for (int n : {16, 32, 64, 128}) {
        Grid g = make_grid(1, 1, n, n);
        CellField u = sample(g, [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
        CellField f = sample(g, [](double x, double y) { return 2 * pi * pi * std::cos(pi * x) * std::cos(pi * y); });
        auto L = neumann_operator(g, FaceCoefficients::constant(g, 1.0));
        StencilOperator negL{-L.matrix, true, "-L"};
        SolverOptions opts;
        opts.project_mean = true;
        opts.rel_tol = 1e-12;
        auto [x, rep] = solve_spd(negL, f, g, opts);
        CHECK(rep.converged);
        double err = l2_norm(x - u, g);
        if (n > 16) {
            double order = std::log2(prev / err);
            CHECK(order > 1.8);
            CHECK(order < 2.2);
        }
        prev = err;
    }
}
