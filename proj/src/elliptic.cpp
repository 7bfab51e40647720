#include "chb/elliptic.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace chb {

namespace {

using Triplet = Eigen::Triplet<double>;

int uidx(const Grid& g, int i, int j) { return i + (g.nx + 1) * j; }
int widx(const Grid& g, int i, int j) { return i + g.nx * j; }

void check_positive(const FaceCoefficients& k, const Grid& g, const char* what) {
    if (k.x.size() != static_cast<std::size_t>((g.nx + 1) * g.ny) ||
        k.y.size() != static_cast<std::size_t>(g.nx * (g.ny + 1)))
        throw std::invalid_argument(std::string(what) + ": face coefficient shape mismatch");
    for (double c : k.x)
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::invalid_argument(std::string(what) + ": coefficient must be positive");
    for (double c : k.y)
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::invalid_argument(std::string(what) + ": coefficient must be positive");
}

// Interior 5-point flux stencil; rows get -sum of outgoing fluxes.
void add_interior(std::vector<Triplet>& t, const Grid& g, const FaceCoefficients& k) {
    const double ax = 1.0 / (g.hx * g.hx), ay = 1.0 / (g.hy * g.hy);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            int c = g.idx(i, j);
            double diag = 0.0;
            if (i > 0) {
                double w = k.x[uidx(g, i, j)] * ax;
                t.emplace_back(c, g.idx(i - 1, j), w);
                diag -= w;
            }
            if (i < g.nx - 1) {
                double w = k.x[uidx(g, i + 1, j)] * ax;
                t.emplace_back(c, g.idx(i + 1, j), w);
                diag -= w;
            }
            if (j > 0) {
                double w = k.y[widx(g, i, j)] * ay;
                t.emplace_back(c, g.idx(i, j - 1), w);
                diag -= w;
            }
            if (j < g.ny - 1) {
                double w = k.y[widx(g, i, j + 1)] * ay;
                t.emplace_back(c, g.idx(i, j + 1), w);
                diag -= w;
            }
            t.emplace_back(c, c, diag);
        }
    }
}

SparseMatrix from_triplets(int n, const std::vector<Triplet>& t) {
    SparseMatrix A(n, n);
    A.setFromTriplets(t.begin(), t.end());
    A.makeCompressed();
    return A;
}

double mean(const Vector& x) { return x.size() ? x.sum() / static_cast<double>(x.size()) : 0.0; }

void project(Vector& x, bool on) {
    if (on) x.array() -= mean(x);
}

Vector inverse_diagonal(const SparseMatrix& A) {
    Vector d = A.diagonal();
    for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = (d[k] != 0.0) ? 1.0 / d[k] : 1.0;
    return d;
}

SolveReport finish(const SparseMatrix& A, const Vector& x, const Vector& b, double bnorm,
                   int iters, const SolverOptions& opts) {
    SolveReport r;
    Vector res = b - A * x;
    project(res, opts.project_mean);
    r.residual = bnorm > 0.0 ? res.norm() / bnorm : res.norm();
    r.iterations = iters;
    r.converged = std::isfinite(r.residual) &&
                  (r.residual <= opts.rel_tol || res.norm() <= opts.abs_tol);
    return r;
}

template <class Inner>
std::pair<Vector, SolveReport> restarted(const SparseMatrix& A, const Vector& b_in,
                                         const SolverOptions& opts, const Vector* x0, Inner inner) {
    Vector b = b_in;
    project(b, opts.project_mean);
    const double bnorm = b.norm();
    Vector x = x0 ? *x0 : Vector::Zero(b.size());
    project(x, opts.project_mean);
    if (bnorm == 0.0) {
        x.setZero();
        return {x, SolveReport{0.0, 0, true}};
    }
    int total = 0;
    double last = INFINITY;
    SolveReport rep;
    // inner solvers track an updated residual; restart from the true one until it agrees
    for (int cycle = 0; cycle < 8 && total < opts.max_iters; ++cycle) {
        total += inner(x, b, bnorm, opts.max_iters - total);
        project(x, opts.project_mean);
        rep = finish(A, x, b, bnorm, total, opts);
        if (rep.converged || !std::isfinite(rep.residual) || rep.residual > 0.5 * last) break;
        last = rep.residual;
    }
    return {x, rep};
}

}  // namespace

Vector to_vector(const CellField& f) {
    return Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
}

CellField to_field(const Vector& v, const Grid& g) {
    if (v.size() != g.cells()) throw std::invalid_argument("to_field: size mismatch");
    CellField f(g);
    for (int k = 0; k < g.cells(); ++k) f[k] = v[k];
    return f;
}

FaceCoefficients FaceCoefficients::constant(const Grid& g, double value) {
    FaceCoefficients k;
    k.x.assign(static_cast<std::size_t>((g.nx + 1) * g.ny), value);
    k.y.assign(static_cast<std::size_t>(g.nx * (g.ny + 1)), value);
    return k;
}

FaceCoefficients harmonic_faces(const CellField& c, const Grid& g) {
    require_on_grid(c, g, "harmonic_faces");
    for (double v : c.values())
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("harmonic_faces: coefficient must be positive");
    FaceCoefficients k = FaceCoefficients::constant(g, 0.0);
    auto hm = [](double a, double b) { return 2.0 * a * b / (a + b); };
    for (int j = 0; j < g.ny; ++j) {
        k.x[uidx(g, 0, j)] = c(0, j);
        k.x[uidx(g, g.nx, j)] = c(g.nx - 1, j);
        for (int i = 1; i < g.nx; ++i) k.x[uidx(g, i, j)] = hm(c(i - 1, j), c(i, j));
    }
    for (int i = 0; i < g.nx; ++i) {
        k.y[widx(g, i, 0)] = c(i, 0);
        k.y[widx(g, i, g.ny)] = c(i, g.ny - 1);
        for (int j = 1; j < g.ny; ++j) k.y[widx(g, i, j)] = hm(c(i, j - 1), c(i, j));
    }
    return k;
}

CellField StencilOperator::apply(const CellField& f, const Grid& g) const {
    require_on_grid(f, g, "StencilOperator::apply");
    return to_field(matrix * to_vector(f), g);
}

StencilOperator neumann_operator(const Grid& g, const FaceCoefficients& k) {
    check_positive(k, g, "neumann_operator");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(5 * g.cells()));
    add_interior(t, g, k);
    return {from_triplets(g.cells(), t), true, "div(k grad .) with homogeneous Neumann walls"};
}

CellField apply_neumann_laplacian(const CellField& f, const FaceCoefficients& k, const Grid& g) {
    return neumann_operator(g, k).apply(f, g);
}

CellField apply_neumann_laplacian(const CellField& f, const CellField& coeff, const Grid& g) {
    return apply_neumann_laplacian(f, harmonic_faces(coeff, g), g);
}

RobinOperator robin_operator(const Grid& g, const FaceCoefficients& k, double b,
                             const EdgeTraces& f_inf) {
    if (b < 0.0 || !std::isfinite(b)) throw std::invalid_argument("robin_operator: b must be >= 0");
    if (!f_inf.matches(g)) throw std::invalid_argument("robin_operator: far-field trace shape mismatch");
    check_positive(k, g, "robin_operator");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(6 * g.cells()));
    add_interior(t, g, k);
    CellField src(g);
    if (b > 0.0) {
        const double bx = b / g.hx, by = b / g.hy;
        // wall flux b (f_inf - 1.5 f_0 + 0.5 f_1) divided by the cell width
        for (int j = 0; j < g.ny; ++j) {
            int c0 = g.idx(0, j), c1 = g.idx(1, j);
            t.emplace_back(c0, c0, -1.5 * bx);
            t.emplace_back(c0, c1, 0.5 * bx);
            src(0, j) += bx * f_inf.left[j];
            int d0 = g.idx(g.nx - 1, j), d1 = g.idx(g.nx - 2, j);
            t.emplace_back(d0, d0, -1.5 * bx);
            t.emplace_back(d0, d1, 0.5 * bx);
            src(g.nx - 1, j) += bx * f_inf.right[j];
        }
        for (int i = 0; i < g.nx; ++i) {
            int c0 = g.idx(i, 0), c1 = g.idx(i, 1);
            t.emplace_back(c0, c0, -1.5 * by);
            t.emplace_back(c0, c1, 0.5 * by);
            src(i, 0) += by * f_inf.bottom[i];
            int d0 = g.idx(i, g.ny - 1), d1 = g.idx(i, g.ny - 2);
            t.emplace_back(d0, d0, -1.5 * by);
            t.emplace_back(d0, d1, 0.5 * by);
            src(i, g.ny - 1) += by * f_inf.top[i];
        }
    }
    RobinOperator op;
    op.linear = {from_triplets(g.cells(), t), b == 0.0,
                 "div(k grad .) with Robin wall flux b(f_inf - f_wall)"};
    op.source = std::move(src);
    return op;
}

RobinResult apply_robin_diffusion(const CellField& f, const CellField& coeff, double b,
                                  const EdgeTraces& f_inf, const Grid& g) {
    RobinOperator op = robin_operator(g, harmonic_faces(coeff, g), b, f_inf);
    RobinResult r;
    r.value = op.linear.apply(f, g);
    r.value += op.source;
    EdgeTraces fw = wall_traces(f);
    EdgeTraces diff = f_inf;
    for (Edge e : {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top}) {
        auto& d = diff.edge(e);
        const auto& w = fw.edge(e);
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = b * (d[k] - w[k]);
    }
    r.wall_inflow = integrate_boundary(diff, g);
    return r;
}

SparseMatrix upwind_matrix(const FaceField& v, const Grid& g) {
    require_on_grid(v, g, "upwind_matrix");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(8 * g.cells()));
    const double ix = 1.0 / g.hx, iy = 1.0 / g.hy;
    // flux through each face goes out of one cell and into the other
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i <= g.nx; ++i) {
            double u = v.u(i, j);
            if (u == 0.0) continue;
            int left = i - 1, right = i;
            int src = i == 0 ? 0 : (i == g.nx ? g.nx - 1 : (u > 0.0 ? left : right));
            int s = g.idx(src, j);
            if (left >= 0) t.emplace_back(g.idx(left, j), s, u * ix);
            if (right < g.nx) t.emplace_back(g.idx(right, j), s, -u * ix);
        }
    }
    for (int j = 0; j <= g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double w = v.w(i, j);
            if (w == 0.0) continue;
            int below = j - 1, above = j;
            int src = j == 0 ? 0 : (j == g.ny ? g.ny - 1 : (w > 0.0 ? below : above));
            int s = g.idx(i, src);
            if (below >= 0) t.emplace_back(g.idx(i, below), s, w * iy);
            if (above < g.ny) t.emplace_back(g.idx(i, above), s, -w * iy);
        }
    }
    return from_triplets(g.cells(), t);
}

CellField upwind_div(const CellField& q, const FaceField& v, const Grid& g) {
    require_on_grid(q, g, "upwind_div");
    return to_field(upwind_matrix(v, g) * to_vector(q), g);
}

double upwind_boundary_flux(const CellField& q, const FaceField& v, const Grid& g) {
    require_on_grid(q, g, "upwind_boundary_flux");
    require_on_grid(v, g, "upwind_boundary_flux");
    double sy = 0.0, sx = 0.0;
    for (int j = 0; j < g.ny; ++j) sy += q(g.nx - 1, j) * v.u(g.nx, j) - q(0, j) * v.u(0, j);
    for (int i = 0; i < g.nx; ++i) sx += q(i, g.ny - 1) * v.w(i, g.ny) - q(i, 0) * v.w(i, 0);
    return sy * g.hy + sx * g.hx;
}

CellField divergence(const FaceField& v, const Grid& g) {
    require_on_grid(v, g, "divergence");
    CellField d(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            d(i, j) = (v.u(i + 1, j) - v.u(i, j)) / g.hx + (v.w(i, j + 1) - v.w(i, j)) / g.hy;
    return d;
}

FaceField face_gradient(const CellField& f, const Grid& g) {
    require_on_grid(f, g, "face_gradient");
    FaceField gr(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) gr.u(i, j) = (f(i, j) - f(i - 1, j)) / g.hx;
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) gr.w(i, j) = (f(i, j) - f(i, j - 1)) / g.hy;
    return gr;
}

double dirichlet_pairing(const CellField& f, const CellField& h, const FaceCoefficients& k,
                         const Grid& g) {
    require_on_grid(f, g, "dirichlet_pairing");
    require_on_grid(h, g, "dirichlet_pairing");
    double sx = 0.0, sy = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            sx += k.x[uidx(g, i, j)] * (f(i, j) - f(i - 1, j)) * (h(i, j) - h(i - 1, j));
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            sy += k.y[widx(g, i, j)] * (f(i, j) - f(i, j - 1)) * (h(i, j) - h(i, j - 1));
    return sx * g.hy / g.hx + sy * g.hx / g.hy;
}

double dirichlet_form(const CellField& f, const FaceCoefficients& k, const Grid& g) {
    return dirichlet_pairing(f, f, k, g);
}

std::pair<Vector, SolveReport> cg(const SparseMatrix& A, const Vector& b, const SolverOptions& opts,
                                  const Vector* x0) {
    const Vector dinv = inverse_diagonal(A);
    auto inner = [&](Vector& x, const Vector& rhs, double bnorm, int budget) {
        Vector r = rhs - A * x;
        project(r, opts.project_mean);
        Vector z = dinv.cwiseProduct(r);
        project(z, opts.project_mean);
        Vector p = z;
        double rz = r.dot(z);
        int it = 0;
        const double target = std::max(opts.rel_tol * bnorm * 0.1, opts.abs_tol);
        while (it < budget && r.norm() > target) {
            Vector Ap = A * p;
            double pAp = p.dot(Ap);
            if (!(pAp > 0.0)) break;
            double alpha = rz / pAp;
            x += alpha * p;
            r -= alpha * Ap;
            z = dinv.cwiseProduct(r);
            project(z, opts.project_mean);
            double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
            ++it;
        }
        return it;
    };
    return restarted(A, b, opts, x0, inner);
}

std::pair<Vector, SolveReport> bicgstab(const SparseMatrix& A, const Vector& b,
                                        const std::function<Vector(const Vector&)>& M_inv,
                                        const SolverOptions& opts, const Vector* x0) {
    auto inner = [&](Vector& x, const Vector& rhs, double bnorm, int budget) {
        Vector r = rhs - A * x;
        project(r, opts.project_mean);
        const Vector r0 = r;
        double rho = 1.0, alpha = 1.0, omega = 1.0;
        Vector v = Vector::Zero(r.size()), p = Vector::Zero(r.size());
        int it = 0;
        const double target = std::max(opts.rel_tol * bnorm * 0.1, opts.abs_tol);
        while (it < budget && r.norm() > target) {
            double rho_new = r0.dot(r);
            if (rho_new == 0.0 || omega == 0.0) break;
            double beta = (rho_new / rho) * (alpha / omega);
            p = r + beta * (p - omega * v);
            Vector ph = M_inv(p);
            v = A * ph;
            double r0v = r0.dot(v);
            if (r0v == 0.0) break;
            alpha = rho_new / r0v;
            Vector s = r - alpha * v;
            x += alpha * ph;
            ++it;
            if (s.norm() <= target) {
                r = s;
                break;
            }
            Vector sh = M_inv(s);
            Vector t = A * sh;
            double tt = t.dot(t);
            if (tt == 0.0) break;
            omega = t.dot(s) / tt;
            x += omega * sh;
            r = s - omega * t;
            rho = rho_new;
            if (!std::isfinite(r.norm())) break;
        }
        return it;
    };
    return restarted(A, b, opts, x0, inner);
}

std::pair<Vector, SolveReport> bicgstab(const SparseMatrix& A, const Vector& b,
                                        const SolverOptions& opts, const Vector* x0) {
    const Vector dinv = inverse_diagonal(A);
    return bicgstab(A, b, [&](const Vector& r) -> Vector { return dinv.cwiseProduct(r); }, opts, x0);
}

std::pair<Vector, SolveReport> minres(const SparseMatrix& A, const Vector& b,
                                      const std::function<Vector(const Vector&)>& M_inv,
                                      const SolverOptions& opts, const Vector* x0) {
    auto inner = [&](Vector& x, const Vector& rhs, double bnorm, int budget) {
        const Eigen::Index n = rhs.size();
        Vector v_old = Vector::Zero(n), v = rhs - A * x;
        Vector z = M_inv(v);
        double gamma = std::sqrt(std::max(z.dot(v), 0.0));
        double gamma_old = 1.0;
        if (gamma == 0.0) return 0;
        const double eta0 = gamma;
        double eta = gamma, s_old = 0.0, s = 0.0, c_old = 1.0, c = 1.0;
        Vector w_old = Vector::Zero(n), w = Vector::Zero(n);
        int it = 0;
        // the preconditioned residual estimate is scaled by the initial true residual
        const double r0 = v.norm();
        const double target = std::max(opts.rel_tol * bnorm * 0.1, opts.abs_tol);
        while (it < budget) {
            z /= gamma;
            Vector Az = A * z;
            double delta = Az.dot(z);
            Vector v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old;
            Vector z_new = M_inv(v_new);
            double gamma_new = std::sqrt(std::max(z_new.dot(v_new), 0.0));
            double a0 = c * delta - c_old * s * gamma;
            double a1 = std::sqrt(a0 * a0 + gamma_new * gamma_new);
            double a2 = s * delta + c_old * c * gamma;
            double a3 = s_old * gamma;
            double c_new = a0 / a1, s_new = gamma_new / a1;
            Vector w_new = (z - a3 * w_old - a2 * w) / a1;
            x += c_new * eta * w_new;
            eta = -s_new * eta;
            ++it;
            if (std::abs(eta) / eta0 * r0 <= target || gamma_new == 0.0 || !std::isfinite(eta)) break;
            v_old = std::move(v);
            v = std::move(v_new);
            z = std::move(z_new);
            w_old = std::move(w);
            w = std::move(w_new);
            gamma_old = gamma;
            gamma = gamma_new;
            c_old = c;
            c = c_new;
            s_old = s;
            s = s_new;
        }
        return it;
    };
    return restarted(A, b, opts, x0, inner);
}

std::pair<CellField, SolveReport> solve_spd(const StencilOperator& op, const CellField& rhs,
                                            const Grid& g, const SolverOptions& opts) {
    require_on_grid(rhs, g, "solve_spd");
    auto [x, rep] = cg(op.matrix, to_vector(rhs), opts);
    return {to_field(x, g), rep};
}

std::pair<CellField, SolveReport> solve_general(const StencilOperator& op, const CellField& rhs,
                                                const Grid& g, const SolverOptions& opts) {
    require_on_grid(rhs, g, "solve_general");
    auto [x, rep] = bicgstab(op.matrix, to_vector(rhs), opts);
    return {to_field(x, g), rep};
}

std::pair<std::pair<CellField, CellField>, SolveReport> solve_block(
    const SparseMatrix& A, const CellField& r1, const CellField& r2, const Grid& g,
    const SolverOptions& opts) {
    const int n = g.cells();
    if (A.rows() != 2 * n || A.cols() != 2 * n)
        throw std::invalid_argument("solve_block: operator must be 2n x 2n");
    SparseMatrix A11 = A.topLeftCorner(n, n), A12 = A.topRightCorner(n, n);
    SparseMatrix A21 = A.bottomLeftCorner(n, n), A22 = A.bottomRightCorner(n, n);
    bool diag22 = true;
    Vector d22 = Vector::Zero(n);
    for (int r = 0; r < n; ++r)
        for (SparseMatrix::InnerIterator it(A22, r); it; ++it) {
            if (it.col() != r && it.value() != 0.0) diag22 = false;
            if (it.col() == r) d22[r] = it.value();
        }
    if (diag22 && (d22.array() != 0.0).all()) {
        // eliminate the second unknown: y = D^{-1}(r2 - A21 x)
        Vector dinv = d22.cwiseInverse();
        SparseMatrix S = A11 - A12 * diagonal(dinv) * A21;
        Vector rhs = to_vector(r1) - A12 * dinv.cwiseProduct(to_vector(r2));
        auto [x, rep] = bicgstab(S, rhs, opts);
        Vector y = dinv.cwiseProduct(to_vector(r2) - A21 * x);
        Vector full(2 * n), b(2 * n);
        full << x, y;
        b << to_vector(r1), to_vector(r2);
        double bn = b.norm();
        rep.residual = bn > 0 ? (b - A * full).norm() / bn : 0.0;
        return {{to_field(x, g), to_field(y, g)}, rep};
    }
    Vector b(2 * n);
    b << to_vector(r1), to_vector(r2);
    auto [x, rep] = bicgstab(A, b, opts);
    return {{to_field(x.head(n), g), to_field(x.tail(n), g)}, rep};
}

namespace {

// Orthonormal DCT-II vectors and eigenvalues of the 1D Neumann stencil.
void neumann_1d(int n, double h, Eigen::MatrixXd& q, Vector& lam) {
    const double pi = std::acos(-1.0);
    q.resize(n, n);
    lam.resize(n);
    for (int k = 0; k < n; ++k) {
        double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
        for (int i = 0; i < n; ++i) q(i, k) = scale * std::cos(pi * k * (i + 0.5) / n);
        double s = std::sin(0.5 * pi * k / n);
        lam[k] = -4.0 * s * s / (h * h);
    }
}

}  // namespace

NeumannEigenbasis::NeumannEigenbasis(const Grid& g) : nx_(g.nx), ny_(g.ny) {
    neumann_1d(g.nx, g.hx, qx_, lx_);
    neumann_1d(g.ny, g.hy, qy_, ly_);
}

Vector NeumannEigenbasis::apply(const Vector& f, const std::function<double(double)>& r) const {
    if (f.size() != static_cast<Eigen::Index>(nx_) * ny_)
        throw std::invalid_argument("NeumannEigenbasis: vector size mismatch");
    Eigen::Map<const Eigen::MatrixXd> F(f.data(), nx_, ny_);
    Eigen::MatrixXd H = qx_.transpose() * F * qy_;
    for (int j = 0; j < ny_; ++j)
        for (int i = 0; i < nx_; ++i) H(i, j) *= r(lx_[i] + ly_[j]);
    Vector out(f.size());
    Eigen::Map<Eigen::MatrixXd>(out.data(), nx_, ny_) = qx_ * H * qy_.transpose();
    return out;
}

Vector dense_solve(const SparseMatrix& A, const Vector& b) {
    Eigen::MatrixXd D = Eigen::MatrixXd(A);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
    lu.setThreshold(1e-13);
    if (lu.rank() < D.rows()) throw std::runtime_error("dense_solve: matrix is singular");
    return lu.solve(b);
}

SparseMatrix identity(int n) {
    SparseMatrix I(n, n);
    I.setIdentity();
    return I;
}

SparseMatrix diagonal(const Vector& d) {
    SparseMatrix D(d.size(), d.size());
    std::vector<Triplet> t;
    for (Eigen::Index k = 0; k < d.size(); ++k) t.emplace_back(k, k, d[k]);
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

}  // namespace chb
