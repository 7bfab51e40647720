#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <utility>

#include "chb/core.hpp"

namespace chb {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

Vector to_vector(const CellField& f);
CellField to_field(const Vector& v, const Grid& g);

/// Coefficient sampled on the cell faces. x holds (nx+1)*ny vertical-face
/// values, y holds nx*(ny+1) horizontal-face values; same layout as FaceField.
struct FaceCoefficients {
    std::vector<double> x;
    std::vector<double> y;

    static FaceCoefficients constant(const Grid& g, double value);
};

/// Harmonic mean of the two adjacent cells on interior faces, cell value on walls.
FaceCoefficients harmonic_faces(const CellField& c, const Grid& g);

/// Linear operator on cell fields, stored as a sparse matrix.
struct StencilOperator {
    SparseMatrix matrix;
    bool symmetric = false;
    std::string description;

    CellField apply(const CellField& f, const Grid& g) const;
    int rows() const { return static_cast<int>(matrix.rows()); }
};

/// div(k grad f) with zero flux through the walls.
StencilOperator neumann_operator(const Grid& g, const FaceCoefficients& k);
CellField apply_neumann_laplacian(const CellField& f, const CellField& coeff, const Grid& g);
CellField apply_neumann_laplacian(const CellField& f, const FaceCoefficients& k, const Grid& g);

/// div(k grad f) in the interior with the wall flux replaced by
/// b (f_inf - f_wall), where f_wall is the linear extrapolation to the wall.
/// linear maps f to the f-dependent part; source holds the f_inf part.
struct RobinOperator {
    StencilOperator linear;
    CellField source;
};

RobinOperator robin_operator(const Grid& g, const FaceCoefficients& k, double b,
                             const EdgeTraces& f_inf);

struct RobinResult {
    CellField value;
    /// Total wall inflow  sum b (f_inf - f_wall) * face length.
    double wall_inflow;
};

RobinResult apply_robin_diffusion(const CellField& f, const CellField& coeff, double b,
                                  const EdgeTraces& f_inf, const Grid& g);

/// First-order upwind conservative divergence of q v. On wall faces the
/// adjacent cell value is used for both inflow and outflow.
SparseMatrix upwind_matrix(const FaceField& v, const Grid& g);
CellField upwind_div(const CellField& q, const FaceField& v, const Grid& g);
/// Net outward advective flux sum q_wall v.n * face length, consistent with upwind_div.
double upwind_boundary_flux(const CellField& q, const FaceField& v, const Grid& g);

/// Discrete divergence of a face field at the cell centres.
CellField divergence(const FaceField& v, const Grid& g);
/// Two-point face gradient of a cell field; zero on the wall faces.
FaceField face_gradient(const CellField& f, const Grid& g);
/// Integral of k |grad f|^2 using face gradients and the face quadrature of
/// the Neumann stencil, so that -<L_k f, f> equals this value.
double dirichlet_form(const CellField& f, const FaceCoefficients& k, const Grid& g);
double dirichlet_pairing(const CellField& f, const CellField& h, const FaceCoefficients& k,
                         const Grid& g);

struct SolverOptions {
    double rel_tol = 1e-10;
    double abs_tol = 0.0;
    int max_iters = 20000;
    /// Project out constants (pure Neumann problems).
    bool project_mean = false;
};

struct SolveReport {
    /// True relative residual ||b - Ax|| / ||b||, recomputed after the solve.
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Preconditioned conjugate gradients with Jacobi scaling.
std::pair<Vector, SolveReport> cg(const SparseMatrix& A, const Vector& b, const SolverOptions& opts,
                                  const Vector* x0 = nullptr);
/// BiCGStab with right Jacobi preconditioning.
std::pair<Vector, SolveReport> bicgstab(const SparseMatrix& A, const Vector& b,
                                        const SolverOptions& opts, const Vector* x0 = nullptr);
/// BiCGStab with a caller-supplied right preconditioner.
std::pair<Vector, SolveReport> bicgstab(const SparseMatrix& A, const Vector& b,
                                        const std::function<Vector(const Vector&)>& M_inv,
                                        const SolverOptions& opts, const Vector* x0 = nullptr);
/// Preconditioned MINRES for symmetric indefinite systems. M_inv applies an
/// SPD preconditioner.
std::pair<Vector, SolveReport> minres(const SparseMatrix& A, const Vector& b,
                                      const std::function<Vector(const Vector&)>& M_inv,
                                      const SolverOptions& opts, const Vector* x0 = nullptr);

std::pair<CellField, SolveReport> solve_spd(const StencilOperator& op, const CellField& rhs,
                                            const Grid& g, const SolverOptions& opts);
std::pair<CellField, SolveReport> solve_general(const StencilOperator& op, const CellField& rhs,
                                                const Grid& g, const SolverOptions& opts);

/// Solves a 2x2 block system on pairs of cell fields with BiCGStab. A diagonal
/// (2,2) block is eliminated first and the Schur complement is iterated on.
std::pair<std::pair<CellField, CellField>, SolveReport> solve_block(
    const SparseMatrix& A, const CellField& r1, const CellField& r2, const Grid& g,
    const SolverOptions& opts);

/// Eigen-decomposition of the unit-coefficient Neumann stencil by separable
/// cosine transforms. apply() evaluates r(L) f for a scalar function r of the
/// eigenvalue (which is <= 0).
class NeumannEigenbasis {
public:
    explicit NeumannEigenbasis(const Grid& g);
    Vector apply(const Vector& f, const std::function<double(double)>& r) const;
    double eigenvalue(int kx, int ky) const { return lx_[kx] + ly_[ky]; }

private:
    int nx_, ny_;
    Eigen::MatrixXd qx_, qy_;
    Vector lx_, ly_;
};

/// Dense LU solve used as a test oracle; throws on rank deficiency.
Vector dense_solve(const SparseMatrix& A, const Vector& b);

/// Sparse identity of size n.
SparseMatrix identity(int n);
SparseMatrix diagonal(const Vector& d);

}  // namespace chb
