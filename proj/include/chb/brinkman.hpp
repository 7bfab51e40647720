#pragma once

#include "chb/constitutive.hpp"
#include "chb/core.hpp"
#include "chb/elliptic.hpp"

namespace chb {

/// -div(2 eta Dv + lambda div(v) I - p I) + nu v = force, div v = gamma_v,
/// with zero traction on every wall.
struct BrinkmanProblem {
    CellField eta;
    CellField lambda;
    double nu = 1.0;
    FaceField force;
    CellField gamma_v;
};

struct BrinkmanSolution {
    FaceField v;
    CellField p;
    /// Relative residual of the full saddle-point system.
    double residual = 0.0;
    /// max |div_h v - gamma_v|.
    double div_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Assembled saddle-point system. Unknown ordering is [u faces, w faces, p cells].
///
/// The discretisation is variational: the velocity block is the Hessian of
///   sum_cells A (2 eta (exx^2 + eyy^2) + lambda div^2)
///   + sum_interior_nodes A eta_node gamma^2 + nu sum_faces omega |v|^2,
/// so the traction-free condition is the natural one and needs no ghost values.
struct BrinkmanSystem {
    SparseMatrix K;
    Vector rhs;
    SparseMatrix A_vv;
    SparseMatrix div;  // cells x velocity unknowns
    int n_u = 0;
    int n_w = 0;
    int n_p = 0;
    /// Face quadrature weights omega (half cell area on walls).
    Vector face_weight;
};

BrinkmanSystem assemble_brinkman(const BrinkmanProblem& problem, const Grid& g);

/// Packs (v, p) into the unknown vector of the assembled system and back.
Vector pack_brinkman(const FaceField& v, const CellField& p, const Grid& g);
void unpack_brinkman(const Vector& x, const Grid& g, FaceField& v, CellField& p);

BrinkmanSolution solve_brinkman(const BrinkmanProblem& problem, const Grid& g,
                                const SolverOptions& opts = {1e-11, 0.0, 20000, false},
                                const BrinkmanSolution* warm_start = nullptr);

/// Direct dense solve of the same system; grids larger than 12x12 are rejected.
BrinkmanSolution dense_oracle_solve(const BrinkmanProblem& problem, const Grid& g);

/// Face force mu grad(phi) + N_sigma grad(sigma). On the walls grad(phi).n = 0
/// and the normal nutrient gradient follows from the Robin condition.
FaceField brinkman_force(const CellField& phi, const CellField& mu, const CellField& sigma,
                         const ModelParams& params, const ConstitutiveSpec& spec, const Grid& g);

BrinkmanProblem make_brinkman_problem(const CellField& phi, const CellField& mu,
                                      const CellField& sigma, const ModelParams& params,
                                      const ConstitutiveSpec& spec, const Grid& g);

/// sum omega f.v over faces.
double face_pairing(const FaceField& a, const FaceField& b, const Grid& g);

/// Discrete sum A (2 eta |Dv|^2 + lambda div^2) + nu |v|^2, i.e. v^T A_vv v.
double viscous_dissipation(const FaceField& v, const BrinkmanProblem& problem, const Grid& g);

}  // namespace chb
