#pragma once

#include <string>
#include <vector>

#include "chb/diagnostics.hpp"

namespace chb {

/// Cosine eigenfunction kappa cos(i pi x / Lx) cos(j pi y / Ly) of the Neumann Laplacian.
struct Mode {
    int i = 0;
    int j = 0;
    double lambda = 0.0;  // pi^2 (i^2/Lx^2 + j^2/Ly^2)
    double kappa = 0.0;   // L2 normalisation
};

/// First k Neumann eigenfunctions, ordered by eigenvalue then (i, j), sampled
/// on the quadrature grid. The constant mode comes first.
struct SpectralBasis {
    Grid grid;
    std::vector<Mode> modes;
    Eigen::MatrixXd W;              // cells x k, values at cell centres
    Eigen::MatrixXd Gx, Gy;         // cells x k, exact derivatives at cell centres
    Eigen::MatrixXd Wu, Gu;         // u-faces x k, value and x-derivative at vertical faces
    Eigen::MatrixXd Ww, Gw;         // w-faces x k, value and y-derivative at horizontal faces
    Eigen::MatrixXd Wb;             // wall faces x k, ordered left, right, bottom, top
    Vector wall_length;             // face length of each wall face

    int size() const { return static_cast<int>(modes.size()); }
    double value(int m, double x, double y) const;
};

/// Throws invalid_argument when k < 1 or the grid has fewer than 8 cells per
/// wavelength of the highest mode.
SpectralBasis build_basis(int k, const Grid& g);

/// Coefficients of phi_k, mu_k, sigma_k.
struct SpectralState {
    double t = 0.0;
    Vector a;
    Vector b;
    Vector c;
};

Vector project(const CellField& f, const SpectralBasis& basis);
CellField spectral_to_grid(const Vector& coeffs, const SpectralBasis& basis);

struct GalerkinMatrices {
    Eigen::MatrixXd S;      // diag(lambda)
    Eigen::MatrixXd S_m;    // int m(phi) grad w_i . grad w_j
    Eigen::MatrixXd S_n;    // int n(phi) grad w_i . grad w_j
    Eigen::MatrixXd M_bnd;  // int_wall w_i w_j
    Eigen::MatrixXd C;      // C(j, i) = int grad w_i . v w_j
    Eigen::MatrixXd D;      // D(j, i) = int Gamma_v w_i w_j
    Vector G;               // int Gamma_phi w_i
    Vector F;               // int Gamma_sigma w_i
    Vector Sig;             // int_wall sigma_inf w_i
    Vector psi_vec;         // int psi'(phi_k) w_i
    Vector b;               // chemical potential coefficients
};

/// mu coefficients from the algebraic relation b = eps S a + eps^-1 psi_vec - chi_phi c.
Vector chemical_coefficients(const Vector& a, const Vector& c, const Model& m, const SpectralBasis& basis);

/// Assembles every matrix and vector by midpoint quadrature on the basis grid
/// for the velocity v (faces of the same grid).
GalerkinMatrices assemble_matrices(const Vector& a, const Vector& c, const FaceField& v, const Model& m,
                                   const SpectralBasis& basis);

struct SpectralRates {
    Vector da;
    Vector dc;
};

SpectralRates galerkin_rhs(const Vector& a, const Vector& c, const GalerkinMatrices& mats, const Model& m);

/// Velocity field on the basis grid for the current coefficients (zero when flow is off).
BrinkmanSolution galerkin_flow(const Vector& a, const Vector& b, const Vector& c, const Model& m,
                               const SpectralBasis& basis, const SolverOptions& opts = {1e-11, 0.0, 20000, false},
                               const BrinkmanSolution* warm = nullptr);

/// Quantities bounded by the a-priori estimate, evaluated on a spectral trajectory.
struct GalerkinQuantities {
    double sup_phi_H1 = 0.0;
    double sup_sigma_L2 = 0.0;
    double grad_mu_L2L2 = 0.0;   // (int ||grad mu||^2)^{1/2}
    double v_L2H1 = 0.0;
    double b_sigma_boundary = 0.0;  // (b int ||sigma||^2_wall)^{1/2}

    static std::vector<std::string> names();
    std::vector<double> values() const;
};

struct GalerkinOptions {
    double dt = 1e-3;
    int steps = 100;
    double blowup = 1e6;
    SolverOptions brinkman{1e-11, 0.0, 20000, false};
};

struct GalerkinRun {
    int k = 0;
    std::vector<SpectralState> states;
    GalerkinQuantities quantities;
    /// Explicit RK4 step bound from the largest stiffness eigenvalue.
    double stable_dt = 0.0;
    bool completed = false;
    std::string failure;
};

/// Largest dt for which classical RK4 is stable on the linearised stiff part.
double galerkin_stable_dt(const Model& m, const SpectralBasis& basis);

/// Classical RK4 march; every stage re-solves Brinkman from the synthesised fields.
GalerkinRun integrate(const CellField& phi0, const CellField& sigma0, const Model& m, const SpectralBasis& basis,
                      const GalerkinOptions& opts);

struct SweepReport {
    std::vector<GalerkinRun> runs;
    /// relative difference per quantity between the two largest k
    std::vector<double> top_difference;
    bool all_finite = false;
    bool uniform = false;  // every difference below the threshold
};

SweepReport k_sweep(const std::vector<int>& ks, const CellField& phi0, const CellField& sigma0, const Model& m,
                    const GalerkinOptions& opts, double threshold = 0.2);

}  // namespace chb
