#pragma once

#include <vector>

#include "chb/brinkman.hpp"
#include "chb/constitutive.hpp"
#include "chb/core.hpp"
#include "chb/elliptic.hpp"

namespace chb {

/// Everything needed to evaluate the model on a grid.
struct Model {
    Grid grid;
    ModelParams params;
    ConstitutiveSpec spec;
    /// false freezes v = 0, p = 0 (no Brinkman solve).
    bool flow = true;
};

EdgeTraces far_field(const Model& m);

/// E = int eps^-1 psi(phi) + eps/2 |grad phi|^2 + N(phi, sigma).
double energy(const State& s, const Model& m);

/// Per-step energy ledger. Every term is a rate (energy per unit time).
struct EnergyBudget {
    double E_before = 0.0;
    double E_after = 0.0;
    double dt = 0.0;
    double diss_mu = 0.0;       // int m |grad mu|^2
    double diss_nsigma = 0.0;   // int n |grad N_sigma|^2
    double diss_visc = 0.0;     // int 2 eta |Dv|^2 + lambda (div v)^2 + nu |v|^2
    double bnd_sigma_sq = 0.0;  // b chi_sigma int_wall sigma^2
    double src_phi_mu = 0.0;    // int Gamma_phi mu
    double src_sigma_N = 0.0;   // -int Gamma_sigma N_sigma
    double bnd_income = 0.0;    // int_wall b (sigma_inf N_sigma - chi_phi sigma (1 - phi))
    double conv_transport = 0.0;  // -int div(phi v) mu - int div(sigma v) N_sigma
    double flow_work = 0.0;     // int f.v + int p Gamma_v
    double residual = 0.0;
};

/// Recomputes every term from two consecutive states; v and p of `after` are
/// the flow fields used during the step.
EnergyBudget energy_budget(const State& before, const State& after, double dt, const Model& m);

struct BalanceLedger {
    double phi_change = 0.0;
    double phi_source = 0.0;   // dt int (Lambda_phi - theta_phi mu)
    double phi_flux = 0.0;     // dt int_wall phi v.n
    double phi_residual = 0.0;
    double sigma_change = 0.0;
    double sigma_source = 0.0;    // -dt int Gamma_sigma
    double sigma_boundary = 0.0;  // dt int_wall b (sigma_inf - sigma)
    double sigma_flux = 0.0;      // dt int_wall sigma v.n
    double sigma_residual = 0.0;
};

BalanceLedger mass_balances(const State& before, const State& after, double dt, const Model& m);

/// Quantities bounded by the a-priori estimate, accumulated along a trajectory.
struct NormEstimates {
    double sup_phi_H1 = 0.0;
    double phi_L2H2 = 0.0;
    double dtphi_L2H1dual = 0.0;
    double sup_sigma_L2 = 0.0;
    double sigma_L2H1 = 0.0;
    double mu_L2H1 = 0.0;
    double b_sigma_boundary = 0.0;
    double p_L43L2 = 0.0;
    double v_L2H1 = 0.0;
    double div_phi_v_L2L32 = 0.0;
};

/// Streaming accumulator so long runs need not keep every state.
class NormAccumulator {
public:
    explicit NormAccumulator(const Model& m) : m_(m) {}
    void add_initial(const State& s);
    void add_step(const State& before, const State& after, double dt);
    NormEstimates result() const;

private:
    const Model& m_;
    NormEstimates sup_;
    double phi_h2 = 0, dtphi = 0, sig_h1 = 0, mu_h1 = 0, bnd = 0, p43 = 0, v_h1 = 0, dphiv = 0;
};

NormEstimates norm_estimates(const std::vector<State>& trajectory, const Model& m);

/// Discrete H1 norm sqrt(||f||^2 + ||grad f||^2).
double h1_norm(const CellField& f, const Grid& g);
/// ||u||_H1 with (-Delta_N + I) u = f; equivalent to the dual H1 norm of f.
double dual_h1_norm(const CellField& f, const Grid& g);
/// sqrt(||v||^2 + ||grad v||^2) of a face field.
double velocity_h1_norm(const FaceField& v, const Grid& g);

struct GronwallInput {
    std::vector<double> t;
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> u;
    std::vector<double> v;
};

struct GronwallResult {
    std::vector<double> bound;      // alpha(s) + int_0^s alpha beta exp(int_t^s beta)
    std::vector<double> lhs;        // u(s) + int_0^s v
    std::vector<double> hypothesis_rhs;  // alpha(s) + int_0^s beta u
    bool hypotheses_ok = false;     // beta >= 0, v >= 0 and lhs <= hypothesis_rhs
    bool verified = false;          // lhs <= bound everywhere (given the hypotheses)
    double worst_margin = 0.0;      // min over samples of bound - lhs
};

GronwallResult gronwall_bound(const GronwallInput& in, double tol = 1e-12);

/// Fits constant alpha, beta to an energy trajectory and checks the Gronwall bound:
/// u = E + K >= 0, v = dissipation, beta = max source/u, alpha the smallest
/// constant for which the hypothesis holds on the samples.
GronwallResult fitted_gronwall(const std::vector<double>& t, const std::vector<double>& energy,
                               const std::vector<EnergyBudget>& budgets, const Model& m);

/// Lower-bound shift K making E + K >= 0 under the epsilon condition.
double energy_floor_shift(const Model& m);

struct WeakResiduals {
    /// max over steps and test functions, one entry per weak equation
    /// (div constraint, phase equation, chemical potential, nutrient).
    double div_constraint = 0.0;
    double phase = 0.0;
    double potential = 0.0;
    double nutrient = 0.0;
    /// max over steps of ||div v - Gamma_v||_L2.
    double div_l2 = 0.0;
    /// same for the constant test function alone.
    double phase_constant = 0.0;
    double nutrient_constant = 0.0;
};

/// Tests the discrete trajectory against the weak formulation with the
/// constant and the first `k_tests` cosine modes, using exact test gradients.
WeakResiduals weak_residuals(const std::vector<State>& trajectory, const Model& m, int k_tests);

}  // namespace chb
