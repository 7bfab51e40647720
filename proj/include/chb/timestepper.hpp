#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chb/brinkman.hpp"
#include "chb/diagnostics.hpp"

namespace chb {

struct SchemeOptions {
    double dt = 1e-3;
    /// Eyre-type stabilisation; must be at least sup psi'' / 2 on [-cap, cap].
    double s = 2.0;
    SolverOptions phase{1e-11, 0.0, 20000, false};
    SolverOptions nutrient{1e-11, 0.0, 20000, false};
    SolverOptions brinkman{1e-11, 0.0, 20000, false};
    /// Absorbs the Krylov residual of each scalar solve into a constant shift
    /// so the mass ledgers hold to rounding.
    bool mass_correction = true;
    /// |phi| above this aborts the run.
    double range_limit = 10.0;
};

struct StepReport {
    int brinkman_iters = 0;
    int phase_iters = 0;
    int nutrient_iters = 0;
    double brinkman_residual = 0.0;
    double phase_residual = 0.0;
    double nutrient_residual = 0.0;
    double div_residual = 0.0;
    double phi_min = 0.0;
    double phi_max = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double phase_shift = 0.0;
    double nutrient_shift = 0.0;

    int total_iters() const { return brinkman_iters + phase_iters + nutrient_iters; }
};

/// Failure of one stage of a step ("brinkman", "phase", "nutrient", "range").
class StepError : public std::runtime_error {
public:
    StepError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Throws invalid_argument when dt <= 0 or s is below the stabilisation threshold.
void check_scheme(const SchemeOptions& opts, const Model& m);

struct PhaseResult {
    CellField phi;
    CellField mu;
    SolveReport report;
    double shift = 0.0;
};

/// Linear stabilised step of the phase equation with v_new frozen:
///   (phi' - phi)/dt + div_up(phi' v) = div(m grad mu') + Lambda - theta mu',
///   mu' = eps^-1 (psi'(phi) + s (phi' - phi)) - eps Lap phi' - chi_phi sigma.
PhaseResult step_phase(const State& s, const FaceField& v_new, const SchemeOptions& opts, const Model& m);

struct NutrientResult {
    CellField sigma;
    SolveReport report;
    double shift = 0.0;
};

/// (sigma' - sigma)/dt + div_up(sigma' v) = div(n chi_sigma grad sigma') - div(n chi_phi grad phi')
///   - Lambda_sigma + theta_sigma mu', Robin condition implicit in sigma'.
NutrientResult step_nutrient(const State& s, const FaceField& v_new, const CellField& phi_new,
                             const CellField& mu_new, const SchemeOptions& opts, const Model& m);

/// Brinkman solve from the lagged fields; zero flow when the model has flow off.
BrinkmanSolution step_flow(const State& s, const SchemeOptions& opts, const Model& m,
                           const BrinkmanSolution* warm = nullptr);

/// One full step: flow, phase, nutrient. Throws StepError on failure.
std::pair<State, StepReport> step(const State& s, const SchemeOptions& opts, const Model& m);

/// Completes an initial state from phi0, sigma0: mu from its defining relation,
/// v and p from the Brinkman problem.
State initial_state(const CellField& phi0, const CellField& sigma0, const Model& m,
                    const SchemeOptions& opts = {});

/// Chemical potential eps^-1 psi'(phi) - eps Lap phi - chi_phi sigma.
CellField chemical_potential(const CellField& phi, const CellField& sigma, const Model& m);

// Initial data presets.
CellField uniform_field(const Grid& g, double value);
/// tanh((r0 - |x - c|) / (sqrt(2) eps)): +1 inside the disc.
CellField tanh_disc(const Grid& g, double cx, double cy, double r0, double eps);
/// mean + amplitude * sum_{k=1..modes} cos(k pi x / Lx) cos(k pi y / Ly).
CellField cosine_perturbation(const Grid& g, double mean, double amplitude, int modes);

/// sigma_ref + (chi_phi / chi_sigma)(1 + phi): N_sigma is constant, so the
/// nutrient flux vanishes and sigma = sigma_ref wherever phi = -1.
CellField nutrient_equilibrium(const CellField& phi, double sigma_ref, const ModelParams& p);

/// Well-prepared data: marches the model with sources and flow switched off
/// for `steps` steps of size dt so the interface profile settles onto the
/// discrete equilibrium. Returns the relaxed state at t = 0, completed with
/// the full model's mu, v and p.
State relax_initial_state(const State& s, const Model& m, double dt, int steps, const SchemeOptions& opts = {});

/// One diagnostics row; the column order is fixed by the timeseries format.
struct DiagnosticsRow {
    double t = 0.0;
    double energy = 0.0;
    double mass_phi = 0.0;
    double mass_sigma = 0.0;
    double diss_mu = 0.0;
    double diss_nsigma = 0.0;
    double diss_visc = 0.0;
    double bnd_sigma_sq = 0.0;
    double src_phi_mu = 0.0;
    double src_sigma_N = 0.0;
    double bnd_income = 0.0;
    double budget_residual = 0.0;
    double div_residual = 0.0;
    double phi_min = 0.0;
    double phi_max = 0.0;
    double cg_iters_total = 0.0;
};

struct RunOptions {
    int steps = 0;
    /// Keep every n-th state (0 keeps only the initial and final states).
    int snapshot_every = 0;
    /// Record budgets and ledgers (one energy recomputation per step).
    bool diagnostics = true;
    /// Called after every accepted step with the step index (1-based) and state.
    std::function<void(int, const State&)> on_step;
};

struct RunResult {
    std::vector<DiagnosticsRow> rows;
    std::vector<State> snapshots;
    std::vector<EnergyBudget> budgets;
    std::vector<BalanceLedger> ledgers;
    std::vector<StepReport> reports;
    NormEstimates norms;
    State final_state;
    bool completed = false;
    std::string failure;
};

/// Fixed-step march. A failing step stops the run; the partial result is
/// returned with completed = false and the failure message.
RunResult run(const State& initial, const SchemeOptions& opts, const Model& m, const RunOptions& ro);

}  // namespace chb
