#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chb/galerkin.hpp"
#include "chb/io.hpp"

namespace chb {

/// Outcome of one acceptance criterion.
struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// "[PASS] 3 gradient-flow energy decay: ... (4.9 s)"
std::string format_result(const CriterionResult& r);

// Refinement studies

struct ConvergenceRow {
    int n = 0;          // cells per direction (or steps for time studies)
    double h = 0.0;     // mesh width or time step
    double error = 0.0;
    double order = 0.0; // log2(previous error / error); 0 on the first row
};

struct ConvergenceTable {
    std::string name;
    std::vector<ConvergenceRow> rows;
    /// Orders of all rows after the first.
    std::vector<double> orders() const;
};

/// -div(k grad u) = f with zero flux, u = cos(pi x) cos(pi y), k = 1 + x y / 2.
/// L2 error of the mean-free solution.
ConvergenceTable mms_neumann_poisson(const std::vector<int>& ns);
/// u - div(k grad u) = f with k du/dn = b (u_inf - u), u = cos(pi x) cos(pi y) + x + y^2,
/// b = 1, k = 1 + x y / 2 and per-face u_inf chosen to make u exact.
ConvergenceTable mms_robin_diffusion(const std::vector<int>& ns);

/// Fixed-horizon self-convergence of the coupled scheme: differences between
/// successive dt halvings at t = horizon, order from their ratios.
ConvergenceTable coupled_self_convergence(const std::vector<double>& dts, double horizon);

// Reference configurations

/// Criterion 3: gradient flow, quartic, 64x64, cosine-perturbed data.
struct DecayStudy {
    double worst_increase = 0.0;  // max_n (E^{n+1} - E^n) / max(1, |E^n|)
    int steps = 0;
    bool completed = false;
    std::string failure;
};
DecayStudy gradient_flow_decay(int n = 64, int steps = 500, double dt = 1e-3);

/// Criterion 5 model: disc tumour, Lima sources, b = 1, flow on, 64x64.
Model coupled_budget_model(int n = 64);
/// Well-prepared data for the budget study (relaxed disc, equilibrium nutrient).
State coupled_budget_initial(const Model& m);

struct BudgetRun {
    double dt = 0.0;
    double max_relative = 0.0;  // max_n |residual| / max(1, |E|)
    RunResult result;
};
struct BudgetStudy {
    std::vector<BudgetRun> runs;  // dt, dt/2
    double ratio = 0.0;           // max residual at dt over max residual at dt/2
};
BudgetStudy energy_budget_study(double dt = 1e-4, double horizon = 1e-2, int n = 64);

/// Criterion 7 model and data on a 32x32 quadrature grid.
Model galerkin_reference_model();
std::pair<CellField, CellField> galerkin_reference_data(const Grid& g);

struct OracleRow {
    int n = 0;
    int trial = 0;
    double max_difference = 0.0;
    double div_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};
/// Krylov against dense Brinkman solves on random problems satisfying the
/// viscosity bounds.
std::vector<OracleRow> brinkman_oracle_comparison(std::uint64_t seed, const std::vector<int>& ns, int trials);

// The ten criteria

CriterionResult check_brinkman_oracle();
CriterionResult check_constant_force();
CriterionResult check_gradient_flow_decay();
CriterionResult check_mass_ledgers(const BudgetStudy* budget = nullptr);
CriterionResult check_energy_budget(const BudgetStudy& budget);
CriterionResult check_convergence();
CriterionResult check_galerkin_uniform();
CriterionResult check_validator();
CriterionResult check_gronwall(const BudgetStudy& budget);
CriterionResult check_determinism(const std::filesystem::path& workdir);

/// Runs the selected criteria (all when empty) in order; the budget study is
/// shared by criteria 4, 5 and 9.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& which = {},
                                            const std::filesystem::path& workdir = {});

}  // namespace chb
