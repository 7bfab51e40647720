#pragma once

#include <array>
#include <string>
#include <vector>

namespace chb {

enum class PotentialKind { Quartic, QuadraticGrowth };

/// Double-well potential. QuadraticGrowth keeps the quartic on |t| <= cap and
/// continues it by its second-order Taylor polynomial outside, so it is C^2
/// with bounded second derivative.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::Quartic;
    double cap = 1.2;

    double psi(double t) const;
    double dpsi(double t) const;
    double d2psi(double t) const;

    // lower growth bound psi(t) >= R1 t^2 - R2
    double R1() const { return 0.125; }
    double R2() const { return 0.5; }
    /// Bound of |psi'| <= R4(1+|t|) and |psi''| <= R4 (QuadraticGrowth only).
    double R4() const;
    /// |psi''| <= R6(1+|t|^q) for the quartic.
    double R6() const { return 3.0; }
    double q() const { return 2.0; }
    /// sup psi'' / 2 over [-cap, cap]; minimum stabilisation for the linear scheme.
    double stabilization_threshold() const;

    bool operator==(const PotentialSpec&) const = default;
};

struct PotentialValue {
    double psi;
    double dpsi;
};

PotentialValue potential_eval(double phi, const PotentialSpec& spec);

enum class CoefficientKind { Constant, Linear, Smooth };

/// Coefficient interpolating between lo (at phi=-1) and hi (at phi=+1) and
/// saturating outside. Smooth uses the quintic smoothstep so the map is C^2.
struct BoundedCoefficient {
    CoefficientKind kind = CoefficientKind::Constant;
    double lo = 1.0;
    double hi = 1.0;

    static BoundedCoefficient constant(double v) { return {CoefficientKind::Constant, v, v}; }
    static BoundedCoefficient linear(double lo, double hi) { return {CoefficientKind::Linear, lo, hi}; }
    static BoundedCoefficient smooth(double lo, double hi) { return {CoefficientKind::Smooth, lo, hi}; }

    double operator()(double phi) const;
    double derivative(double phi) const;
    double lower() const;
    double upper() const;

    bool operator==(const BoundedCoefficient&) const = default;
};

enum class SourceKind { None, Lima, Hawkins };

struct SourceSpec {
    SourceKind kind = SourceKind::None;
    // Lima: Gamma_phi = (P sigma - A) h(phi), Gamma_sigma = C h(phi)
    double P = 0.0;
    double A = 0.0;
    double C = 0.0;
    // Hawkins: Gamma_phi = P(phi)(sigma - chi_phi phi - mu), Gamma_sigma = -Gamma_phi
    double p0 = 0.0;
    /// P(phi) = p0 min((1+phi)_+, 1 + phi_cap).
    double phi_cap = 2.0;
    double sigma_cap = 2.0;
    /// Use theta_phi = p0 max(h-like ramp, rho_min) so theta_phi is bounded below.
    bool rho_min_variant = false;
    double rho_min = 1e-3;
    /// Gamma_v = clamp(c_gamma_v * Gamma_phi, -gamma0, gamma0).
    double c_gamma_v = 0.0;
    /// Negative means "use the default c * R0 * (1 + phi_cap + sigma_cap)".
    double gamma0 = -1.0;

    double R0(double chi_phi) const;
    double R5() const;
    double gamma0_value(double chi_phi) const;
    /// True when theta_phi is strictly positive everywhere.
    bool theta_positive() const;

    bool operator==(const SourceSpec&) const = default;
};

struct ModelParams {
    double epsilon = 0.05;
    double chi_sigma = 1.0;
    double chi_phi = 0.0;
    double nu = 1.0;
    double b = 0.0;
    /// Per-edge far-field nutrient: left, right, bottom, top.
    std::array<double, 4> sigma_inf{0.0, 0.0, 0.0, 0.0};

    bool operator==(const ModelParams&) const = default;
};

struct ConstitutiveSpec {
    PotentialSpec potential;
    BoundedCoefficient m = BoundedCoefficient::constant(1.0);
    BoundedCoefficient n = BoundedCoefficient::constant(1.0);
    BoundedCoefficient eta = BoundedCoefficient::constant(1.0);
    BoundedCoefficient lambda = BoundedCoefficient::constant(0.0);
    SourceSpec source;

    bool operator==(const ConstitutiveSpec&) const = default;
};

struct NutrientEnergy {
    double N;
    double N_sigma;
    double N_phi;
};

NutrientEnergy nutrient_energy(double phi, double sigma, const ModelParams& p);

struct SourceValues {
    double gamma_phi;
    double gamma_sigma;
    double gamma_v;
    double lambda_phi;
    double theta_phi;
    double lambda_sigma;
    double theta_sigma;
};

/// h(phi) = min(1, max(0, (1+phi)/2)).
double interpolation_h(double phi);

SourceValues sources(double phi, double sigma, double mu, const SourceSpec& spec,
                     const ModelParams& params);

enum class Severity { Error, Warning };

struct ValidationCheck {
    std::string name;
    std::string inequality;
    bool passed;
    Severity severity;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const;
    std::vector<ValidationCheck> failures() const;
    const ValidationCheck* find(const std::string& name) const;
    std::string summary() const;
};

ValidationReport validate_params(const ModelParams& params, const ConstitutiveSpec& spec);

}  // namespace chb
