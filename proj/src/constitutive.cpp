#include "chb/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chb {

namespace {

double quartic(double t) {
    double u = t * t - 1.0;
    return 0.25 * u * u;
}

double clamp01(double s) { return std::min(1.0, std::max(0.0, s)); }

}  // namespace

double PotentialSpec::psi(double t) const {
    if (kind == PotentialKind::Quartic || std::abs(t) <= cap) return quartic(t);
    double a = std::abs(t), d = a - cap;
    return quartic(cap) + (cap * cap * cap - cap) * d + 0.5 * (3.0 * cap * cap - 1.0) * d * d;
}

double PotentialSpec::dpsi(double t) const {
    if (kind == PotentialKind::Quartic || std::abs(t) <= cap) return t * t * t - t;
    double a = std::abs(t), d = a - cap;
    double g = (cap * cap * cap - cap) + (3.0 * cap * cap - 1.0) * d;
    return t > 0 ? g : -g;
}

double PotentialSpec::d2psi(double t) const {
    if (kind == PotentialKind::Quartic || std::abs(t) <= cap) return 3.0 * t * t - 1.0;
    return 3.0 * cap * cap - 1.0;
}

double PotentialSpec::R4() const {
    // psi'' peaks at the cap and psi'(t) <= psi''(cap) |t| beyond it
    return std::max(3.0 * cap * cap - 1.0, 1.0);
}

double PotentialSpec::stabilization_threshold() const { return 0.5 * (3.0 * cap * cap - 1.0); }

PotentialValue potential_eval(double phi, const PotentialSpec& spec) {
    return {spec.psi(phi), spec.dpsi(phi)};
}

double BoundedCoefficient::operator()(double phi) const {
    if (kind == CoefficientKind::Constant) return lo;
    double s = clamp01(0.5 * (1.0 + phi));
    if (kind == CoefficientKind::Smooth) s = s * s * s * (s * (6.0 * s - 15.0) + 10.0);
    return lo + (hi - lo) * s;
}

double BoundedCoefficient::derivative(double phi) const {
    if (kind == CoefficientKind::Constant) return 0.0;
    double s = 0.5 * (1.0 + phi);
    if (s <= 0.0 || s >= 1.0) return 0.0;
    double ds = 0.5;
    if (kind == CoefficientKind::Smooth) ds *= 30.0 * s * s * (s - 1.0) * (s - 1.0);
    return (hi - lo) * ds;
}

double BoundedCoefficient::lower() const { return std::min(lo, hi); }
double BoundedCoefficient::upper() const { return std::max(lo, hi); }

double SourceSpec::R0(double chi_phi) const {
    switch (kind) {
        case SourceKind::None: return 0.0;
        case SourceKind::Lima: return std::max(std::abs(P), std::abs(A) + std::abs(C));
        case SourceKind::Hawkins:
            return 2.0 * std::abs(p0) * (1.0 + phi_cap) * std::max(1.0, chi_phi);
    }
    return 0.0;
}

double SourceSpec::R5() const {
    if (kind == SourceKind::Hawkins && rho_min_variant) return std::abs(p0) * rho_min;
    return 0.0;
}

double SourceSpec::gamma0_value(double chi_phi) const {
    if (gamma0 >= 0.0) return gamma0;
    return std::abs(c_gamma_v) * R0(chi_phi) * (1.0 + phi_cap + sigma_cap);
}

bool SourceSpec::theta_positive() const { return R5() > 0.0; }

NutrientEnergy nutrient_energy(double phi, double sigma, const ModelParams& p) {
    NutrientEnergy e;
    e.N = 0.5 * p.chi_sigma * sigma * sigma + p.chi_phi * sigma * (1.0 - phi);
    e.N_sigma = p.chi_sigma * sigma + p.chi_phi * (1.0 - phi);
    e.N_phi = -p.chi_phi * sigma;
    return e;
}

double interpolation_h(double phi) { return clamp01(0.5 * (1.0 + phi)); }

SourceValues sources(double phi, double sigma, double mu, const SourceSpec& spec,
                     const ModelParams& params) {
    SourceValues s{0, 0, 0, 0, 0, 0, 0};
    switch (spec.kind) {
        case SourceKind::None: break;
        case SourceKind::Lima: {
            double h = interpolation_h(phi);
            s.lambda_phi = (spec.P * sigma - spec.A) * h;
            s.lambda_sigma = spec.C * h;
            break;
        }
        case SourceKind::Hawkins: {
            double Pphi = spec.p0 * std::min(std::max(1.0 + phi, 0.0), 1.0 + spec.phi_cap);
            double theta = Pphi;
            if (spec.rho_min_variant) {
                double ramp = std::min(0.5 * (1.0 + phi), 0.5 * (1.0 + spec.phi_cap));
                theta = spec.p0 * std::max(ramp, spec.rho_min);
            }
            s.lambda_phi = Pphi * (sigma - params.chi_phi * phi);
            s.theta_phi = theta;
            s.lambda_sigma = -s.lambda_phi;
            s.theta_sigma = -theta;
            break;
        }
    }
    s.gamma_phi = s.lambda_phi - s.theta_phi * mu;
    s.gamma_sigma = s.lambda_sigma - s.theta_sigma * mu;
    double g0 = spec.gamma0_value(params.chi_phi);
    s.gamma_v = std::clamp(spec.c_gamma_v * s.gamma_phi, -g0, g0);
    return s;
}

bool ValidationReport::ok() const {
    return std::none_of(checks.begin(), checks.end(), [](const ValidationCheck& c) {
        return !c.passed && c.severity == Severity::Error;
    });
}

std::vector<ValidationCheck> ValidationReport::failures() const {
    std::vector<ValidationCheck> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c);
    return out;
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        if (c.passed) continue;
        os << (c.severity == Severity::Error ? "error: " : "warning: ") << c.name << " violated ("
           << c.inequality << ")\n";
    }
    return os.str();
}

ValidationReport validate_params(const ModelParams& p, const ConstitutiveSpec& spec) {
    ValidationReport r;
    auto add = [&](std::string name, std::string ineq, bool ok, Severity sev = Severity::Error) {
        r.checks.push_back({std::move(name), std::move(ineq), ok, sev});
    };
    auto finite = [](double x) { return std::isfinite(x); };

    add("A1.epsilon", "epsilon > 0", finite(p.epsilon) && p.epsilon > 0.0);
    add("A1.chi_sigma", "chi_sigma > 0", finite(p.chi_sigma) && p.chi_sigma > 0.0);
    add("A1.nu", "nu > 0", finite(p.nu) && p.nu > 0.0);
    add("A1.chi_phi", "chi_phi >= 0", finite(p.chi_phi) && p.chi_phi >= 0.0);
    add("A1.b", "b >= 0", finite(p.b) && p.b >= 0.0);

    add("A2.m", "0 < m0 <= m(t) <= m1", finite(spec.m.upper()) && spec.m.lower() > 0.0);
    add("A2.n", "0 < n0 <= n(t) <= n1", finite(spec.n.upper()) && spec.n.lower() > 0.0);

    add("A3.eta", "0 < eta0 <= eta(t) <= eta1", finite(spec.eta.upper()) && spec.eta.lower() > 0.0);
    add("A3.lambda", "0 <= lambda(t) <= lambda0",
        finite(spec.lambda.upper()) && spec.lambda.lower() >= 0.0);
    add("A3.smoothness", "eta, lambda in C^2",
        spec.eta.kind != CoefficientKind::Linear && spec.lambda.kind != CoefficientKind::Linear,
        Severity::Warning);

    const SourceSpec& s = spec.source;
    bool rates_ok = true;
    if (s.kind == SourceKind::Lima) rates_ok = s.P >= 0.0 && s.A >= 0.0 && s.C >= 0.0;
    if (s.kind == SourceKind::Hawkins)
        rates_ok = s.p0 >= 0.0 && s.phi_cap >= 0.0 && (!s.rho_min_variant || s.rho_min > 0.0);
    add("A4.theta_nonneg", "theta_phi >= 0, |theta_i| <= R0", rates_ok);
    add("A4.growth", "|Lambda_i| <= R0(1+|phi|+|sigma|)", finite(s.R0(p.chi_phi)));

    double g0 = s.gamma0_value(p.chi_phi);
    add("A5.gamma0", "|Gamma_v| <= gamma0",
        finite(g0) && g0 >= 0.0 && (g0 > 0.0 || s.c_gamma_v == 0.0 || s.kind == SourceKind::None));

    const PotentialSpec& psi = spec.potential;
    add("A6.cap", "potential cap >= 1", finite(psi.cap) && psi.cap >= 1.0);
    if (psi.kind == PotentialKind::Quartic) {
        bool hawkins_bad = s.kind == SourceKind::Hawkins && !s.rho_min_variant;
        add("A6.case_consistency", "quartic psi requires theta_phi >= R5 > 0", !hawkins_bad);
        // zero or absent sources only miss case 2 formally; allowed for pure gradient-flow runs
        bool theta_ok = s.theta_positive() || hawkins_bad;
        add("A6.case2_theta", "theta_phi >= R5 > 0 with quartic psi", theta_ok, Severity::Warning);
    }

    double lhs = 1.0 / p.epsilon;
    double rhs = 2.0 * p.chi_phi * p.chi_phi / (p.chi_sigma * psi.R1());
    add("A6.epsilon", "1/epsilon > 2 chi_phi^2 / (chi_sigma R1)", finite(lhs) && lhs > rhs);

    bool data_ok = std::all_of(p.sigma_inf.begin(), p.sigma_inf.end(), finite);
    add("A7.sigma_inf", "sigma_inf finite on every edge", data_ok);
    return r;
}

}  // namespace chb
