#include "doctest.h"

#include <cmath>
#include <random>

#include "chb/constitutive.hpp"

using namespace chb;

TEST_CASE("quartic potential values") {
    PotentialSpec q;
    auto a = potential_eval(1.0, q), b = potential_eval(-1.0, q), c = potential_eval(0.0, q);
    CHECK(a.psi == 0.0);
    CHECK(a.dpsi == 0.0);
    CHECK(b.psi == 0.0);
    CHECK(b.dpsi == 0.0);
    CHECK(c.psi == 0.25);
    CHECK(c.dpsi == 0.0);
    CHECK(q.stabilization_threshold() == doctest::Approx(1.66));
}

TEST_CASE("growth constants R1=1/8, R2=1/2 hold for the quartic") {
    // with u = t^2 the gap 1/4 (u-1)^2 - u/8 + 1/2 is a parabola; scan it densely
    double worst = INFINITY;
    for (int k = 0; k <= 200000; ++k) {
        double u = k * 1e-4;
        worst = std::min(worst, 0.25 * (u - 1) * (u - 1) - u / 8 + 0.5);
    }
    CHECK(worst > 0.0);
    // vertex at u = 5/4 gives 23/64
    CHECK(worst == doctest::Approx(23.0 / 64.0).epsilon(1e-6));
    PotentialSpec q;
    for (double t = -10; t <= 10; t += 0.01) CHECK(q.psi(t) >= q.R1() * t * t - q.R2());
}

TEST_CASE("potential invariants on [-10,10]") {
    PotentialSpec quartic, quad{PotentialKind::QuadraticGrowth, 1.2};
    for (double t = -10; t <= 10; t += 0.005) {
        for (const auto* p : {&quartic, &quad}) {
            CHECK(p->psi(t) >= 0.0);
            CHECK(p->psi(t) >= std::max(0.0, p->R1() * t * t - p->R2()));
        }
        CHECK(std::abs(quad.dpsi(t)) <= quad.R4() * (1.0 + std::abs(t)));
        CHECK(std::abs(quad.d2psi(t)) <= quad.R4() + 1e-12);
        CHECK(std::abs(quartic.d2psi(t)) <= quartic.R6() * (1.0 + std::pow(std::abs(t), quartic.q())));
    }
}

TEST_CASE("QuadraticGrowth is a C2 continuation of the quartic") {
    PotentialSpec quad{PotentialKind::QuadraticGrowth, 1.2};
    PotentialSpec quartic;
    for (double s : {-1.0, 1.0}) {
        double c = 1.2 * s;
        for (double d : {-1e-9, 1e-9}) {
            CHECK(quad.psi(c + d) == doctest::Approx(quartic.psi(c)).epsilon(1e-7));
            CHECK(quad.dpsi(c + d) == doctest::Approx(quartic.dpsi(c)).epsilon(1e-7));
            CHECK(quad.d2psi(c + d) == doctest::Approx(quartic.d2psi(c)).epsilon(1e-7));
        }
    }
    // derivative consistency by central differences
    for (double t = -4; t <= 4; t += 0.37) {
        double h = 1e-5;
        CHECK((quad.psi(t + h) - quad.psi(t - h)) / (2 * h) == doctest::Approx(quad.dpsi(t)).epsilon(1e-6));
        CHECK((quad.dpsi(t + h) - quad.dpsi(t - h)) / (2 * h) == doctest::Approx(quad.d2psi(t)).epsilon(1e-5));
    }
    CHECK(quad.psi(5.0) < quartic.psi(5.0));
}

TEST_CASE("mobility and viscosity bounds") {
    auto m = BoundedCoefficient::constant(1.0);
    CHECK(m(-7.0) == 1.0);
    CHECK(m(0.3) == 1.0);
    auto lin = BoundedCoefficient::linear(0.5, 2.0);
    CHECK(lin(-1.0) == 0.5);
    CHECK(lin(1.0) == 2.0);
    CHECK(lin(3.0) == 2.0);
    CHECK(lin(0.0) == doctest::Approx(1.25));
    auto sm = BoundedCoefficient::smooth(1.0, 3.0);
    CHECK(sm(-1.0) == 1.0);
    CHECK(sm(1.0) == 3.0);
    CHECK(sm(0.0) == doctest::Approx(2.0));
    for (double t = -10; t <= 10; t += 0.01) {
        for (const auto* c : {&m, &lin, &sm}) {
            CHECK((*c)(t) >= c->lower());
            CHECK((*c)(t) <= c->upper());
        }
        double h = 1e-6;
        if (std::abs(std::abs(t) - 1.0) > 1e-3)
            CHECK((sm(t + h) - sm(t - h)) / (2 * h) == doctest::Approx(sm.derivative(t)).epsilon(1e-6));
    }
}

TEST_CASE("nutrient energy examples") {
    ModelParams p;
    p.chi_sigma = 2.0;
    p.chi_phi = 0.7;
    auto e = nutrient_energy(1.0, 0.3, p);
    CHECK(e.N == doctest::Approx(0.5 * 2.0 * 0.09));
    CHECK(e.N_sigma == doctest::Approx(0.6));
    CHECK(e.N_phi == doctest::Approx(-0.21));
    auto z = nutrient_energy(0.2, 0.0, p);
    CHECK(z.N == 0.0);
    CHECK(z.N_sigma == doctest::Approx(0.7 * 0.8));
    CHECK(z.N_phi == 0.0);
    p.chi_sigma = 1.0;
    p.chi_phi = 1.0;
    auto u = nutrient_energy(0.0, 1.0, p);
    CHECK(u.N == 1.5);
    CHECK(u.N_sigma == 2.0);
    CHECK(u.N_phi == -1.0);
}

TEST_CASE("source presets") {
    ModelParams p;
    SourceSpec lima;
    lima.kind = SourceKind::Lima;
    lima.P = 1;
    lima.A = 0;
    lima.C = 1;
    lima.c_gamma_v = 1.0;
    auto s = sources(-1.0, 0.7, 0.3, lima, p);
    CHECK(s.gamma_phi == 0.0);
    CHECK(s.gamma_sigma == 0.0);
    CHECK(s.gamma_v == 0.0);
    auto t = sources(1.0, 0.5, 0.3, lima, p);
    CHECK(t.gamma_phi == 0.5);
    CHECK(t.gamma_sigma == 1.0);
    CHECK(t.theta_phi == 0.0);

    SourceSpec hd;
    hd.kind = SourceKind::Hawkins;
    hd.p0 = 1.0;
    auto h = sources(-1.0, 0.4, 0.9, hd, p);
    CHECK(h.gamma_phi == 0.0);
    CHECK(h.gamma_sigma == 0.0);
    p.chi_phi = 0.5;
    auto h2 = sources(0.0, 0.4, 0.1, hd, p);
    CHECK(h2.gamma_phi == doctest::Approx(1.0 * (0.4 - 0.0 - 0.1)));
    CHECK(h2.gamma_sigma == doctest::Approx(-h2.gamma_phi));
    CHECK(h2.gamma_phi == doctest::Approx(h2.lambda_phi - h2.theta_phi * 0.1));
}

TEST_CASE("source growth bounds and gamma_v clamp on random inputs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    ModelParams p;
    p.chi_phi = 0.8;
    std::vector<SourceSpec> specs(4);
    specs[0].kind = SourceKind::Lima;
    specs[0].P = 2.0;
    specs[0].A = 0.5;
    specs[0].C = 1.5;
    specs[1].kind = SourceKind::Hawkins;
    specs[1].p0 = 0.7;
    specs[2] = specs[1];
    specs[2].rho_min_variant = true;
    specs[3].kind = SourceKind::None;
    for (auto& s : specs) s.c_gamma_v = 1.3;
    for (int k = 0; k < 20000; ++k) {
        double phi = U(rng), sigma = U(rng), mu = U(rng);
        for (const auto& s : specs) {
            auto v = sources(phi, sigma, mu, s, p);
            double R0 = s.R0(p.chi_phi);
            CHECK(std::abs(v.gamma_phi) + std::abs(v.gamma_sigma) <=
                  R0 * (1 + std::abs(phi) + std::abs(sigma) + std::abs(mu)) + 1e-12);
            CHECK(std::abs(v.lambda_phi) <= R0 * (1 + std::abs(phi) + std::abs(sigma)) + 1e-12);
            CHECK(std::abs(v.theta_phi) <= R0 + 1e-12);
            CHECK(v.theta_phi >= 0.0);
            CHECK(std::abs(v.gamma_v) <= s.gamma0_value(p.chi_phi) + 1e-15);
            if (s.rho_min_variant) CHECK(v.theta_phi >= s.R5() - 1e-15);
        }
    }
}

TEST_CASE("validator: epsilon condition examples") {
    ConstitutiveSpec spec;
    ModelParams p;
    p.chi_phi = 0.0;
    p.epsilon = 10.0;
    CHECK(validate_params(p, spec).find("A6.epsilon")->passed);
    p.chi_phi = 1.0;
    p.chi_sigma = 1.0;
    p.epsilon = 0.05;
    CHECK(validate_params(p, spec).find("A6.epsilon")->passed);
    p.epsilon = 0.1;
    auto r = validate_params(p, spec);
    CHECK_FALSE(r.find("A6.epsilon")->passed);
    CHECK_FALSE(r.ok());
    CHECK(r.summary().find("1/epsilon > 2 chi_phi^2 / (chi_sigma R1)") != std::string::npos);
}

TEST_CASE("validator: bound checks and case consistency") {
    ModelParams p;
    ConstitutiveSpec spec;
    CHECK(validate_params(p, spec).ok());

    auto bad_m = spec;
    bad_m.m = BoundedCoefficient::linear(0.0, 1.0);
    CHECK_FALSE(validate_params(p, bad_m).find("A2.m")->passed);
    auto bad_n = spec;
    bad_n.n = BoundedCoefficient::constant(-1.0);
    CHECK_FALSE(validate_params(p, bad_n).find("A2.n")->passed);
    auto bad_eta = spec;
    bad_eta.eta = BoundedCoefficient::smooth(0.0, 2.0);
    CHECK_FALSE(validate_params(p, bad_eta).find("A3.eta")->passed);
    auto bad_lambda = spec;
    bad_lambda.lambda = BoundedCoefficient::constant(-0.1);
    CHECK_FALSE(validate_params(p, bad_lambda).find("A3.lambda")->passed);
    auto bad_g = spec;
    bad_g.source.kind = SourceKind::Lima;
    bad_g.source.P = 1.0;
    bad_g.source.c_gamma_v = 1.0;
    bad_g.source.gamma0 = 0.0;
    CHECK_FALSE(validate_params(p, bad_g).find("A5.gamma0")->passed);
    bad_g.source.gamma0 = -1.0;
    CHECK(validate_params(p, bad_g).find("A5.gamma0")->passed);

    auto hawk = spec;
    hawk.source.kind = SourceKind::Hawkins;
    hawk.source.p0 = 1.0;
    auto r = validate_params(p, hawk);
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.find("A6.case_consistency")->passed);
    hawk.source.rho_min_variant = true;
    CHECK(validate_params(p, hawk).ok());
    hawk.source.rho_min_variant = false;
    hawk.potential.kind = PotentialKind::QuadraticGrowth;
    CHECK(validate_params(p, hawk).ok());

    ModelParams neg = p;
    neg.nu = 0.0;
    CHECK_FALSE(validate_params(neg, spec).find("A1.nu")->passed);
    neg = p;
    neg.b = -1;
    CHECK_FALSE(validate_params(neg, spec).ok());
}
