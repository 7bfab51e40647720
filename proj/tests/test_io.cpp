#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "chb/io.hpp"

using namespace chb;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("chb_test_io_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

State random_state(const Grid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    State s = State::zeros(g);
    s.t = 0.1234567890123;
    for (CellField* f : {&s.phi, &s.mu, &s.sigma, &s.p})
        for (auto& x : f->values()) x = N(rng) * std::pow(10.0, N(rng) * 3.0);
    for (auto& x : s.v.u_values()) x = N(rng);
    for (auto& x : s.v.w_values()) x = N(rng);
    return s;
}

RunConfig small_config(const fs::path& dir) {
    RunConfig c;
    c.nx = c.ny = 16;
    c.dt = 1e-3;
    c.t_end = 5e-3;
    c.snapshot_every = 2;
    c.params.b = 1.0;
    c.params.sigma_inf = {1.0, 1.0, 1.0, 1.0};
    c.spec.potential.kind = PotentialKind::QuadraticGrowth;
    c.spec.source.kind = SourceKind::Lima;
    c.spec.source.P = 0.1;
    c.spec.source.A = 0.05;
    c.spec.source.c_gamma_v = 0.5;
    c.init.r = 0.3;
    c.params.epsilon = 0.1;
    c.output.directory = dir.string();
    c.output.vtk = true;
    return c;
}

}  // namespace

TEST_CASE("parse_config: minimal file takes the defaults") {
    RunConfig c = parse_config("[domain]\nnx = 32\n");
    RunConfig d;
    d.nx = 32;
    CHECK(c == d);
    CHECK(parse_config("") == RunConfig{});
    CHECK(parse_config("# only a comment\n\n; another\n") == RunConfig{});
}

TEST_CASE("parse_config: unknown keys, sections and bad values are rejected") {
    auto problems = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.problems();
        }
        return std::vector<std::string>{};
    };
    auto p = problems("[domain]\nnxx = 32\n");
    REQUIRE(p.size() == 1u);
    CHECK(p[0].find("unknown key 'nxx'") != std::string::npos);
    CHECK(problems("[domian]\nnx = 32\n").size() == 1u);
    CHECK(problems("nx = 32\n").size() == 1u);
    CHECK(problems("[domain]\nnx = 3.5\n").size() == 1u);
    CHECK(problems("[domain]\nnx = 8\nnx = 9\n").size() == 1u);
    CHECK(problems("[model]\nepsilon = abc\n").size() == 1u);
    CHECK(problems("[model]\nsigma_inf = 1, 2\n").size() == 1u);
    CHECK(problems("[constitutive]\npotential = sextic\n").size() == 1u);
    CHECK(problems("[output]\nformats = csv, png\n").size() == 1u);
    CHECK(problems("[domain]\nnx = 8\nbogus\n").size() == 1u);
    // every problem is reported, not just the first
    CHECK(problems("[domain]\nfoo = 1\nbar = 2\n").size() == 2u);
}

TEST_CASE("parse_config: assumption violations name the inequality") {
    const std::string text =
        "[model]\nepsilon = 0.1\nchi_phi = 1\nchi_sigma = 1\n[constitutive]\npotential = quartic\n";
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        bool cited = false;
        for (const auto& p : e.problems()) cited = cited || p.find("A6.epsilon") != std::string::npos;
        CHECK(cited);
        CHECK(std::string(e.what()).find("1/epsilon > 2 chi_phi^2 / (chi_sigma R1)") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("[solver]\nstabilization_s = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[domain]\nnx = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[constitutive]\nsource = hawkins\np0 = 1\n"), ConfigError);
    CHECK_NOTHROW(parse_config("[constitutive]\nsource = hawkins\np0 = 1\nrho_min_variant = true\n"));
}

TEST_CASE("parse_config: per-edge far field and constant coefficients") {
    RunConfig c = parse_config("[model]\nb = 1\nsigma_inf = 1, 0.5, 0.25, 0\n[constitutive]\nmobility_lo = 0.3\n");
    CHECK(c.params.sigma_inf == std::array<double, 4>{1.0, 0.5, 0.25, 0.0});
    CHECK(c.spec.m.lo == 0.3);
    CHECK(c.spec.m.hi == 0.3);
    RunConfig d = parse_config("[model]\nsigma_inf = 0.7\n");
    CHECK(d.params.sigma_inf == std::array<double, 4>{0.7, 0.7, 0.7, 0.7});
    CHECK_THROWS_AS(parse_config("[constitutive]\nmobility_lo = 0.3\nmobility_hi = 0.4\n"), ConfigError);
    RunConfig e = parse_config("[constitutive]\nmobility = smooth\nmobility_lo = 0.3\nmobility_hi = 0.4\n");
    CHECK(e.spec.m.kind == CoefficientKind::Smooth);
}

TEST_CASE("format_config: save then load is the identity") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    fs::path dir = scratch_dir("roundtrip");
    for (int trial = 0; trial < 25; ++trial) {
        RunConfig c;
        c.Lx = 0.5 + U(rng);
        c.Ly = 0.5 + U(rng);
        c.nx = 8 + static_cast<int>(U(rng) * 50);
        c.dt = 1e-4 * (1.0 + U(rng));
        c.t_end = U(rng) / 3.0;
        c.params.epsilon = 0.05 + 0.1 * U(rng);
        c.params.chi_phi = 0.01 * U(rng);
        c.params.b = U(rng);
        c.params.sigma_inf = {U(rng), U(rng), U(rng), U(rng)};
        c.spec.potential.kind = trial % 2 ? PotentialKind::Quartic : PotentialKind::QuadraticGrowth;
        c.spec.m = BoundedCoefficient::smooth(0.1 + U(rng), 1.2 + U(rng));
        c.spec.eta = BoundedCoefficient::linear(0.5 + U(rng), 1.5 + U(rng));
        c.spec.source.kind = SourceKind::Lima;
        c.spec.source.P = U(rng);
        c.spec.source.c_gamma_v = U(rng);
        c.stabilization_s = 2.0 + U(rng);
        c.init.phi0 = trial % 3 == 0 ? InitPreset::CosinePerturbation : InitPreset::TanhDisc;
        c.init.sigma0 = trial % 2 ? SigmaPreset::Equilibrium : SigmaPreset::Uniform;
        c.output.vtk = trial % 2 == 0;
        c.output.csv = trial % 4 != 0;
        c.output.directory = "out_" + std::to_string(trial);
        fs::path p = dir / "c.ini";
        save_config(c, p);
        RunConfig back = load_config(p);
        CHECK(back == c);
        CHECK(format_config(back) == format_config(c));
    }
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_config(dir / "missing.ini"), std::runtime_error);
}

TEST_CASE("snapshot CSV: zero state and bit-exact read-back") {
    fs::path dir = scratch_dir("snap");
    Grid g = make_grid(1.0, 2.0, 6, 5);
    write_snapshot_csv(State::zeros(g), g, dir / "zero.csv");
    SnapshotData z = read_snapshot_csv(dir / "zero.csv");
    CHECK(z.phi.size() == 30u);
    CHECK(z.header.grid == g);
    for (const CellField* f : {&z.phi, &z.mu, &z.sigma, &z.p, &z.vx, &z.vy}) CHECK(f->max() == 0.0);

    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 5; ++trial) {
        State s = random_state(g, rng);
        write_snapshot_csv(s, g, dir / "s.csv");
        SnapshotData d = read_snapshot_csv(dir / "s.csv");
        CHECK(d == snapshot_of(s, g));
        CHECK(d.phi == s.phi);
        CHECK(d.header.t == s.t);
    }
    std::ofstream(dir / "bad.csv") << "# chb snapshot version=1\ni,j\n";
    CHECK_THROWS_AS(read_snapshot_csv(dir / "bad.csv"), std::runtime_error);
    CHECK_THROWS_AS(write_snapshot_csv(State::zeros(g), g, dir / "no" / "such" / "dir.csv"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("snapshot VTK: legacy structured-points layout") {
    fs::path dir = scratch_dir("vtk");
    Grid g = make_grid(1.0, 1.0, 5, 4);
    std::mt19937_64 rng(41);
    write_snapshot_vtk(random_state(g, rng), g, dir / "s.vtk");
    std::istringstream in(slurp(dir / "s.vtk"));
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() > 8u);
    CHECK(lines[0] == "# vtk DataFile Version 3.0");
    CHECK(lines[2] == "ASCII");
    CHECK(lines[3] == "DATASET STRUCTURED_POINTS");
    CHECK(lines[4] == "DIMENSIONS 6 5 1");
    CHECK(lines[5] == "ORIGIN 0 0 0");
    CHECK(lines[7] == "CELL_DATA 20");
    int scalars = 0, vectors = 0;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        if (lines[k].rfind("SCALARS ", 0) == 0) {
            ++scalars;
            CHECK(lines[k + 1] == "LOOKUP_TABLE default");
        }
        if (lines[k].rfind("VECTORS ", 0) == 0) {
            ++vectors;
            CHECK(lines.size() - k - 1 == 20u);
        }
    }
    CHECK(scalars == 4);
    CHECK(vectors == 1);
    // 8 header lines, 4 x (2 + 20) scalar lines, 1 + 20 vector lines
    CHECK(lines.size() == 8u + 4u * 22u + 21u);
    fs::remove_all(dir);
}

TEST_CASE("timeseries: header-only, fixed 16 columns, round trip") {
    fs::path dir = scratch_dir("ts");
    CHECK(timeseries_columns().size() == 16u);
    write_timeseries({}, dir / "empty.csv");
    CHECK(slurp(dir / "empty.csv") ==
          "t,energy,mass_phi,mass_sigma,diss_mu,diss_nsigma,diss_visc,bnd_sigma_sq,src_phi_mu,src_sigma_N,"
          "bnd_income,budget_residual,div_residual,phi_min,phi_max,cg_iters_total\n");
    CHECK(read_timeseries(dir / "empty.csv").empty());
    std::vector<DiagnosticsRow> rows(3);
    std::mt19937_64 rng(43);
    std::normal_distribution<double> N(0.0, 1.0);
    for (auto& r : rows) {
        r.t = N(rng);
        r.energy = N(rng);
        r.budget_residual = N(rng) * 1e-15;
        r.cg_iters_total = 17;
    }
    write_timeseries(rows, dir / "ts.csv");
    auto back = read_timeseries(dir / "ts.csv");
    REQUIRE(back.size() == 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back[k].t == rows[k].t);
        CHECK(back[k].energy == rows[k].energy);
        CHECK(back[k].budget_residual == rows[k].budget_residual);
        CHECK(back[k].cg_iters_total == 17.0);
    }
    std::istringstream in(slurp(dir / "ts.csv"));
    for (std::string l; std::getline(in, l);) CHECK(std::count(l.begin(), l.end(), ',') == 15);
    fs::remove_all(dir);
}

TEST_CASE("output_directory honours CHB_OUTPUT_ROOT for relative paths") {
    RunConfig c;
    c.output.directory = "rel";
    ::unsetenv("CHB_OUTPUT_ROOT");
    CHECK(output_directory(c) == fs::path("rel"));
    ::setenv("CHB_OUTPUT_ROOT", "/tmp/root", 1);
    CHECK(output_directory(c) == fs::path("/tmp/root/rel"));
    c.output.directory = "/abs/out";
    CHECK(output_directory(c) == fs::path("/abs/out"));
    ::unsetenv("CHB_OUTPUT_ROOT");
}

TEST_CASE("initial_state_from: presets") {
    RunConfig c;
    c.nx = c.ny = 16;
    c.params.chi_phi = 0.05;
    c.init.phi0 = InitPreset::Uniform;
    c.init.phi0_value = -1.0;
    c.init.sigma0 = SigmaPreset::Equilibrium;
    c.init.sigma0_value = 0.8;
    State s = initial_state_from(c);
    CHECK(s.phi.min() == -1.0);
    CHECK(s.sigma.max() == doctest::Approx(0.8).epsilon(1e-15));
    c.init.phi0 = InitPreset::CosinePerturbation;
    c.init.mean = 0.1;
    c.init.amplitude = 0.05;
    c.init.modes = 2;
    s = initial_state_from(c);
    CHECK(integrate_cell(s.phi, c.grid()) == doctest::Approx(0.1).epsilon(1e-12));
    c.init.phi0 = InitPreset::TanhDisc;
    c.init.relax_steps = 3;
    State r = initial_state_from(c);
    CHECK(r.t == 0.0);
    CHECK(r.phi.max() > 0.9);
    CHECK(integrate_cell(r.phi, c.grid()) ==
          doctest::Approx(integrate_cell(tanh_disc(c.grid(), 0.5, 0.5, 0.25, c.params.epsilon), c.grid())).epsilon(1e-10));
}

TEST_CASE("execute: outputs, determinism and the directory lock") {
    fs::path dir = scratch_dir("run");
    RunConfig c = small_config(dir / "a");
    RunOutcome a = execute(c);
    REQUIRE(a.result.completed);
    CHECK(a.result.rows.size() == 6u);
    CHECK(fs::exists(dir / "a" / "timeseries.csv"));
    CHECK(fs::exists(dir / "a" / "config.ini"));
    for (const char* n : {"snapshot_000000", "snapshot_000002", "snapshot_000004", "snapshot_000005"}) {
        CHECK(fs::exists(dir / "a" / (std::string(n) + ".csv")));
        CHECK(fs::exists(dir / "a" / (std::string(n) + ".vtk")));
    }
    CHECK_FALSE(fs::exists(dir / "a" / ".chb.lock"));
    CHECK(load_config(dir / "a" / "config.ini") == c);
    CHECK(read_timeseries(dir / "a" / "timeseries.csv").size() == 6u);

    RunConfig c2 = small_config(dir / "b");
    RunOutcome b = execute(c2);
    for (const auto& f : a.files) {
        if (f.filename() == "config.ini") continue;
        CHECK_MESSAGE(slurp(f) == slurp(dir / "b" / f.filename()), f.filename().string());
    }

    std::ofstream(dir / "a" / ".chb.lock") << "";
    CHECK_THROWS_AS(execute(c), std::runtime_error);
    fs::remove_all(dir);
}
