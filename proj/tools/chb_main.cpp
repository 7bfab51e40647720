/// chb command-line driver: run, verify, mms, galerkin, oracle.
/// Exit status: 0 all checks pass, 1 a check failed, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "chb/verify.hpp"

namespace {

void print_table(const chb::ConvergenceTable& t, const char* h_label) {
    std::printf("%s\n  %8s %12s %14s %8s\n", t.name.c_str(), "n", h_label, "error", "order");
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        if (k == 0)
            std::printf("  %8d %12.4e %14.6e %8s\n", r.n, r.h, r.error, "-");
        else
            std::printf("  %8d %12.4e %14.6e %8.3f\n", r.n, r.h, r.error, r.order);
    }
}

bool orders_within(const chb::ConvergenceTable& t, double lo, double hi) {
    for (double o : t.orders())
        if (o < lo || o > hi) return false;
    return true;
}

std::vector<int> parse_k_list(const std::string& s) {
    std::vector<int> ks;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int k = std::stoi(item, &used);
        if (used != item.size() || k < 1) throw std::invalid_argument("bad mode count '" + item + "'");
        ks.push_back(k);
    }
    if (ks.empty()) throw std::invalid_argument("empty --k list");
    return ks;
}

int cmd_run(const std::string& path) {
    chb::RunConfig cfg = chb::load_config(path);
    chb::RunOutcome oc = chb::execute(cfg);
    std::printf("output: %s\n", oc.directory.string().c_str());
    for (const auto& f : oc.files) std::printf("  %s\n", f.filename().string().c_str());
    if (!oc.result.completed) {
        std::fprintf(stderr, "run failed: %s\n", oc.result.failure.c_str());
        return 1;
    }
    const auto& last = oc.result.rows.back();
    std::printf("t = %.6g, energy = %.10g, mass_phi = %.10g, mass_sigma = %.10g\n", last.t, last.energy,
                last.mass_phi, last.mass_sigma);
    return 0;
}

int cmd_verify(const std::vector<int>& only, const std::string& workdir) {
    int failed = 0;
    auto results = chb::run_acceptance(only, workdir);
    for (const auto& r : results) {
        std::printf("%s\n", chb::format_result(r).c_str());
        std::fflush(stdout);
        if (!r.passed) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}

int cmd_mms() {
    auto p = chb::mms_neumann_poisson({16, 32, 64, 128});
    auto q = chb::mms_robin_diffusion({16, 32, 64, 128});
    auto c = chb::coupled_self_convergence({4e-3, 2e-3, 1e-3, 5e-4}, 0.04);
    print_table(p, "h");
    print_table(q, "h");
    print_table(c, "dt");
    bool ok = orders_within(p, 1.8, 2.2) && orders_within(q, 1.8, 2.2) && orders_within(c, 0.8, 1.2);
    std::printf("%s: spatial orders in [1.8, 2.2], time orders in [0.8, 1.2]\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_galerkin(const std::string& path, const std::string& k_list, double threshold) {
    chb::RunConfig cfg = chb::load_config(path);
    std::vector<int> ks = parse_k_list(k_list);
    chb::Model m = cfg.model();
    chb::State s0 = chb::initial_state_from(cfg);
    chb::GalerkinOptions o;
    o.dt = cfg.dt;
    o.steps = cfg.steps();
    o.brinkman = cfg.scheme().brinkman;
    chb::SweepReport rep = chb::k_sweep(ks, s0.phi, s0.sigma, m, o, threshold);
    auto names = chb::GalerkinQuantities::names();
    std::printf("%6s", "k");
    for (const auto& n : names) std::printf(" %16s", n.c_str());
    std::printf(" %s\n", "status");
    for (const auto& run : rep.runs) {
        std::printf("%6d", run.k);
        for (double v : run.quantities.values()) std::printf(" %16.8e", v);
        std::printf(" %s\n", run.completed ? "ok" : run.failure.c_str());
    }
    if (!rep.top_difference.empty()) {
        std::printf("relative difference between the two largest k:\n");
        for (std::size_t i = 0; i < names.size() && i < rep.top_difference.size(); ++i)
            std::printf("  %-18s %.3f%%\n", names[i].c_str(), 100.0 * rep.top_difference[i]);
    }
    bool ok = rep.all_finite && (ks.size() < 2 || rep.uniform);
    std::printf("%s: all finite = %s, uniform below %.0f%% = %s\n", ok ? "PASS" : "FAIL",
                rep.all_finite ? "yes" : "no", 100.0 * threshold, rep.uniform ? "yes" : "no");
    return ok ? 0 : 1;
}

int cmd_oracle(std::uint64_t seed, int trials) {
    auto rows = chb::brinkman_oracle_comparison(seed, {6, 8, 12}, trials);
    bool ok = true;
    std::printf("%4s %6s %14s %14s %6s\n", "n", "trial", "max |diff|", "div residual", "iters");
    for (const auto& r : rows) {
        std::printf("%4d %6d %14.4e %14.4e %6d%s\n", r.n, r.trial, r.max_difference, r.div_residual, r.iterations,
                    r.converged ? "" : " (not converged)");
        ok = ok && r.converged && r.max_difference <= 1e-8 && r.div_residual <= 1e-9;
    }
    std::printf("%s: max |diff| <= 1e-8 and div residual <= 1e-9\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cahn-Hilliard-Brinkman tumour growth simulator"};
    app.require_subcommand(1);

    std::string config_path, k_list = "1,5,15,30", workdir;
    std::vector<int> only;
    double threshold = 0.2;
    std::uint64_t seed = 20240611;
    int trials = 10;

    auto* run = app.add_subcommand("run", "run a simulation from a config file");
    run->add_option("config", config_path, "configuration file")->required();
    auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
    verify->add_option("--only", only, "criterion ids (default: all)")->check(CLI::Range(1, 10));
    verify->add_option("--workdir", workdir, "scratch directory for output files");
    auto* mms = app.add_subcommand("mms", "manufactured-solution convergence tables");
    auto* galerkin = app.add_subcommand("galerkin", "spectral Galerkin runs and the k-sweep report");
    galerkin->add_option("config", config_path, "configuration file")->required();
    galerkin->add_option("--k", k_list, "comma-separated mode counts")->capture_default_str();
    galerkin->add_option("--threshold", threshold, "relative difference bound")->capture_default_str();
    auto* oracle = app.add_subcommand("oracle", "dense against Krylov Brinkman comparison");
    oracle->add_option("--seed", seed, "random seed")->capture_default_str();
    oracle->add_option("--trials", trials, "problems per grid")->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (auto* sub : {run, galerkin})
        if (*sub && !std::filesystem::is_regular_file(config_path)) {
            std::fprintf(stderr, "error: config file '%s' not found\n\n%s", config_path.c_str(), sub->help().c_str());
            return 2;
        }

    try {
        if (*run) return cmd_run(config_path);
        if (*verify) return cmd_verify(only, workdir);
        if (*mms) return cmd_mms();
        if (*galerkin) return cmd_galerkin(config_path, k_list, threshold);
        if (*oracle) return cmd_oracle(seed, trials);
    } catch (const chb::ConfigError& e) {
        std::fprintf(stderr, "configuration error:\n");
        for (const auto& p : e.problems()) std::fprintf(stderr, "  %s\n", p.c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
