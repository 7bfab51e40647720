/// Runs the acceptance criteria and prints one pass/fail line each.
/// Exit status is 0 when every selected criterion passes.

#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>

#include "chb/verify.hpp"

int main(int argc, char** argv) {
    CLI::App app{"chb acceptance criteria"};
    std::vector<int> only;
    std::string workdir;
    app.add_option("--only", only, "criterion ids to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--workdir", workdir, "scratch directory for output files");
    CLI11_PARSE(app, argc, argv);

    auto results = chb::run_acceptance(only, workdir);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%s\n", chb::format_result(r).c_str());
        if (!r.passed) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}
