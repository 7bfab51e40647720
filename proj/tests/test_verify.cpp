#include <doctest.h>

#include <cmath>

#include "chb/verify.hpp"

using namespace chb;

TEST_CASE("format_result prints status, id, detail and time") {
    CriterionResult r{3, "decay", true, "ok", 1.25};
    CHECK(format_result(r) == "[PASS]  3 decay: ok (1.2 s)");
    r.passed = false;
    r.id = 10;
    CHECK(format_result(r).rfind("[FAIL] 10 decay", 0) == 0);
}

TEST_CASE("mms tables report second order on coarse grids") {
    for (const auto& t : {mms_neumann_poisson({8, 16, 32}), mms_robin_diffusion({8, 16, 32})}) {
        REQUIRE(t.rows.size() == 3);
        CHECK(t.rows[0].order == 0.0);
        CHECK(t.rows[1].error < t.rows[0].error);
        for (double o : t.orders()) CHECK(o == doctest::Approx(2.0).epsilon(0.15));
    }
}

TEST_CASE("mms errors match the table definition") {
    auto t = mms_neumann_poisson({16, 32});
    CHECK(t.rows[0].h == doctest::Approx(1.0 / 16));
    CHECK(t.rows[1].order == doctest::Approx(std::log2(t.rows[0].error / t.rows[1].error)));
}

TEST_CASE("coupled self-convergence needs three steps") {
    CHECK_THROWS_AS(coupled_self_convergence({1e-3, 5e-4}, 0.01), std::invalid_argument);
}

TEST_CASE("oracle comparison is reproducible for a fixed seed") {
    auto a = brinkman_oracle_comparison(11, {6}, 2);
    auto b = brinkman_oracle_comparison(11, {6}, 2);
    REQUIRE(a.size() == 2);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].max_difference == b[k].max_difference);
        CHECK(a[k].converged);
        CHECK(a[k].max_difference <= 1e-8);
    }
}

TEST_CASE("reference models pass the validator") {
    CHECK(validate_params(coupled_budget_model(16).params, coupled_budget_model(16).spec).ok());
    Model g = galerkin_reference_model();
    CHECK(validate_params(g.params, g.spec).ok());
    auto [phi0, sigma0] = galerkin_reference_data(g.grid);
    CHECK(phi0.matches(g.grid));
    CHECK(sigma0.min() == doctest::Approx(0.6).epsilon(0.01));
}

TEST_CASE("run_acceptance honours the selection") {
    auto rs = run_acceptance({2, 8});
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].id == 2);
    CHECK(rs[1].id == 8);
    CHECK(rs[0].passed);
    CHECK(rs[1].passed);
}
