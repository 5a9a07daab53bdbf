#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helm/oracle.hpp"

using namespace helm;
using namespace helm::oracle;

TEST_CASE("no-load two-bus") {
    for (double s : {0.0, 0.5, 1.0, 3.0}) {
        CHECK(*twobus_closed_form({Complex{}}, s, Branch::Plus) == Complex{1.0, 0.0});
        CHECK(*twobus_closed_form({Complex{}}, s, Branch::Minus) == Complex{0.0, 0.0});
    }
    const auto bp = twobus_branch_points({Complex{}});
    CHECK(std::isinf(bp.s_minus));
    CHECK(std::isinf(bp.s_plus));
}

TEST_CASE("closed-form values") {
    CHECK(std::abs(*twobus_closed_form({{0.5, 0.4}}, 1.0) - Complex{1.268115, 0.4}) < 1e-6);
    CHECK(std::abs(*twobus_closed_form({{-0.2, 0.0}}, 1.0) - 0.723607) < 1e-6);
    CHECK(std::abs(*twobus_closed_form({{-0.2, 0.0}}, 1.0) - (0.5 + std::sqrt(0.05))) < 1e-15);
    CHECK_FALSE(twobus_closed_form({{-0.3, 0.0}}, 1.0));
}

TEST_CASE("branch points") {
    auto bp = twobus_branch_points({{0.5, 0.4}});
    CHECK(bp.s_minus == Catch::Approx(-0.438476).margin(1e-6));
    CHECK(bp.s_plus == Catch::Approx(3.563476).margin(1e-6));
    bp = twobus_branch_points({{-0.3, 0.0}});
    CHECK(bp.s_plus == Catch::Approx(0.833333).margin(1e-6));
    CHECK(std::isinf(bp.s_minus));
    bp = twobus_branch_points({{0.25, 0.0}});
    CHECK(bp.s_minus == -1.0);
    CHECK(std::isinf(bp.s_plus));
}

TEST_CASE("feasibility at s = 1 matches s_plus >= 1") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const TwoBusCase c{{u(rng), u(rng)}};
        const auto bp = twobus_branch_points(c);
        CHECK((bp.s_plus >= 1.0) == (0.25 + c.sigma_r() - c.sigma_i() * c.sigma_i() >= 0.0));
        CHECK(c.feasible() == static_cast<bool>(twobus_closed_form(c, 1.0)));
    }
}

TEST_CASE("closed forms lie on the embedded curve") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> su(0.0, 2.0);
    int tested = 0;
    for (int k = 0; k < 400; ++k) {
        const TwoBusCase c{{u(rng), u(rng)}};
        const double s = su(rng);
        for (auto branch : {Branch::Plus, Branch::Minus}) {
            const auto uu = twobus_closed_form(c, s, branch);
            if (!uu) continue;
            ++tested;
            const Complex curve = *uu * *uu - (1.0 + 2.0 * kJ * s * c.sigma_i()) * *uu - s * std::conj(c.sigma);
            CHECK(std::abs(curve) < 1e-12);
            const auto hat = twobus_closed_form_hat(c, s, branch);
            CHECK(std::abs(*hat - (*uu - 2.0 * kJ * s * c.sigma_i())) < 1e-15);
            CHECK(std::abs(*hat - std::conj(*uu)) < 1e-15);
        }
    }
    CHECK(tested > 300);
}

TEST_CASE("branches collide at the branch points") {
    for (Complex sigma : {Complex{0.5, 0.4}, Complex{-0.1, 0.7}, Complex{0.9, -0.2}}) {
        const auto bp = twobus_branch_points({sigma});
        for (double s : {bp.s_minus, bp.s_plus}) {
            const auto plus = twobus_closed_form({sigma}, s, Branch::Plus);
            const auto minus = twobus_closed_form({sigma}, s, Branch::Minus);
            REQUIRE(plus);
            REQUIRE(minus);
            CHECK(std::abs(*plus - *minus) < 1e-10);
        }
    }
}

TEST_CASE("lossless PV two-bus closed form") {
    auto pv = twobus_pv_closed_form(0.2, 1.0, 1.0, 1.0);
    REQUIRE(pv);
    CHECK(std::abs(pv->u - Complex{0.979796, 0.2}) < 1e-6);
    CHECK(pv->q == Catch::Approx(0.101021).margin(1e-6));
    CHECK(std::abs(pv->u - Complex{std::sqrt(0.96), 0.2}) < 1e-15);

    for (double s : {0.1, 0.5, 1.0}) {
        pv = twobus_pv_closed_form(0.3, 0.0, 1.0, s);
        REQUIRE(pv);
        CHECK(pv->u == Complex{1.0, 0.0});
        CHECK(pv->q == 0.0);
    }
    CHECK_FALSE(twobus_pv_closed_form(0.5, 2.5, 1.0, 1.0));
    CHECK_THROWS_AS(twobus_pv_closed_form(0.0, 1.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(twobus_pv_closed_form(0.2, 1.0, 1.0, 0.0), Error);
}

TEST_CASE("PV closed form meets its magnitude constraint") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const double x = 0.05 + 0.5 * u(rng), p = 4.0 * (u(rng) - 0.5), vsp = 0.9 + 0.2 * u(rng), s = 0.01 + u(rng);
        const auto pv = twobus_pv_closed_form(x, p, vsp, s);
        if (!pv) continue;
        CHECK(std::abs(std::norm(pv->u) - (1.0 + s * (vsp * vsp - 1.0))) < 1e-12);
    }
}

TEST_CASE("Newton-Raphson agrees with the two-bus closed form") {
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    int checked = 0;
    for (int k = 0; k < 100; ++k) {
        const TwoBusCase c{{u(rng), u(rng)}};
        if (0.25 + c.sigma_r() - c.sigma_i() * c.sigma_i() < 0.05) continue;
        const auto nr = newton_raphson(twobus_network(c.sigma));
        if (!nr.converged) continue;
        ++checked;
        CHECK(std::abs(nr.v[1] - *twobus_closed_form(c, 1.0)) < 1e-9);
    }
    CHECK(checked > 50);
}

TEST_CASE("Newton-Raphson on the flat state and on a PV bus") {
    std::vector<BusSpec> buses{{.id = 1, .kind = BusKind::Swing}, {.id = 2, .kind = BusKind::PQ}};
    const auto flat = newton_raphson(Network(buses, {{.from = 1, .to = 2, .x = 0.3}}));
    CHECK(flat.converged);
    CHECK(flat.iterations <= 1);
    CHECK(std::abs(flat.v[1] - 1.0) < 1e-15);

    const auto nr = newton_raphson(twobus_pv_network(0.2, 1.0, 1.0));
    REQUIRE(nr.converged);
    const auto exact = twobus_pv_closed_form(0.2, 1.0, 1.0, 1.0);
    CHECK(std::abs(nr.v[1] - exact->u) < 1e-9);
    CHECK(std::abs(nr.q_pv[0] - exact->q) < 1e-9);
}

TEST_CASE("Newton-Raphson reports failure as a value") {
    const auto nr = newton_raphson(twobus_network({-0.5, 0.0}));
    CHECK_FALSE(nr.converged);
    CHECK(nr.iterations > 0);
}
