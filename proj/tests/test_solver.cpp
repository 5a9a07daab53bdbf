#include <catch_amalgamated.hpp>

#include <cmath>

#include "helm/oracle.hpp"
#include "helm/solver.hpp"

using namespace helm;

namespace {

SolveOptions with(EmbeddingKind kind) {
    SolveOptions o;
    o.embedding = kind;
    return o;
}

Network meshed(bool with_pv) {
    std::vector<BusSpec> buses{
        {.id = 10, .kind = BusKind::Swing, .vswing = {1.03, 0.02}},
        {.id = 20, .kind = BusKind::PQ, .p = -0.4, .q = -0.15, .bsh = 0.03},
        {.id = 30, .kind = with_pv ? BusKind::PV : BusKind::PQ, .p = 0.3, .q = 0.0, .vsp = 1.02},
        {.id = 40, .kind = BusKind::PQ, .p = -0.25, .q = -0.05, .gsh = 0.01},
    };
    std::vector<BranchSpec> branches{
        {.from = 10, .to = 20, .r = 0.02, .x = 0.12, .b = 0.03},
        {.from = 20, .to = 30, .r = 0.015, .x = 0.1, .tap = 0.98},
        {.from = 30, .to = 40, .r = 0.01, .x = 0.08, .b = 0.01},
        {.from = 10, .to = 40, .r = 0.03, .x = 0.15, .shift = radians(-2.0)},
    };
    return Network(buses, branches);
}

}  // namespace

TEST_CASE("options are validated") {
    SolveOptions o;
    o.max_order = 4;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.pade_tol = 0.0;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.mismatch_tol = -1.0;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.order_step = 0;
    CHECK_THROWS_AS(o.validate(), Error);
    CHECK_THROWS_AS(solve(oracle::twobus_network({0.5, 0.4}), o), Error);
}

TEST_CASE("feasible two-bus converges to the closed form") {
    for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
        const auto r = solve(oracle::twobus_network({0.5, 0.4}), with(kind));
        REQUIRE(r.converged());
        CHECK(std::abs(r.v[1] - Complex{1.268115, 0.4}) < 1e-6);
        CHECK(std::abs(r.v[1] - (0.5 + std::sqrt(0.59) + Complex{0.0, 0.4})) < 1e-9);
        CHECK(r.mismatch_norm < 1e-10);
        CHECK(r.v[0] == Complex{1.0, 0.0});
        CHECK(r.bus_ids == std::vector<int>{1, 2});
    }
}

TEST_CASE("real infeasible two-bus is classified as no solution") {
    for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
        const auto r = solve(oracle::twobus_network({-0.3, 0.0}), with(kind));
        CHECK(r.status == SolveStatus::NoSolution);
        REQUIRE(r.collapse_estimate);
        CHECK(std::abs(*r.collapse_estimate - 1.0 / 1.2) < 1e-2);
        CHECK_FALSE(r.note.empty());
        CHECK_FALSE(r.pole_estimates.empty());
    }
}

TEST_CASE("zero injection converges at order zero") {
    std::vector<BusSpec> buses{{.id = 1, .kind = BusKind::Swing}, {.id = 2, .kind = BusKind::PQ}, {.id = 3, .kind = BusKind::PQ}};
    const Network net(buses, {{.from = 1, .to = 2, .r = 0.01, .x = 0.1}, {.from = 2, .to = 3, .x = 0.2}});
    for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
        const auto r = solve(net, with(kind));
        REQUIRE(r.converged());
        CHECK(r.order_used == 0);
        for (const auto& v : r.v) CHECK(std::abs(v - 1.0) < 1e-15);
    }
}

TEST_CASE("lossless PV two-bus") {
    for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
        const auto r = solve_pv(oracle::twobus_pv_network(0.2, 1.0, 1.0), with(kind));
        REQUIRE(r.converged());
        const auto exact = oracle::twobus_pv_closed_form(0.2, 1.0, 1.0, 1.0);
        CHECK(std::abs(r.v[1] - exact->u) < 1e-9);
        CHECK(std::abs(r.q_pv[0] - exact->q) < 1e-9);
        CHECK(std::abs(r.v[1] - Complex{0.979796, 0.2}) < 1e-6);
        CHECK(r.q_pv[0] == Catch::Approx(0.101021).margin(1e-6));
        CHECK(r.setpoint_error <= 1e-8);
        CHECK(r.pv_ids == std::vector<int>{2});
    }
}

TEST_CASE("PV bus at its natural voltage with no active power stays flat") {
    const auto r = solve_pv(oracle::twobus_pv_network(0.3, 0.0, 1.0));
    REQUIRE(r.converged());
    CHECK(std::abs(r.v[1] - 1.0) < 1e-12);
    CHECK(std::abs(r.q_pv[0]) < 1e-12);
}

TEST_CASE("PV two-bus beyond its transfer limit does not converge") {
    for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
        const auto r = solve_pv(oracle::twobus_pv_network(0.5, 2.5, 1.0), with(kind));
        CHECK_FALSE(r.converged());
        CHECK(r.status == SolveStatus::NoSolution);
        REQUIRE(r.collapse_estimate);
        CHECK(std::abs(*r.collapse_estimate - 0.8) < 2e-2);
    }
}

TEST_CASE("solve_pv needs a PV bus") {
    CHECK_THROWS_AS(solve_pv(oracle::twobus_network({0.5, 0.4})), Error);
}

TEST_CASE("meshed networks agree with Newton-Raphson under both embeddings") {
    for (bool pv : {false, true}) {
        const auto net = meshed(pv);
        const auto nr = oracle::newton_raphson(net);
        REQUIRE(nr.converged);
        ComplexVector reference;
        for (auto kind : {EmbeddingKind::Minimal, EmbeddingKind::Canonical}) {
            const auto r = solve(net, with(kind));
            REQUIRE(r.converged());
            CHECK(r.mismatch_norm <= 1e-8);
            CHECK(r.setpoint_error <= 1e-8);
            for (std::size_t i = 0; i < net.size(); ++i) CHECK(std::abs(r.v[i] - nr.v[i]) < 1e-8);
            for (std::size_t k = 0; k < nr.q_pv.size(); ++k) CHECK(std::abs(r.q_pv[k] - nr.q_pv[k]) < 1e-8);
            if (reference.empty()) {
                reference = r.v;
            } else {
                for (std::size_t i = 0; i < net.size(); ++i) CHECK(std::abs(r.v[i] - reference[i]) < 1e-8);
            }
        }
    }
}

TEST_CASE("scan of a feasible two-bus follows the closed form") {
    const oracle::TwoBusCase c{{0.5, 0.4}};
    const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
    const auto result = scan(oracle::twobus_network(c.sigma), {}, grid);
    REQUIRE(result.points.size() == 4);
    for (const auto& p : result.points) {
        CHECK(p.converged);
        CHECK(std::abs(p.v[1] - *oracle::twobus_closed_form(c, p.s)) < 1e-9);
    }
    CHECK(result.largest_reached == 1.0);
}

TEST_CASE("scan of an infeasible two-bus stops at the branch point") {
    std::vector<double> grid;
    for (int k = 1; k <= 20; ++k) grid.push_back(0.05 * k);
    const auto result = scan(oracle::twobus_network({-0.3, 0.0}), {}, grid);
    for (const auto& p : result.points) {
        if (p.s < 0.8) CHECK(p.converged);
        if (p.s > 0.85) CHECK_FALSE(p.converged);
    }
    REQUIRE(result.largest_reached);
    CHECK(*result.largest_reached < 5.0 / 6.0);
    CHECK(*result.largest_reached >= 0.75);
}

TEST_CASE("scan preconditions") {
    const auto net = oracle::twobus_network({0.5, 0.4});
    CHECK_THROWS_AS(scan(net, {}, std::vector<double>{0.0, 0.5}), Error);
    CHECK_THROWS_AS(scan(net, {}, std::vector<double>{0.5, 0.4}), Error);
    CHECK_THROWS_AS(scan(net, {}, std::vector<double>{0.5, 1.5}), Error);
}
