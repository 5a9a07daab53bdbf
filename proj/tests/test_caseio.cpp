#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>

#include "helm/caseio.hpp"
#include "helm/oracle.hpp"
#include "helm/solver.hpp"

using namespace helm;
using namespace helm::caseio;

namespace {

constexpr const char* kTwoBus = R"({
  "base_mva": 100,
  "buses": [
    {"id": 1, "type": "swing", "v": [1, 0]},
    {"id": 2, "type": "pq", "p": -0.5, "q": -0.4}
  ],
  "branches": [{"from": 1, "to": 2, "r": 0, "x": 1}]
})";

ValidationCode code_of(const std::string& text) {
    try {
        parse_case(text);
    } catch (const ValidationError& e) {
        return e.code();
    }
    FAIL("expected ValidationError");
    return ValidationCode::Schema;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b)); }

}  // namespace

TEST_CASE("minimal two-bus document") {
    const auto net = parse_case(kTwoBus);
    CHECK(net.size() == 2);
    CHECK(net.base_mva() == 100.0);
    CHECK(net.bus(1).p == -0.5);
    CHECK(net.bus(1).q == -0.4);
    CHECK(net.bus(0).vswing == Complex{1.0, 0.0});
    CHECK(net.branches()[0].tap == 1.0);
    CHECK(net.branches()[0].shift == 0.0);
    CHECK(net.branches()[0].b == 0.0);
    CHECK(net.bus(1).gsh == 0.0);
    CHECK(net.bus(1).bsh == 0.0);
}

TEST_CASE("angles are read in degrees") {
    const auto net = parse_case(R"({"base_mva": 100, "buses": [
        {"id": 1, "type": "swing", "v": [1, 0]}, {"id": 2, "type": "pq", "p": 0}],
        "branches": [{"from": 1, "to": 2, "r": 0, "x": 1, "shift_deg": 30, "tap": 1.1}]})");
    CHECK(net.branches()[0].shift == Catch::Approx(std::numbers::pi / 6).epsilon(1e-15));
    CHECK(net.branches()[0].tap == 1.1);
}

TEST_CASE("invalid documents map to distinct error codes") {
    CHECK(code_of("{\"base_mva\": 100,") == ValidationCode::MalformedJson);
    CHECK(code_of("[]") == ValidationCode::Schema);
    CHECK(code_of(R"({"buses": [], "branches": []})") == ValidationCode::Schema);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "slack", "v": [1, 0]}], "branches": []})") ==
          ValidationCode::Schema);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing"}], "branches": []})") ==
          ValidationCode::Schema);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
        {"id": 2, "type": "pq", "p": "heavy"}], "branches": []})") == ValidationCode::Schema);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
        {"id": 1, "type": "pq", "p": 0}], "branches": []})") == ValidationCode::DuplicateBusId);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 2, "type": "pq", "p": 0}], "branches": []})") ==
          ValidationCode::NoSwing);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
        {"id": 2, "type": "pq", "p": 0}], "branches": [{"from": 1, "to": 7, "r": 0, "x": 1}]})") ==
          ValidationCode::UnknownBus);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
        {"id": 2, "type": "pq", "p": 0}], "branches": [{"from": 1, "to": 2, "r": 0, "x": 0}]})") ==
          ValidationCode::ZeroImpedance);
    CHECK(code_of(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
        {"id": 2, "type": "pq", "p": 0}], "branches": []})") == ValidationCode::Disconnected);
}

TEST_CASE("two swing buses are reported by name") {
    try {
        parse_case(R"({"base_mva": 100, "buses": [{"id": 1, "type": "swing", "v": [1, 0]},
            {"id": 2, "type": "swing", "v": [1, 0]}], "branches": [{"from": 1, "to": 2, "r": 0, "x": 1}]})");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.code() == ValidationCode::MultipleSwing);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("multiple swing buses"));
    }
}

TEST_CASE("case documents round-trip") {
    const auto net = parse_case(kTwoBus);
    const auto again = parse_case(write_case(net));
    CHECK(again.size() == net.size());
    CHECK(again.bus(1).p == net.bus(1).p);
    CHECK(again.branches()[0].x == net.branches()[0].x);
}

TEST_CASE("converged report") {
    const auto report = solve(oracle::twobus_network({0.5, 0.4}));
    const auto text = write_report(report);
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("\"status\": \"converged\""));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("\"va_deg\""));
    CHECK(write_report(report) == text);
}

TEST_CASE("infeasible report carries a diagnostic block") {
    const auto report = solve(oracle::twobus_network({-0.3, 0.0}));
    const auto doc = Json::parse(write_report(report));
    CHECK(doc["status"] == "no_solution");
    CHECK(doc["diagnostics"]["collapse_estimate"].is_number());
    CHECK_FALSE(doc["diagnostics"]["pole_estimates"].empty());
    CHECK_FALSE(doc["diagnostics"]["note"].get<std::string>().empty());
}

TEST_CASE("reports round-trip bit-exactly") {
    for (const auto& net : {oracle::twobus_network({0.5, 0.4}), oracle::twobus_network({-0.3, 0.0}),
                            oracle::twobus_pv_network(0.2, 1.0, 1.0)}) {
        const auto report = solve(net);
        const auto back = parse_report(write_report(report));
        CHECK(back.status == report.status);
        CHECK(back.order_used == report.order_used);
        CHECK(same_bits(back.mismatch_norm, report.mismatch_norm));
        CHECK(same_bits(back.setpoint_error, report.setpoint_error));
        REQUIRE(back.v.size() == report.v.size());
        for (std::size_t i = 0; i < report.v.size(); ++i) {
            CHECK(same_bits(back.v[i].real(), report.v[i].real()));
            CHECK(same_bits(back.v[i].imag(), report.v[i].imag()));
        }
        REQUIRE(back.q_pv.size() == report.q_pv.size());
        for (std::size_t k = 0; k < report.q_pv.size(); ++k) CHECK(same_bits(back.q_pv[k], report.q_pv[k]));
        CHECK(back.collapse_estimate.has_value() == report.collapse_estimate.has_value());
        if (report.collapse_estimate) CHECK(same_bits(*back.collapse_estimate, *report.collapse_estimate));
        REQUIRE(back.pole_estimates.size() == report.pole_estimates.size());
        for (std::size_t k = 0; k < report.pole_estimates.size(); ++k) {
            CHECK(same_bits(back.pole_estimates[k].real(), report.pole_estimates[k].real()));
        }
        REQUIRE(back.diagnostics.size() == report.diagnostics.size());
        for (std::size_t k = 0; k < report.diagnostics.size(); ++k) {
            CHECK(same_bits(back.diagnostics[k].spread, report.diagnostics[k].spread));
            CHECK(same_bits(back.diagnostics[k].final_value.real(), report.diagnostics[k].final_value.real()));
        }
        CHECK(write_report(back) == write_report(report));
    }
}

TEST_CASE("non-finite numbers survive the round trip") {
    SolveReport r;
    r.bus_ids = {1};
    r.v = {Complex{std::numeric_limits<double>::quiet_NaN(), -std::numeric_limits<double>::infinity()}};
    r.mismatch_norm = std::numeric_limits<double>::infinity();
    const auto back = parse_report(write_report(r));
    CHECK(std::isnan(back.v[0].real()));
    CHECK(back.v[0].imag() == -std::numeric_limits<double>::infinity());
    CHECK(back.mismatch_norm == std::numeric_limits<double>::infinity());
}

TEST_CASE("series dump lists coefficients per bus") {
    const auto net = oracle::twobus_network({0.5, 0.4});
    const auto outcome = solve_detailed(net);
    const auto doc = Json::parse(write_series_dump(outcome.germ));
    REQUIRE(doc.size() == 2);
    CHECK(doc[1].size() == static_cast<std::size_t>(outcome.germ.order) + 1);
    CHECK(doc[1][0][0].get<double>() == 1.0);
    CHECK(doc[1][1][0].get<double>() == Catch::Approx(0.5));
    CHECK(doc[1][1][1].get<double>() == Catch::Approx(0.4));

    const auto pade = Json::parse(write_pade_dump(outcome.germ, net, 1.0, 1e-10));
    REQUIRE(pade.size() == 1);
    CHECK(pade[0]["status"] == "converged");
}
