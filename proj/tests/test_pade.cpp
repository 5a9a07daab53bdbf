#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helm/oracle.hpp"
#include "helm/pade.hpp"
#include "helm/series.hpp"

using namespace helm;

namespace {

ComplexVector twobus_series(Complex sigma, int order) {
    const auto net = oracle::twobus_network(sigma);
    const auto model = build_admittance(net);
    auto germ = init_white_germ(net, model, EmbeddingKind::Canonical);
    extend_series(germ, net, model, order);
    return germ.v[1];
}

// Taylor coefficients of num/den by long division.
ComplexVector rational_series(const ComplexVector& num, const ComplexVector& den, std::size_t count) {
    ComplexVector c(count, Complex{});
    for (std::size_t n = 0; n < count; ++n) {
        Complex acc = n < num.size() ? num[n] : Complex{};
        for (std::size_t k = 1; k <= n && k < den.size(); ++k) acc -= den[k] * c[n - k];
        c[n] = acc / den[0];
    }
    return c;
}

}  // namespace

TEST_CASE("geometric series is summed exactly at the first diagonal step") {
    ComplexVector c(12);
    for (std::size_t n = 0; n < c.size(); ++n) c[n] = std::pow(0.5, static_cast<double>(n));
    const auto r = eval_near_diagonal(c, 1.0, 1e-10);
    CHECK(r.values[1] == Complex{2.0, 0.0});
    CHECK(r.converged());
    CHECK(r.final_value == Complex{2.0, 0.0});
}

TEST_CASE("all-zero coefficients converge to zero") {
    const ComplexVector c(5, Complex{});
    const auto r = eval_near_diagonal(c, 3.0, 1e-10);
    CHECK(r.converged());
    CHECK(r.final_value == Complex{});
}

TEST_CASE("preconditions are enforced") {
    CHECK_THROWS_AS(eval_near_diagonal(ComplexVector{1.0, 2.0}, 1.0, 1e-10), Error);
    CHECK_THROWS_AS(eval_near_diagonal(ComplexVector{1.0, 2.0, 3.0}, 1.0, 0.0), Error);
    CHECK_THROWS_AS(rational_coefficients(ComplexVector{1.0, 2.0}, 1, 1), Error);
}

TEST_CASE("continuation beyond the radius of convergence") {
    const Complex sigma{0.5, 0.4};
    const Complex exact = 0.5 + std::sqrt(0.59) + Complex{0.0, 0.4};
    CHECK(std::abs(exact - Complex{1.268115, 0.4}) < 1e-6);

    const auto c = twobus_series(sigma, 60);
    const auto r = eval_near_diagonal(c, 1.0, 1e-10);
    CHECK(r.converged());
    CHECK(std::abs(r.final_value - exact) < 1e-8);

    Complex partial{};
    double at10 = 0.0;
    for (std::size_t n = 0; n <= 60; ++n) {
        partial += c[n];
        if (n == 10) at10 = std::abs(partial);
    }
    CHECK(std::abs(partial) > 1e6 * at10);
}

TEST_CASE("the stopping rule stays silent on infeasible two-bus series") {
    for (Complex sigma : {Complex{-0.3, 0.0}, Complex{-0.5, 0.0}, Complex{0.0, 0.6}, Complex{-0.2, -0.3}}) {
        const auto c = twobus_series(sigma, 60);
        for (std::size_t count : {21u, 41u, 61u}) {
            const auto r = eval_near_diagonal(std::span<const Complex>(c).first(count), 1.0, 1e-10);
            INFO("sigma " << sigma << " coefficients " << count);
            CHECK_FALSE(r.converged());
        }
    }
}

TEST_CASE("block-structured tables fall back to Toeplitz solves") {
    // sigma_R = 0 makes U - j s sigma_I even in s, which stalls the epsilon table.
    const Complex sigma{0.0, 0.6};
    const auto c = twobus_series(sigma, 60);
    for (double s : {0.5, 0.7}) {
        const auto r = eval_near_diagonal(c, s, 1e-10);
        REQUIRE(r.converged());
        CHECK(r.toeplitz);
        CHECK(std::abs(r.final_value - *oracle::twobus_closed_form({sigma}, s)) < 1e-10);
    }
    // Generic series stay on the epsilon table.
    CHECK_FALSE(eval_near_diagonal(twobus_series({0.5, 0.4}, 40), 1.0, 1e-10).toeplitz);
}

TEST_CASE("diagonal values agree with direct summation inside the disc") {
    for (Complex sigma : {Complex{0.5, 0.4}, Complex{-0.2, 0.0}, Complex{0.3, -0.5}}) {
        const auto c = twobus_series(sigma, 40);
        const Complex direct = fps::evaluate(std::span<const Complex>(c), 0.2);
        const auto r = eval_near_diagonal(c, 0.2, 1e-12);
        CHECK(std::abs(r.final_value - direct) < 1e-10);
        const auto u = oracle::twobus_closed_form({sigma}, 0.2);
        CHECK(std::abs(r.final_value - *u) < 1e-10);
    }
}

TEST_CASE("rational coefficients of simple series") {
    const ComplexVector geometric{1.0, 1.0, 1.0};
    auto r = rational_coefficients(geometric, 1, 1);
    REQUIRE(r.denominator.size() == 2);
    CHECK(std::abs(r.denominator[1] + 1.0) < 1e-15);
    REQUIRE(r.numerator.size() == 1);
    CHECK(std::abs(r.numerator[0] - 1.0) < 1e-15);

    r = rational_coefficients(ComplexVector{1.0, 1.0, 0.5}, 1, 1);
    REQUIRE(r.numerator.size() == 2);
    CHECK(std::abs(r.numerator[0] - 1.0) < 1e-15);
    CHECK(std::abs(r.numerator[1] - 0.5) < 1e-15);
    CHECK(std::abs(r.denominator[1] + 0.5) < 1e-15);

    r = rational_coefficients(ComplexVector{2.5, 0.0, 0.0, 0.0, 0.0}, 2, 2);
    CHECK(r.denominator.size() == 1);
    REQUIRE(r.numerator.size() == 1);
    CHECK(std::abs(r.numerator[0] - 2.5) < 1e-15);
}

TEST_CASE("inconsistent accuracy conditions are a degenerate table") {
    CHECK_THROWS_AS(rational_coefficients(ComplexVector{1.0, 0.0, 1.0}, 1, 1), DegeneratePadeError);
}

TEST_CASE("rational functions are reproduced exactly") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t L = 1 + static_cast<std::size_t>(trial % 3);
        const std::size_t M = 1 + static_cast<std::size_t>((trial / 3) % 3);
        ComplexVector num(L + 1), den(M + 1);
        for (auto& z : num) z = {u(rng), u(rng)};
        den[0] = 1.0;
        for (std::size_t k = 1; k <= M; ++k) den[k] = Complex{u(rng), u(rng)} * 0.5;
        const auto c = rational_series(num, den, L + M + 1);
        const auto r = rational_coefficients(c, static_cast<int>(L), static_cast<int>(M));
        for (Complex s : {Complex{0.3, 0.1}, Complex{-0.7, 0.4}, Complex{1.5, -0.2}}) {
            Complex n{}, d{};
            for (std::size_t i = num.size(); i-- > 0;) n = n * s + num[i];
            for (std::size_t i = den.size(); i-- > 0;) d = d * s + den[i];
            CHECK(std::abs(r.evaluate(s) - n / d) <= 1e-10 * std::max(1.0, std::abs(n / d)));
        }
    }
}

TEST_CASE("simple pole is located exactly") {
    ComplexVector c(9);
    for (std::size_t n = 0; n < c.size(); ++n) c[n] = std::pow(2.0, static_cast<double>(n));
    const auto roots = estimate_branch_points(c, 1);
    REQUIRE(roots.size() == 1);
    CHECK(std::abs(roots[0] - 0.5) < 1e-14);
}

TEST_CASE("branch point estimates for two-bus series") {
    const auto c = twobus_series({0.5, 0.4}, 40);
    auto roots = estimate_branch_points(c, 20);
    REQUIRE_FALSE(roots.empty());
    const auto bp = oracle::twobus_branch_points({{0.5, 0.4}});
    CHECK(std::abs(roots[0] - bp.s_minus) < 1e-2);

    const auto real_case = twobus_series({-0.2, 0.0}, 60);
    roots = estimate_branch_points(real_case, 30);
    REQUIRE_FALSE(roots.empty());
    CHECK(std::abs(roots[0] - 1.25) < 1e-2);
}
