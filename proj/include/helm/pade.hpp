#pragma once

// Near-diagonal Padé continuation of a power series.
//
// Point values come from Wynn's epsilon algorithm on the partial sums at s:
//   eps_{-1}^{(n)} = 0, eps_0^{(n)} = S_n,
//   eps_{k+1}^{(n)} = eps_{k-1}^{(n+1)} + 1 / (eps_k^{(n+1)} - eps_k^{(n)}),
// where eps_{2k}^{(n)} is the [n+k/k] approximant. The recursion breaks down
// on block-structured tables (e.g. an even function plus a linear term), so
// when it does not settle the staircase is rebuilt from explicit Toeplitz
// solves. Pole locations always come from the Toeplitz [M/M] denominator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "helm/error.hpp"
#include "helm/network.hpp"

namespace helm {

enum class PadeStatus { Converged, NotConverged };

inline const char* to_string(PadeStatus status) {
    return status == PadeStatus::Converged ? "converged" : "not_converged";
}

struct PadeResult {
    /// [k/k] values, k = 0.. floor(N/2); entry k uses 2k+1 coefficients.
    ComplexVector values;
    /// Near-diagonal staircase [0/0], [1/0], [1/1], [2/1], ... ; entry m uses m+1 coefficients.
    ComplexVector staircase;
    PadeStatus status = PadeStatus::NotConverged;
    Complex final_value{};
    /// First staircase index from which the stopping rule holds through the end, or -1.
    int converged_from = -1;
    /// Denominator roots, filled in by callers that ask for them.
    ComplexVector pole_estimates;
    /// True when the staircase came from Toeplitz solves rather than the epsilon table.
    bool toeplitz = false;

    bool converged() const noexcept { return status == PadeStatus::Converged; }
};

namespace pade_detail {

inline constexpr double kAbsoluteGuard = 1e-290;
inline constexpr double kRelativeGuard = 64.0 * std::numeric_limits<double>::epsilon();
// Number of consecutive staircase steps that must agree.
inline constexpr int kAgreeingSteps = 3;

struct Entry {
    Complex value{};
    bool infinite = false;
};

inline bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Stopping rule at staircase index j: the last kAgreeingSteps + 1 values
// agree pairwise within tol * max(1, |v_j|).
inline bool agrees_at(const ComplexVector& v, std::size_t j, double tol) {
    if (j < static_cast<std::size_t>(kAgreeingSteps)) return false;
    const double bound = tol * std::max(1.0, std::abs(v[j]));
    for (std::size_t a = j - kAgreeingSteps; a <= j; ++a) {
        if (!finite(v[a])) return false;
        for (std::size_t b = a + 1; b <= j; ++b) {
            if (!(std::abs(v[a] - v[b]) < bound)) return false;
        }
    }
    return true;
}

inline void apply_stopping_rule(PadeResult& result, double tol) {
    const std::size_t N = result.staircase.size() - 1;
    result.values.clear();
    for (std::size_t k = 0; 2 * k <= N; ++k) result.values.push_back(result.staircase[2 * k]);
    result.converged_from = -1;
    for (std::size_t j = N + 1; j-- > 0;) {
        if (!agrees_at(result.staircase, j, tol)) break;
        result.converged_from = static_cast<int>(j);
    }
    result.final_value = result.staircase[N];
    result.status = result.converged_from >= 0 ? PadeStatus::Converged : PadeStatus::NotConverged;
}

inline PadeResult wynn(std::span<const Complex> coeffs, Complex s, double tol) {
    const std::size_t count = coeffs.size();
    const std::size_t N = count - 1;
    PadeResult result;

    if (std::all_of(coeffs.begin(), coeffs.end(), [](Complex c) { return c == Complex{}; })) {
        result.values.assign(N / 2 + 1, Complex{});
        result.staircase.assign(count, Complex{});
        result.status = PadeStatus::Converged;
        result.converged_from = 0;
        return result;
    }

    std::vector<Entry> previous(count + 1);  // eps_{-1}
    std::vector<Entry> current(count);       // eps_0 = partial sums
    {
        Complex power{1.0, 0.0}, sum{};
        for (std::size_t n = 0; n < count; ++n) {
            sum += coeffs[n] * power;
            power *= s;
            current[n].value = sum;
        }
    }

    result.staircase.assign(count, Complex{});
    auto record = [&](std::size_t column, const std::vector<Entry>& entries) {
        // Column 2k contributes staircase indices 2k (n = 0) and 2k+1 (n = 1).
        for (std::size_t n = 0; n < 2; ++n) {
            const std::size_t m = column + n;
            if (m > N || n >= entries.size()) continue;
            const auto& e = entries[n];
            result.staircase[m] = e.infinite ? Complex{std::numeric_limits<double>::infinity(), 0.0} : e.value;
        }
    };
    record(0, current);

    for (std::size_t k = 0; k + 1 < count; ++k) {
        std::vector<Entry> next(current.size() - 1);
        for (std::size_t i = 0; i < next.size(); ++i) {
            const Entry& a = current[i];
            const Entry& b = current[i + 1];
            const Entry& west = previous[i + 1];
            if (a.infinite || b.infinite) {
                // 1/(inf - x) = 0; both infinite is a breakdown and inherits west.
                next[i] = west;
                continue;
            }
            const Complex d = b.value - a.value;
            const double mag = std::abs(d);
            if (mag < kAbsoluteGuard ||
                mag <= kRelativeGuard * std::max(std::abs(a.value), std::abs(b.value))) {
                next[i].infinite = true;
                continue;
            }
            if (west.infinite) {
                next[i].infinite = true;
                continue;
            }
            next[i].value = west.value + 1.0 / d;
        }
        previous = std::move(current);
        current = std::move(next);
        if ((k + 1) % 2 == 0) record(k + 1, current);
    }

    apply_stopping_rule(result, tol);
    return result;
}

}  // namespace pade_detail

struct RationalCoefficients {
    ComplexVector numerator;    // a_0 .. a_L
    ComplexVector denominator;  // b_0 = 1, b_1 .. b_M

    Complex evaluate(Complex s) const {
        Complex num{}, den{};
        for (std::size_t i = numerator.size(); i-- > 0;) num = num * s + numerator[i];
        for (std::size_t i = denominator.size(); i-- > 0;) den = den * s + denominator[i];
        return num / den;
    }
};

namespace pade_detail {

struct ScaledRational {
    RationalCoefficients scaled;  // in the variable t = s / radius
    double radius = 1.0;
};

inline void trim(ComplexVector& c) {
    double peak = 0.0;
    for (const auto& z : c) peak = std::max(peak, std::abs(z));
    while (c.size() > 1 && std::abs(c.back()) <= kRelativeGuard * peak) c.pop_back();
}

inline ScaledRational scaled_rational(std::span<const Complex> coeffs, int L, int M) {
    if (L < 0 || M < 0) throw Error("Padé degrees must be non-negative");
    const auto used = static_cast<std::size_t>(L + M + 1);
    if (used > coeffs.size()) {
        throw Error("[" + std::to_string(L) + "/" + std::to_string(M) + "] needs " + std::to_string(used) +
                    " coefficients, got " + std::to_string(coeffs.size()));
    }

    // Rescale s = radius * t so the used coefficients are of comparable size.
    ScaledRational out;
    std::optional<std::size_t> first, last;
    for (std::size_t n = 0; n < used; ++n) {
        if (coeffs[n] != Complex{}) {
            if (!first) first = n;
            last = n;
        }
    }
    if (first && *last > *first) {
        const double ratio = std::abs(coeffs[*first]) / std::abs(coeffs[*last]);
        out.radius = std::clamp(std::pow(ratio, 1.0 / static_cast<double>(*last - *first)), 1e-6, 1e6);
    }
    ComplexVector c(used);
    double power = 1.0;
    for (std::size_t n = 0; n < used; ++n) {
        c[n] = coeffs[n] * power;
        power *= out.radius;
    }

    ComplexVector b(static_cast<std::size_t>(M) + 1, Complex{});
    b[0] = 1.0;
    if (M > 0) {
        Eigen::MatrixXcd toeplitz(M, M);
        Eigen::VectorXcd rhs(M);
        for (int i = 1; i <= M; ++i) {
            for (int j = 1; j <= M; ++j) {
                const int idx = L + i - j;
                toeplitz(i - 1, j - 1) = idx >= 0 ? c[static_cast<std::size_t>(idx)] : Complex{};
            }
            rhs(i - 1) = -c[static_cast<std::size_t>(L + i)];
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod;
        cod.setThreshold(static_cast<double>(M) * std::numeric_limits<double>::epsilon());
        cod.compute(toeplitz);
        const Eigen::VectorXcd solution = cod.solve(rhs);
        const double residual = (toeplitz * solution - rhs).norm();
        const double scale = toeplitz.norm() * solution.norm() + rhs.norm();
        if (!solution.allFinite() || residual > 1e-8 * std::max(scale, 1e-300)) {
            throw DegeneratePadeError("degenerate Padé table: [" + std::to_string(L) + "/" + std::to_string(M) +
                                      "] accuracy conditions have no solution");
        }
        for (int j = 1; j <= M; ++j) b[static_cast<std::size_t>(j)] = solution(j - 1);
    }

    ComplexVector a(static_cast<std::size_t>(L) + 1, Complex{});
    for (int i = 0; i <= L; ++i) {
        Complex sum{};
        for (int j = 0; j <= std::min(i, M); ++j) sum += b[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(i - j)];
        a[static_cast<std::size_t>(i)] = sum;
    }
    trim(a);
    trim(b);
    out.scaled = {std::move(a), std::move(b)};
    return out;
}

inline ComplexVector polynomial_roots(const ComplexVector& c) {
    const std::size_t degree = c.size() - 1;
    if (degree == 0) return {};
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(degree), static_cast<Eigen::Index>(degree));
    for (std::size_t i = 1; i < degree; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    for (std::size_t i = 0; i < degree; ++i) {
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(degree - 1)) = -c[i] / c[degree];
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw Error("polynomial root finding did not converge");
    ComplexVector roots(solver.eigenvalues().begin(), solver.eigenvalues().end());
    return roots;
}

// Staircase values from one Toeplitz solve per entry. Degenerate entries
// become infinite and so never satisfy the stopping rule.
inline PadeResult toeplitz_staircase(std::span<const Complex> coeffs, Complex s, double tol) {
    PadeResult result;
    result.toeplitz = true;
    result.staircase.assign(coeffs.size(), Complex{std::numeric_limits<double>::infinity(), 0.0});
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
        const int M = static_cast<int>(m / 2), L = static_cast<int>(m) - M;
        try {
            const auto r = scaled_rational(coeffs.first(m + 1), L, M);
            const Complex v = r.scaled.evaluate(s / r.radius);
            if (finite(v)) result.staircase[m] = v;
        } catch (const DegeneratePadeError&) {
        }
    }
    apply_stopping_rule(result, tol);
    return result;
}

}  // namespace pade_detail

/// Evaluate the near-diagonal Padé sequence of the series at s.
inline PadeResult eval_near_diagonal(std::span<const Complex> coeffs, Complex s, double tol) {
    if (coeffs.size() < 3) throw Error("Padé evaluation needs at least 3 coefficients");
    if (!(tol > 0.0)) throw Error("Padé tolerance must be positive");
    auto result = pade_detail::wynn(coeffs, s, tol);
    if (result.converged()) return result;
    auto fallback = pade_detail::toeplitz_staircase(coeffs, s, tol);
    return fallback.converged() ? fallback : result;
}

/// Coefficients of the [L/M] approximant, normalised to b_0 = 1.
/// Trailing negligible coefficients are dropped. Rank-deficient but
/// consistent systems take the minimum-norm denominator.
inline RationalCoefficients rational_coefficients(std::span<const Complex> coeffs, int L, int M) {
    auto scaled = pade_detail::scaled_rational(coeffs, L, M);
    auto& r = scaled.scaled;
    double factor = 1.0;
    for (auto& a : r.numerator) {
        a /= factor;
        factor *= scaled.radius;
    }
    factor = 1.0;
    for (auto& b : r.denominator) {
        b /= factor;
        factor *= scaled.radius;
    }
    return r;
}

/// Roots of the [M/M] denominator sorted by modulus. The nearest one
/// approximates the nearest singularity of the underlying function.
inline ComplexVector estimate_branch_points(std::span<const Complex> coeffs, int M) {
    const auto scaled = pade_detail::scaled_rational(coeffs, M, M);
    auto roots = pade_detail::polynomial_roots(scaled.scaled.denominator);
    for (auto& z : roots) z *= scaled.radius;
    std::stable_sort(roots.begin(), roots.end(), [](Complex x, Complex y) { return std::abs(x) < std::abs(y); });
    return roots;
}

}  // namespace helm
