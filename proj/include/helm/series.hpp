#pragma once

// White-germ power series of the embedded power-flow equations.
//
// Both supported embeddings share the form, for every non-swing bus i,
//
//   sum_k A_ik V_k(s) = -s D_i V_i(s) + s conj(S_i) W_i(s)              (PQ)
//   sum_k A_ik V_k(s) = -s D_i V_i(s) + (s P_i - j Q_i(s)) W_i(s)      (PV)
//   V_i(s) Vhat_i(s)  = K_i(s)                                        (PV)
//
// with W_i = 1 / Vhat_i and Vhat_i[n] = conj(V_i[n]) stored implicitly.
//   Minimal:   A = Y,    D = 0,    V_sw(s) = v_sw
//   Canonical: A = Y_tr, D = Y_sh, V_sw(s) = 1 + s (v_sw - 1)
// K_i(s) = |V_i[0]|^2 + s (vsp_i^2 - |V_i[0]|^2), which is 1 + s (vsp^2 - 1)
// for the canonical embedding.
//
// Matching powers of s gives one linear system per order whose coefficient
// matrix does not depend on the order; it is factored once per germ.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helm/error.hpp"
#include "helm/linsolve.hpp"
#include "helm/network.hpp"

namespace helm {

enum class EmbeddingKind { Minimal, Canonical };

inline const char* to_string(EmbeddingKind kind) {
    return kind == EmbeddingKind::Minimal ? "minimal" : "canonical";
}

/// Formal power series helpers over coefficient arrays (index = power of s).
namespace fps {

/// Coefficient n of the Cauchy product a * b.
template <typename A, typename B>
auto product_term(std::span<const A> a, std::span<const B> b, std::size_t n) {
    decltype(A{} * B{}) sum{};
    for (std::size_t m = 0; m <= n; ++m) sum += a[m] * b[n - m];
    return sum;
}

/// Coefficients 0..order of 1/a. Requires a[0] != 0.
inline ComplexVector reciprocal(std::span<const Complex> a, std::size_t order) {
    if (a.empty() || a[0] == Complex{}) throw SeriesError("reciprocal of a series with zero constant term");
    ComplexVector r(order + 1, Complex{});
    r[0] = 1.0 / a[0];
    for (std::size_t n = 1; n <= order; ++n) {
        Complex sum{};
        for (std::size_t m = 1; m <= n && m < a.size(); ++m) sum += a[m] * r[n - m];
        r[n] = -r[0] * sum;
    }
    return r;
}

/// Horner evaluation of a truncated series.
template <typename T, typename S>
auto evaluate(std::span<const T> c, S s) {
    decltype(T{} * S{}) acc{};
    for (std::size_t n = c.size(); n-- > 0;) acc = acc * s + c[n];
    return acc;
}

}  // namespace fps

namespace detail {

// Order >= 1 coefficient system. Complex form for PQ-only networks; real
// rectangular form (Re V, Im V per non-swing bus, then one Q per PV bus)
// when PV buses are present.
struct OrderSystem {
    std::vector<int> slot;  // bus index -> position among non-swing buses, -1 for swing
    std::optional<linsolve::Factorization<Complex>> complex_lu;
    std::optional<linsolve::Factorization<double>> real_lu;
    std::size_t non_swing = 0;
};

}  // namespace detail

/// Power-series coefficients of the white branch.
struct GermSeries {
    EmbeddingKind embedding = EmbeddingKind::Canonical;
    int order = -1;
    std::vector<ComplexVector> v;             // [bus][n]
    std::vector<std::vector<double>> q;       // [pv position][n]
    std::vector<ComplexVector> w;             // [bus][n], series of 1/Vhat
    std::shared_ptr<const detail::OrderSystem> system;

    std::size_t bus_count() const noexcept { return v.size(); }
    std::span<const Complex> voltage(std::size_t bus) const { return v.at(bus); }
    std::span<const double> reactive(std::size_t pv_position) const { return q.at(pv_position); }

    /// Reactive coefficients promoted to complex (for Padé evaluation).
    ComplexVector reactive_complex(std::size_t pv_position) const {
        const auto& src = q.at(pv_position);
        return ComplexVector(src.begin(), src.end());
    }
};

namespace detail {

struct EmbeddingTerms {
    const SparseComplexMatrix* a = nullptr;
    ComplexVector d;
};

inline EmbeddingTerms embedding_terms(const AdmittanceModel& model, EmbeddingKind kind) {
    EmbeddingTerms t;
    if (kind == EmbeddingKind::Minimal) {
        t.a = &model.y_full;
        t.d.assign(model.size(), Complex{});
    } else {
        t.a = &model.y_tr;
        t.d = model.y_sh;
    }
    return t;
}

inline Complex swing_coefficient(const Network& network, EmbeddingKind kind, int n) {
    const Complex vsw = network.bus(network.swing_index()).vswing;
    if (kind == EmbeddingKind::Minimal) return n == 0 ? vsw : Complex{};
    if (n == 0) return {1.0, 0.0};
    if (n == 1) return vsw - 1.0;
    return {};
}

inline double setpoint_coefficient(const BusSpec& bus, Complex v0, int n) {
    const double base = std::norm(v0);
    if (n == 0) return base;
    if (n == 1) return bus.vsp * bus.vsp - base;
    return 0.0;
}

inline std::vector<int> non_swing_slots(const Network& network) {
    std::vector<int> slot(network.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < network.size(); ++i) {
        if (i != network.swing_index()) slot[i] = next++;
    }
    return slot;
}

inline SparseComplexMatrix reduced_complex_matrix(const SparseComplexMatrix& a, const std::vector<int>& slot) {
    const auto m = static_cast<int>(std::count_if(slot.begin(), slot.end(), [](int s) { return s >= 0; }));
    std::vector<Eigen::Triplet<Complex, int>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int col = 0; col < a.outerSize(); ++col) {
        const int c = slot[static_cast<std::size_t>(col)];
        if (c < 0) continue;
        for (SparseComplexMatrix::InnerIterator it(a, col); it; ++it) {
            const int r = slot[static_cast<std::size_t>(it.row())];
            if (r >= 0) triplets.emplace_back(r, c, it.value());
        }
    }
    SparseComplexMatrix reduced(m, m);
    reduced.setFromTriplets(triplets.begin(), triplets.end());
    reduced.makeCompressed();
    return reduced;
}

inline linsolve::SparseMatrix<double> doubled_real_matrix(const Network& network, const SparseComplexMatrix& a,
                                                          const std::vector<int>& slot,
                                                          const std::vector<ComplexVector>& v) {
    const auto m = static_cast<int>(network.size() - 1);
    const int dim = 2 * m + static_cast<int>(network.pv_count());
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * a.nonZeros()) + 3 * network.pv_count());

    for (int col = 0; col < a.outerSize(); ++col) {
        const int c = slot[static_cast<std::size_t>(col)];
        if (c < 0) continue;
        for (SparseComplexMatrix::InnerIterator it(a, col); it; ++it) {
            const int r = slot[static_cast<std::size_t>(it.row())];
            if (r < 0) continue;
            const double g = it.value().real();
            const double b = it.value().imag();
            triplets.emplace_back(2 * r, 2 * c, g);
            triplets.emplace_back(2 * r, 2 * c + 1, -b);
            triplets.emplace_back(2 * r + 1, 2 * c, b);
            triplets.emplace_back(2 * r + 1, 2 * c + 1, g);
        }
    }
    for (std::size_t k = 0; k < network.pv_count(); ++k) {
        const auto bus = network.pv_indices()[k];
        const int r = slot[bus];
        const int qcol = 2 * m + static_cast<int>(k);
        const Complex v0 = v[bus][0];
        const Complex w0 = 1.0 / std::conj(v0);
        // j Q W0 contributes (-Im W0, Re W0) to the (real, imaginary) rows.
        triplets.emplace_back(2 * r, qcol, -w0.imag());
        triplets.emplace_back(2 * r + 1, qcol, w0.real());
        // 2 Re(V[N] conj(V0)) in the constraint row.
        triplets.emplace_back(qcol, 2 * r, 2.0 * v0.real());
        triplets.emplace_back(qcol, 2 * r + 1, 2.0 * v0.imag());
    }
    linsolve::SparseMatrix<double> out(dim, dim);
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

inline void append_reciprocal_term(GermSeries& germ, std::size_t bus, std::size_t n) {
    const auto& v = germ.v[bus];
    auto& w = germ.w[bus];
    if (n == 0) {
        w.assign(1, 1.0 / std::conj(v[0]));
        return;
    }
    Complex sum{};
    for (std::size_t m = 1; m <= n; ++m) sum += std::conj(v[m]) * w[n - m];
    w.push_back(-w[0] * sum);
}

}  // namespace detail

/// Order-0 germ: the zero-injection state of the chosen embedding.
inline GermSeries init_white_germ(const Network& network, const AdmittanceModel& model, EmbeddingKind embedding) {
    const auto n = network.size();
    if (model.size() != n) throw SeriesError("admittance model does not match network");

    GermSeries germ;
    germ.embedding = embedding;
    germ.order = 0;
    germ.v.assign(n, ComplexVector{});
    germ.w.assign(n, ComplexVector{});
    germ.q.assign(network.pv_count(), std::vector<double>{0.0});

    const auto sw = network.swing_index();
    if (embedding == EmbeddingKind::Canonical) {
        for (std::size_t i = 0; i < n; ++i) germ.v[i].assign(1, Complex{1.0, 0.0});
    } else {
        auto system = std::make_shared<detail::OrderSystem>();
        system->slot = detail::non_swing_slots(network);
        system->non_swing = n - 1;
        const Complex vsw = network.bus(sw).vswing;
        germ.v[sw].assign(1, vsw);
        if (n > 1) {
            ComplexVector rhs(n - 1, Complex{});
            for (SparseComplexMatrix::InnerIterator it(model.y_full, static_cast<int>(sw)); it; ++it) {
                const int r = system->slot[static_cast<std::size_t>(it.row())];
                if (r >= 0) rhs[static_cast<std::size_t>(r)] -= it.value() * vsw;
            }
            auto lu = [&] {
                try {
                    return linsolve::factor(detail::reduced_complex_matrix(model.y_full, system->slot));
                } catch (const SingularMatrixError& e) {
                    throw SeriesError(std::string("white branch undefined: ") + e.what());
                }
            }();
            const auto v0 = lu.solve(rhs);
            for (std::size_t i = 0; i < n; ++i) {
                if (i != sw) germ.v[i].assign(1, v0[static_cast<std::size_t>(system->slot[i])]);
            }
            // PQ-only networks reuse this matrix at every higher order.
            if (!network.has_pv()) system->complex_lu = std::move(lu);
        }
        if (!network.has_pv()) germ.system = std::move(system);
    }

    const double scale = std::abs(germ.v[sw][0]);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(germ.v[i][0]) > 1e-12 * scale)) {
            throw SeriesError("white branch undefined: zero open-circuit voltage at bus " +
                              std::to_string(network.bus(i).id));
        }
        detail::append_reciprocal_term(germ, i, 0);
    }
    return germ;
}

/// Extend the germ with coefficients up to and including `target_order`.
inline void extend_series(GermSeries& germ, const Network& network, const AdmittanceModel& model, int target_order) {
    if (germ.order < 0) throw SeriesError("germ is not initialised");
    if (target_order <= germ.order) return;

    const auto n = network.size();
    const auto sw = network.swing_index();
    const auto terms = detail::embedding_terms(model, germ.embedding);
    const auto& a = *terms.a;

    if (!germ.system) {
        auto system = std::make_shared<detail::OrderSystem>();
        system->slot = detail::non_swing_slots(network);
        system->non_swing = n - 1;
        try {
            if (network.has_pv()) {
                system->real_lu = linsolve::factor(detail::doubled_real_matrix(network, a, system->slot, germ.v));
            } else if (n > 1) {
                system->complex_lu = linsolve::factor(detail::reduced_complex_matrix(a, system->slot));
            }
        } catch (const SingularMatrixError& e) {
            throw SeriesError(std::string("degenerate network, singular series matrix: ") + e.what());
        }
        germ.system = std::move(system);
    }
    const auto& system = *germ.system;
    const auto& slot = system.slot;
    const std::size_t m = system.non_swing;

    // Column of A for the swing bus, reused for every order.
    std::vector<std::pair<std::size_t, Complex>> swing_column;
    for (SparseComplexMatrix::InnerIterator it(a, static_cast<int>(sw)); it; ++it) {
        if (static_cast<std::size_t>(it.row()) != sw) swing_column.emplace_back(static_cast<std::size_t>(it.row()), it.value());
    }

    for (int order = germ.order + 1; order <= target_order; ++order) {
        const auto N = static_cast<std::size_t>(order);
        const Complex vsw = detail::swing_coefficient(network, germ.embedding, order);

        ComplexVector rhs(m, Complex{});
        for (std::size_t i = 0; i < n; ++i) {
            const int r = slot[i];
            if (r < 0) continue;
            const auto& bus = network.bus(i);
            const auto& vi = germ.v[i];
            const auto& wi = germ.w[i];
            Complex value = -terms.d[i] * vi[N - 1];
            if (bus.kind == BusKind::PV) {
                const auto& qi = germ.q[static_cast<std::size_t>(network.pv_position(i))];
                Complex reactive{};
                for (std::size_t k = 1; k < N; ++k) reactive += qi[k] * wi[N - k];
                value += bus.p * wi[N - 1] - kJ * reactive;
            } else {
                value += std::conj(bus.injection()) * wi[N - 1];
            }
            rhs[static_cast<std::size_t>(r)] = value;
        }
        if (vsw != Complex{}) {
            for (const auto& [row, y] : swing_column) {
                const int r = slot[row];
                if (r >= 0) rhs[static_cast<std::size_t>(r)] -= y * vsw;
            }
        }

        germ.v[sw].push_back(vsw);
        if (system.real_lu) {
            std::vector<double> real_rhs(2 * m + network.pv_count(), 0.0);
            for (std::size_t r = 0; r < m; ++r) {
                real_rhs[2 * r] = rhs[r].real();
                real_rhs[2 * r + 1] = rhs[r].imag();
            }
            for (std::size_t k = 0; k < network.pv_count(); ++k) {
                const auto i = network.pv_indices()[k];
                const auto& vi = germ.v[i];
                double convolution = 0.0;
                for (std::size_t j = 1; j < N; ++j) convolution += (vi[j] * std::conj(vi[N - j])).real();
                real_rhs[2 * m + k] = detail::setpoint_coefficient(network.bus(i), vi[0], order) - convolution;
            }
            const auto x = system.real_lu->solve(real_rhs);
            for (std::size_t i = 0; i < n; ++i) {
                const int r = slot[i];
                if (r >= 0) germ.v[i].emplace_back(x[2 * static_cast<std::size_t>(r)], x[2 * static_cast<std::size_t>(r) + 1]);
            }
            for (std::size_t k = 0; k < network.pv_count(); ++k) germ.q[k].push_back(x[2 * m + k]);
        } else {
            const auto x = m > 0 ? system.complex_lu->solve(rhs) : ComplexVector{};
            for (std::size_t i = 0; i < n; ++i) {
                const int r = slot[i];
                if (r >= 0) germ.v[i].push_back(x[static_cast<std::size_t>(r)]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) detail::append_reciprocal_term(germ, i, N);
        germ.order = order;
    }
}

/// Residual of the doubled embedded system using the truncated series at s.
///
/// Layout: first half for each non-swing bus (bus order), then the mirror
/// half in the same order, then one setpoint entry per PV bus. Each entry is
/// O(s^(order+1)). Sums are carried in long double.
inline ComplexVector embedded_residual(const GermSeries& germ, const Network& network, const AdmittanceModel& model,
                                       Complex s) {
    using LComplex = std::complex<long double>;
    const auto n = network.size();
    const auto sw = network.swing_index();
    const auto terms = detail::embedding_terms(model, germ.embedding);
    const auto& a = *terms.a;
    const LComplex ls{s.real(), s.imag()};
    const LComplex lj{0.0L, 1.0L};

    auto to_long = [](Complex z) { return LComplex{z.real(), z.imag()}; };

    std::vector<LComplex> value(n), mirror(n);
    for (std::size_t i = 0; i < n; ++i) {
        LComplex acc{}, acc_hat{};
        const auto& c = germ.v[i];
        for (std::size_t k = c.size(); k-- > 0;) {
            acc = acc * ls + to_long(c[k]);
            acc_hat = acc_hat * ls + to_long(std::conj(c[k]));
        }
        value[i] = acc;
        mirror[i] = acc_hat;
    }
    // The swing follows its embedding exactly.
    {
        const LComplex vsw0 = to_long(detail::swing_coefficient(network, germ.embedding, 0));
        const LComplex vsw1 = to_long(detail::swing_coefficient(network, germ.embedding, 1));
        value[sw] = vsw0 + ls * vsw1;
        mirror[sw] = std::conj(vsw0) + ls * std::conj(vsw1);
    }

    std::vector<LComplex> first(n), second(n);
    for (int col = 0; col < a.outerSize(); ++col) {
        for (SparseComplexMatrix::InnerIterator it(a, col); it; ++it) {
            const auto r = static_cast<std::size_t>(it.row());
            const LComplex y = to_long(it.value());
            first[r] += y * value[static_cast<std::size_t>(col)];
            second[r] += std::conj(y) * mirror[static_cast<std::size_t>(col)];
        }
    }

    ComplexVector out;
    out.reserve(2 * (n - 1) + network.pv_count());
    std::vector<LComplex> half2;
    half2.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == sw) continue;
        const auto& bus = network.bus(i);
        if (mirror[i] == LComplex{} || value[i] == LComplex{}) {
            throw SeriesError("truncated series vanishes at the evaluation point for bus " + std::to_string(bus.id));
        }
        const LComplex d = to_long(terms.d[i]);
        LComplex r1 = first[i] + ls * d * value[i];
        LComplex r2 = second[i] + ls * std::conj(d) * mirror[i];
        if (bus.kind == BusKind::PV) {
            const auto& qc = germ.q[static_cast<std::size_t>(network.pv_position(i))];
            LComplex qs{};
            for (std::size_t k = qc.size(); k-- > 0;) qs = qs * ls + static_cast<long double>(qc[k]);
            const long double p = bus.p;
            r1 -= (ls * p - lj * qs) / mirror[i];
            r2 -= (ls * p + lj * qs) / value[i];
        } else {
            const LComplex inj = to_long(bus.injection());
            r1 -= ls * std::conj(inj) / mirror[i];
            r2 -= ls * inj / value[i];
        }
        out.emplace_back(static_cast<double>(r1.real()), static_cast<double>(r1.imag()));
        half2.push_back(r2);
    }
    for (const auto& r2 : half2) out.emplace_back(static_cast<double>(r2.real()), static_cast<double>(r2.imag()));
    for (auto i : network.pv_indices()) {
        const auto& bus = network.bus(i);
        const Complex v0 = germ.v[i][0];
        const LComplex k = static_cast<long double>(detail::setpoint_coefficient(bus, v0, 0)) +
                           ls * static_cast<long double>(detail::setpoint_coefficient(bus, v0, 1));
        const LComplex r = value[i] * mirror[i] - k;
        out.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
    }
    return out;
}

/// Per-order relative residuals of the coefficient identities the germ must
/// satisfy. Entry n of each vector refers to the coefficient of s^n.
struct CoefficientChecks {
    std::vector<double> doubled_system;   // both halves; mirror half uses an independently computed 1/V
    std::vector<double> pv_constraint;    // sum_m V[m] conj(V[n-m]) against K[n]
    std::vector<double> reciprocal;       // sum_m conj(V[m]) W[n-m] against delta(n)

    static double worst(const std::vector<double>& values) {
        return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    }
};

inline CoefficientChecks check_coefficients(const GermSeries& germ, const Network& network,
                                            const AdmittanceModel& model) {
    const auto n = network.size();
    const auto sw = network.swing_index();
    const auto order = static_cast<std::size_t>(germ.order);
    const auto terms = detail::embedding_terms(model, germ.embedding);
    const auto& a = *terms.a;
    constexpr double tiny = 1e-300;

    std::vector<ComplexVector> inverse(n);
    for (std::size_t i = 0; i < n; ++i) inverse[i] = fps::reciprocal(germ.v[i], order);

    CoefficientChecks out;
    out.doubled_system.assign(order + 1, 0.0);
    out.pv_constraint.assign(order + 1, 0.0);
    out.reciprocal.assign(order + 1, 0.0);

    for (std::size_t N = 0; N <= order; ++N) {
        std::vector<Complex> lhs(n), lhs_hat(n);
        std::vector<double> scale(n, 0.0), scale_hat(n, 0.0);
        for (int col = 0; col < a.outerSize(); ++col) {
            const Complex vc = germ.v[static_cast<std::size_t>(col)][N];
            for (SparseComplexMatrix::InnerIterator it(a, col); it; ++it) {
                const auto r = static_cast<std::size_t>(it.row());
                lhs[r] += it.value() * vc;
                lhs_hat[r] += std::conj(it.value()) * std::conj(vc);
                scale[r] += std::abs(it.value()) * std::abs(vc);
            }
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == sw) continue;
            const auto& bus = network.bus(i);
            const auto& w = germ.w[i];
            const auto& rinv = inverse[i];
            Complex r1 = lhs[i], r2 = lhs_hat[i];
            double s1 = scale[i];
            if (N >= 1) {
                const Complex vprev = germ.v[i][N - 1];
                r1 += terms.d[i] * vprev;
                r2 += std::conj(terms.d[i]) * std::conj(vprev);
                s1 += std::abs(terms.d[i]) * std::abs(vprev);
                if (bus.kind == BusKind::PV) {
                    r1 -= bus.p * w[N - 1];
                    r2 -= bus.p * rinv[N - 1];
                    s1 += std::abs(bus.p) * std::abs(w[N - 1]);
                } else {
                    r1 -= std::conj(bus.injection()) * w[N - 1];
                    r2 -= bus.injection() * rinv[N - 1];
                    s1 += std::abs(bus.injection()) * std::abs(w[N - 1]);
                }
            }
            if (bus.kind == BusKind::PV) {
                const auto& qi = germ.q[static_cast<std::size_t>(network.pv_position(i))];
                for (std::size_t k = 0; k <= N; ++k) {
                    r1 += kJ * qi[k] * w[N - k];
                    r2 -= kJ * qi[k] * rinv[N - k];
                    s1 += std::abs(qi[k]) * std::abs(w[N - k]);
                }
            }
            const double denom = std::max(s1, tiny);
            worst = std::max({worst, std::abs(r1) / denom, std::abs(r2) / denom});

            Complex conv{};
            double conv_scale = 0.0;
            for (std::size_t k = 0; k <= N; ++k) {
                conv += std::conj(germ.v[i][k]) * w[N - k];
                conv_scale += std::abs(germ.v[i][k]) * std::abs(w[N - k]);
            }
            const double delta = N == 0 ? 1.0 : 0.0;
            out.reciprocal[N] = std::max(out.reciprocal[N], std::abs(conv - delta) / std::max(conv_scale, tiny));
        }
        out.doubled_system[N] = worst;

        for (auto i : network.pv_indices()) {
            const auto& vi = germ.v[i];
            Complex conv{};
            double conv_scale = 0.0;
            for (std::size_t k = 0; k <= N; ++k) {
                conv += vi[k] * std::conj(vi[N - k]);
                conv_scale += std::abs(vi[k]) * std::abs(vi[N - k]);
            }
            const double target = detail::setpoint_coefficient(network.bus(i), vi[0], static_cast<int>(N));
            const double denom = std::max({conv_scale, std::abs(target), tiny});
            out.pv_constraint[N] = std::max(out.pv_constraint[N], std::abs(conv - target) / denom);
        }
    }
    return out;
}

}  // namespace helm
