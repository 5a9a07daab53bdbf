#pragma once

// Full solve orchestration: germ, order-by-order extension, per-bus Padé at
// s = 1, mismatch gate and status classification. Also s-axis scans.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "helm/error.hpp"
#include "helm/network.hpp"
#include "helm/pade.hpp"
#include "helm/series.hpp"

namespace helm {

struct SolveOptions {
    EmbeddingKind embedding = EmbeddingKind::Canonical;
    int max_order = 60;
    double pade_tol = 1e-10;
    double mismatch_tol = 1e-8;
    int order_step = 5;

    void validate() const {
        if (max_order < 5) throw Error("max_order must be at least 5, got " + std::to_string(max_order));
        if (order_step < 1) throw Error("order_step must be at least 1, got " + std::to_string(order_step));
        if (!(pade_tol > 0.0)) throw Error("pade_tol must be positive");
        if (!(mismatch_tol > 0.0)) throw Error("mismatch_tol must be positive");
    }
};

enum class SolveStatus { Converged, NoSolution, OrderBudgetExhausted };

inline const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::NoSolution: return "no_solution";
        case SolveStatus::OrderBudgetExhausted: return "order_budget_exhausted";
    }
    return "unknown";
}

/// Padé outcome for one series (a bus voltage or a PV reactive injection).
struct SeriesDiagnostics {
    int bus_id = 0;
    bool reactive = false;
    PadeStatus status = PadeStatus::NotConverged;
    int converged_from = -1;
    Complex final_value{};
    /// Largest difference among the last four staircase values.
    double spread = std::numeric_limits<double>::infinity();
    ComplexVector pole_estimates;
};

struct SolveReport {
    SolveStatus status = SolveStatus::OrderBudgetExhausted;
    EmbeddingKind embedding = EmbeddingKind::Canonical;
    int order_used = 0;
    std::vector<int> bus_ids;
    ComplexVector v;
    std::vector<int> pv_ids;
    std::vector<double> q_pv;
    double mismatch_norm = std::numeric_limits<double>::infinity();
    /// max over PV buses of ||V_k| - vsp_k|; zero without PV buses.
    double setpoint_error = 0.0;
    std::vector<SeriesDiagnostics> diagnostics;
    /// Denominator roots of all series, nearest first. Filled when not converged.
    ComplexVector pole_estimates;
    /// Smallest real singularity found on (0, 1], when status is NoSolution.
    std::optional<double> collapse_estimate;
    std::string note;

    bool converged() const noexcept { return status == SolveStatus::Converged; }
};

struct SolveOutcome {
    SolveReport report;
    GermSeries germ;
};

namespace solver_detail {

// A denominator root counts as a singularity on the path when it lies this
// close to the real axis, relative to its modulus.
inline constexpr double kRealAxisTolerance = 0.05;
// Poles this close to a numerator zero are treated as spurious doublets.
inline constexpr double kDoubletTolerance = 1e-5;

inline double staircase_spread(const PadeResult& r) {
    const auto& st = r.staircase;
    if (st.size() < 4) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t a = st.size() - 4; a < st.size(); ++a) {
        for (std::size_t b = a + 1; b < st.size(); ++b) worst = std::max(worst, std::abs(st[a] - st[b]));
    }
    return std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
}

// Denominator roots of the [M/M] approximant with Froissart doublets removed.
inline ComplexVector genuine_poles(std::span<const Complex> coeffs, int M) {
    const auto scaled = pade_detail::scaled_rational(coeffs, M, M);
    auto poles = pade_detail::polynomial_roots(scaled.scaled.denominator);
    const auto zeros = pade_detail::polynomial_roots(scaled.scaled.numerator);
    ComplexVector out;
    for (auto p : poles) {
        const bool doublet = std::any_of(zeros.begin(), zeros.end(), [&](Complex z) {
            return std::abs(z - p) <= kDoubletTolerance * std::max(1.0, std::abs(p));
        });
        if (!doublet) out.push_back(p * scaled.radius);
    }
    std::stable_sort(out.begin(), out.end(), [](Complex x, Complex y) { return std::abs(x) < std::abs(y); });
    return out;
}

inline bool on_path(Complex pole) {
    return pole.real() > 0.0 && pole.real() <= 1.0 &&
           std::abs(pole.imag()) <= kRealAxisTolerance * std::max(1.0, std::abs(pole));
}

struct Evaluation {
    bool all_converged = true;
    ComplexVector v;
    std::vector<double> q;
    std::vector<SeriesDiagnostics> diagnostics;
};

// Per-bus Padé at s for every non-swing voltage and every PV reactive series.
inline Evaluation evaluate_at(const GermSeries& germ, const Network& network, Complex s, double tol) {
    Evaluation e;
    const auto n = network.size();
    const auto sw = network.swing_index();
    e.v.assign(n, Complex{});
    const Complex vsw0 = detail::swing_coefficient(network, germ.embedding, 0);
    const Complex vsw1 = detail::swing_coefficient(network, germ.embedding, 1);
    e.v[sw] = vsw0 + s * vsw1;

    for (std::size_t i = 0; i < n; ++i) {
        if (i == sw) continue;
        const auto r = eval_near_diagonal(germ.voltage(i), s, tol);
        SeriesDiagnostics d;
        d.bus_id = network.bus(i).id;
        d.status = r.status;
        d.converged_from = r.converged_from;
        d.final_value = r.final_value;
        d.spread = staircase_spread(r);
        e.all_converged = e.all_converged && r.converged();
        e.v[i] = r.final_value;
        e.diagnostics.push_back(std::move(d));
    }
    for (std::size_t k = 0; k < network.pv_count(); ++k) {
        const auto coeffs = germ.reactive_complex(k);
        const auto r = eval_near_diagonal(coeffs, s, tol);
        SeriesDiagnostics d;
        d.bus_id = network.bus(network.pv_indices()[k]).id;
        d.reactive = true;
        d.status = r.status;
        d.converged_from = r.converged_from;
        d.final_value = r.final_value;
        d.spread = staircase_spread(r);
        e.all_converged = e.all_converged && r.converged();
        e.q.push_back(r.final_value.real());
        e.diagnostics.push_back(std::move(d));
    }
    return e;
}

inline double setpoint_error(const Network& network, std::span<const Complex> v) {
    double worst = 0.0;
    for (auto i : network.pv_indices()) worst = std::max(worst, std::abs(std::abs(v[i]) - network.bus(i).vsp));
    return worst;
}

inline double gated_mismatch(const Network& network, const AdmittanceModel& model, std::span<const Complex> v,
                             std::span<const double> q) {
    for (const auto& z : v) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || z == Complex{}) {
            return std::numeric_limits<double>::infinity();
        }
    }
    for (double x : q) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    }
    return max_abs(mismatch(network, model, v, q));
}

inline void fill_identity(SolveReport& report, const Network& network) {
    for (const auto& bus : network.buses()) report.bus_ids.push_back(bus.id);
    for (auto i : network.pv_indices()) report.pv_ids.push_back(network.bus(i).id);
}

}  // namespace solver_detail

/// Solve and keep the germ (for series dumps and diagnostics).
inline SolveOutcome solve_detailed(const Network& network, const SolveOptions& options = {}) {
    options.validate();
    const auto model = build_admittance(network);

    SolveOutcome out;
    auto& report = out.report;
    report.embedding = options.embedding;
    solver_detail::fill_identity(report, network);

    out.germ = init_white_germ(network, model, options.embedding);
    auto& germ = out.germ;

    // The zero-injection state may already be the answer.
    {
        ComplexVector v0(network.size());
        for (std::size_t i = 0; i < network.size(); ++i) v0[i] = germ.v[i][0];
        v0[network.swing_index()] = network.bus(network.swing_index()).vswing;
        const std::vector<double> q0(network.pv_count(), 0.0);
        const double mm = solver_detail::gated_mismatch(network, model, v0, q0);
        const double sp = solver_detail::setpoint_error(network, v0);
        if (mm <= options.mismatch_tol && sp <= options.mismatch_tol) {
            report.status = SolveStatus::Converged;
            report.order_used = 0;
            report.v = std::move(v0);
            report.q_pv = q0;
            report.mismatch_norm = mm;
            report.setpoint_error = sp;
            return out;
        }
    }

    solver_detail::Evaluation last;
    int order = 0;
    while (order < options.max_order) {
        order = std::min(order + options.order_step, options.max_order);
        if (order < 2) continue;
        extend_series(germ, network, model, order);
        last = solver_detail::evaluate_at(germ, network, Complex{1.0, 0.0}, options.pade_tol);
        if (!last.all_converged) continue;
        const double mm = solver_detail::gated_mismatch(network, model, last.v, last.q);
        const double sp = solver_detail::setpoint_error(network, last.v);
        if (mm <= options.mismatch_tol && sp <= options.mismatch_tol) {
            report.status = SolveStatus::Converged;
            report.order_used = order;
            report.v = last.v;
            report.q_pv = last.q;
            report.mismatch_norm = mm;
            report.setpoint_error = sp;
            report.diagnostics = std::move(last.diagnostics);
            return out;
        }
    }

    // Budget exhausted: report the last values and look for a singularity
    // on the real segment (0, 1].
    report.order_used = germ.order;
    report.v = last.v;
    report.q_pv = last.q;
    report.mismatch_norm = solver_detail::gated_mismatch(network, model, last.v, last.q);
    report.setpoint_error = solver_detail::setpoint_error(network, last.v);
    report.diagnostics = std::move(last.diagnostics);

    const int M = germ.order / 2;
    auto collect = [&](std::span<const Complex> coeffs, SeriesDiagnostics& d) {
        if (M < 1) return;
        try {
            d.pole_estimates = solver_detail::genuine_poles(coeffs, M);
        } catch (const Error&) {
            return;  // degenerate table or failed root finding: no estimate
        }
        for (auto p : d.pole_estimates) {
            report.pole_estimates.push_back(p);
            if (solver_detail::on_path(p)) {
                report.collapse_estimate = std::min(report.collapse_estimate.value_or(p.real()), p.real());
            }
        }
    };
    for (auto& d : report.diagnostics) {
        const auto idx = network.index_of(d.bus_id);
        if (d.reactive) {
            const auto coeffs = germ.reactive_complex(static_cast<std::size_t>(network.pv_position(idx)));
            collect(coeffs, d);
        } else {
            collect(germ.voltage(idx), d);
        }
    }
    std::stable_sort(report.pole_estimates.begin(), report.pole_estimates.end(),
                     [](Complex x, Complex y) { return std::abs(x) < std::abs(y); });

    report.status = report.collapse_estimate ? SolveStatus::NoSolution : SolveStatus::OrderBudgetExhausted;
    report.note = report.collapse_estimate
                      ? "heuristic: Padé poles place a singularity on (0, 1] at the final order"
                      : "heuristic: no convergence within the order budget and no singularity located on (0, 1]";
    return out;
}

inline SolveReport solve(const Network& network, const SolveOptions& options = {}) {
    return solve_detailed(network, options).report;
}

/// Same orchestration; requires at least one PV bus.
inline SolveReport solve_pv(const Network& network, const SolveOptions& options = {}) {
    if (!network.has_pv()) throw Error("solve_pv needs at least one PV bus");
    return solve(network, options);
}

/// Residual of the embedded equations at s, using evaluated voltages and
/// reactive series values. Layout: non-swing buses, then PV setpoint entries.
inline ComplexVector embedded_mismatch(const GermSeries& germ, const Network& network, const AdmittanceModel& model,
                                       Complex s, std::span<const Complex> v, std::span<const double> q) {
    const auto terms = detail::embedding_terms(model, germ.embedding);
    const auto& a = *terms.a;
    const auto n = network.size();
    ComplexVector current(n, Complex{});
    for (int col = 0; col < a.outerSize(); ++col) {
        for (SparseComplexMatrix::InnerIterator it(a, col); it; ++it) {
            current[static_cast<std::size_t>(it.row())] += it.value() * v[static_cast<std::size_t>(col)];
        }
    }
    ComplexVector out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == network.swing_index()) continue;
        const auto& bus = network.bus(i);
        Complex source = s * std::conj(bus.injection());
        if (bus.kind == BusKind::PV) {
            source = s * bus.p - kJ * q[static_cast<std::size_t>(network.pv_position(i))];
        }
        out.push_back(current[i] + s * terms.d[i] * v[i] - source / std::conj(v[i]));
    }
    for (auto i : network.pv_indices()) {
        const auto& bus = network.bus(i);
        const Complex v0 = germ.v[i][0];
        const double k = detail::setpoint_coefficient(bus, v0, 0) + s.real() * detail::setpoint_coefficient(bus, v0, 1);
        out.emplace_back(std::norm(v[i]) - k, 0.0);
    }
    return out;
}

struct ScanPoint {
    double s = 0.0;
    bool converged = false;
    ComplexVector v;            // all buses; meaningful only when converged
    std::vector<double> q_pv;
    double residual = std::numeric_limits<double>::infinity();
};

struct ScanResult {
    std::vector<ScanPoint> points;
    /// Largest s of the leading run of converged points.
    std::optional<double> largest_reached;
    int order = 0;
};

/// Padé evaluation of the germ (built to max_order) along the real s-axis.
/// A point converges when every series meets the stopping rule and the
/// embedded equations hold there within mismatch_tol.
inline ScanResult scan(const Network& network, const SolveOptions& options, std::span<const double> s_values) {
    options.validate();
    for (std::size_t k = 0; k < s_values.size(); ++k) {
        const double s = s_values[k];
        if (!(s > 0.0 && s <= 1.0)) throw Error("scan points must lie in (0, 1], got " + std::to_string(s));
        if (k > 0 && !(s > s_values[k - 1])) throw Error("scan points must be strictly increasing");
    }
    const auto model = build_admittance(network);
    auto germ = init_white_germ(network, model, options.embedding);
    extend_series(germ, network, model, options.max_order);

    ScanResult result;
    result.order = germ.order;
    bool prefix = true;
    for (double s : s_values) {
        ScanPoint point;
        point.s = s;
        auto e = solver_detail::evaluate_at(germ, network, Complex{s, 0.0}, options.pade_tol);
        point.v = std::move(e.v);
        point.q_pv = std::move(e.q);
        bool finite = std::all_of(point.v.begin(), point.v.end(), [](Complex z) {
            return std::isfinite(z.real()) && std::isfinite(z.imag()) && z != Complex{};
        });
        if (finite) {
            point.residual = max_abs(embedded_mismatch(germ, network, model, Complex{s, 0.0}, point.v, point.q_pv));
        }
        point.converged = e.all_converged && finite && point.residual <= options.mismatch_tol;
        if (point.converged && prefix) {
            result.largest_reached = s;
        } else {
            prefix = false;
        }
        result.points.push_back(std::move(point));
    }
    return result;
}

}  // namespace helm
