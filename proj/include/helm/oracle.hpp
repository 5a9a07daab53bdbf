#pragma once

// Independent reference solutions.
//
// Two-bus closed forms, in the dimensionless variables U = V / V0 and
// sigma = Z conj(S) / |V0|^2 for a load bus fed from the swing through Z:
//   U(s) = 1/2 +- sqrt(1/4 + s sigma_r - s^2 sigma_i^2) + j s sigma_i,
// and for a lossless PV bus behind reactance x,
//   U(s) = j x s P +- sqrt(K(s) - x^2 s^2 P^2),  K(s) = 1 + s (vsp^2 - 1),
//   s x Q = K(s) - U + j s x P.
// Plus a dense polar Newton-Raphson solver for small networks.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "helm/error.hpp"
#include "helm/network.hpp"

namespace helm::oracle {

enum class Branch { Plus, Minus };

struct TwoBusCase {
    Complex sigma{};

    double sigma_r() const noexcept { return sigma.real(); }
    double sigma_i() const noexcept { return sigma.imag(); }

    /// Radicand 1/4 + s sigma_r - s^2 sigma_i^2 of the closed form. Values
    /// within rounding of zero are returned as exactly zero.
    double discriminant(double s) const noexcept {
        const double a = s * sigma_r();
        const double b = s * s * sigma_i() * sigma_i();
        const double d = 0.25 + a - b;
        const double noise = 8.0 * std::numeric_limits<double>::epsilon() * (0.25 + std::abs(a) + b);
        return std::abs(d) <= noise ? 0.0 : d;
    }
    bool feasible() const noexcept { return discriminant(1.0) >= 0.0; }
};

/// Embedded two-bus solution at real s; nullopt when the radicand is negative.
inline std::optional<Complex> twobus_closed_form(const TwoBusCase& c, double s, Branch branch = Branch::Plus) {
    const double delta = c.discriminant(s);
    if (delta < 0.0) return std::nullopt;
    const double root = std::sqrt(delta);
    const double sign = branch == Branch::Plus ? 1.0 : -1.0;
    return Complex{0.5 + sign * root, s * c.sigma_i()};
}

/// The mirror variable on the same branch, Uhat = U - 2 j s sigma_i.
inline std::optional<Complex> twobus_closed_form_hat(const TwoBusCase& c, double s, Branch branch = Branch::Plus) {
    auto u = twobus_closed_form(c, s, branch);
    if (!u) return std::nullopt;
    return *u - 2.0 * kJ * s * c.sigma_i();
}

struct BranchPoints {
    double s_minus = -std::numeric_limits<double>::infinity();
    double s_plus = std::numeric_limits<double>::infinity();
};

/// Roots of the radicand in s. With sigma_i = 0 there is a single root
/// -1/(4 sigma_r); the missing side is reported as an infinity.
inline BranchPoints twobus_branch_points(const TwoBusCase& c) {
    BranchPoints bp;
    const double si = c.sigma_i();
    const double sr = c.sigma_r();
    if (si != 0.0) {
        const double mod = std::abs(c.sigma);
        const double denom = 2.0 * si * si;
        bp.s_minus = (sr - mod) / denom;
        bp.s_plus = (sr + mod) / denom;
    } else if (sr != 0.0) {
        const double root = -1.0 / (4.0 * sr);
        if (root > 0.0) {
            bp.s_plus = root;
        } else {
            bp.s_minus = root;
        }
    }
    return bp;
}

struct PvSolution {
    Complex u{};
    double q = 0.0;
};

/// Lossless two-bus PV closed form. The returned q is the reactive injection
/// at the PV bus, i.e. the variable multiplied by s in the embedded equations.
inline std::optional<PvSolution> twobus_pv_closed_form(double x, double p, double vsp, double s,
                                                       Branch branch = Branch::Plus) {
    if (!(x > 0.0) || !(s > 0.0)) throw Error("twobus PV closed form needs x > 0 and s > 0");
    const double k = 1.0 + s * (vsp * vsp - 1.0);
    const double radicand = k - x * x * s * s * p * p;
    if (radicand < 0.0) return std::nullopt;
    const double sign = branch == Branch::Plus ? 1.0 : -1.0;
    const Complex u{sign * std::sqrt(radicand), x * s * p};
    const Complex q = (k - u + kJ * s * x * p) / (s * x);
    return PvSolution{u, q.real()};
}

/// Swing (id 1, V = 1) feeding a PQ bus (id 2) through r = 0, x = 1,
/// loaded so that Z conj(S) = sigma.
inline Network twobus_network(Complex sigma) {
    BusSpec swing{.id = 1, .kind = BusKind::Swing};
    BusSpec load{.id = 2, .kind = BusKind::PQ, .p = sigma.imag(), .q = sigma.real()};
    BranchSpec line{.from = 1, .to = 2, .r = 0.0, .x = 1.0};
    return Network({swing, load}, {line});
}

/// Swing (id 1, V = 1) and a PV bus (id 2) joined by a lossless reactance.
inline Network twobus_pv_network(double x, double p, double vsp) {
    BusSpec swing{.id = 1, .kind = BusKind::Swing};
    BusSpec gen{.id = 2, .kind = BusKind::PV, .p = p, .vsp = vsp};
    BranchSpec line{.from = 1, .to = 2, .r = 0.0, .x = x};
    return Network({swing, gen}, {line});
}

struct NewtonResult {
    bool converged = false;
    int iterations = 0;
    ComplexVector v;
    std::vector<double> q_pv;  // reactive injection at PV buses, network PV order
    double mismatch = std::numeric_limits<double>::infinity();
};

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
};

/// Polar Newton-Raphson with a dense Jacobian. Non-convergence is reported
/// in the result, never thrown.
inline NewtonResult newton_raphson(const Network& network, bool flat_start = true,
                                   const ComplexVector& initial = {}, NewtonOptions options = {}) {
    const auto n = static_cast<Eigen::Index>(network.size());
    const auto model = build_admittance(network);
    const Eigen::MatrixXcd y = Eigen::MatrixXcd(model.y_full);

    Eigen::VectorXcd spec(n);
    std::vector<Eigen::Index> pvpq, pq;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& bus = network.bus(static_cast<std::size_t>(i));
        spec(i) = bus.injection();
        if (bus.kind != BusKind::Swing) pvpq.push_back(i);
        if (bus.kind == BusKind::PQ) pq.push_back(i);
    }

    Eigen::VectorXd vm(n), va(n);
    const auto& swing = network.bus(network.swing_index());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& bus = network.bus(static_cast<std::size_t>(i));
        if (!flat_start && static_cast<Eigen::Index>(initial.size()) == n) {
            vm(i) = std::abs(initial[static_cast<std::size_t>(i)]);
            va(i) = std::arg(initial[static_cast<std::size_t>(i)]);
        } else {
            vm(i) = 1.0;
            va(i) = std::arg(swing.vswing);
        }
        if (bus.kind == BusKind::PV) vm(i) = bus.vsp;
        if (bus.kind == BusKind::Swing) {
            vm(i) = std::abs(bus.vswing);
            va(i) = std::arg(bus.vswing);
        }
    }

    const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());
    NewtonResult result;

    auto voltages = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    };
    auto residual = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd& current) {
        current = y * v;
        Eigen::VectorXd f(npvpq + npq);
        for (Eigen::Index k = 0; k < npvpq; ++k) {
            const auto i = pvpq[static_cast<std::size_t>(k)];
            f(k) = (v(i) * std::conj(current(i)) - spec(i)).real();
        }
        for (Eigen::Index k = 0; k < npq; ++k) {
            const auto i = pq[static_cast<std::size_t>(k)];
            f(npvpq + k) = (v(i) * std::conj(current(i)) - spec(i)).imag();
        }
        return f;
    };

    Eigen::VectorXcd v = voltages();
    Eigen::VectorXcd current;
    Eigen::VectorXd f = residual(v, current);
    for (int iter = 0;; ++iter) {
        const double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
        result.iterations = iter;
        result.mismatch = norm;
        if (norm < options.tolerance) {
            result.converged = true;
            break;
        }
        if (iter >= options.max_iterations || !std::isfinite(norm)) break;

        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        const Eigen::VectorXcd unit = v.cwiseQuotient(vm.cast<Complex>());
        Eigen::MatrixXcd ds_dva = -(y * v.asDiagonal()).conjugate();
        ds_dva.diagonal() += current.conjugate();
        ds_dva = (kJ * v).asDiagonal() * ds_dva;
        Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (y * unit.asDiagonal()).conjugate();
        ds_dvm.diagonal() += current.conjugate().cwiseProduct(unit);

        Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
        for (Eigen::Index r = 0; r < npvpq; ++r) {
            const auto i = pvpq[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < npvpq; ++c) jac(r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).real();
            for (Eigen::Index c = 0; c < npq; ++c) jac(r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).real();
        }
        for (Eigen::Index r = 0; r < npq; ++r) {
            const auto i = pq[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < npvpq; ++c) jac(npvpq + r, c) = ds_dva(i, pvpq[static_cast<std::size_t>(c)]).imag();
            for (Eigen::Index c = 0; c < npq; ++c) jac(npvpq + r, npvpq + c) = ds_dvm(i, pq[static_cast<std::size_t>(c)]).imag();
        }
        const Eigen::VectorXd dx = jac.partialPivLu().solve(-f);
        if (!dx.allFinite()) break;
        for (Eigen::Index k = 0; k < npvpq; ++k) va(pvpq[static_cast<std::size_t>(k)]) += dx(k);
        for (Eigen::Index k = 0; k < npq; ++k) vm(pq[static_cast<std::size_t>(k)]) += dx(npvpq + k);

        v = voltages();
        f = residual(v, current);
    }

    result.v.assign(v.data(), v.data() + n);
    for (auto i : network.pv_indices()) {
        const auto idx = static_cast<Eigen::Index>(i);
        result.q_pv.push_back((v(idx) * std::conj(current(idx))).imag());
    }
    return result;
}

}  // namespace helm::oracle
