#pragma once

// Network data model, admittance stamping and the power-mismatch residual.
//
// Sign convention: a positive injection is power flowing into the bus, so
// generation is positive and load is negative. Everything is per-unit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "helm/error.hpp"

namespace helm {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

inline constexpr Complex kJ{0.0, 1.0};

enum class BusKind { Swing, PQ, PV };

inline const char* to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Swing: return "swing";
        case BusKind::PQ: return "pq";
        case BusKind::PV: return "pv";
    }
    return "unknown";
}

struct BusSpec {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double p = 0.0;                // active injection
    double q = 0.0;                // reactive injection (PQ only)
    double vsp = 1.0;              // voltage-magnitude setpoint (PV only)
    Complex vswing{1.0, 0.0};      // fixed voltage (Swing only)
    double gsh = 0.0;
    double bsh = 0.0;

    Complex injection() const { return {p, q}; }
    Complex shunt() const { return {gsh, bsh}; }
};

struct BranchSpec {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;      // total line charging
    double tap = 1.0;    // off-nominal ratio on the "from" side
    double shift = 0.0;  // phase shift, radians

    Complex series_admittance() const { return 1.0 / Complex{r, x}; }
};

/// Validated bus/branch collection. Immutable once constructed.
class Network {
public:
    Network() = default;

    Network(std::vector<BusSpec> buses, std::vector<BranchSpec> branches, double base_mva = 100.0)
        : buses_(std::move(buses)), branches_(std::move(branches)), base_mva_(base_mva) {
        validate();
    }

    std::size_t size() const noexcept { return buses_.size(); }
    double base_mva() const noexcept { return base_mva_; }
    const std::vector<BusSpec>& buses() const noexcept { return buses_; }
    const std::vector<BranchSpec>& branches() const noexcept { return branches_; }
    const BusSpec& bus(std::size_t index) const { return buses_.at(index); }
    std::size_t swing_index() const noexcept { return swing_; }

    /// Position of a bus id; throws ValidationError for unknown ids.
    std::size_t index_of(int id) const {
        auto it = index_.find(id);
        if (it == index_.end()) {
            throw ValidationError(ValidationCode::UnknownBus,
                                  "unknown bus id " + std::to_string(id), id);
        }
        return it->second;
    }

    bool contains(int id) const { return index_.contains(id); }

    /// Bus positions of PV buses, in bus order. Entry k corresponds to q_pv[k].
    const std::vector<std::size_t>& pv_indices() const noexcept { return pv_; }
    std::size_t pv_count() const noexcept { return pv_.size(); }
    bool has_pv() const noexcept { return !pv_.empty(); }

    /// Position of bus `index` inside pv_indices(), or -1.
    int pv_position(std::size_t index) const noexcept { return pv_position_[index]; }

private:
    void validate() {
        index_.clear();
        pv_.clear();
        pv_position_.assign(buses_.size(), -1);

        std::size_t swing_count = 0;
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            const auto& bus = buses_[i];
            if (!index_.emplace(bus.id, i).second) {
                throw ValidationError(ValidationCode::DuplicateBusId,
                                      "duplicate bus id " + std::to_string(bus.id), bus.id);
            }
            switch (bus.kind) {
                case BusKind::Swing:
                    ++swing_count;
                    swing_ = i;
                    if (std::abs(bus.vswing) == 0.0) {
                        throw ValidationError(ValidationCode::NonPositiveSetpoint,
                                              "swing bus " + std::to_string(bus.id) + " has zero voltage",
                                              bus.id);
                    }
                    break;
                case BusKind::PV:
                    if (!(bus.vsp > 0.0)) {
                        throw ValidationError(ValidationCode::NonPositiveSetpoint,
                                              "PV bus " + std::to_string(bus.id) + " needs vsp > 0",
                                              bus.id);
                    }
                    pv_position_[i] = static_cast<int>(pv_.size());
                    pv_.push_back(i);
                    break;
                case BusKind::PQ:
                    break;
            }
        }
        if (swing_count == 0) {
            throw ValidationError(ValidationCode::NoSwing, "no swing bus");
        }
        if (swing_count > 1) {
            throw ValidationError(ValidationCode::MultipleSwing, "multiple swing buses");
        }

        std::vector<std::vector<std::size_t>> adjacency(buses_.size());
        for (const auto& br : branches_) {
            if (!index_.contains(br.from) || !index_.contains(br.to)) {
                const int missing = index_.contains(br.from) ? br.to : br.from;
                throw ValidationError(ValidationCode::UnknownBus,
                                      "branch references unknown bus " + std::to_string(missing),
                                      missing);
            }
            if (br.from == br.to) {
                throw ValidationError(ValidationCode::SelfLoop,
                                      "branch connects bus " + std::to_string(br.from) + " to itself",
                                      br.from);
            }
            if (br.r == 0.0 && br.x == 0.0) {
                throw ValidationError(ValidationCode::ZeroImpedance,
                                      "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                          " has zero impedance");
            }
            if (!(br.tap > 0.0)) {
                throw ValidationError(ValidationCode::NonPositiveTap,
                                      "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                          " has non-positive tap");
            }
            const auto f = index_.at(br.from);
            const auto t = index_.at(br.to);
            adjacency[f].push_back(t);
            adjacency[t].push_back(f);
        }

        std::vector<bool> seen(buses_.size(), false);
        std::queue<std::size_t> frontier;
        frontier.push(swing_);
        seen[swing_] = true;
        while (!frontier.empty()) {
            const auto i = frontier.front();
            frontier.pop();
            for (auto k : adjacency[i]) {
                if (!seen[k]) {
                    seen[k] = true;
                    frontier.push(k);
                }
            }
        }
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            if (!seen[i]) {
                throw ValidationError(ValidationCode::Disconnected,
                                      "bus " + std::to_string(buses_[i].id) + " is not connected to the swing bus",
                                      buses_[i].id);
            }
        }
    }

    std::vector<BusSpec> buses_;
    std::vector<BranchSpec> branches_;
    double base_mva_ = 100.0;
    std::unordered_map<int, std::size_t> index_;
    std::size_t swing_ = 0;
    std::vector<std::size_t> pv_;
    std::vector<int> pv_position_;
};

/// Full bus admittance matrix plus its transmission/shunt split.
///
/// Invariants: y_full == y_tr + diag(y_sh) entry by entry, and every row of
/// y_tr sums to zero up to rounding.
struct AdmittanceModel {
    SparseComplexMatrix y_full;
    SparseComplexMatrix y_tr;
    ComplexVector y_sh;

    std::size_t size() const noexcept { return y_sh.size(); }
};

namespace detail {

// Smallest adjustment of `start` such that fl(result + addend) == target,
// searched a few ulps either side. Falls back to `start`.
inline double exact_difference(double target, double addend) {
    const double start = target - addend;
    double t = start;
    for (int step = 0; step < 8; ++step) {
        const double r = t + addend;
        if (r == target) return t;
        t = std::nextafter(t, r < target ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity());
    }
    return start;
}

}  // namespace detail

/// Pi-model stamping of every branch plus bus shunts, followed by the
/// row-sum split into transmission and shunt parts.
///
/// A branch with series admittance y, tap t and shift theta stamps
///   Y_ff += (y + jb/2) / t^2,  Y_ft -= y / (t e^{-j theta}),
///   Y_tf -= y / (t e^{+j theta}),  Y_tt += y + jb/2.
inline AdmittanceModel build_admittance(const Network& network) {
    const auto n = static_cast<int>(network.size());
    std::vector<Eigen::Triplet<Complex, int>> triplets;
    triplets.reserve(4 * network.branches().size() + network.size());

    for (const auto& br : network.branches()) {
        const auto f = static_cast<int>(network.index_of(br.from));
        const auto t = static_cast<int>(network.index_of(br.to));
        const Complex y = br.series_admittance();
        const Complex charging{0.0, br.b / 2.0};
        const double tap = br.tap;
        triplets.emplace_back(f, f, (y + charging) / (tap * tap));
        triplets.emplace_back(f, t, -y / (tap * std::polar(1.0, -br.shift)));
        triplets.emplace_back(t, f, -y / (tap * std::polar(1.0, br.shift)));
        triplets.emplace_back(t, t, y + charging);
    }
    for (int i = 0; i < n; ++i) {
        // Explicit diagonal so that y_tr always has a structural diagonal.
        triplets.emplace_back(i, i, network.bus(static_cast<std::size_t>(i)).shunt());
    }

    AdmittanceModel model;
    model.y_full.resize(n, n);
    model.y_full.setFromTriplets(triplets.begin(), triplets.end());
    model.y_full.makeCompressed();

    model.y_sh.assign(static_cast<std::size_t>(n), Complex{});
    for (int col = 0; col < n; ++col) {
        for (SparseComplexMatrix::InnerIterator it(model.y_full, col); it; ++it) {
            model.y_sh[static_cast<std::size_t>(it.row())] += it.value();
        }
    }

    model.y_tr = model.y_full;
    for (int col = 0; col < n; ++col) {
        for (SparseComplexMatrix::InnerIterator it(model.y_tr, col); it; ++it) {
            if (it.row() == col) {
                const Complex full = it.value();
                const Complex shunt = model.y_sh[static_cast<std::size_t>(col)];
                it.valueRef() = {detail::exact_difference(full.real(), shunt.real()),
                                 detail::exact_difference(full.imag(), shunt.imag())};
            }
        }
    }
    return model;
}

/// Residual of the original power-flow equations,
///   r_i = sum_k Y_ik v_k - conj(S_i) / conj(v_i),
/// for non-swing buses; the swing entry is zero. PV buses use P_k + j q_pv[k].
inline ComplexVector mismatch(const Network& network, const AdmittanceModel& model,
                              std::span<const Complex> v, std::span<const double> q_pv) {
    const auto n = network.size();
    if (v.size() != n) {
        throw Error("mismatch: voltage vector has " + std::to_string(v.size()) + " entries, expected " +
                    std::to_string(n));
    }
    if (q_pv.size() != network.pv_count()) {
        throw Error("mismatch: expected " + std::to_string(network.pv_count()) + " PV reactive injections");
    }

    ComplexVector current(n, Complex{});
    for (int col = 0; col < static_cast<int>(n); ++col) {
        for (SparseComplexMatrix::InnerIterator it(model.y_full, col); it; ++it) {
            current[static_cast<std::size_t>(it.row())] += it.value() * v[static_cast<std::size_t>(col)];
        }
    }

    ComplexVector residual(n, Complex{});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& bus = network.bus(i);
        if (bus.kind == BusKind::Swing) continue;
        if (v[i] == Complex{}) {
            throw Error("mismatch: zero voltage at bus " + std::to_string(bus.id));
        }
        Complex injection = bus.injection();
        if (bus.kind == BusKind::PV) {
            injection = {bus.p, q_pv[static_cast<std::size_t>(network.pv_position(i))]};
        }
        residual[i] = current[i] - std::conj(injection) / std::conj(v[i]);
    }
    return residual;
}

inline double max_abs(std::span<const Complex> values) {
    double m = 0.0;
    for (const auto& z : values) m = std::max(m, std::abs(z));
    return m;
}

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }
inline double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

}  // namespace helm
