#pragma once

// JSON case files and solve reports.
//
// Case: {"base_mva": R, "buses": [...], "branches": [...]}
//   bus:    {"id": int, "type": "swing"|"pq"|"pv", "v": [re, im] (swing),
//            "p": R, "q": R (pq), "vsp": R (pv), "gsh": R, "bsh": R}
//   branch: {"from": int, "to": int, "r": R, "x": R, "b": R, "tap": R, "shift_deg": R}
// Defaults: q = 0, gsh = bsh = 0, b = 0, tap = 1, shift_deg = 0.
//
// Reports keep a fixed key order. Reals are written in shortest round-trip
// form; non-finite values are written as the strings "nan", "inf", "-inf".

#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "helm/error.hpp"
#include "helm/network.hpp"
#include "helm/pade.hpp"
#include "helm/series.hpp"
#include "helm/solver.hpp"

namespace helm::caseio {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& message, std::optional<int> bus = std::nullopt) {
    throw ValidationError(ValidationCode::Schema, message, bus);
}

inline const Json& require(const Json& object, const char* key, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end()) schema_error(where + ": missing field \"" + key + "\"");
    return *it;
}

inline double real_field(const Json& value, const std::string& what) {
    if (!value.is_number()) schema_error(what + " must be a number");
    const double x = value.get<double>();
    if (!std::isfinite(x)) schema_error(what + " must be finite");
    return x;
}

inline double real_or(const Json& object, const char* key, double fallback, const std::string& where) {
    auto it = object.find(key);
    if (it == object.end()) return fallback;
    return real_field(*it, where + "." + key);
}

inline int int_field(const Json& value, const std::string& what) {
    if (!value.is_number_integer()) schema_error(what + " must be an integer");
    return value.get<int>();
}

inline BusSpec parse_bus(const Json& j, std::size_t position) {
    const std::string where = "buses[" + std::to_string(position) + "]";
    if (!j.is_object()) schema_error(where + " must be an object");
    BusSpec bus;
    bus.id = int_field(require(j, "id", where), where + ".id");
    const auto& type = require(j, "type", where);
    if (!type.is_string()) schema_error(where + ".type must be a string", bus.id);
    const auto kind = type.get<std::string>();
    if (kind == "swing") {
        bus.kind = BusKind::Swing;
        const auto& v = require(j, "v", where);
        if (!v.is_array() || v.size() != 2) schema_error(where + ".v must be [re, im]", bus.id);
        bus.vswing = {real_field(v[0], where + ".v[0]"), real_field(v[1], where + ".v[1]")};
        bus.p = real_or(j, "p", 0.0, where);
        bus.q = real_or(j, "q", 0.0, where);
    } else if (kind == "pq") {
        bus.kind = BusKind::PQ;
        bus.p = real_field(require(j, "p", where), where + ".p");
        bus.q = real_or(j, "q", 0.0, where);
    } else if (kind == "pv") {
        bus.kind = BusKind::PV;
        bus.p = real_field(require(j, "p", where), where + ".p");
        bus.vsp = real_field(require(j, "vsp", where), where + ".vsp");
    } else {
        schema_error(where + ".type \"" + kind + "\" is not one of swing, pq, pv", bus.id);
    }
    bus.gsh = real_or(j, "gsh", 0.0, where);
    bus.bsh = real_or(j, "bsh", 0.0, where);
    return bus;
}

inline BranchSpec parse_branch(const Json& j, std::size_t position) {
    const std::string where = "branches[" + std::to_string(position) + "]";
    if (!j.is_object()) schema_error(where + " must be an object");
    BranchSpec br;
    br.from = int_field(require(j, "from", where), where + ".from");
    br.to = int_field(require(j, "to", where), where + ".to");
    br.r = real_field(require(j, "r", where), where + ".r");
    br.x = real_field(require(j, "x", where), where + ".x");
    br.b = real_or(j, "b", 0.0, where);
    br.tap = real_or(j, "tap", 1.0, where);
    br.shift = radians(real_or(j, "shift_deg", 0.0, where));
    return br;
}

inline Json number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline Json pair(Complex z) { return Json::array({number(z.real()), number(z.imag())}); }

inline double read_number(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw Error("report: expected a number, got " + j.dump());
}

inline Complex read_pair(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw Error("report: expected [re, im], got " + j.dump());
    return {read_number(j[0]), read_number(j[1])};
}

inline Json pairs(const ComplexVector& values) {
    Json out = Json::array();
    for (const auto& z : values) out.push_back(pair(z));
    return out;
}

inline ComplexVector read_pairs(const Json& j) {
    ComplexVector out;
    for (const auto& e : j) out.push_back(read_pair(e));
    return out;
}

inline SolveStatus status_from(const std::string& s) {
    if (s == "converged") return SolveStatus::Converged;
    if (s == "no_solution") return SolveStatus::NoSolution;
    if (s == "order_budget_exhausted") return SolveStatus::OrderBudgetExhausted;
    throw Error("report: unknown status \"" + s + "\"");
}

}  // namespace detail

/// Parse and validate a case document.
inline Network parse_case(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ValidationError(ValidationCode::MalformedJson, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) detail::schema_error("case must be a JSON object");

    const double base = detail::real_field(detail::require(doc, "base_mva", "case"), "base_mva");
    if (!(base > 0.0)) detail::schema_error("base_mva must be positive");

    const auto& buses = detail::require(doc, "buses", "case");
    const auto& branches = detail::require(doc, "branches", "case");
    if (!buses.is_array()) detail::schema_error("buses must be an array");
    if (!branches.is_array()) detail::schema_error("branches must be an array");

    std::vector<BusSpec> bus_specs;
    for (std::size_t i = 0; i < buses.size(); ++i) bus_specs.push_back(detail::parse_bus(buses[i], i));
    std::vector<BranchSpec> branch_specs;
    for (std::size_t i = 0; i < branches.size(); ++i) branch_specs.push_back(detail::parse_branch(branches[i], i));
    return Network(std::move(bus_specs), std::move(branch_specs), base);
}

inline Network load_case(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open case file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str());
}

/// Serialize a network back to the case schema.
inline std::string write_case(const Network& network) {
    Json doc;
    doc["base_mva"] = network.base_mva();
    Json buses = Json::array();
    for (const auto& bus : network.buses()) {
        Json b;
        b["id"] = bus.id;
        b["type"] = to_string(bus.kind);
        switch (bus.kind) {
            case BusKind::Swing: b["v"] = detail::pair(bus.vswing); break;
            case BusKind::PQ:
                b["p"] = bus.p;
                b["q"] = bus.q;
                break;
            case BusKind::PV:
                b["p"] = bus.p;
                b["vsp"] = bus.vsp;
                break;
        }
        b["gsh"] = bus.gsh;
        b["bsh"] = bus.bsh;
        buses.push_back(std::move(b));
    }
    Json branches = Json::array();
    for (const auto& br : network.branches()) {
        branches.push_back(Json{{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}, {"b", br.b},
                                {"tap", br.tap}, {"shift_deg", degrees(br.shift)}});
    }
    doc["buses"] = std::move(buses);
    doc["branches"] = std::move(branches);
    return doc.dump(2) + "\n";
}

inline Json report_json(const SolveReport& report) {
    using detail::number;
    using detail::pair;
    Json doc;
    doc["status"] = to_string(report.status);
    doc["embedding"] = to_string(report.embedding);
    doc["order_used"] = report.order_used;
    doc["mismatch_norm"] = number(report.mismatch_norm);
    doc["setpoint_error"] = number(report.setpoint_error);

    Json buses = Json::array();
    for (std::size_t i = 0; i < report.bus_ids.size(); ++i) {
        const Complex v = i < report.v.size() ? report.v[i] : Complex{std::nan(""), std::nan("")};
        buses.push_back(Json{{"id", report.bus_ids[i]},
                             {"v", pair(v)},
                             {"vm", number(std::abs(v))},
                             {"va_deg", number(degrees(std::arg(v)))}});
    }
    doc["buses"] = std::move(buses);

    Json pv = Json::array();
    for (std::size_t k = 0; k < report.pv_ids.size(); ++k) {
        const double q = k < report.q_pv.size() ? report.q_pv[k] : std::nan("");
        pv.push_back(Json{{"id", report.pv_ids[k]}, {"q", number(q)}});
    }
    doc["pv"] = std::move(pv);

    Json diag;
    diag["note"] = report.note;
    diag["collapse_estimate"] = report.collapse_estimate ? number(*report.collapse_estimate) : Json(nullptr);
    diag["pole_estimates"] = detail::pairs(report.pole_estimates);
    Json series = Json::array();
    for (const auto& d : report.diagnostics) {
        series.push_back(Json{{"bus", d.bus_id},
                              {"series", d.reactive ? "q" : "v"},
                              {"status", to_string(d.status)},
                              {"converged_from", d.converged_from},
                              {"value", pair(d.final_value)},
                              {"spread", number(d.spread)},
                              {"poles", detail::pairs(d.pole_estimates)}});
    }
    diag["series"] = std::move(series);
    doc["diagnostics"] = std::move(diag);
    return doc;
}

/// Deterministic report text.
inline std::string write_report(const SolveReport& report) { return report_json(report).dump(2) + "\n"; }

/// Inverse of write_report.
inline SolveReport parse_report(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw Error(std::string("report: malformed JSON: ") + e.what());
    }
    using detail::read_number;
    using detail::read_pair;
    SolveReport r;
    try {
        r.status = detail::status_from(doc.at("status").get<std::string>());
        r.embedding = doc.at("embedding").get<std::string>() == "minimal" ? EmbeddingKind::Minimal
                                                                           : EmbeddingKind::Canonical;
        r.order_used = doc.at("order_used").get<int>();
        r.mismatch_norm = read_number(doc.at("mismatch_norm"));
        r.setpoint_error = read_number(doc.at("setpoint_error"));
        for (const auto& b : doc.at("buses")) {
            r.bus_ids.push_back(b.at("id").get<int>());
            r.v.push_back(read_pair(b.at("v")));
        }
        for (const auto& p : doc.at("pv")) {
            r.pv_ids.push_back(p.at("id").get<int>());
            r.q_pv.push_back(read_number(p.at("q")));
        }
        const auto& diag = doc.at("diagnostics");
        r.note = diag.at("note").get<std::string>();
        if (!diag.at("collapse_estimate").is_null()) r.collapse_estimate = read_number(diag.at("collapse_estimate"));
        r.pole_estimates = detail::read_pairs(diag.at("pole_estimates"));
        for (const auto& s : diag.at("series")) {
            SeriesDiagnostics d;
            d.bus_id = s.at("bus").get<int>();
            d.reactive = s.at("series").get<std::string>() == "q";
            d.status = s.at("status").get<std::string>() == "converged" ? PadeStatus::Converged
                                                                         : PadeStatus::NotConverged;
            d.converged_from = s.at("converged_from").get<int>();
            d.final_value = read_pair(s.at("value"));
            d.spread = read_number(s.at("spread"));
            d.pole_estimates = detail::read_pairs(s.at("poles"));
            r.diagnostics.push_back(std::move(d));
        }
    } catch (const Json::exception& e) {
        throw Error(std::string("report: ") + e.what());
    }
    return r;
}

/// Voltage coefficients, one array of [re, im] pairs per bus, order ascending.
inline std::string write_series_dump(const GermSeries& germ) {
    Json doc = Json::array();
    for (const auto& coeffs : germ.v) doc.push_back(detail::pairs(coeffs));
    return doc.dump() + "\n";
}

/// Near-diagonal staircase at s for every non-swing voltage and PV reactive series.
inline std::string write_pade_dump(const GermSeries& germ, const Network& network, Complex s, double tol) {
    Json doc = Json::array();
    auto entry = [&](int id, const char* kind, std::span<const Complex> coeffs) {
        const auto r = eval_near_diagonal(coeffs, s, tol);
        doc.push_back(Json{{"bus", id},
                           {"series", kind},
                           {"status", to_string(r.status)},
                           {"converged_from", r.converged_from},
                           {"staircase", detail::pairs(r.staircase)},
                           {"diagonal", detail::pairs(r.values)}});
    };
    for (std::size_t i = 0; i < network.size(); ++i) {
        if (i == network.swing_index()) continue;
        entry(network.bus(i).id, "v", germ.voltage(i));
    }
    for (std::size_t k = 0; k < network.pv_count(); ++k) {
        const auto coeffs = germ.reactive_complex(k);
        entry(network.bus(network.pv_indices()[k]).id, "q", coeffs);
    }
    return doc.dump() + "\n";
}

}  // namespace helm::caseio
