// helm: command-line front end.
//
//   helm solve <case.json> [--embedding minimal|canonical] [--max-order N]
//              [--pade-tol T] [--mismatch-tol T] [--dump-series PATH] [--dump-pade PATH]
//   helm scan <case.json> --from S --to S --steps K
//   helm twobus --sigma-r R --sigma-i I [--s S]
//   helm twobus-pv --x X --p P --vsp V [--s S]
//   helm validate <case.json>
//
// Exit codes: 0 success, 1 input or usage error, 2 no solution,
// 3 order budget exhausted.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "helm/helm.hpp"

namespace {

using helm::Complex;
using helm::caseio::Json;

enum Exit { kOk = 0, kInputError = 1, kNoSolution = 2, kBudget = 3 };

int exit_code(helm::SolveStatus status) {
    switch (status) {
        case helm::SolveStatus::Converged: return kOk;
        case helm::SolveStatus::NoSolution: return kNoSolution;
        case helm::SolveStatus::OrderBudgetExhausted: return kBudget;
    }
    return kInputError;
}

struct Common {
    std::string case_path;
    std::string output;
    bool pretty = false;
    std::string embedding = "canonical";
    helm::SolveOptions options;
};

void emit(const Common& c, const std::string& text) {
    if (c.output.empty() || c.output == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(c.output, std::ios::binary);
    if (!out) throw helm::Error("cannot write " + c.output);
    out << text;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw helm::Error("cannot write " + path);
    out << text;
}

std::string fixed(double x, int digits = 6) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string sci(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

helm::SolveOptions resolved(Common& c) {
    c.options.embedding = c.embedding == "minimal" ? helm::EmbeddingKind::Minimal : helm::EmbeddingKind::Canonical;
    c.options.validate();
    return c.options;
}

std::string pretty_report(const helm::SolveReport& r) {
    std::ostringstream out;
    out << "status " << to_string(r.status) << "  embedding " << to_string(r.embedding) << "  order " << r.order_used
        << "  mismatch " << sci(r.mismatch_norm) << "\n";
    out << pad("bus", 6) << pad("|V|", 12) << pad("angle", 12) << pad("re", 12) << pad("im", 12) << "\n";
    for (std::size_t i = 0; i < r.bus_ids.size() && i < r.v.size(); ++i) {
        const Complex v = r.v[i];
        out << pad(std::to_string(r.bus_ids[i]), 6) << pad(fixed(std::abs(v)), 12)
            << pad(fixed(helm::degrees(std::arg(v)), 4), 12) << pad(fixed(v.real()), 12) << pad(fixed(v.imag()), 12)
            << "\n";
    }
    for (std::size_t k = 0; k < r.pv_ids.size() && k < r.q_pv.size(); ++k) {
        out << "pv " << r.pv_ids[k] << "  q " << fixed(r.q_pv[k]) << "\n";
    }
    if (r.collapse_estimate) out << "singularity near s = " << fixed(*r.collapse_estimate, 4) << "\n";
    if (!r.note.empty()) out << r.note << "\n";
    return out.str();
}

int run_solve(Common& c, const std::string& dump_series, const std::string& dump_pade) {
    const auto options = resolved(c);
    const auto network = helm::caseio::load_case(c.case_path);
    const auto outcome = helm::solve_detailed(network, options);
    if (!dump_series.empty()) write_file(dump_series, helm::caseio::write_series_dump(outcome.germ));
    if (!dump_pade.empty()) {
        write_file(dump_pade, helm::caseio::write_pade_dump(outcome.germ, network, 1.0, options.pade_tol));
    }
    emit(c, c.pretty ? pretty_report(outcome.report) : helm::caseio::write_report(outcome.report));
    return exit_code(outcome.report.status);
}

int run_scan(Common& c, double from, double to, int steps) {
    const auto options = resolved(c);
    if (steps < 1) throw helm::Error("--steps must be at least 1");
    if (!(from > 0.0 && to <= 1.0 && from <= to)) throw helm::Error("scan range must satisfy 0 < from <= to <= 1");
    if (steps > 1 && !(from < to)) throw helm::Error("--from must be below --to when --steps > 1");
    std::vector<double> grid;
    for (int k = 0; k < steps; ++k) {
        grid.push_back(steps == 1 ? from : from + (to - from) * k / (steps - 1));
    }
    grid.back() = to;
    const auto network = helm::caseio::load_case(c.case_path);
    const auto result = helm::scan(network, options, grid);

    if (c.pretty) {
        std::ostringstream out;
        out << pad("s", 8) << pad("status", 16);
        for (const auto& bus : network.buses()) {
            if (bus.kind != helm::BusKind::Swing) out << pad("|V" + std::to_string(bus.id) + "|", 12);
        }
        out << "\n";
        for (const auto& p : result.points) {
            out << pad(fixed(p.s, 4), 8) << pad(p.converged ? "converged" : "not_converged", 16);
            for (std::size_t i = 0; i < network.size(); ++i) {
                if (i == network.swing_index()) continue;
                out << pad(p.converged ? fixed(std::abs(p.v[i])) : "-", 12);
            }
            out << "\n";
        }
        out << "largest s reached: " << (result.largest_reached ? fixed(*result.largest_reached, 4) : "none") << "\n";
        emit(c, out.str());
        return kOk;
    }

    Json doc;
    doc["embedding"] = to_string(options.embedding);
    doc["order"] = result.order;
    doc["largest_reached"] = result.largest_reached ? Json(*result.largest_reached) : Json(nullptr);
    Json points = Json::array();
    for (const auto& p : result.points) {
        Json v = Json::array();
        if (p.converged) {
            for (std::size_t i = 0; i < p.v.size(); ++i) {
                v.push_back(Json{{"id", network.bus(i).id}, {"v", {p.v[i].real(), p.v[i].imag()}}});
            }
        }
        Json q = Json::array();
        if (p.converged) {
            for (std::size_t k = 0; k < p.q_pv.size(); ++k) {
                q.push_back(Json{{"id", network.bus(network.pv_indices()[k]).id}, {"q", p.q_pv[k]}});
            }
        }
        points.push_back(Json{{"s", p.s},
                              {"status", p.converged ? "converged" : "not_converged"},
                              {"buses", std::move(v)},
                              {"pv", std::move(q)}});
    }
    doc["points"] = std::move(points);
    emit(c, doc.dump(2) + "\n");
    return kOk;
}

Json pair_or_null(const std::optional<Complex>& z) {
    if (!z) return nullptr;
    return Json::array({z->real(), z->imag()});
}

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

int run_twobus(const Common& c, double sr, double si, double s) {
    const helm::oracle::TwoBusCase tc{{sr, si}};
    const auto bp = helm::oracle::twobus_branch_points(tc);
    const auto plus = helm::oracle::twobus_closed_form(tc, s, helm::oracle::Branch::Plus);
    const auto minus = helm::oracle::twobus_closed_form(tc, s, helm::oracle::Branch::Minus);
    if (c.pretty) {
        std::ostringstream out;
        out << "sigma = " << fixed(sr) << (si < 0 ? " - " : " + ") << fixed(std::abs(si)) << "j  s = " << fixed(s)
            << "\n";
        out << "s- = " << fixed(bp.s_minus) << "  s+ = " << fixed(bp.s_plus) << "\n";
        out << "discriminant = " << fixed(tc.discriminant(s)) << "\n";
        if (plus) {
            out << "U+ = " << fixed(plus->real()) << " + " << fixed(plus->imag()) << "j\n";
            out << "U- = " << fixed(minus->real()) << " + " << fixed(minus->imag()) << "j\n";
        } else {
            out << "no solution at this s\n";
        }
        emit(c, out.str());
        return kOk;
    }
    Json doc;
    doc["sigma"] = {sr, si};
    doc["s"] = s;
    doc["discriminant"] = tc.discriminant(s);
    doc["feasible"] = plus.has_value();
    doc["plus"] = pair_or_null(plus);
    doc["minus"] = pair_or_null(minus);
    doc["branch_points"] = Json{{"s_minus", finite_or_null(bp.s_minus)}, {"s_plus", finite_or_null(bp.s_plus)}};
    emit(c, doc.dump(2) + "\n");
    return kOk;
}

int run_twobus_pv(const Common& c, double x, double p, double vsp, double s) {
    if (!(vsp > 0.0)) throw helm::Error("--vsp must be positive");
    const auto plus = helm::oracle::twobus_pv_closed_form(x, p, vsp, s, helm::oracle::Branch::Plus);
    // Smallest positive s with K(s) = x^2 s^2 P^2.
    const double a = x * x * p * p, b = vsp * vsp - 1.0;
    std::optional<double> critical;
    if (a > 0.0) critical = (b + std::sqrt(b * b + 4.0 * a)) / (2.0 * a);
    if (c.pretty) {
        std::ostringstream out;
        out << "x = " << fixed(x) << "  P = " << fixed(p) << "  vsp = " << fixed(vsp) << "  s = " << fixed(s) << "\n";
        if (plus) {
            out << "U = " << fixed(plus->u.real()) << " + " << fixed(plus->u.imag()) << "j  Q = " << fixed(plus->q)
                << "\n";
        } else {
            out << "no solution at this s\n";
        }
        out << "branch point s = " << (critical ? fixed(*critical) : std::string("none")) << "\n";
        emit(c, out.str());
        return kOk;
    }
    Json doc;
    doc["x"] = x;
    doc["p"] = p;
    doc["vsp"] = vsp;
    doc["s"] = s;
    doc["feasible"] = plus.has_value();
    doc["u"] = plus ? Json::array({plus->u.real(), plus->u.imag()}) : Json(nullptr);
    doc["q"] = plus ? Json(plus->q) : Json(nullptr);
    doc["branch_point"] = critical ? Json(*critical) : Json(nullptr);
    emit(c, doc.dump(2) + "\n");
    return kOk;
}

int run_validate(Common& c) {
    const auto options = resolved(c);
    const auto network = helm::caseio::load_case(c.case_path);
    const auto report = helm::solve(network, options);
    const auto nr = helm::oracle::newton_raphson(network);
    const bool comparable = report.converged() && nr.converged;

    double worst = 0.0;
    Json buses = Json::array();
    for (std::size_t i = 0; i < network.size(); ++i) {
        Json row;
        row["id"] = network.bus(i).id;
        row["helm"] = report.converged() ? Json::array({report.v[i].real(), report.v[i].imag()}) : Json(nullptr);
        row["nr"] = nr.converged ? Json::array({nr.v[i].real(), nr.v[i].imag()}) : Json(nullptr);
        if (comparable) {
            const double d = std::abs(report.v[i] - nr.v[i]);
            worst = std::max(worst, d);
            row["deviation"] = d;
        } else {
            row["deviation"] = nullptr;
        }
        buses.push_back(std::move(row));
    }

    if (c.pretty) {
        std::ostringstream out;
        out << "helm " << to_string(report.status) << "  nr " << (nr.converged ? "converged" : "not_converged")
            << " (" << nr.iterations << " iterations)\n";
        out << pad("bus", 6) << pad("helm |V|", 12) << pad("nr |V|", 12) << pad("deviation", 12) << "\n";
        for (std::size_t i = 0; i < network.size(); ++i) {
            out << pad(std::to_string(network.bus(i).id), 6)
                << pad(report.converged() ? fixed(std::abs(report.v[i])) : "-", 12)
                << pad(nr.converged ? fixed(std::abs(nr.v[i])) : "-", 12)
                << pad(comparable ? sci(std::abs(report.v[i] - nr.v[i])) : "-", 12) << "\n";
        }
        out << "max deviation " << (comparable ? sci(worst) : "-") << "\n";
        emit(c, out.str());
        return exit_code(report.status);
    }

    Json doc;
    doc["helm_status"] = to_string(report.status);
    doc["helm_order"] = report.order_used;
    doc["helm_mismatch"] = finite_or_null(report.mismatch_norm);
    doc["nr_converged"] = nr.converged;
    doc["nr_iterations"] = nr.iterations;
    doc["nr_mismatch"] = finite_or_null(nr.mismatch);
    doc["buses"] = std::move(buses);
    doc["max_deviation"] = comparable ? Json(worst) : Json(nullptr);
    emit(c, doc.dump(2) + "\n");
    return exit_code(report.status);
}

void add_output(CLI::App* cmd, Common& c) {
    cmd->add_option("-o,--output", c.output, "Write output to PATH instead of standard output");
    cmd->add_flag("--pretty", c.pretty, "Human-readable table instead of JSON");
}

void add_solver_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--embedding", c.embedding, "minimal or canonical")
        ->check(CLI::IsMember({"minimal", "canonical"}));
    cmd->add_option("--max-order", c.options.max_order, "Largest series order")->check(CLI::Range(5, 100000));
    cmd->add_option("--pade-tol", c.options.pade_tol, "Padé stopping tolerance")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mismatch-tol", c.options.mismatch_tol, "Mismatch acceptance threshold")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--order-step", c.options.order_step, "Orders added between Padé checks")
        ->check(CLI::Range(1, 100000));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Holomorphic embedding power flow"};
    app.require_subcommand(1);
    Common c;

    auto* solve = app.add_subcommand("solve", "Solve a case and print the report");
    solve->add_option("case", c.case_path, "Case file")->required();
    std::string dump_series, dump_pade;
    solve->add_option("--dump-series", dump_series, "Write voltage series coefficients to PATH");
    solve->add_option("--dump-pade", dump_pade, "Write Padé diagnostics to PATH");
    add_solver_flags(solve, c);
    add_output(solve, c);

    auto* scan = app.add_subcommand("scan", "Evaluate the continuation along a grid of s");
    scan->add_option("case", c.case_path, "Case file")->required();
    double from = 0.05, to = 1.0;
    int steps = 20;
    scan->add_option("--from", from, "First s")->required();
    scan->add_option("--to", to, "Last s")->required();
    scan->add_option("--steps", steps, "Number of grid points")->required();
    add_solver_flags(scan, c);
    add_output(scan, c);

    auto* twobus = app.add_subcommand("twobus", "Two-bus closed form and branch points");
    double sr = 0.0, si = 0.0, s = 1.0;
    twobus->add_option("--sigma-r", sr, "Real part of sigma")->required();
    twobus->add_option("--sigma-i", si, "Imaginary part of sigma")->required();
    twobus->add_option("--s", s, "Embedding parameter");
    add_output(twobus, c);

    auto* twobus_pv = app.add_subcommand("twobus-pv", "Lossless PV two-bus closed form");
    double x = 0.0, p = 0.0, vsp = 1.0, s_pv = 1.0;
    twobus_pv->add_option("--x", x, "Line reactance")->required();
    twobus_pv->add_option("--p", p, "Active injection")->required();
    twobus_pv->add_option("--vsp", vsp, "Voltage setpoint")->required();
    twobus_pv->add_option("--s", s_pv, "Embedding parameter");
    add_output(twobus_pv, c);

    auto* validate = app.add_subcommand("validate", "Compare against Newton-Raphson");
    validate->add_option("case", c.case_path, "Case file")->required();
    add_solver_flags(validate, c);
    add_output(validate, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::string message = e.what();
        if (auto nl = message.find('\n'); nl != std::string::npos) message.resize(nl);
        std::cerr << "error: " << message << "\n";
        return kInputError;
    }

    try {
        if (solve->parsed()) return run_solve(c, dump_series, dump_pade);
        if (scan->parsed()) return run_scan(c, from, to, steps);
        if (twobus->parsed()) return run_twobus(c, sr, si, s);
        if (twobus_pv->parsed()) return run_twobus_pv(c, x, p, vsp, s_pv);
        if (validate->parsed()) return run_validate(c);
    } catch (const std::exception& e) {
        std::string message = e.what();
        if (auto nl = message.find('\n'); nl != std::string::npos) message.resize(nl);
        std::cerr << "error: " << message << "\n";
        return kInputError;
    }
    return kInputError;
}
